"""Regenerate the crossover calibration fixture.

Runs the experiment of record (growth model, particle sweep under both
protocols) once and freezes the per-cell medians alongside the seed, so the
acceptance suite can assert both the qualitative crossover and exact
regression values.

Usage: python3 tests/fixtures/regenerate_crossover.py
"""

import json
import pathlib

from periodbench.bench import FilterEntry, RunConfig, compare
from periodbench.filters import FilterSpec
from periodbench.models import UngmModel
from periodbench.timing import PeriodMapping, Synthetic

EXPERIMENT = {
    "seed": 20260810,
    "q": 10.0,
    "meas_noise_var": 1.0,
    "horizon": 100.0,
    "mc_runs": 200,
    "particle_counts": [50, 250, 1000, 10000],
    "cost_c1": 1e-3,
    "kappa": 1.0,
}


def run_experiment(spec: dict):
    entries = tuple(
        FilterEntry(f"pf-N{n}", FilterSpec("pf", n),
                    Synthetic(c0=0.0, c1=spec["cost_c1"]))
        for n in spec["particle_counts"])
    config = RunConfig(
        model=UngmModel(q=spec["q"], meas_noise_var=spec["meas_noise_var"]),
        filters=entries,
        horizon=spec["horizon"],
        mc_runs=spec["mc_runs"],
        seed=spec["seed"],
        mapping=PeriodMapping(spec["kappa"]),
    )
    return compare(config)


def main():
    report = run_experiment(EXPERIMENT)
    cells = {}
    for row in report.rows:
        count = int(row.label.rsplit("N", 1)[1])
        cells.setdefault(str(count), {})[row.protocol] = {
            "period": row.period,
            "noise_summary": row.noise_summary,
            "steps": row.steps,
            "rmse_median": row.rmse_median,
            "rmse_iqr": row.rmse_iqr,
            "runs_ok": row.runs_ok,
            "runs_failed": row.runs_failed,
        }
    fixture = {"experiment": EXPERIMENT, "cells": cells}
    out = pathlib.Path(__file__).with_name("crossover_calibration.json")
    out.write_text(json.dumps(fixture, indent=2) + "\n")
    print(f"wrote {out}")
    for count in EXPERIMENT["particle_counts"]:
        cell = cells[str(count)]
        print(f"N={count}: constant={cell['constant_noise']['rmse_median']:.4f}"
              f" matched={cell['period_matched']['rmse_median']:.4f}")


if __name__ == "__main__":
    main()
