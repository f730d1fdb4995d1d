"""Config-driven command line for running evaluations and emitting CSV.

Commands:
    run     --config PATH [--seed U64] [--out PATH]
    profile --config PATH
    sweep   --config PATH --particles N1,N2,... [--seed U64] [--out PATH]

The config is a single JSON document (schema in the README). Unknown keys
are rejected with the dotted path of the offending key, and a fixed seed
plus fixed/synthetic cost models make the output CSV byte-identical across
invocations and worker counts.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from .bench import (
    ConstantNoise,
    EvalReport,
    FilterEntry,
    PeriodMatched,
    PROFILE_PERIOD,
    RunConfig,
    compare,
    monte_carlo,
    sweep_particle_counts,
)
from .filters import EssThreshold, EveryStep, FilterSpec
from .models import CvModel, UngmModel, build_system
from .timing import FixedPeriod, Measured, PeriodMapping, Synthetic, derive_period, profile_filter

REPORT_COLUMNS = ("label", "protocol", "period", "noise_summary", "steps",
                  "rmse_median", "rmse_iqr", "runs_ok", "runs_failed", "seed")

PROFILE_COLUMNS = ("label", "mode", "secs_per_iter", "samples",
                   "low_resolution", "period")


class ConfigError(Exception):
    """Invalid configuration; ``path`` is the dotted key that failed."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set[str], path: str):
    for key in mapping:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, "unknown key")


def _number(value, path: str, *, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if positive and value <= 0:
        raise ConfigError(path, "must be > 0")
    if nonnegative and value < 0:
        raise ConfigError(path, "must be >= 0")
    return value


def _integer(value, path: str, *, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return value


def _parse_model(raw, path="model"):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    kind = _require(raw, "kind", path)
    if kind == "ungm":
        _reject_unknown(raw, {"kind", "q", "meas_noise_var",
                              "forcing_amplitude", "forcing_rate"}, path)
        return UngmModel(
            q=_number(raw.get("q", 10.0), f"{path}.q", positive=True),
            meas_noise_var=_number(raw.get("meas_noise_var", 1.0),
                                   f"{path}.meas_noise_var", positive=True),
            forcing_amplitude=_number(raw.get("forcing_amplitude", 8.0),
                                      f"{path}.forcing_amplitude"),
            forcing_rate=_number(raw.get("forcing_rate", 1.2),
                                 f"{path}.forcing_rate"),
        )
    if kind == "cv":
        _reject_unknown(raw, {"kind", "sigma1", "sigma2", "meas_noise_var"}, path)
        return CvModel(
            sigma1=_number(raw.get("sigma1", 1.0), f"{path}.sigma1", positive=True),
            sigma2=_number(raw.get("sigma2", 0.1), f"{path}.sigma2", positive=True),
            meas_noise_var=_number(raw.get("meas_noise_var", 1.0),
                                   f"{path}.meas_noise_var", positive=True),
        )
    raise ConfigError(f"{path}.kind", f"must be 'ungm' or 'cv', got {kind!r}")


def _parse_resample(raw, path):
    if raw is None:
        return EveryStep()
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    policy = _require(raw, "policy", path)
    if policy == "every_step":
        _reject_unknown(raw, {"policy"}, path)
        return EveryStep()
    if policy == "ess_threshold":
        _reject_unknown(raw, {"policy", "fraction"}, path)
        fraction = _number(_require(raw, "fraction", path),
                           f"{path}.fraction", positive=True)
        if fraction > 1.0:
            raise ConfigError(f"{path}.fraction", "must be in (0, 1]")
        return EssThreshold(fraction)
    raise ConfigError(f"{path}.policy",
                      f"must be 'every_step' or 'ess_threshold', got {policy!r}")


def _parse_cost(raw, path):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    kind = _require(raw, "kind", path)
    if kind == "fixed_period":
        _reject_unknown(raw, {"kind", "period"}, path)
        return FixedPeriod(_number(_require(raw, "period", path),
                                   f"{path}.period", positive=True))
    if kind == "synthetic":
        _reject_unknown(raw, {"kind", "c0", "c1"}, path)
        c0 = _number(raw.get("c0", 0.0), f"{path}.c0", nonnegative=True)
        c1 = _number(raw.get("c1", 0.0), f"{path}.c1", nonnegative=True)
        if c0 + c1 == 0:
            raise ConfigError(path, "c0 + c1 must be positive")
        return Synthetic(c0=c0, c1=c1)
    if kind == "measured":
        _reject_unknown(raw, {"kind", "warmup", "samples"}, path)
        return Measured(
            warmup=_integer(raw.get("warmup", 10), f"{path}.warmup", minimum=0),
            samples=_integer(raw.get("samples", 30), f"{path}.samples", minimum=1),
        )
    raise ConfigError(f"{path}.kind",
                      f"must be 'fixed_period', 'synthetic' or 'measured', got {kind!r}")


def _parse_filter(raw, model, path):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(raw, {"label", "kind", "particle_count", "resample", "cost"},
                    path)
    label = _require(raw, "label", path)
    if not isinstance(label, str) or not label:
        raise ConfigError(f"{path}.label", "must be a non-empty string")
    kind = _require(raw, "kind", path)
    if kind not in ("kf", "ekf", "pf"):
        raise ConfigError(f"{path}.kind", f"must be 'kf', 'ekf' or 'pf', got {kind!r}")
    if kind == "kf" and not isinstance(model, CvModel):
        raise ConfigError(f"{path}.kind", "kf requires the cv model")
    if kind == "ekf" and not isinstance(model, UngmModel):
        raise ConfigError(f"{path}.kind", "ekf requires the ungm model")
    particle_count = 1
    if kind == "pf":
        particle_count = _integer(_require(raw, "particle_count", path),
                                  f"{path}.particle_count", minimum=1)
    elif "particle_count" in raw:
        raise ConfigError(f"{path}.particle_count",
                          "only particle filters take a particle_count")
    spec = FilterSpec(kind=kind, particle_count=particle_count,
                      resample_policy=_parse_resample(raw.get("resample"),
                                                      f"{path}.resample"))
    cost = _parse_cost(_require(raw, "cost", path), f"{path}.cost")
    return FilterEntry(label=label, spec=spec, cost=cost)


def parse_config(raw: dict) -> tuple[RunConfig, str, str]:
    """Validate a raw config mapping into (RunConfig, protocol, output path)."""
    if not isinstance(raw, dict):
        raise ConfigError("", "top-level config must be an object")
    allowed = {"model", "filters", "protocol", "reference_period", "horizon",
               "mc_runs", "seed", "kappa", "rmse_components", "workers",
               "output"}
    _reject_unknown(raw, allowed, "")
    model = _parse_model(_require(raw, "model", ""))

    raw_filters = _require(raw, "filters", "")
    if not isinstance(raw_filters, list) or not raw_filters:
        raise ConfigError("filters", "expected a non-empty list")
    entries = [_parse_filter(f, model, f"filters[{i}]")
               for i, f in enumerate(raw_filters)]
    labels = [e.label for e in entries]
    if len(set(labels)) != len(labels):
        raise ConfigError("filters", "filter labels must be unique")

    protocol = raw.get("protocol", "both")
    if protocol not in ("both", "constant_noise", "period_matched"):
        raise ConfigError("protocol",
                          "must be 'both', 'constant_noise' or 'period_matched'")

    mapping = None
    if "kappa" in raw:
        mapping = PeriodMapping(_number(raw["kappa"], "kappa", positive=True))
    needs_kappa = any(isinstance(e.cost, (Measured, Synthetic)) for e in entries)
    if needs_kappa and mapping is None:
        raise ConfigError("kappa",
                          "required whenever a filter uses measured or synthetic cost")

    components = raw.get("rmse_components")
    if components is not None:
        if (not isinstance(components, list)
                or not all(isinstance(c, int) and not isinstance(c, bool)
                           for c in components)):
            raise ConfigError("rmse_components", "expected a list of integers")
    output = raw.get("output", "report.csv")
    if not isinstance(output, str) or not output:
        raise ConfigError("output", "must be a non-empty path")

    try:
        config = RunConfig(
            model=model,
            filters=tuple(entries),
            horizon=_number(_require(raw, "horizon", ""), "horizon", positive=True),
            mc_runs=_integer(_require(raw, "mc_runs", ""), "mc_runs", minimum=1),
            seed=_integer(_require(raw, "seed", ""), "seed"),
            mapping=mapping,
            rmse_components=tuple(components) if components else (),
            reference_period=_number(raw.get("reference_period", 1.0),
                                     "reference_period", positive=True),
            workers=_integer(raw.get("workers", 1), "workers", minimum=1),
        )
    except ValueError as exc:
        raise ConfigError("rmse_components", str(exc)) from exc
    return config, protocol, output


def load_config(path: str) -> tuple[RunConfig, str, str]:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_config(raw)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _render_csv(columns, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buffer.getvalue()


def write_report_csv(report: EvalReport, path: str) -> None:
    """Serialize a report atomically (temp file + rename)."""
    rows = [(r.label, r.protocol, r.period, r.noise_summary, r.steps,
             r.rmse_median, r.rmse_iqr, r.runs_ok, r.runs_failed, r.seed)
            for r in report.rows]
    payload = _render_csv(REPORT_COLUMNS, rows)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _apply_overrides(config: RunConfig, output: str, args) -> tuple[RunConfig, str]:
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace
        config = replace(config, seed=args.seed)
    if getattr(args, "out", None):
        output = args.out
    return config, output


def _execute(config: RunConfig, protocol: str) -> EvalReport:
    if protocol == "both":
        return compare(config)
    if protocol == "constant_noise":
        rows = monte_carlo(ConstantNoise(config.reference_period), config)
    else:
        rows = monte_carlo(PeriodMatched(), config)
    return EvalReport(rows=rows)


def cmd_run(args) -> int:
    config, protocol, output = load_config(args.config)
    config, output = _apply_overrides(config, output, args)
    report = _execute(config, protocol)
    write_report_csv(report, output)
    print(f"wrote {output} ({len(report.rows)} rows)")
    return 0


def cmd_profile(args) -> int:
    config, _, _ = load_config(args.config)
    system = build_system(config.model, PROFILE_PERIOD)
    rows = []
    for entry in config.filters:
        cost = entry.cost
        if isinstance(cost, FixedPeriod):
            rows.append((entry.label, "fixed", float("nan"), 0, False,
                         cost.period))
            continue
        if isinstance(cost, Synthetic):
            count = entry.spec.particle_count if entry.spec.kind == "pf" else 1
            secs = cost.c0 + cost.c1 * count
            rows.append((entry.label, "synthetic", secs, 0, False,
                         derive_period(cost, None, config.mapping, entry.spec)))
            continue
        rng = np.random.default_rng(config.seed)
        profile = profile_filter(entry.spec, system, cost.warmup, cost.samples,
                                 rng)
        rows.append((entry.label, "measured", profile.median_secs_per_iter,
                     profile.sample_count, profile.low_resolution,
                     derive_period(cost, profile, config.mapping, entry.spec)))
    sys.stdout.write(_render_csv(PROFILE_COLUMNS, rows))
    return 0


def cmd_sweep(args) -> int:
    config, protocol, output = load_config(args.config)
    config, output = _apply_overrides(config, output, args)
    try:
        counts = [int(part) for part in args.particles.split(",") if part]
    except ValueError:
        raise ConfigError("particles", "expected a comma-separated integer list")
    if not counts or any(n < 1 for n in counts):
        raise ConfigError("particles", "particle counts must be >= 1")
    pf_entries = [e for e in config.filters if e.spec.kind == "pf"]
    if len(pf_entries) != 1:
        raise ConfigError("filters",
                          "sweep requires exactly one particle-filter entry")
    config = sweep_particle_counts(config, pf_entries[0], counts)
    report = _execute(config, protocol)
    write_report_csv(report, output)
    print(f"wrote {output} ({len(report.rows)} rows)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="periodbench",
        description="Benchmark recursive filters under constant-noise and "
                    "period-matched simulation protocols.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured evaluation")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    run.set_defaults(func=cmd_run)

    profile = sub.add_parser("profile",
                             help="report per-filter iteration cost and period")
    profile.add_argument("--config", required=True)
    profile.set_defaults(func=cmd_profile)

    sweep = sub.add_parser("sweep",
                           help="expand a particle filter over several counts")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--particles", required=True)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", default=None)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error while running {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
