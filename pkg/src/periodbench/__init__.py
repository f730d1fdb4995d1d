"""Period-aware benchmarking for recursive state estimators.

Builds standard simulation systems whose transition noise scales with the
sampling period of the filter under test, and compares filters of different
speeds under a conventional constant-noise protocol and a period-matched
protocol side by side.
"""

from .bench import (
    ConstantNoise,
    EvalReport,
    FilterEntry,
    PeriodMatched,
    ReportRow,
    RunConfig,
    compare,
    monte_carlo,
    rmse,
    run_single,
    steps_for_horizon,
)
from .filters import (
    EssThreshold,
    EveryStep,
    FilterSpec,
    GaussianBelief,
    ParticleBelief,
    WeightDegeneracyError,
    ekf_step,
    ess,
    estimate,
    kf_predict,
    kf_update,
    pf_step,
    systematic_resample,
    ungm_meas_jacobian,
    ungm_state_jacobian,
)
from .models import (
    CvModel,
    DiscreteSystem,
    MeasurementSequence,
    Trajectory,
    UngmModel,
    build_system,
    cv_noise_input_matrix,
    cv_process_cov,
    cv_transition_matrix,
    generate_measurements,
    simulate_truth,
    ungm_drift,
    ungm_transition_variance,
)
from .timing import (
    FixedPeriod,
    Measured,
    PeriodMapping,
    Synthetic,
    TimingProfile,
    derive_period,
    profile_filter,
)

__version__ = "0.1.0"
