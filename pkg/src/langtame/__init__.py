"""Tamed unadjusted Langevin samplers for superlinearly growing gradients.

Drift transformers (wd/reg taming and the classic baseline), an
Euler-Maruyama chain runner with explosion accounting, quadrature
ground-truth oracles, inequality probe suites, and a CLI benchmark
harness.  Hot loops run through a numba kernel when available; set
LANGTAME_BACKEND=numpy to force the pure-numpy fallback.
"""

from .diagnostics import (
    MomentReport,
    ProbeEntry,
    ProbeReport,
    boxplot_stats,
    estimate_moments,
    lemma_probe_suite,
    moment_1d,
    probe_points,
    radial_second_moment,
    tv_distance_1d,
    w1_distance_1d,
)
from .kernels import HAS_NUMBA, active_backend
from .potentials import (
    BUILTIN_CATALOG,
    MarginReport,
    PotentialSpec,
    cubic_demo,
    double_well_1d,
    double_well_radial,
    finite_difference_gradient,
    gaussian,
    make_potential,
    validate_dissipativity,
    validate_growth,
)
from .sampler import (
    AllChainsExploded,
    ChainBatch,
    DivergenceReport,
    InitSpec,
    RunConfig,
    RunResult,
    em_step,
    run,
    ula_divergence_demo,
)
from .taming import (
    DriftScheme,
    StepSizeBound,
    compute_step_size_bound,
    drift_function,
    radial_split,
    reg_tamed_drift,
    regularized_gradient,
    select_reg_exponent,
    tula_classic_drift,
    wd_tamed_drift,
)

__version__ = "0.1.0"
