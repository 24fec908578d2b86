"""Continuous-time transfer function estimation from sampled data.

The package groups per-signal intersample behaviour (zero order or first
order hold) with an iterative instrumental variable estimator, signal
synthesis helpers, and a Monte Carlo harness for bias/variance studies.
"""

from srivc.ctlti import (
    DegenerateModelError,
    ImaginaryAxisPoleError,
    TransferFunction,
    format_tf,
    parse_tf,
    reflect_unstable_poles,
    tf_from_theta,
    theta_from_tf,
)
from srivc.holdsim import (
    DiscreteFilterBank,
    Hold,
    SampledSignal,
    discretize,
    filter_derivatives,
    realize_filter_bank,
    run_filter_bank,
)
from srivc.estimator import (
    EstimationResult,
    HoldPolicy,
    SingularNormalMatrix,
    SrivcConfig,
    build_instrument,
    build_regressor,
    gee,
    lssvf_initialize,
    srivc_estimate,
    srivc_step,
)
from srivc.signals import (
    NoiseSpec,
    SampledRecord,
    analytic_multisine_output,
    gen_gaussian_noise,
    gen_multisine,
    gen_random_binary,
    synthesize_record,
)
from srivc.mcharness import (
    McInstance,
    SweepConfig,
    builtin_instances,
    run_mc_sweep,
    summarize,
)

__all__ = [
    "DegenerateModelError",
    "ImaginaryAxisPoleError",
    "TransferFunction",
    "format_tf",
    "parse_tf",
    "reflect_unstable_poles",
    "tf_from_theta",
    "theta_from_tf",
    "DiscreteFilterBank",
    "Hold",
    "SampledSignal",
    "discretize",
    "filter_derivatives",
    "realize_filter_bank",
    "run_filter_bank",
    "EstimationResult",
    "HoldPolicy",
    "SingularNormalMatrix",
    "SrivcConfig",
    "build_instrument",
    "build_regressor",
    "gee",
    "lssvf_initialize",
    "srivc_estimate",
    "srivc_step",
    "NoiseSpec",
    "SampledRecord",
    "analytic_multisine_output",
    "gen_gaussian_noise",
    "gen_multisine",
    "gen_random_binary",
    "synthesize_record",
    "McInstance",
    "SweepConfig",
    "builtin_instances",
    "run_mc_sweep",
    "summarize",
]

__version__ = "0.1.0"
