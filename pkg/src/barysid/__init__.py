"""Barycentric-interpolant frequency-domain system identification.

Interrogates an LTI plant with sinusoidal experiments, optimizes
barycentric weights from the transient data (optionally with a
stability-guaranteeing LMI relaxation), and adaptively selects the next
experiment frequency.
"""

from .barycentric import (
    InterpolantModel,
    InterpolationData,
    assemble_model,
    build_bases,
    eval_interpolant,
)
from .campaign import (
    CampaignState,
    adaptive_identify,
    gridded_identify,
    model_error_probe,
)
from .errors import BarysidError
from .lti import (
    SampledSignal,
    StateSpace,
    freq_response,
    h2_norm,
    linf_norm,
    simulate_zoh,
    spectral_abscissa,
)
from .plant import (
    ExperimentConfig,
    ExperimentRecord,
    FrequencySample,
    PlantSpec,
    detect_steady_state,
    estimate_dc_and_feedthrough,
    run_experiment,
    synth_plant,
)
from .sdp import LMIBlock, SolverOptions, lmi_solve
from .weights import (
    CovariancePartition,
    StableSolveResult,
    covariance,
    drive_bases,
    solve_explicit,
    solve_stable,
)

__version__ = "0.1.0"

__all__ = [
    "BarysidError",
    "StateSpace",
    "SampledSignal",
    "freq_response",
    "simulate_zoh",
    "h2_norm",
    "linf_norm",
    "spectral_abscissa",
    "InterpolationData",
    "InterpolantModel",
    "build_bases",
    "assemble_model",
    "eval_interpolant",
    "PlantSpec",
    "ExperimentConfig",
    "ExperimentRecord",
    "FrequencySample",
    "synth_plant",
    "detect_steady_state",
    "run_experiment",
    "estimate_dc_and_feedthrough",
    "CovariancePartition",
    "StableSolveResult",
    "covariance",
    "drive_bases",
    "solve_explicit",
    "solve_stable",
    "LMIBlock",
    "SolverOptions",
    "lmi_solve",
    "CampaignState",
    "gridded_identify",
    "adaptive_identify",
    "model_error_probe",
    "__version__",
]
