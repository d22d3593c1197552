"""Heralded entanglement by conditional single-photon reflection off spin-cavity nodes."""
from .errors import *  # noqa: F401,F403
from .model import (
    FourLevelConfig,
    NodeDeviation,
    NodeParams,
    SetupParams,
    TransitionParams,
    deviated_pair,
    expand_four_level,
    validate_node,
)
from .spectral import TransferEval, d2_modsq, reflection, resonant_peak, transfer_pair
from .pulse import (
    FrequencyGrid,
    GaussianPulse,
    ModeDecomposition,
    SampledPulse,
    Spectrum,
    decompose_modes,
    default_grid,
    overlap_integral,
    spectrum_of,
)

__version__ = "0.1.0"
