"""Maximum-likelihood reconstruction of optical states from homodyne data."""

__version__ = "0.1.0"

from .data import BinnedHistogram, QuadratureDataset, bin_dataset
from .fock import (
    bernoulli_coefficient,
    bernoulli_transform,
    fock_overlap,
    ideal_projector,
    loss_povm,
)
from .maxlik import (
    MeasurementSet,
    ReconstructionConfig,
    ReconstructionResult,
    iterate_once,
    log_likelihood,
    probability,
    r_operator,
    r_operator_binned,
    reconstruct,
)
from .radon import BackProjectionConfig, backproject
from .simulate import SimulationPlan, bootstrap_uncertainty, sample_quadratures
from .states import StateSpec
from .wigner import WignerGrid, WignerGridSpec, wigner_from_rho

__all__ = [
    "BackProjectionConfig",
    "BinnedHistogram",
    "MeasurementSet",
    "QuadratureDataset",
    "ReconstructionConfig",
    "ReconstructionResult",
    "SimulationPlan",
    "StateSpec",
    "WignerGrid",
    "WignerGridSpec",
    "backproject",
    "bernoulli_coefficient",
    "bernoulli_transform",
    "bin_dataset",
    "bootstrap_uncertainty",
    "fock_overlap",
    "ideal_projector",
    "iterate_once",
    "log_likelihood",
    "loss_povm",
    "probability",
    "r_operator",
    "r_operator_binned",
    "reconstruct",
    "sample_quadratures",
    "wigner_from_rho",
]
