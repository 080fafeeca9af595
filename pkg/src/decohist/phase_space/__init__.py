"""Phase-space grids, evolution solvers and diagnostics."""

from .evolve import (
    EvolutionSpec,
    evolve_dqt_reduced,
    evolve_fokker_planck,
    evolve_liouville,
    moment_ode_reference,
    moyal_coefficient,
)
from .field import WignerField, cat_state_field, gaussian_field
from .flow import GeneralFlow, VectorFieldSpec, build_general_dqt_flow
from .metrics import husimi_smear, min_relative, momentum_coherence_norm, wigner_distance
from .momentum import (
    density_matrix_from_wigner,
    momentum_history_dfun,
    momentum_history_dfun_with_potential,
    window_entropy,
)

__all__ = [
    "GeneralFlow",
    "VectorFieldSpec",
    "build_general_dqt_flow",
    "density_matrix_from_wigner",
    "momentum_history_dfun",
    "momentum_history_dfun_with_potential",
    "window_entropy",
    "EvolutionSpec",
    "WignerField",
    "cat_state_field",
    "evolve_dqt_reduced",
    "evolve_fokker_planck",
    "evolve_liouville",
    "gaussian_field",
    "husimi_smear",
    "min_relative",
    "moment_ode_reference",
    "momentum_coherence_norm",
    "moyal_coefficient",
    "wigner_distance",
]
