"""Model of a V-shape artificial atom built from two inductively coupled transmons."""

from .analysis import (
    ClassificationError,
    LevelTable,
    SweepResult,
    TransitionSet,
    classify_levels,
    flux_sweep,
    selection_rules,
    transition_table,
)
from .circuit import (
    CircuitParams,
    EnergyScales,
    ReducedModel,
    chain_inductance,
    derived_energies,
    gzz_perturbative,
    harmonic_mode_frequencies,
    potential_energy,
    reduced_from_lines,
    reduced_hamiltonian,
    reference_params,
)
from .constants import CODATA2018, PhysicalConstants
from .dynamics import (
    DensityMatrix,
    DissipationParams,
    IntegrationError,
    Pulse,
    conditional_spectroscopy,
    evolve,
    rabi_trace,
)
from .eigensolver import (
    EigensolverError,
    Spectrum,
    converged_spectrum,
    lowest_eigenpairs,
    refined_spectrum,
)
from .fitting import (
    FitError,
    FitResult,
    LineData,
    LineRow,
    fit,
    initial_guess,
    load_line_data,
    model_lines,
    objective,
)
from .grid import (
    GridConfigurationError,
    GridSpec,
    SparseOperator,
    assemble_hamiltonian,
    default_grid,
    dump_operator,
    observable,
    sweep_grid,
)

__all__ = [
    "CODATA2018",
    "CircuitParams",
    "ClassificationError",
    "DensityMatrix",
    "DissipationParams",
    "EigensolverError",
    "EnergyScales",
    "FitError",
    "FitResult",
    "GridConfigurationError",
    "GridSpec",
    "IntegrationError",
    "LevelTable",
    "LineData",
    "LineRow",
    "PhysicalConstants",
    "Pulse",
    "ReducedModel",
    "SparseOperator",
    "Spectrum",
    "SweepResult",
    "TransitionSet",
    "assemble_hamiltonian",
    "chain_inductance",
    "classify_levels",
    "conditional_spectroscopy",
    "converged_spectrum",
    "default_grid",
    "derived_energies",
    "dump_operator",
    "evolve",
    "fit",
    "flux_sweep",
    "gzz_perturbative",
    "harmonic_mode_frequencies",
    "initial_guess",
    "load_line_data",
    "lowest_eigenpairs",
    "model_lines",
    "objective",
    "observable",
    "potential_energy",
    "rabi_trace",
    "reduced_from_lines",
    "refined_spectrum",
    "reduced_hamiltonian",
    "reference_params",
    "selection_rules",
    "sweep_grid",
    "transition_table",
]

__version__ = "0.1.0"
