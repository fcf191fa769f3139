"""Numerical laboratory for multi-soliton solutions of supercritical gKdV.

The package covers the full pipeline: soliton profiles and families
(:mod:`.profiles`), the linearized spectrum around a soliton
(:mod:`.linearized`), a de-aliased exponential time-differencing evolver
(:mod:`.evolver`), backward-shooting construction of the N-parameter
family (:mod:`.constructor`), and modulation/projection diagnostics with
classification of a trajectory's amplitudes (:mod:`.diagnostics`).
"""

__version__ = "0.1.0"

from .errors import (
    AmbiguityError,
    ArgumentError,
    BlowUpError,
    ClassificationError,
    ConfigurationError,
    ConvergenceError,
    DegenerateBasisError,
    DomainError,
    GkdvError,
    HorizonError,
    ResolutionError,
    WindowError,
)
from .grid import (
    Field,
    GridSpec,
    h1_distance,
    h1_norm,
    l2_inner,
    l2_norm,
    make_grid,
    reflect,
    spectral_derivative,
    sup_norm,
    translate,
)
from .profiles import (
    InteractionConstants,
    SolitonFamily,
    SolitonParams,
    interaction_constants,
    multisoliton_sum,
    q_peak,
    q_profile,
    soliton_field,
)
from .linearized import (
    LinearizedBasis,
    apply_operator,
    coercivity_probe,
    eigenvalue_ode_oracle,
    mode_on_grid,
    normalize_basis,
    solve_spectrum,
)
from .evolver import EvolveConfig, Trajectory, conserved_quantities, evolve
from .constructor import (
    FamilyBuild,
    FinalDataSpec,
    ShootingResult,
    assemble_final_data,
    build_family,
    gram_matrix,
    modulated_beta,
    shoot,
)
from .diagnostics import (
    ModulationState,
    ProjectionSeries,
    WeightSet,
    alpha_ode_residual,
    classify,
    fit_rate,
    functional_H,
    local_linearized_energy,
    local_quantities,
    modulate,
    project,
    psi_derivatives,
    psi_scalar,
    uniqueness_residual,
    weights,
)
from .snapshots import (
    load_trajectory,
    read_field_csv,
    read_snapshot,
    save_trajectory,
    write_field_csv,
    write_snapshot,
)

__all__ = [name for name in dir() if not name.startswith("_")]
