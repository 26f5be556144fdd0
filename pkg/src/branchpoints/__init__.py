"""Branch points, avoided crossings and state mixing in complex symmetric
matrix families H(a)."""

__version__ = "0.1.0"

from .eigen import (
    BiorthMetrics,
    EigenPair,
    EigenSystem,
    MixingMatrix,
    biorthogonality_metrics,
    closed_form_2x2,
    coalescence_residual,
    eigendecompose,
    mixing_coefficients,
)
from .epfinder import (
    BranchPoint,
    MonodromyResult,
    count_zeros,
    discriminant,
    encircle,
    find_branch_point,
    list_branch_points,
)
from .errors import (
    BranchPointError,
    CertificationError,
    ConfigError,
    ConvergenceError,
    HigherOrderDegeneracyError,
    NumericalError,
    TrackingError,
)
from .family import (
    CouplingSpec,
    FamilySpec,
    LevelSpec,
    build_matrix,
    four_level_family,
    load_family,
    parse_family,
    two_level_family,
    unperturbed_crossings,
    with_coupling,
)
from .sweep import (
    CrossingEvent,
    SweepRecord,
    detect_avoided_crossings,
    match_states,
    mixing_region_width,
    overlap_onset,
    sweep,
)
