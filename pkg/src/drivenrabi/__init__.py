"""Spectrum, level crossings and conical intersections of the driven Rabi model."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BoundaryValue,
    BracketInvalid,
    DegenerateCoupling,
    GEvaluation,
    InvalidParams,
    ModelParams,
    NonConvergence,
    PoleProximity,
    RabiError,
    SeriesConfig,
    evaluate_G,
    f_coeff,
    k_coefficients,
    pole_positions,
)
from .spectrum import (  # noqa: E402
    EnergyLevel,
    Spectrum,
    closed_form_g0,
    compute_spectrum,
    count_crossings,
    refine_root,
    scan_roots,
)
from .oracle import build_hamiltonian, eigenvalues  # noqa: E402
from .landscape import (  # noqa: E402
    ConicalPoint,
    LandscapeGrid,
    export_grid,
    find_cones,
    off_plane_gap_floor,
    sweep,
)
