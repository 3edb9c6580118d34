from .cones import ConeReport, boundary_directions, cone_fd_check, cone_invariance_test, cone_rate
from .domination import DominationEstimate, domination_estimator, domination_from_blocks
from .lyapunov import LyapunovReport, lyapunov_spectrum, qr_exponents
from .periodic import (
    Classification,
    PeriodicOrbit,
    Section,
    SurgeryResult,
    beta_of_orbit,
    beta_surgery,
    classify_periodic,
    find_periodic,
    shifted_field,
)

__all__ = [
    "Classification",
    "ConeReport",
    "DominationEstimate",
    "LyapunovReport",
    "PeriodicOrbit",
    "Section",
    "SurgeryResult",
    "beta_of_orbit",
    "beta_surgery",
    "boundary_directions",
    "classify_periodic",
    "cone_fd_check",
    "cone_invariance_test",
    "cone_rate",
    "domination_estimator",
    "domination_from_blocks",
    "find_periodic",
    "lyapunov_spectrum",
    "qr_exponents",
    "shifted_field",
]
