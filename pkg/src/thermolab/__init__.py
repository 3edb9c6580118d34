"""Numerical laboratory for Gaussian thermostats on conformal tori and their transverse cocycles."""
from .cs_linalg import CSMatrix, PeriodicLinearSystem, SplitSpec, validate_cs
from .flow import OrbitSegment, UnitTangentState, integrate_orbit, unit_state
from .geometry import ChartPoint, ClosedFormField, ConformalMetric, Scenario, TrigPolynomial

__version__ = "0.1.0"

__all__ = [
    "CSMatrix",
    "ChartPoint",
    "ClosedFormField",
    "ConformalMetric",
    "OrbitSegment",
    "PeriodicLinearSystem",
    "Scenario",
    "SplitSpec",
    "TrigPolynomial",
    "UnitTangentState",
    "integrate_orbit",
    "unit_state",
    "validate_cs",
]
