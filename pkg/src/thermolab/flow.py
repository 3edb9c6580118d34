"""
Gaussian thermostat flow on the unit tangent bundle of a conformal torus.

The equations are

    p' = v
    v'^k = -Gamma^k_ij v^i v^j + E^k - gamma(v) / g(v, v) * v^k

so that ``g(v, v)`` is a first integral.  Integration is fixed-step RK4 via
the compiled kernels; a numpy reference right-hand side is kept for checks.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import StepTooLarge
from .geometry import (
    ChartPoint,
    Scenario,
    christoffel_eval,
    field_eval,
)

log = logging.getLogger(__name__)

DRIFT_LIMIT = 1e-3
ORBIT_COLUMNS = ("t", "x", "y", "v1", "v2", "e1x", "e1y", "sigma", "energy")


@dataclass(frozen=True)
class UnitTangentState:
    """Base point (unwrapped chart coordinates) and velocity components."""

    x: float
    y: float
    v1: float
    v2: float

    @property
    def point(self) -> ChartPoint:
        return ChartPoint(self.x, self.y)

    @property
    def v(self) -> np.ndarray:
        return np.array([self.v1, self.v2])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v1, self.v2])

    @classmethod
    def from_array(cls, a) -> "UnitTangentState":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def energy(self, scenario: Scenario) -> float:
        return scenario.metric.inner((self.x, self.y), self.v, self.v)

    def chart_angle(self) -> float:
        return math.atan2(self.v2, self.v1)


def unit_state(scenario: Scenario, x: float, y: float, angle: float) -> UnitTangentState:
    """Unit vector at ``(x, y)`` with chart angle ``angle``."""
    v = scenario.metric.unit_vector((x, y), angle)
    return UnitTangentState(float(x), float(y), float(v[0]), float(v[1]))


def thermostat_rhs(scenario: Scenario, state: UnitTangentState):
    """Reference (numpy) time derivative ``(p', v')`` of the thermostat."""
    p = (state.x, state.y)
    v = state.v
    G = christoffel_eval(scenario.metric, p)
    fv = field_eval(scenario.field, scenario.metric, p, v)
    gvv = scenario.metric.inner(p, v, v)
    vdot = -np.einsum("kij,i,j->k", G, v, v) + fv.E - fv.gamma_v / gvv * v
    return v.copy(), vdot


@dataclass(frozen=True, eq=False)
class OrbitSegment:
    times: np.ndarray
    states: np.ndarray  # (N, 4): x, y, v1, v2 (unwrapped positions)
    frames: np.ndarray  # (N, 2): Fermi normal e1
    sigma: np.ndarray
    energy: np.ndarray
    h: float
    renormalized: bool = False
    joint: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("times", "states", "frames", "sigma", "energy"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def drift(self) -> float:
        return float(np.max(np.abs(self.energy - 1.0)))

    def state(self, k: int) -> UnitTangentState:
        return UnitTangentState.from_array(self.states[k])

    @property
    def start(self) -> UnitTangentState:
        return self.state(0)

    @property
    def end(self) -> UnitTangentState:
        return self.state(-1)

    def winding(self) -> tuple[int, int]:
        """Integer displacement of the unwrapped base curve."""
        d = self.states[-1, :2] - self.states[0, :2]
        return int(round(d[0])), int(round(d[1]))

    def to_rows(self):
        data = np.column_stack(
            [self.times, self.states, self.frames, self.sigma, self.energy]
        )
        return ORBIT_COLUMNS, data

    def to_csv(self, path) -> None:
        header, data = self.to_rows()
        write_csv(path, header, data)


def write_csv(path, header, data) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.asarray(data):
            w.writerow(["%.17g" % v for v in row])


def _steps(T: float, h: float) -> tuple[int, float]:
    if not h > 0:
        raise ValueError("step h must be positive")
    if not math.isfinite(T):
        raise ValueError("duration must be finite")
    n = max(1, int(math.ceil(abs(T) / h - 1e-9)))
    return n, T / n


def _initial_joint(state: UnitTangentState) -> np.ndarray:
    return np.array([state.x, state.y, state.v1, state.v2, 1.0, 0.0, 0.0, 1.0, 0.0])


def integrate_orbit(
    scenario: Scenario,
    state: UnitTangentState,
    T: float,
    h: float,
    renormalize: bool = False,
    t0: float = 0.0,
) -> OrbitSegment:
    """Fixed-step RK4 over ``[t0, t0 + T]`` (``T`` may be negative).

    The step is adjusted to ``T / ceil(|T| / h)`` so that the final sample
    lands exactly on ``t0 + T``.  The transverse cocycle is integrated
    alongside and kept on the segment for :mod:`thermolab.cocycle`.
    """
    n, step = _steps(T, h)
    if renormalize:
        log.info("per-step renormalisation of v enabled")
    joint = _kernels.run_record(
        *scenario.kernel_params(), _initial_joint(state), step, n, bool(renormalize)
    )
    times = t0 + step * np.arange(n + 1)
    times[-1] = t0 + T
    states = joint[:, :4]
    fac = np.exp(2.0 * scenario.metric.f(states[:, 0], states[:, 1]))
    energy = fac * (states[:, 2] ** 2 + states[:, 3] ** 2)
    drift = float(np.max(np.abs(energy - 1.0)))
    if not np.isfinite(drift) or drift > DRIFT_LIMIT:
        raise StepTooLarge(
            f"energy drift {drift:.3e} exceeds {DRIFT_LIMIT:.0e} (h={step:.3g}, T={T:.6g}); "
            "reduce the step"
        )
    gam = scenario.field.gamma((states[:, 0], states[:, 1]))
    sigma = -(gam[0] * states[:, 2] + gam[1] * states[:, 3])
    seg = OrbitSegment(times, states, np.zeros((n + 1, 2)), sigma, energy, abs(step),
                       renormalize, joint)
    return fermi_frame(scenario, seg)


def fermi_frame(scenario: Scenario, orbit: OrbitSegment) -> OrbitSegment:
    """Fill in the Fermi normal ``e1`` along the orbit.

    ``e1`` is transported along the base curve and re-orthonormalised against
    ``v`` after every step.  On a surface the orthonormal complement of ``v``
    is one-dimensional, so the re-orthonormalised frame is the positively
    oriented unit normal ``(-v2, v1) / |v|_g`` and is evaluated directly.
    """
    st = orbit.states
    fac = np.exp(2.0 * scenario.metric.f(st[:, 0], st[:, 1]))
    nv = np.sqrt(fac * (st[:, 2] ** 2 + st[:, 3] ** 2))
    frames = np.column_stack([-st[:, 3] / nv, st[:, 2] / nv])
    return OrbitSegment(orbit.times, orbit.states, frames, orbit.sigma, orbit.energy,
                        orbit.h, orbit.renormalized, orbit.joint)


def parallel_transport(
    scenario: Scenario,
    path: Callable[[float], np.ndarray],
    velocity: Callable[[float], np.ndarray],
    u0,
    t_end: float,
    nsteps: int = 4000,
) -> np.ndarray:
    """Transport ``u0`` along ``path(t)``, ``t`` in ``[0, t_end]``, by RK4.

    Returns the transported vector at ``t_end``.
    """
    metric = scenario.metric

    def rhs(t, u):
        p = path(t)
        G = christoffel_eval(metric, p)
        return -np.einsum("kij,i,j->k", G, velocity(t), u)

    u = np.asarray(u0, dtype=float)
    dt = t_end / nsteps
    t = 0.0
    for _ in range(nsteps):
        k1 = rhs(t, u)
        k2 = rhs(t + dt / 2, u + dt / 2 * k1)
        k3 = rhs(t + dt / 2, u + dt / 2 * k2)
        k4 = rhs(t + dt, u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return u


def holonomy_angle(scenario: Scenario, center, radius: float, nsteps: int = 4000) -> float:
    """Rotation angle of a vector transported once counterclockwise around a circle.

    Positive values are counterclockwise.  For small loops this equals the
    enclosed total curvature.
    """
    cx, cy = center

    def path(t):
        return (cx + radius * np.cos(t), cy + radius * np.sin(t))

    def velocity(t):
        return np.array([-radius * np.sin(t), radius * np.cos(t)])

    u0 = scenario.metric.unit_vector(path(0.0), 0.0)
    u1 = parallel_transport(scenario, path, velocity, u0, 2 * np.pi, nsteps)
    return float(math.atan2(u0[0] * u1[1] - u0[1] * u1[0], u0 @ u1))
