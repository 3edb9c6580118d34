"""
Transverse derivative cocycle of the thermostat flow.

Transverse perturbations are written as ``(y, z)``: ``y`` is the displacement
along the unit normal ``n = e1`` of the orbit and ``z`` the rotation in the
fibre.  They evolve by

    d/dt (y, z) = [[0, 1], [Q, sigma]] (y, z)

with ``sigma = -gamma(v)`` and ``Q = -K + <nabla_n E, n> - <E, n>^2``.  For a
surface the determinant identity ``det T(t) = exp(s(t))``, ``s = int sigma``,
is the whole conformally symplectic structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import cumulative_simpson, quad

from . import _kernels
from .cs_linalg import infinitesimal_cs_check, standard_J
from .errors import MissingFrame, NotInfinitesimallyCS, NotTangent, StepTooLarge
from .flow import OrbitSegment, UnitTangentState, integrate_orbit, unit_state, write_csv
from .geometry import (
    Scenario,
    covariant_derivative,
    field_eval,
    field_jacobian,
    gauss_curvature,
)

IDENTITY_LIMIT = 1e-3
ROUNDING_MARGIN = 100.0
COCYCLE_COLUMNS = ("t", "T11", "T12", "T21", "T22", "s")


@dataclass(frozen=True)
class JacobiGenerator:
    Q: np.ndarray
    sigma: float

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        n = self.n
        return np.block([[np.zeros((n, n)), np.eye(n)], [self.Q, self.sigma * np.eye(n)]])


def generator_at(scenario: Scenario, state: UnitTangentState) -> JacobiGenerator:
    """Jacobi generator at a unit state, from analytic chart derivatives."""
    p = (state.x, state.y)
    metric, fld = scenario.metric, scenario.field
    v = state.v
    n = metric.normal(p, v)
    fv = field_eval(fld, metric, p, v)
    nabla_E = covariant_derivative(metric, n, fv.E, p, field_jacobian(fld, metric, p))
    lam = float(fv.gamma @ n)
    Q = -gauss_curvature(metric, p) + metric.inner(p, nabla_E, n) - lam * lam
    return JacobiGenerator(np.array([[Q]]), -fv.gamma_v)


def generator_fd(scenario: Scenario, state: UnitTangentState, step: float = 1e-5) -> JacobiGenerator:
    """Finite-difference fallback: ``Q`` from central differences of ``E`` and ``f``."""
    metric, fld = scenario.metric, scenario.field
    x, y = state.x, state.y
    p = (x, y)
    v = state.v
    n = metric.normal(p, v)
    E = lambda q: field_eval(fld, metric, q).E  # noqa: E731
    f = metric.f
    dE = np.column_stack(
        [(E((x + step, y)) - E((x - step, y))) / (2 * step),
         (E((x, y + step)) - E((x, y - step))) / (2 * step)]
    )
    lap = (
        f(x + step, y) + f(x - step, y) + f(x, y + step) + f(x, y - step) - 4 * f(x, y)
    ) / step**2
    K = -math.exp(-2 * f(x, y)) * lap
    nabla_E = covariant_derivative(metric, n, E(p), p, dE)
    lam = float(fld.gamma(p) @ n)
    Q = -K + metric.inner(p, nabla_E, n) - lam * lam
    return JacobiGenerator(np.array([[Q]]), -float(fld.gamma(p) @ v))


def jacobi_generator(scenario: Scenario, orbit: OrbitSegment, t: float) -> JacobiGenerator:
    """Generator ``[[0, 1], [Q, sigma]]`` at the orbit sample closest to time ``t``."""
    if orbit.frames is None or not np.any(orbit.frames):
        raise MissingFrame("orbit has no Fermi frame; run fermi_frame first")
    k = int(np.argmin(np.abs(orbit.times - t)))
    if abs(orbit.times[k] - t) > 0.5 * orbit.h + 1e-12:
        raise MissingFrame(f"time {t} is outside the sampled orbit")
    return generator_at(scenario, orbit.state(k))


def generator_samples(scenario: Scenario, orbit: OrbitSegment) -> np.ndarray:
    """``A(t_k)`` at every orbit sample, shape ``(N, 2, 2)``, from the compiled terms."""
    fc, c1, c2, uc = scenario.kernel_params()
    out = np.zeros((len(orbit), 2, 2))
    out[:, 0, 1] = 1.0
    for k, (x, y, v1, v2) in enumerate(orbit.states):
        _, _, sigma, Q, _, _ = _kernels.local_terms(fc, c1, c2, uc, x, y, v1, v2)
        out[k, 1, 0] = Q
        out[k, 1, 1] = sigma
    return out


@dataclass(frozen=True, eq=False)
class TransverseCocycle:
    times: np.ndarray
    matrices: np.ndarray  # (N, 2, 2), T(times[0]) = I
    s: np.ndarray
    s_simpson: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.matrices[-1]

    def conformal_residuals(self) -> np.ndarray:
        """``max |T^T J T - e^s J| / e^s`` at every sample."""
        J = standard_J(1)
        S = np.einsum("kji,jl,klm->kim", self.matrices, J, self.matrices)
        es = np.exp(self.s)
        return np.max(np.abs(S - es[:, None, None] * J), axis=(1, 2)) / es

    def det_residuals(self) -> np.ndarray:
        """``|det T - e^s| / e^s`` at every sample."""
        es = np.exp(self.s)
        return np.abs(np.linalg.det(self.matrices) - es) / es

    def shifted(self, k: int) -> np.ndarray:
        """``T(t) T(t_k)^{-1}`` for ``t >= t_k``: the cocycle restarted at sample ``k``."""
        return self.matrices[k:] @ np.linalg.inv(self.matrices[k])

    def to_rows(self):
        data = np.column_stack([self.times, self.matrices.reshape(-1, 4), self.s])
        return COCYCLE_COLUMNS, data

    def to_csv(self, path) -> None:
        header, data = self.to_rows()
        write_csv(path, header, data)


def integrate_cocycle(scenario: Scenario, orbit: OrbitSegment) -> TransverseCocycle:
    """RK4 solution of ``T' = A(t) T`` on the orbit's sample grid.

    The cocycle shares stages with the flow step (each RK4 step of
    ``s' = sigma`` is Simpson's rule with two midpoint evaluations).  An
    independent composite Simpson integral of the sampled ``sigma`` is
    attached as ``s_simpson`` for cross-checking.
    """
    if orbit.joint is not None:
        joint = orbit.joint
    else:
        n = len(orbit) - 1
        step = (orbit.times[-1] - orbit.times[0]) / n
        st0 = np.concatenate([orbit.states[0], [1.0, 0.0, 0.0, 1.0, 0.0]])
        joint = _kernels.run_record(*scenario.kernel_params(), st0, step, n, False)
    mats = joint[:, 4:8].reshape(-1, 2, 2)
    s = joint[:, 8].copy()
    s_simp = None
    if len(orbit) >= 3:
        s_simp = np.concatenate([[0.0], cumulative_simpson(orbit.sigma, x=orbit.times)])
    coc = TransverseCocycle(orbit.times, mats, s, s_simp)
    res = coc.conformal_residuals()
    # det from stored entries carries a rounding floor of eps |T|^2 / e^s on hyperbolic orbits
    floor = ROUNDING_MARGIN * np.finfo(float).eps * np.linalg.norm(mats, 2, axis=(1, 2)) ** 2 / np.exp(s)
    bad = ~np.isfinite(res) | ((res > IDENTITY_LIMIT) & (res > floor))
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise StepTooLarge(
            f"conformal identity residual {res[k]:.3e} at t={orbit.times[k]:.6g} exceeds "
            f"{IDENTITY_LIMIT:.0e} and the rounding floor {floor[k]:.1e}"
        )
    return coc


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------


def _angle_rate(scenario, p, w) -> float:
    """Chart-angle rate of a vector parallel-transported along ``w``."""
    j = scenario.metric.f.jet(*p)
    return float(j.dy) * w[0] - float(j.dx) * w[1]


def transverse_coordinates(scenario, ref: UnitTangentState, other: UnitTangentState):
    """Decompose ``other - ref`` in the transverse frame ``(n, fibre)`` at ``ref``.

    The flow direction has base part ``v`` and fibre part ``c(v) + <E, n>``,
    the horizontal lift of ``n`` has fibre part ``c(n)``, and ``c`` is the
    chart-angle rate of parallel transport.  The flow component is discarded.
    """
    p = (ref.x, ref.y)
    metric = scenario.metric
    v = ref.v
    n = metric.normal(p, v)
    lam = float(scenario.field.gamma(p) @ n)
    dp = np.array([other.x - ref.x, other.y - ref.y])
    da = (other.chart_angle() - ref.chart_angle() + math.pi) % (2 * math.pi) - math.pi
    xcomp = metric.inner(p, dp, v)
    ycomp = metric.inner(p, dp, n)
    zcomp = da - xcomp * (_angle_rate(scenario, p, v) + lam) - ycomp * _angle_rate(scenario, p, n)
    return np.array([ycomp, zcomp])


def _central_columns(scenario, state, T, h, probe, ref):
    p = (state.x, state.y)
    a0 = state.chart_angle()
    n = scenario.metric.normal(p, state.v)
    cols = []
    for kind in ("horizontal", "vertical"):
        ends = []
        for sgn in (1.0, -1.0):
            if kind == "horizontal":
                q = np.asarray(p) + sgn * probe * n
                a = a0 + sgn * probe * _angle_rate(scenario, p, n)
            else:
                q = np.asarray(p)
                a = a0 + sgn * probe
            start = unit_state(scenario, q[0], q[1], a)
            end = integrate_orbit(scenario, start, T, h).end
            ends.append(transverse_coordinates(scenario, ref, end))
        cols.append((ends[0] - ends[1]) / (2 * probe))
    return np.column_stack(cols)


def fd_oracle(scenario: Scenario, state: UnitTangentState, T: float, h: float,
              probe: float = 1e-5, richardson: bool = True) -> np.ndarray:
    """Central finite differences of the time-``T`` flow in transverse coordinates.

    Columns are the responses to a horizontal displacement along ``e1`` and
    to a fibre rotation, both read in the endpoint frame.  With
    ``richardson`` the probes ``probe`` and ``2 probe`` are combined to cancel
    the ``probe^2`` truncation term.
    """
    if not 1e-5 <= probe <= 1e-3:
        raise ValueError("probe must lie in [1e-5, 1e-3]")
    ref = integrate_orbit(scenario, state, T, h).end
    D1 = _central_columns(scenario, state, T, h, probe, ref)
    if not richardson:
        return D1
    D2 = _central_columns(scenario, state, T, h, 2 * probe, ref)
    return (4 * D1 - D2) / 3


# ---------------------------------------------------------------------------
# bumps and the Franks tangent map
# ---------------------------------------------------------------------------


def _smoothstep(u):
    """Degree-7 smoothstep: 0 for u <= 0, 1 for u >= 1, three matching derivatives."""
    u = np.clip(u, 0.0, 1.0)
    return u**4 * (35 - 84 * u + 70 * u**2 - 20 * u**3)


@dataclass(frozen=True)
class BumpProfile:
    """Bumps used by the Franks perturbation.

    ``delta`` is ``C (1 - u^2)^k`` with ``u = (t - center) / radius``,
    normalised to unit integral.  ``hbar`` is one except on the listed
    ``windows`` (intervals of [0, 1]), where it is cut to zero by smoothstep
    ramps of width ``ramp``.
    """

    radius: float = 0.2
    center: float = 0.5
    order: int = 5
    windows: tuple = ()
    ramp: float = 0.02
    rho: float = 0.1
    eps: float = 0.1
    _poly: Polynomial = field(init=False, repr=False, compare=False)
    _scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.radius <= min(self.center, 1 - self.center):
            raise ValueError("delta support must lie inside [0, 1]")
        if self.order < 4:
            raise ValueError("order >= 4 is needed for a continuous third derivative")
        base = Polynomial([1.0, 0.0, -1.0]) ** self.order
        integ = base.integ()
        total = integ(1.0) - integ(-1.0)
        object.__setattr__(self, "_poly", base / total)
        object.__setattr__(self, "_scale", 1.0 / self.radius)
        lost = quad(lambda t: 1.0 - self.hbar(t), 0.0, 1.0, limit=200,
                    points=[w for win in self.windows for w in win] or None)[0]
        if lost >= self.rho:
            raise ValueError(f"int (1 - hbar) = {lost:.3g} is not below rho = {self.rho}")

    def delta(self, t, deriv: int = 0):
        """``delta`` or its ``deriv``-th derivative (closed form)."""
        t = np.asarray(t, dtype=float)
        u = (t - self.center) * self._scale
        poly = self._poly.deriv(deriv) if deriv else self._poly
        val = poly(u) * self._scale ** (deriv + 1)
        return np.where(np.abs(u) < 1.0, val, 0.0)

    def hbar(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        for a, b in self.windows:
            rise = _smoothstep((t - (a - self.ramp)) / self.ramp)
            fall = _smoothstep(((b + self.ramp) - t) / self.ramp)
            out = out * (1.0 - rise * fall)
        return out

    def phi(self, x):
        """Plateau bump on R^n: 1 on [-eps/4, eps/4]^n, 0 outside [-eps/2, eps/2]^n."""
        x = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
        q = self.eps / 4
        return float(np.prod(_smoothstep((2 * q - x) / q)))


@dataclass(frozen=True)
class FranksPerturbation:
    """Parameter ``(a, b, c; d; lam)`` with symmetric blocks and ``diag(d) = 0``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            m = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if m.shape[0] != m.shape[1] or not np.array_equal(m, m.T):
                raise ValueError(f"block {name} must be a symmetric square matrix")
            object.__setattr__(self, name, m)
        if np.any(np.diag(self.d)):
            raise ValueError("block d must have a null diagonal")
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def scalar(cls, a=0.0, b=0.0, c=0.0, lam=0.0) -> "FranksPerturbation":
        return cls([[a]], [[b]], [[c]], [[0.0]], lam)

    @classmethod
    def from_vector(cls, z) -> "FranksPerturbation":
        a, b, c, lam = z
        return cls.scalar(a, b, c, lam)

    def vector(self) -> np.ndarray:
        return np.array([self.a[0, 0], self.b[0, 0], self.c[0, 0], self.lam])

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(m * m) for m in (self.a, self.b, self.c, self.d)) + self.lam**2))

    def P(self, t, bumps: BumpProfile) -> np.ndarray:
        return float(bumps.hbar(t)) * (
            self.a * float(bumps.delta(t))
            + self.b * float(bumps.delta(t, 1))
            + self.c * float(bumps.delta(t, 2))
            + self.d * float(bumps.delta(t, 3))
        )


GeneratorPath = Union[Callable[[float], np.ndarray], tuple]


def constant_path(A) -> Callable[[float], np.ndarray]:
    A = np.asarray(A, dtype=float)
    return lambda t: A


def _path_evaluator(path: GeneratorPath, nsteps: int):
    """Return (step, list of A at the 2*nsteps + 1 half-step nodes on [0, 1])."""
    if callable(path):
        h = 1.0 / nsteps
        nodes = [np.asarray(path(k * h / 2), dtype=float) for k in range(2 * nsteps + 1)]
        return h, nodes
    times, mats = path
    times = np.asarray(times, dtype=float)
    if len(times) % 2 == 0:
        raise ValueError("sampled generator paths need an odd number of samples")
    if abs(times[0]) > 1e-12 or abs(times[-1] - 1.0) > 1e-9:
        raise ValueError("sampled generator paths must cover [0, 1]")
    h = 2.0 * (times[1] - times[0])
    return h, [np.asarray(m, dtype=float) for m in mats]


def franks_tangent(path: GeneratorPath, zeta: FranksPerturbation, bumps: BumpProfile,
                   nsteps: int = 1000, tol: float = 1e-8):
    """Derivative of the time-one map in the direction ``zeta``.

    Integrates ``X' = A X`` and ``Z' = A Z + B X`` with ``X(0) = I``,
    ``Z(0) = 0`` and ``B = [[0, 0], [P(t), lam * sigma(t) I]]``.  ``path`` is
    either a callable ``t -> A(t)`` or uniformly sampled ``(times, mats)`` on
    [0, 1] with an odd number of nodes.  Returns ``(Z(1), Y(1))`` where
    ``Y = X(1)^{-1} Z(1)`` has been checked to be infinitesimally CS.
    """
    h, nodes = _path_evaluator(path, nsteps)
    n = zeta.a.shape[0]
    t_nodes = np.arange(len(nodes)) * (h / 2)
    hb = bumps.hbar(t_nodes)
    A = np.ascontiguousarray(np.array(nodes, dtype=float))
    Bn = np.zeros_like(A)
    for m, block in enumerate((zeta.a, zeta.b, zeta.c, zeta.d)):
        Bn[:, n:, :n] += (hb * bumps.delta(t_nodes, m))[:, None, None] * block
    Bn[:, n:, n:] = zeta.lam * A[:, n, n][:, None, None] * np.eye(n)
    X, Z = _kernels.rk4_variation(A, Bn, h)
    Y = np.linalg.solve(X, Z)
    try:
        ics = infinitesimal_cs_check(Y, tol)
    except NotInfinitesimallyCS as exc:
        raise NotTangent(str(exc)) from exc
    if max(ics.alpha_symmetry, ics.gamma_symmetry) > tol:
        raise NotTangent("symmetric blocks of X(1)^{-1} Z(1) are not symmetric")
    return Z, Y


def franks_lower_bound(path: GeneratorPath, bumps: BumpProfile, rng=None, ndraws: int = 1000,
                       nsteps: int = 1000) -> dict:
    """Lower bound ``k`` with ``||dF zeta|| >= k ||zeta||`` (surface case).

    ``zeta -> Z(1)`` is linear in ``(a, b, c, lam)``, so the exact bound is
    the smallest singular value of its 4x4 matrix.  A sampling estimate over
    ``ndraws`` random unit ``zeta`` is reported as well.
    """
    cols = []
    for e in np.eye(4):
        Z, _ = franks_tangent(path, FranksPerturbation.from_vector(e), bumps, nsteps)
        cols.append(Z.ravel())
    L = np.column_stack(cols)
    k_exact = float(np.linalg.svd(L, compute_uv=False)[-1])
    out = {"k": k_exact, "singular_values": np.linalg.svd(L, compute_uv=False).tolist()}
    if rng is not None and ndraws:
        z = rng.standard_normal((ndraws, 4))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        out["k_sampled"] = float(np.min(np.linalg.norm(z @ L.T, axis=1)))
    return out
