"""
Periodic orbits: Poincare sections, Newton shooting, classification and
the beta functional with its cohomological surgery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .. import _kernels
from ..cocycle import integrate_cocycle
from ..cs_linalg import CSMatrix, eigen_pairing, validate_cs
from ..errors import NoConvergence, NotClosed, NullHomologous, TangentCrossing
from ..flow import OrbitSegment, UnitTangentState, integrate_orbit, unit_state
from ..geometry import ClosedFormField, Scenario

TANGENCY_LIMIT = 1e-8


@dataclass(frozen=True)
class Section:
    """The slice ``{coord[axis] = value mod 1}`` crossed in ``direction`` (+1 or -1)."""

    axis: int = 1
    value: float = 0.0
    direction: int = 1

    def __post_init__(self):
        if self.axis not in (0, 1):
            raise ValueError("section axis must be 0 (x) or 1 (y)")
        if self.direction not in (1, -1):
            raise ValueError("section direction must be +1 or -1")

    @property
    def free(self) -> int:
        return 1 - self.axis

    def level(self, coord: float) -> float:
        """Nearest representative of the section level to ``coord``."""
        return self.value + round(coord - self.value)


def _wrap(d, period):
    return (d + period / 2) % period - period / 2


def _refine_crossing(params, cur, h, section: Section):
    """Sub-step ``tau`` in [0, h] landing exactly on the section, by Newton on one RK4 step."""
    ax = section.axis
    level = section.value + math.floor(cur[ax] - section.value) + (1 if section.direction > 0 else 0)
    out = np.empty(_kernels.NSTATE)
    tau = 0.5 * h
    vel = cur[2 + ax]
    for _ in range(50):
        _kernels.rk4_step(*params, cur, tau, out)
        g = out[ax] - level
        vel = out[2 + ax]
        if abs(vel) < TANGENCY_LIMIT:
            raise TangentCrossing(f"velocity normal to the section is {vel:.2e}")
        dtau = g / vel
        tau -= dtau
        if abs(dtau) < 1e-16 + 1e-15 * abs(tau):
            break
    _kernels.rk4_step(*params, cur, tau, out)
    out[ax] = level
    return out, tau


def _flow_to_section(scenario, joint0, h, section, max_time, min_steps=1):
    params = scenario.kernel_params()
    max_steps = int(math.ceil(max_time / h))
    cur, k = _kernels.run_to_crossing(
        *params, joint0, h, max_steps, section.axis, section.value, section.direction, min_steps
    )
    if k < 0:
        raise NoConvergence(f"no section crossing within time {max_time}")
    end, tau = _refine_crossing(params, cur, h, section)
    return end, k * h + tau


def section_point(scenario, state: UnitTangentState, section: Section, h=1e-3, max_time=50.0):
    """First point of the forward orbit on the section (the state itself if already on it)."""
    ax = section.axis
    coord = (state.x, state.y)[ax]
    vel = (state.v1, state.v2)[ax]
    if abs(coord - section.level(coord)) < 1e-12:
        if vel * section.direction <= TANGENCY_LIMIT:
            raise TangentCrossing("seed sits on the section without crossing it transversally")
        return state, 0.0
    joint0 = np.array([state.x, state.y, state.v1, state.v2, 1, 0, 0, 1, 0.0])
    end, t = _flow_to_section(scenario, joint0, h, section, max_time, min_steps=0)
    return UnitTangentState.from_array(end), t


def _encode(state: UnitTangentState, section: Section) -> np.ndarray:
    free = (state.x, state.y)[section.free]
    return np.array([free, state.chart_angle()])


def _decode(scenario, u, section: Section, base: float) -> UnitTangentState:
    xy = [0.0, 0.0]
    xy[section.axis] = base
    xy[section.free] = u[0]
    return unit_state(scenario, xy[0], xy[1], u[1])


def return_map(scenario, u, section: Section, base: float, h: float, max_time: float):
    """First return ``(u', L, end_state)`` of section coordinates ``u = (free, angle)``."""
    start = _decode(scenario, u, section, base)
    joint0 = np.array([start.x, start.y, start.v1, start.v2, 1, 0, 0, 1, 0.0])
    end, L = _flow_to_section(scenario, joint0, h, section, max_time)
    end_state = UnitTangentState.from_array(end)
    return _encode(end_state, section), L, end_state


def _displacement(u_new, u):
    return np.array([_wrap(u_new[0] - u[0], 1.0), _wrap(u_new[1] - u[1], 2 * math.pi)])


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    seed: UnitTangentState
    period: float
    return_derivative: CSMatrix
    beta: float
    residual: float
    winding: tuple
    s_period: float
    section: Section
    history: tuple = ()
    orbit: Optional[OrbitSegment] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "seed": [self.seed.x, self.seed.y, self.seed.v1, self.seed.v2],
            "period": self.period,
            "return_derivative": self.return_derivative.entries.tolist(),
            "mu": self.return_derivative.mu,
            "beta": self.beta,
            "s_period": self.s_period,
            "residual": self.residual,
            "winding": list(self.winding),
            "newton_residuals": list(self.history),
        }


def find_periodic(
    scenario: Scenario,
    seed: UnitTangentState,
    section: Section = Section(),
    max_iter: int = 20,
    h: float = 1e-3,
    tol: float = 1e-10,
    fd_step: float = 1e-6,
    max_time: float = 50.0,
) -> PeriodicOrbit:
    """Newton shooting on the first-return map of ``section``.

    The Jacobian of ``u -> P(u) - u`` is taken by central differences of the
    return map and the step solved in the least-squares sense, which also
    copes with the continuous families of the flat geodesic case.
    """
    start, _ = section_point(scenario, seed, section, h, max_time)
    ax = section.axis
    base = section.level((start.x, start.y)[ax])
    u = _encode(start, section)
    history = []
    for it in range(max_iter + 1):
        P, L, end = return_map(scenario, u, section, base, h, max_time)
        F = _displacement(P, u)
        res = float(np.max(np.abs(F)))
        history.append(res)
        if res <= tol:
            break
        if it == max_iter:
            raise NoConvergence(
                f"Newton residual {res:.3e} after {max_iter} iterations (target {tol:.0e})"
            )
        Jm = np.empty((2, 2))
        for i in range(2):
            du = np.zeros(2)
            du[i] = fd_step
            Pp = return_map(scenario, u + du, section, base, h, max_time)[0]
            Pm = return_map(scenario, u - du, section, base, h, max_time)[0]
            Jm[:, i] = (_displacement(Pp, u + du) - _displacement(Pm, u - du)) / (2 * fd_step)
        step = np.linalg.lstsq(Jm, -F, rcond=1e-10)[0]
        u = u + step
    seed_state = _decode(scenario, u, section, base)
    seg = integrate_orbit(scenario, seed_state, L, h)
    coc = integrate_cocycle(scenario, seg)
    M = validate_cs(coc.final, tol=1e-6)
    beta = beta_of_orbit(scenario, seg, closure_tol=max(1e-6, 10 * res))
    return PeriodicOrbit(
        seed_state, float(L), M, beta, res, seg.winding(), float(coc.s[-1]), section,
        tuple(history), seg,
    )


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    kind: str
    eigenvalues: tuple
    moduli: tuple
    log_product: float
    mu: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "moduli": list(self.moduli),
            "log_product": self.log_product,
            "mu": self.mu,
        }


def classify_periodic(obj, tol: float = 1e-6) -> Classification:
    """Sink, source, saddle or non-hyperbolic from the return-derivative moduli."""
    M = obj.return_derivative if isinstance(obj, PeriodicOrbit) else obj
    if not isinstance(M, CSMatrix):
        M = validate_cs(M)
    pairing = eigen_pairing(M)
    lam = sorted((complex(z) for z in pairing.eigenvalues), key=lambda z: (abs(z), z.imag))
    mod = [abs(z) for z in lam]
    if all(m < 1 - tol for m in mod):
        kind = "sink"
    elif all(m > 1 + tol for m in mod):
        kind = "source"
    elif any(m < 1 - tol for m in mod) and any(m > 1 + tol for m in mod):
        kind = "saddle"
    else:
        kind = "non-hyperbolic"
    logp = float(sum(math.log(m) for m in mod))
    return Classification(kind, tuple(lam), tuple(mod), logp, M.mu)


# ---------------------------------------------------------------------------
# beta functional and surgery
# ---------------------------------------------------------------------------


def closure_residual(orbit: OrbitSegment) -> float:
    a, b = orbit.states[0], orbit.states[-1]
    d = b - a
    return float(max(abs(_wrap(d[0], 1.0)), abs(_wrap(d[1], 1.0)), abs(d[2]), abs(d[3])))


def beta_of_orbit(scenario: Scenario, orbit: OrbitSegment, closure_tol: float = 1e-6,
                  details: bool = False):
    """``int_0^L gamma(v) dt`` by Simpson's rule over one period.

    With ``details`` a dict is returned holding the quadrature value, the
    cohomological value ``c1 p + c2 q`` of the winding ``(p, q)`` and their gap.
    """
    res = closure_residual(orbit)
    if res > closure_tol:
        raise NotClosed(f"orbit does not close: residual {res:.3e} > {closure_tol:.1e}")
    st = orbit.states
    gam = scenario.field.gamma((st[:, 0], st[:, 1]))
    integrand = gam[0] * st[:, 2] + gam[1] * st[:, 3]
    beta = float(simpson(integrand, x=orbit.times))
    if not details:
        return beta
    p, q = orbit.winding()
    coh = scenario.field.c1 * p + scenario.field.c2 * q
    return {"beta": beta, "cohomological": coh, "gap": abs(beta - coh), "winding": (p, q)}


@dataclass(frozen=True, eq=False)
class SurgeryResult:
    field: ClosedFormField
    scenario: Scenario
    alpha: float
    beta_before: float
    beta_after_same_curve: float
    persisted: bool
    orbit_after: Optional[PeriodicOrbit]
    dlogdet: Optional[float]

    @property
    def beta_shift(self) -> float:
        return self.beta_after_same_curve - self.beta_before

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "c1": self.field.c1,
            "c2": self.field.c2,
            "beta_before": self.beta_before,
            "beta_after_same_curve": self.beta_after_same_curve,
            "beta_shift": self.beta_shift,
            "orbit_persisted": self.persisted,
            "dlogdet": self.dlogdet,
            "orbit_after": None if self.orbit_after is None else self.orbit_after.to_dict(),
        }


def shifted_field(fld: ClosedFormField, winding, alpha: float) -> ClosedFormField:
    p, q = winding
    if p == 0 and q == 0:
        raise NullHomologous("a null-homologous loop has beta fixed by Stokes")
    w = alpha / (p * p + q * q)
    return fld.with_harmonic(fld.c1 + w * p, fld.c2 + w * q)


def beta_surgery(scenario: Scenario, orbit: PeriodicOrbit, alpha: float, h: float = 1e-3,
                 persist_tol: float = 1e-9, dynamic: bool = True) -> SurgeryResult:
    """Shift the harmonic part of ``gamma`` so that beta of the orbit's class moves by ``alpha``.

    The old curve is first re-integrated under the new field; if it still
    closes it is kept, otherwise a new orbit is searched from the old seed.
    ``dlogdet`` is the change of ``log det`` of the return derivative.
    """
    new_field = shifted_field(scenario.field, orbit.winding, alpha)
    new_sc = scenario.with_field(new_field)
    seg = orbit.orbit
    if seg is None:
        seg = integrate_orbit(scenario, orbit.seed, orbit.period, h)
    before = beta_of_orbit(scenario, seg, closure_tol=1e-6)
    after = beta_of_orbit(new_sc, seg, closure_tol=1e-6)
    if not dynamic:
        return SurgeryResult(new_field, new_sc, alpha, before, after, False, None, None)
    trial = integrate_orbit(new_sc, orbit.seed, orbit.period, h)
    persisted = closure_residual(trial) <= persist_tol
    new_orbit = find_periodic(new_sc, orbit.seed, orbit.section, h=h)
    dlog = float(np.log(np.linalg.det(new_orbit.return_derivative.entries))
                 - np.log(np.linalg.det(orbit.return_derivative.entries)))
    return SurgeryResult(new_field, new_sc, alpha, before, after, persisted, new_orbit, dlog)
