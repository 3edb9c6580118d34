"""
Cone-field invariance for the transverse cocycle.

With transverse coordinates ``xi = (y, z)`` (horizontal, vertical) the
quadratic form ``L(xi) = y z`` evolves along the Jacobi equation as

    dL/dt = z^2 + Q y^2 + sigma y z

The cone ``{L >= k}`` of unit vectors is forward invariant when this rate is
positive on its boundary ``{L = k}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cocycle import TransverseCocycle, generator_samples, integrate_cocycle
from ..flow import OrbitSegment
from ..geometry import Scenario


def cone_form(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return xi[..., 0] * xi[..., 1]


def cone_rate(xi, Q, sigma) -> np.ndarray:
    """``dL/dt`` for vectors ``xi`` under the generator ``[[0, 1], [Q, sigma]]``."""
    xi = np.asarray(xi, dtype=float)
    y, z = xi[..., 0], xi[..., 1]
    return z * z + Q * y * y + sigma * y * z


def boundary_directions(k: float) -> np.ndarray:
    """Angles of the unit vectors with ``y z = k`` (four points for 0 < k < 1/2)."""
    if not 0 < k <= 0.5:
        raise ValueError("cone parameter must satisfy 0 < k <= 1/2 for unit vectors")
    t1 = 0.5 * math.asin(2 * k)
    t2 = 0.5 * math.pi - t1
    return np.array([t1, t2, t1 + math.pi, t2 + math.pi])


@dataclass(frozen=True, eq=False)
class ConeReport:
    k: float
    samples: np.ndarray  # rows (t, theta, margin)
    min_margin: float
    q_nonnegative: bool
    gamma_positive: bool

    @property
    def verdict(self) -> str:
        return "invariant" if self.min_margin > 0 else "violated"

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "min_margin": self.min_margin,
            "verdict": self.verdict,
            "hypotheses": {"Q_nonnegative": self.q_nonnegative, "gamma_v_positive": self.gamma_positive},
            "nsamples": int(len(self.samples)),
        }


def cone_invariance_test(scenario: Scenario, orbit: OrbitSegment, k: float, stride: int = 10) -> ConeReport:
    """Evaluate ``dL/dt`` on the cone boundary at every ``stride``-th orbit sample.

    On a surface the boundary of the unit cone is finite, so the sampling
    grid is the set of orbit samples; refining means lowering ``stride``.
    Also reports whether ``Q >= 0`` and ``gamma(v) > 0`` hold on the samples.
    """
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    idx = np.arange(0, len(orbit), stride)
    A = generator_samples(scenario, orbit)[idx]
    Q = A[:, 1, 0]
    sigma = A[:, 1, 1]
    th = boundary_directions(k)
    xi = np.stack([np.cos(th), np.sin(th)], axis=-1)
    rates = cone_rate(xi[None, :, :], Q[:, None], sigma[:, None])
    t = np.repeat(orbit.times[idx], len(th))
    rows = np.column_stack([t, np.tile(th, len(idx)), rates.ravel()])
    return ConeReport(
        float(k), rows, float(rates.min()), bool(np.all(Q >= 0)), bool(np.all(-sigma > 0))
    )


def cone_fd_check(scenario: Scenario, orbit: OrbitSegment, xi0, cocycle: TransverseCocycle = None):
    """Compare the rate formula with a 5-point derivative of ``L(T(t) xi0)``.

    ``L`` is quadratic, so gaps are divided by ``|xi(t)|^2``: the result is
    the largest gap of the rate on unit vectors over interior samples.
    """
    if cocycle is None:
        cocycle = integrate_cocycle(scenario, orbit)
    xi = cocycle.matrices @ np.asarray(xi0, dtype=float)
    L = cone_form(xi)
    dt = orbit.times[1] - orbit.times[0]
    dL = (L[:-4] - 8 * L[1:-3] + 8 * L[3:-1] - L[4:]) / (12 * dt)
    A = generator_samples(scenario, orbit)[2:-2]
    formula = cone_rate(xi[2:-2], A[:, 1, 0], A[:, 1, 1])
    scale = np.sum(xi[2:-2] ** 2, axis=1)
    return float(np.max(np.abs(dL - formula) / scale))
