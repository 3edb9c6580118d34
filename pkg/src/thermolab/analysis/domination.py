"""
Dominated-splitting estimates from sampled cocycle blocks.

The centre-unstable direction at a sample is approximated by the most
expanded image direction of the cocycle over the preceding window, the
centre-stable one by the most expanded direction of the inverse cocycle over
the following window.  Domination at ``l`` means

    ||A^l(x)|_cs|| * ||A^{-l}(f^l x)|_cu|| < 1/2

at every sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import _kernels
from ..errors import DegenerateBundle
from ..flow import UnitTangentState
from ..geometry import Scenario

ANGLE_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class DominationEstimate:
    l: Optional[int]
    worst_ratio: float
    ratios: tuple  # worst ratio for l = 1..l_max
    cu: np.ndarray = field(repr=False)
    cs: np.ndarray = field(repr=False)
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "worst_ratio": self.worst_ratio,
            "ratios": list(self.ratios),
            "nsamples": int(len(self.cu)),
            "diagnostic": self.diagnostic,
        }


def _leading_left(M) -> np.ndarray:
    U, s, _ = np.linalg.svd(M)
    return U[:, 0], s


def _max_sine(u, w) -> float:
    return float(np.max(np.abs(u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0])))


def _bundles(mats, window, nsamples):
    cu, cs, gaps = [], [], []
    dim = mats.shape[1]
    for i in range(window, window + nsamples):
        P = np.eye(dim)
        for M in mats[i - window:i]:
            P = M @ P
            P /= np.abs(P).max()
        u, s = _leading_left(P)
        Bm = np.eye(dim)
        for M in mats[i:i + window]:
            Bm = M @ Bm
            Bm /= np.abs(Bm).max()
        # inverse of the forward product from x_i, leading image direction
        w, s2 = _leading_left(np.linalg.inv(Bm))
        cu.append(u)
        cs.append(w)
        gaps.append(min(1 - s[-1] / s[0], 1 - s2[-1] / s2[0]))
    return np.array(cu), np.array(cs), np.array(gaps)


def domination_from_blocks(mats, l_max: int, window: int = 20, nsamples: Optional[int] = None,
                           gap_tol: float = 1e-6, bundle_tol: Optional[float] = None) -> DominationEstimate:
    """Smallest ``l <= l_max`` with domination along a chain of block matrices.

    ``mats[i]`` maps the fibre at sample ``i`` to the fibre at ``i + 1``.
    Needs ``len(mats) >= 2 * window + l_max + nsamples``.

    Bundles of a dominated cocycle converge exponentially in the window, while
    parabolic ones drift like ``1 / window``.  Estimates that move by more than
    ``bundle_tol`` (default ``0.1 / window``) when the window is halved are
    rejected with a diagnostic.
    """
    mats = np.asarray(mats, dtype=float)
    if nsamples is None:
        nsamples = len(mats) - 2 * window - l_max
    if nsamples < 1:
        raise ValueError("not enough blocks for the requested window and l_max")
    cu, cs, gaps = _bundles(mats, window, nsamples + l_max)
    if np.min(gaps) < 10 * gap_tol:
        return DominationEstimate(None, float("nan"), (), cu, cs,
                                  "singular gap of the window product below 10*tol")
    if bundle_tol is None:
        bundle_tol = 0.1 / window
    half = window // 2
    if half >= 1:
        cu_h, cs_h, _ = _bundles(mats[window - half:], half, nsamples + l_max)
        drift = max(_max_sine(cu, cu_h), _max_sine(cs, cs_h))
        if drift > bundle_tol:
            return DominationEstimate(None, float("nan"), (), cu, cs,
                                      f"bundles moved by {drift:.2e} under window halving "
                                      f"(tolerance {bundle_tol:.1e})")
    cross = np.abs(cu[:, 0] * cs[:, 1] - cu[:, 1] * cs[:, 0])
    if np.min(cross) < ANGLE_FLOOR:
        raise DegenerateBundle("centre-stable and centre-unstable directions coincide")
    ratios = []
    best = None
    for l in range(1, l_max + 1):
        worst = 0.0
        for i in range(nsamples):
            P = np.eye(mats.shape[1])
            for M in mats[window + i:window + i + l]:
                P = M @ P
            on_cs = np.linalg.norm(P @ cs[i])
            on_cu = np.linalg.norm(np.linalg.solve(P, cu[i + l]))
            worst = max(worst, float(on_cs * on_cu))
        ratios.append(worst)
        if best is None and worst < 0.5:
            best = l
    worst_ratio = ratios[best - 1] if best else ratios[-1]
    return DominationEstimate(best, worst_ratio, tuple(ratios), cu[:nsamples], cs[:nsamples])


def domination_estimator(scenario: Scenario, states: Sequence[UnitTangentState], l_max: int,
                         window: int = 20, nsamples: int = 20, block: float = 1.0,
                         h: float = 1e-3, gap_tol: float = 1e-6,
                         bundle_tol: Optional[float] = None) -> DominationEstimate:
    """Run :func:`domination_from_blocks` along the orbit of each state and combine.

    The result is dominated at ``l`` only if every orbit is.
    """
    spb = max(1, int(round(block / h)))
    step = block / spb
    nblocks = 2 * window + l_max + nsamples
    params = scenario.kernel_params()
    per_orbit = []
    for st in states:
        st0 = np.array([st.x, st.y, st.v1, st.v2, 1, 0, 0, 1, 0.0])
        mats, _, _ = _kernels.run_blocks(*params, st0, step, spb, nblocks)
        per_orbit.append(domination_from_blocks(mats, l_max, window, nsamples, gap_tol, bundle_tol))
    if any(e.l is None and not e.ratios for e in per_orbit):
        bad = next(e for e in per_orbit if not e.ratios)
        return bad
    ratios = tuple(max(r) for r in zip(*(e.ratios for e in per_orbit)))
    best = next((l for l, r in enumerate(ratios, start=1) if r < 0.5), None)
    worst = ratios[best - 1] if best else ratios[-1]
    cu = np.concatenate([e.cu for e in per_orbit])
    cs = np.concatenate([e.cs for e in per_orbit])
    return DominationEstimate(best, worst, ratios, cu, cs)
