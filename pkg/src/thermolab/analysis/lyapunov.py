"""Lyapunov exponents of the transverse cocycle by QR re-orthonormalisation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import Blowup
from ..flow import UnitTangentState
from ..geometry import Scenario

GROWTH_LIMIT = 1e100


@dataclass(frozen=True)
class LyapunovReport:
    exponents: tuple  # ascending
    b: float
    T: float
    h: float
    block: float

    @property
    def pairing_residual(self) -> float:
        return abs(sum(self.exponents) - self.b)

    def to_dict(self) -> dict:
        return {
            "exponents": list(self.exponents),
            "b": self.b,
            "T": self.T,
            "h": self.h,
            "block": self.block,
            "pairing_residual": self.pairing_residual,
        }


def qr_exponents(mats) -> np.ndarray:
    """Accumulated ``log |diag R|`` of the QR iteration over a list of block matrices."""
    dim = mats[0].shape[0]
    Qm = np.eye(dim)
    acc = np.zeros(dim)
    for M in mats:
        Qm, R = np.linalg.qr(M @ Qm)
        d = np.diag(R)
        acc += np.log(np.abs(d))
        Qm = Qm * np.sign(d)
    return acc


def lyapunov_spectrum(
    scenario: Scenario,
    state: UnitTangentState,
    T: float,
    h: float,
    block: float = 1.0,
    max_rewindow: int = 4,
) -> LyapunovReport:
    """Exponents of the transverse cocycle along the orbit of ``state``.

    The cocycle is restarted every ``block`` time units and the blocks are
    chained through QR.  If a block overflows, the block length is halved
    and the run repeated, up to ``max_rewindow`` times.
    """
    if not T >= 1e3 * h:
        raise ValueError("horizon must be at least 1000 steps")
    st0 = np.array([state.x, state.y, state.v1, state.v2, 1.0, 0.0, 0.0, 1.0, 0.0])
    params = scenario.kernel_params()
    for _ in range(max_rewindow + 1):
        spb = max(1, int(round(block / h)))
        step = block / spb
        nblocks = max(1, int(round(T / block)))
        mats, srates, _ = _kernels.run_blocks(*params, st0, step, spb, nblocks)
        norms = np.abs(mats).max(axis=(1, 2))
        if np.all(np.isfinite(norms)) and norms.max() < GROWTH_LIMIT:
            break
        block /= 2
    else:
        raise Blowup(f"cocycle overflow persists with block length {block:.3g}")
    horizon = nblocks * block
    lyap = np.sort(qr_exponents(mats) / horizon)
    b = float(np.sum(srates) / horizon)
    if not all(math.isfinite(x) for x in lyap):
        raise Blowup("non-finite exponent")
    return LyapunovReport(tuple(float(x) for x in lyap), b, horizon, step, block)
