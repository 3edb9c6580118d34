"""
Independent reference computations used to freeze expected values.

None of these call into the code paths they check: Christoffel symbols come
from finite differences of the metric tensor, curvature from the Brioschi
formula, homotheties from exhaustive enumeration, and so on.
"""
import itertools

import numpy as np
from scipy.linalg import expm


def christoffel_fd(tensor, p, step=1e-5):
    """``G[k, i, j]`` from the general formula with central differences of ``g``."""
    x, y = p
    g = tensor(x, y)
    dg = np.empty((2, 2, 2))  # dg[l] = d g / d x_l
    dg[0] = (tensor(x + step, y) - tensor(x - step, y)) / (2 * step)
    dg[1] = (tensor(x, y + step) - tensor(x, y - step)) / (2 * step)
    ginv = np.linalg.inv(g)
    G = np.zeros((2, 2, 2))
    for k, i, j in itertools.product(range(2), repeat=3):
        G[k, i, j] = 0.5 * sum(
            ginv[k, l] * (dg[i][l, j] + dg[j][l, i] - dg[l][i, j]) for l in range(2)
        )
    return G


def _brioschi(E, G, x, y, h):
    """Gauss curvature of ``E dx^2 + G dy^2`` by nested central differences."""
    def A(x, y):  # E_y / sqrt(EG)
        return (E(x, y + h) - E(x, y - h)) / (2 * h) / np.sqrt(E(x, y) * G(x, y))

    def B(x, y):  # G_x / sqrt(EG)
        return (G(x + h, y) - G(x - h, y)) / (2 * h) / np.sqrt(E(x, y) * G(x, y))

    dA = (A(x, y + h) - A(x, y - h)) / (2 * h)
    dB = (B(x + h, y) - B(x - h, y)) / (2 * h)
    return -(dA + dB) / (2 * np.sqrt(E(x, y) * G(x, y)))


def brioschi_curvature(E, G, x, y, h=1e-3):
    """Richardson-extrapolated Brioschi curvature (steps ``h`` and ``2h``)."""
    k1 = _brioschi(E, G, x, y, h)
    k2 = _brioschi(E, G, x, y, 2 * h)
    return (4 * k1 - k2) / 3


def left_fold(mats):
    out = np.eye(mats[0].shape[0])
    for m in mats:
        out = out @ m
    return out


def rotation_matrix(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def discriminant_scan(M, alpha, step):
    """Smallest |s| on the grid with complex eigenvalues of R(s alpha) M, positive first."""
    ks = np.arange(0, int(round(1 / step)) + 1)
    for k in ks:
        for s in ((0.0,) if k == 0 else (k * step, -k * step)):
            P = rotation_matrix(s * alpha) @ M
            disc = np.trace(P) ** 2 - 4 * np.linalg.det(P)
            if disc < 0:
                return s
    return None


def brute_homothety_powers(mats, max_power, rel=1e-9):
    """Smallest power ``a`` and letter ``i`` with ``mats[i]^a`` a multiple of the identity."""
    for a in range(1, max_power + 1):
        for i, M in enumerate(mats):
            P = np.linalg.matrix_power(M, a)
            off = max(abs(P[0, 1]), abs(P[1, 0]), abs(P[0, 0] - P[1, 1]))
            if off <= rel * np.abs(P).max():
                return i, a, P[0, 0]
    return None


def constant_cocycle(A, t):
    return expm(np.asarray(A, dtype=float) * t)


def random_symplectic(rng, n, scale=0.5):
    """``expm(J H)`` with ``H`` random symmetric: symplectic by construction."""
    H = rng.standard_normal((2 * n, 2 * n)) * scale
    H = (H + H.T) / 2
    J = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    return expm(J @ H)
