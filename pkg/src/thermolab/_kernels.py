"""
Compiled RK4 kernels for the thermostat flow and its transverse cocycle.

The joint state is ``[x, y, v1, v2, T11, T12, T21, T22, s]``.  Positions are
unwrapped reals.  The cocycle is written in the coordinates ``(y, z)`` of the
unit normal ``n`` and the fibre direction, so its generator is
``[[0, 1], [Q, sigma]]`` with

    sigma = -gamma(v)
    Q     = -K + <nabla_n E, n> - <E, n>^2

The last term comes from the rotation of ``n`` relative to a parallel frame
(the orbit turns at rate ``<E, n>``).
"""
import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi
NSTATE = 9


@njit(cache=True)
def trig_jet(c, x, y):
    v = 0.0
    dx = 0.0
    dy = 0.0
    dxx = 0.0
    dxy = 0.0
    dyy = 0.0
    for r in range(c.shape[0]):
        kx = c[r, 0]
        ky = c[r, 1]
        ph = TWO_PI * (kx * x + ky * y)
        cs = np.cos(ph)
        sn = np.sin(ph)
        w = c[r, 2] * cs + c[r, 3] * sn
        dw = TWO_PI * (c[r, 3] * cs - c[r, 2] * sn)
        ddw = -TWO_PI * TWO_PI * w
        v += w
        dx += kx * dw
        dy += ky * dw
        dxx += kx * kx * ddw
        dxy += kx * ky * ddw
        dyy += ky * ky * ddw
    return v, dx, dy, dxx, dxy, dyy


@njit(cache=True)
def local_terms(fc, c1, c2, uc, x, y, v1, v2):
    """Return (a1, a2, sigma, Q, gamma_v, g(v,v)) at a state."""
    f, fx, fy, fxx, fxy, fyy = trig_jet(fc, x, y)
    u, ux, uy, uxx, uxy, uyy = trig_jet(uc, x, y)
    g1 = c1 + ux
    g2 = c2 + uy
    e2f = np.exp(2.0 * f)
    em2f = 1.0 / e2f
    E1 = em2f * g1
    E2 = em2f * g2
    gv = g1 * v1 + g2 * v2
    gvv = e2f * (v1 * v1 + v2 * v2)
    # acceleration
    a1 = -(fx * v1 * v1 + 2.0 * fy * v1 * v2 - fx * v2 * v2) + E1 - gv / gvv * v1
    a2 = -(-fy * v1 * v1 + 2.0 * fx * v1 * v2 + fy * v2 * v2) + E2 - gv / gvv * v2
    # unit normal
    nrm = 1.0 / np.sqrt(gvv)
    n1 = -v2 * nrm
    n2 = v1 * nrm
    K = -em2f * (fxx + fyy)
    # dE[k][i] = d E^k / d x_i
    dE11 = em2f * (uxx - 2.0 * fx * g1)
    dE12 = em2f * (uxy - 2.0 * fy * g1)
    dE21 = em2f * (uxy - 2.0 * fx * g2)
    dE22 = em2f * (uyy - 2.0 * fy * g2)
    # nabla_n E
    w1 = dE11 * n1 + dE12 * n2
    w1 += fx * n1 * E1 + fy * (n1 * E2 + n2 * E1) - fx * n2 * E2
    w2 = dE21 * n1 + dE22 * n2
    w2 += -fy * n1 * E1 + fx * (n1 * E2 + n2 * E1) + fy * n2 * E2
    lam = g1 * n1 + g2 * n2
    Q = -K + e2f * (w1 * n1 + w2 * n2) - lam * lam
    sigma = -gv
    return a1, a2, sigma, Q, gv, gvv


@njit(cache=True)
def deriv(fc, c1, c2, uc, st, out):
    a1, a2, sigma, Q, gv, gvv = local_terms(fc, c1, c2, uc, st[0], st[1], st[2], st[3])
    out[0] = st[2]
    out[1] = st[3]
    out[2] = a1
    out[3] = a2
    # T' = A T with A = [[0, 1], [Q, sigma]]
    out[4] = st[6]
    out[5] = st[7]
    out[6] = Q * st[4] + sigma * st[6]
    out[7] = Q * st[5] + sigma * st[7]
    out[8] = sigma


@njit(cache=True)
def rk4_step(fc, c1, c2, uc, st, h, out):
    k1 = np.empty(NSTATE)
    k2 = np.empty(NSTATE)
    k3 = np.empty(NSTATE)
    k4 = np.empty(NSTATE)
    tmp = np.empty(NSTATE)
    deriv(fc, c1, c2, uc, st, k1)
    for i in range(NSTATE):
        tmp[i] = st[i] + 0.5 * h * k1[i]
    deriv(fc, c1, c2, uc, tmp, k2)
    for i in range(NSTATE):
        tmp[i] = st[i] + 0.5 * h * k2[i]
    deriv(fc, c1, c2, uc, tmp, k3)
    for i in range(NSTATE):
        tmp[i] = st[i] + h * k3[i]
    deriv(fc, c1, c2, uc, tmp, k4)
    for i in range(NSTATE):
        out[i] = st[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def _renormalize(fc, st):
    f = trig_jet(fc, st[0], st[1])[0]
    nv = np.exp(f) * np.sqrt(st[2] * st[2] + st[3] * st[3])
    st[2] /= nv
    st[3] /= nv


@njit(cache=True)
def run_record(fc, c1, c2, uc, st0, h, nsteps, renorm):
    """Integrate ``nsteps`` steps of size ``h`` recording every state."""
    out = np.empty((nsteps + 1, NSTATE))
    out[0, :] = st0
    cur = st0.copy()
    nxt = np.empty(NSTATE)
    for k in range(nsteps):
        rk4_step(fc, c1, c2, uc, cur, h, nxt)
        if renorm:
            _renormalize(fc, nxt)
        out[k + 1, :] = nxt
        cur[:] = nxt
    return out


@njit(cache=True)
def run_blocks(fc, c1, c2, uc, st0, h, steps_per_block, nblocks):
    """Integrate block by block, resetting ``T = I`` and ``s = 0`` at each block.

    Returns block cocycles ``(nblocks, 2, 2)``, block rates ``s`` and the
    flow states at block boundaries ``(nblocks + 1, 4)``.
    """
    mats = np.empty((nblocks, 2, 2))
    srates = np.empty(nblocks)
    bounds = np.empty((nblocks + 1, 4))
    cur = st0.copy()
    nxt = np.empty(NSTATE)
    bounds[0, :] = cur[:4]
    for b in range(nblocks):
        cur[4] = 1.0
        cur[5] = 0.0
        cur[6] = 0.0
        cur[7] = 1.0
        cur[8] = 0.0
        for k in range(steps_per_block):
            rk4_step(fc, c1, c2, uc, cur, h, nxt)
            cur[:] = nxt
        mats[b, 0, 0] = cur[4]
        mats[b, 0, 1] = cur[5]
        mats[b, 1, 0] = cur[6]
        mats[b, 1, 1] = cur[7]
        srates[b] = cur[8]
        bounds[b + 1, :] = cur[:4]
    return mats, srates, bounds


@njit(cache=True)
def run_to_crossing(fc, c1, c2, uc, st0, h, max_steps, axis, value, direction, min_steps):
    """Step until the coordinate ``axis`` crosses ``value + integer``.

    A crossing is a change of ``floor(coord - value)`` in the requested
    direction (+1 upward, -1 downward).  Crossings during the first
    ``min_steps`` steps are ignored.  Returns the state just before the crossing and the number of
    full steps taken, or ``-1`` steps if ``max_steps`` is exhausted.
    """
    cur = st0.copy()
    nxt = np.empty(NSTATE)
    for k in range(max_steps):
        rk4_step(fc, c1, c2, uc, cur, h, nxt)
        a = np.floor(cur[axis] - value)
        b = np.floor(nxt[axis] - value)
        if b != a and (b - a) * direction > 0 and k >= min_steps:
            return cur, k
        cur[:] = nxt
    return cur, -1


@njit(cache=True)
def rk4_variation(A, B, h):
    """RK4 for ``X' = A X``, ``Z' = A Z + B X`` on half-step nodes.

    ``A`` and ``B`` have shape ``(2 m + 1, d, d)``; node ``k`` sits at time
    ``k h / 2``.  Returns ``X`` and ``Z`` after ``m`` steps from ``(I, 0)``.
    """
    d = A.shape[1]
    m = (A.shape[0] - 1) // 2
    X = np.eye(d)
    Z = np.zeros((d, d))
    for s in range(m):
        A0 = A[2 * s]
        Am = A[2 * s + 1]
        A1 = A[2 * s + 2]
        B0 = B[2 * s]
        Bm = B[2 * s + 1]
        B1 = B[2 * s + 2]
        k1x = A0 @ X
        k1z = A0 @ Z + B0 @ X
        X2 = X + 0.5 * h * k1x
        Z2 = Z + 0.5 * h * k1z
        k2x = Am @ X2
        k2z = Am @ Z2 + Bm @ X2
        X3 = X + 0.5 * h * k2x
        Z3 = Z + 0.5 * h * k2z
        k3x = Am @ X3
        k3z = Am @ Z3 + Bm @ X3
        X4 = X + h * k3x
        Z4 = Z + h * k3z
        k4x = A1 @ X4
        k4z = A1 @ Z4 + B1 @ X4
        X = X + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        Z = Z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    return X, Z
