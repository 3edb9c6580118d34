"""
Conformally symplectic (CS) matrix algebra.

A real 2n x 2n matrix M is conformally symplectic when ``M.T @ J @ M = mu * J``
for some scalar ``mu > 0``, with ``J = [[0, -I], [I, 0]]``.  This module
validates such matrices, pairs their eigenvalues, builds the plane rotations
used to perturb periodic linear systems, and implements the finite searches
(domination, complexification, homotheties) that act on words of CS matrices.

Conventions
-----------
* Indices passed to :func:`rotation` and friends are 1-based, as in the
  matrix displays they mirror.
* A word ``[W1, W2, ..., Wk]`` multiplies as ``W1 @ W2 @ ... @ Wk``: the last
  letter acts first.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    MissingTransition,
    NotConformal,
    NotInfinitesimallyCS,
    NotInvariantSplit,
    OddDimension,
    PairingFailure,
    Singular,
)

DEFAULT_TOL = 1e-9
HYPERBOLIC_TOL = 1e-9


def standard_J(n: int) -> np.ndarray:
    """Canonical 2n x 2n block matrix ``[[0, -I], [I, 0]]``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _half_dim(M: np.ndarray) -> int:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] % 2:
        raise OddDimension(f"dimension {M.shape[0]} is odd")
    return M.shape[0] // 2


@dataclass(frozen=True)
class CSMatrix:
    """A validated conformally symplectic matrix with its conformal factor."""

    entries: np.ndarray
    mu: float
    tol: float = DEFAULT_TOL
    residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))

    @property
    def n(self) -> int:
        return self.entries.shape[0] // 2

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "CSMatrix") -> "CSMatrix":
        return word_product([self, other], tol=max(self.tol, other.tol))

    def inverse(self) -> "CSMatrix":
        return CSMatrix(np.linalg.inv(self.entries), 1.0 / self.mu, self.tol, self.residual)

    def power(self, k: int) -> "CSMatrix":
        return CSMatrix(np.linalg.matrix_power(self.entries, k), self.mu**k, self.tol)

    @classmethod
    def identity(cls, n: int) -> "CSMatrix":
        return cls(np.eye(2 * n), 1.0)


def conformal_factor(M) -> tuple[float, float]:
    """Least-squares ``mu`` for ``M.T J M = mu J`` and the scaled residual.

    The residual is the largest entry of ``M.T J M - mu J`` divided by
    ``max(1, |mu|)`` so that long products keep a meaningful tolerance.
    """
    M = np.asarray(M, dtype=float)
    n = _half_dim(M)
    J = standard_J(n)
    S = M.T @ J @ M
    mu = float(np.sum(S * J) / (2 * n))
    residual = float(np.max(np.abs(S - mu * J))) / max(1.0, abs(mu))
    return mu, residual


def validate_cs(M, tol: float = DEFAULT_TOL) -> CSMatrix:
    """Check that ``M`` is conformally symplectic and recover its factor.

    Raises
    ------
    OddDimension
        ``M`` has odd size.
    Singular
        ``|det M| <= tol``.
    NotConformal
        The residual exceeds ``tol`` or the recovered factor is not positive.
    """
    M = np.asarray(M, dtype=float)
    _half_dim(M)
    if abs(np.linalg.det(M)) <= tol:
        raise Singular(f"|det M| = {abs(np.linalg.det(M)):.3e} <= {tol:.1e}")
    mu, residual = conformal_factor(M)
    if residual > tol:
        raise NotConformal(f"residual {residual:.3e} exceeds tolerance {tol:.1e}")
    if mu <= 0:
        raise NotConformal(f"conformal factor {mu:.6g} is not positive")
    return CSMatrix(M, mu, tol, residual)


# ---------------------------------------------------------------------------
# eigenvalue pairing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenPairing:
    pairs: tuple[tuple[complex, complex], ...]
    eigenvalues: np.ndarray
    mu: float
    hyperbolic: bool
    max_residual: float

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def eigen_pairing(
    M: CSMatrix,
    pair_tol: float = 1e-6,
    hyperbolic_tol: float = HYPERBOLIC_TOL,
) -> EigenPairing:
    """Match every eigenvalue ``lam`` with a partner ``lam'`` with ``lam*lam' = mu``.

    Candidate pairs are taken greedily by increasing relative cost
    ``|lam*lam'/mu - 1|``.  A complex pair ``lam, conj(lam)`` with
    ``|lam|^2 = mu`` pairs with itself; otherwise the partner of ``lam`` is
    ``mu/lam`` and conjugates end up in conjugate pairs.  Each pair is
    reported larger modulus first.
    """
    lam = np.linalg.eigvals(M.entries)
    mu = M.mu
    k = len(lam)
    cost = np.abs(np.outer(lam, lam) / mu - 1.0)
    order = sorted(
        ((cost[i, j], i, j) for i in range(k) for j in range(i + 1, k)),
        key=lambda item: (round(item[0], 12), item[1], item[2]),
    )
    taken = np.zeros(k, dtype=bool)
    pairs = []
    worst = 0.0
    for c, i, j in order:
        if taken[i] or taken[j]:
            continue
        if c > pair_tol:
            raise PairingFailure(
                f"eigenvalue {lam[i]:.6g} has no partner with product {mu:.6g} "
                f"(best relative mismatch {c:.2e})"
            )
        taken[i] = taken[j] = True
        a, b = (lam[i], lam[j]) if abs(lam[i]) >= abs(lam[j]) else (lam[j], lam[i])
        pairs.append((complex(a), complex(b)))
        worst = max(worst, abs(a * b - mu))
    if not taken.all():
        raise PairingFailure("eigenvalue matching left unpaired eigenvalues")
    moduli = np.abs(lam)
    hyperbolic = bool(np.all(np.abs(moduli - 1.0) > hyperbolic_tol))
    pairs.sort(key=lambda p: (-abs(p[0]), -p[0].imag))
    return EigenPairing(tuple(pairs), lam, mu, hyperbolic, float(worst))


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------


def conjugate_index(k: int, n: int) -> int:
    """Index of the symplectic partner coordinate, ``(k + n - 1) mod 2n + 1``."""
    return (k + n - 1) % (2 * n) + 1


def _check_index(k: int, n: int):
    if not 1 <= k <= 2 * n:
        raise IndexOutOfRange(f"index {k} outside 1..{2 * n}")


def rotation(theta: float, i: int, j: int, n: int) -> np.ndarray:
    """Plane rotation ``R^theta_{i,j}`` of R^{2n} (1-based indices).

    Entries ``(i,i), (i,j), (j,i), (j,j)`` are ``cos, -sin, sin, cos``.
    Swapping ``i`` and ``j`` reverses the rotation.
    """
    _check_index(i, n)
    _check_index(j, n)
    if i == j:
        raise IndexOutOfRange("rotation needs two distinct indices")
    R = np.eye(2 * n)
    c, s = np.cos(theta), np.sin(theta)
    a, b = i - 1, j - 1
    R[a, a] = c
    R[a, b] = -s
    R[b, a] = s
    R[b, b] = c
    return R


def paired_rotation(theta: float, i: int, j: int, n: int) -> np.ndarray:
    """Symplectic rotation acting on the plane (i, j) and its conjugate plane.

    * ``j`` conjugate to ``i``: the (i, j) plane is itself symplectic and
      ``R^theta_{i,j}`` is returned alone.
    * ``i, j`` on the same side of ``n``: ``R^theta_{ibar,jbar} R^theta_{i,j}``.
    * ``i, j`` on opposite sides: the conjugate plane must turn the other
      way, ``R^{-theta}_{ibar,jbar} R^theta_{i,j}``, otherwise the product
      does not preserve ``J``.
    """
    _check_index(i, n)
    _check_index(j, n)
    ib, jb = conjugate_index(i, n), conjugate_index(j, n)
    if j == ib:
        return rotation(theta, i, j, n)
    same_side = (i <= n) == (j <= n)
    partner = theta if same_side else -theta
    return rotation(partner, ib, jb, n) @ rotation(theta, i, j, n)


def mixing_isotopy(B: CSMatrix, j: int, k: int, alpha: float, t: float) -> CSMatrix:
    """``B_t = (paired rotation by t*alpha in the (j, k+1) plane) @ B``.

    The rotation is symplectic, so ``mu(B_t) = mu(B)`` for every ``t``.
    """
    n = B.n
    R = paired_rotation(t * alpha, j, k + 1, n)
    return CSMatrix(R @ B.entries, B.mu, B.tol)


# ---------------------------------------------------------------------------
# words and periodic linear systems
# ---------------------------------------------------------------------------


def word_product(word: Sequence[CSMatrix], tol: float = DEFAULT_TOL) -> CSMatrix:
    """Product of a word of CS matrices; the last letter acts first.

    The empty word is the identity with ``mu = 1`` (only possible when the
    dimension is known, so an explicit ``CSMatrix.identity`` is preferred).
    """
    if len(word) == 0:
        return CSMatrix.identity(1)
    dim = word[0].dim
    acc = np.eye(dim)
    mu = 1.0
    for letter in reversed(word):
        if letter.dim != dim:
            raise DimensionMismatch(f"letter of size {letter.dim} in a word of size {dim}")
        acc = letter.entries @ acc
        mu *= letter.mu
    return CSMatrix(acc, mu, tol)


@dataclass(frozen=True)
class PeriodicLinearSystem:
    """Finite CS linear system over a permutation of base points.

    ``letters[i]`` maps the fibre over ``points[i]`` to the fibre over
    ``points[successor[i]]``.  ``successor`` defaults to the single cycle
    ``i -> i+1 mod N``.  ``transitions[(i, j)]`` is a word carrying the fibre
    of point ``i`` to that of point ``j``.
    """

    points: tuple
    letters: tuple[CSMatrix, ...]
    successor: Optional[tuple[int, ...]] = None
    transitions: Optional[Mapping[tuple[int, int], Sequence[CSMatrix]]] = None

    def __post_init__(self):
        if len(self.points) != len(self.letters):
            raise DimensionMismatch("one letter per point is required")
        dims = {L.dim for L in self.letters}
        if len(dims) != 1:
            raise DimensionMismatch(f"letters have mixed sizes {sorted(dims)}")
        succ = self.successor
        if succ is None:
            succ = tuple((i + 1) % len(self.points) for i in range(len(self.points)))
        succ = tuple(int(s) for s in succ)
        if sorted(succ) != list(range(len(self.points))):
            raise ValueError("successor must be a permutation of the point indices")
        object.__setattr__(self, "successor", succ)
        object.__setattr__(self, "letters", tuple(self.letters))

    @property
    def dim(self) -> int:
        return self.letters[0].dim

    def orbit(self, i: int) -> list[int]:
        out = [i]
        j = self.successor[i]
        while j != i:
            out.append(j)
            j = self.successor[j]
        return out

    def period(self, i: int) -> int:
        return len(self.orbit(i))

    def iterate(self, i: int, steps: int) -> CSMatrix:
        """``A^steps(x_i) = A(f^{steps-1} x_i) ... A(x_i)``."""
        word = []
        j = i
        for _ in range(steps):
            word.append(self.letters[j])
            j = self.successor[j]
        return word_product(word[::-1]) if word else CSMatrix.identity(self.dim // 2)

    def forward(self, i: int, steps: int) -> int:
        j = i
        for _ in range(steps):
            j = self.successor[j]
        return j

    def period_matrix(self, i: int) -> CSMatrix:
        """``M_A(x_i)``, the product of the letters along the cycle of ``x_i``."""
        return self.iterate(i, self.period(i))

    def transition(self, i: int, j: int) -> CSMatrix:
        if self.transitions is not None and (i, j) in self.transitions:
            word = list(self.transitions[(i, j)])
            return word_product(word) if word else CSMatrix.identity(self.dim // 2)
        if i == j:
            return CSMatrix.identity(self.dim // 2)
        raise MissingTransition(f"no transition from point {i} to point {j}")


@dataclass(frozen=True)
class SplitSpec:
    """A splitting ``E = F + G``.

    Each of ``F``/``G`` is a list of 0-based column indices, one basis
    matrix (same subspace over every point) or a list of per-point basis
    matrices.
    """

    F: object
    G: object

    def bases(self, npoints: int, dim: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return _as_bases(self.F, npoints, dim), _as_bases(self.G, npoints, dim)


def _as_bases(spec, npoints, dim):
    if isinstance(spec, (list, tuple)) and spec and np.ndim(spec[0]) == 0:
        basis = np.eye(dim)[:, list(spec)]
        out = [basis] * npoints
    elif isinstance(spec, (list, tuple)) and spec and np.ndim(spec[0]) == 2:
        out = [np.asarray(b, dtype=float) for b in spec]
    else:
        b = np.asarray(spec, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        out = [b] * npoints
    if len(out) != npoints:
        raise DimensionMismatch("split needs one basis per point")
    out = [np.linalg.qr(b)[0] for b in out]
    for b in out:
        if np.linalg.matrix_rank(b) != b.shape[1]:
            raise ValueError("split basis is rank deficient")
    return out


def _check_split(system, Fb, Gb, angle_tol):
    for b in (Fb, Gb):
        pass
    full = np.hstack([Fb[0], Gb[0]])
    if full.shape[1] != system.dim or np.linalg.matrix_rank(full) != system.dim:
        raise ValueError("F and G do not span the whole space")
    for i, L in enumerate(system.letters):
        j = system.successor[i]
        for basis in (Fb, Gb):
            image = L.entries @ basis[i]
            ang = float(np.max(subspace_angles(image, basis[j])))
            if ang > angle_tol:
                raise NotInvariantSplit(
                    f"letter {i} moves the subspace off itself by {ang:.2e} rad"
                )


def l_domination_test(
    system: PeriodicLinearSystem, split: SplitSpec, l: int, angle_tol: float = 1e-8
) -> tuple[bool, float]:
    """Check ``||A^l(x)|_F|| * ||A^{-l}(f^l x)|_G|| < 1/2`` at every point.

    Returns the verdict and the worst (largest) product.
    """
    if l < 1:
        raise ValueError("l must be a positive integer")
    N = len(system.points)
    Fb, Gb = split.bases(N, system.dim)
    _check_split(system, Fb, Gb, angle_tol)
    worst = 0.0
    for i in range(N):
        Al = system.iterate(i, l).entries
        j = system.forward(i, l)
        on_F = np.linalg.norm(Al @ Fb[i], 2)
        on_G = np.linalg.norm(np.linalg.solve(Al, Gb[j]), 2)
        worst = max(worst, float(on_F * on_G))
    return worst < 0.5, worst


# ---------------------------------------------------------------------------
# two-dimensional complexification
# ---------------------------------------------------------------------------


def mane_complexify(M, alpha: float, grid: float = 1e-3) -> Optional[float]:
    """Smallest ``|s|`` on a grid of [-1, 1] making ``R^{s*alpha} M`` complex.

    Uses ``det(R M) = det M`` and the closed-form trace
    ``tr(R^phi M) = cos(phi) tr(M) + sin(phi) (m12 - m21)``.  Ties in ``|s|``
    resolve to the positive value.  Returns ``None`` if no grid point has a
    negative discriminant.
    """
    M = np.asarray(getattr(M, "entries", M), dtype=float)
    if M.shape != (2, 2):
        raise DimensionMismatch("mane_complexify expects a 2x2 matrix")
    det = float(np.linalg.det(M))
    if det <= 0:
        raise ValueError("matrix must preserve orientation (det > 0)")
    steps = int(round(1.0 / grid))
    k = np.arange(steps + 1)
    s = np.empty(2 * steps + 1)
    s[0] = 0.0
    s[1::2] = k[1:] * grid
    s[2::2] = -k[1:] * grid
    phi = s * alpha
    tr = np.cos(phi) * (M[0, 0] + M[1, 1]) + np.sin(phi) * (M[0, 1] - M[1, 0])
    hit = np.flatnonzero(tr * tr - 4.0 * det < 0)
    return float(s[hit[0]]) if hit.size else None


def eigenspace_angle(M) -> float:
    """Angle between the two real eigendirections of a 2x2 matrix (pi/2 max)."""
    w, V = np.linalg.eig(np.asarray(M, dtype=float))
    if np.iscomplexobj(w) and np.any(np.abs(np.imag(w)) > 0):
        return 0.0
    V = np.real(V)
    c = abs(V[:, 0] @ V[:, 1]) / (np.linalg.norm(V[:, 0]) * np.linalg.norm(V[:, 1]))
    return float(np.arccos(min(1.0, c)))


# ---------------------------------------------------------------------------
# homothety search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomothetyResult:
    word: tuple[tuple[int, int], ...]  # ((point, power), ...) in the order applied
    product: CSMatrix
    scale: float
    kind: str  # "contraction" | "dilation" | "unimodular"

    def describe(self) -> str:
        parts = [f"M(x{i})^{a}" for i, a in self.word]
        return " -> ".join(parts)


def _homothety_scale(P: np.ndarray, eps: float) -> Optional[float]:
    s = float(np.trace(P)) / P.shape[0]
    if np.linalg.norm(P - s * np.eye(P.shape[0])) <= eps * np.linalg.norm(P):
        return s
    return None


def homothety_search(
    system: PeriodicLinearSystem,
    eps: float,
    max_len: int,
    max_points: int = 3,
    require_strict: bool = False,
    unit_tol: float = 1e-9,
) -> Optional[HomothetyResult]:
    """Breadth-first search for a word whose product is close to ``s * I``.

    Words follow the transition form

        t^{i1,im} M(x_im)^{am} t^{im,i(m-1)} ... t^{i2,i1} M(x_i1)^{a1}

    with ``m <= max_points`` blocks and total power ``a1 + ... + am <= max_len``.
    They are visited by increasing total power, then block count, then
    lexicographically, and the first one with ``||P - sI|| <= eps ||P||``
    is returned.

    If every letter has ``mu == 1`` every product has determinant one, so
    a homothety can only be ``+-I``.  With ``require_strict`` the search
    then returns ``None`` straight away, as no contraction or dilation can exist.
    """
    npts = len(system.points)
    mus = np.array([L.mu for L in system.letters])
    if require_strict and np.all(np.abs(mus - 1.0) <= unit_tol):
        return None
    period = [system.period_matrix(i) for i in range(npts)]
    queue = deque()
    for total in range(1, max_len + 1):
        for m in range(1, max_points + 1):
            if m > total:
                break
            for powers in _compositions(total, m):
                for idx in itertools.product(range(npts), repeat=m):
                    queue.append(tuple(zip(idx, powers)))
        while queue:
            word = queue.popleft()
            P = _evaluate_word(system, period, word)
            s = _homothety_scale(P.entries, eps)
            if s is None:
                continue
            kind = "unimodular"
            if abs(abs(s) - 1.0) > unit_tol:
                kind = "contraction" if abs(s) < 1 else "dilation"
            if require_strict and kind == "unimodular":
                continue
            return HomothetyResult(word, P, s, kind)
    return None


def _compositions(total, parts):
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(bounds[k + 1] - bounds[k] for k in range(parts))


def _evaluate_word(system, period, word) -> CSMatrix:
    letters = []
    m = len(word)
    for k, (i, a) in enumerate(word):
        letters.append(period[i].power(a))
        nxt = word[(k + 1) % m][0]
        letters.append(system.transition(i, nxt))
    # letters were gathered in the order they act; reverse for the product
    return word_product(letters[::-1])


# ---------------------------------------------------------------------------
# infinitesimally CS matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfinitesimalCS:
    entries: np.ndarray
    v: float
    residual: float
    alpha_symmetry: float
    gamma_symmetry: float
    blocks: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))


def infinitesimal_cs_check(Y, tol: float = 1e-8) -> InfinitesimalCS:
    """Verify ``Y.T J + J Y = v J`` and return ``v`` with the block data.

    The blocks are ``Y = [[beta, gamma], [alpha, delta]]``; for a valid
    matrix ``alpha`` and ``gamma`` are symmetric and ``delta = v I - beta.T``.
    The residual is relative to ``max(1, ||Y||)``.
    """
    Y = np.asarray(Y, dtype=float)
    n = _half_dim(Y)
    J = standard_J(n)
    S = Y.T @ J + J @ Y
    v = float(np.sum(S * J) / (2 * n))
    scale = max(1.0, float(np.max(np.abs(Y))))
    residual = float(np.max(np.abs(S - v * J))) / scale
    beta, gamma = Y[:n, :n], Y[:n, n:]
    alpha, delta = Y[n:, :n], Y[n:, n:]
    a_sym = float(np.max(np.abs(alpha - alpha.T))) / scale
    g_sym = float(np.max(np.abs(gamma - gamma.T))) / scale
    if residual > tol:
        raise NotInfinitesimallyCS(f"residual {residual:.3e} exceeds {tol:.1e}")
    blocks = {"beta": beta, "gamma": gamma, "alpha": alpha, "delta": delta}
    return InfinitesimalCS(Y, v, residual, a_sym, g_sym, blocks)
