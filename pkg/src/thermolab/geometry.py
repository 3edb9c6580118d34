"""
Conformal torus charts, Christoffel symbols, curvature and closed 1-forms.

Everything lives on the unit torus R^2 / Z^2 with metric ``g = exp(2f) (dx^2 + dy^2)``.
Scalar functions are trigonometric polynomials stored as rows ``[kx, ky, a, b]``
meaning ``a cos(2 pi (kx x + ky y)) + b sin(2 pi (kx x + ky y))``, which keeps
periodicity and all derivatives exact.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


class Jet(NamedTuple):
    """Value and partial derivatives up to second order."""

    val: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray


class TrigPolynomial:
    """Real trigonometric polynomial on the unit torus."""

    def __init__(self, terms=None):
        if terms is None or len(terms) == 0:
            arr = np.zeros((0, 4))
        else:
            arr = np.array(terms, dtype=float).reshape(-1, 4)
        if arr.shape[0] and not np.all(arr[:, :2] == np.round(arr[:, :2])):
            raise ValueError("wave numbers kx, ky must be integers")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trigonometric coefficients must be finite")
        arr.setflags(write=False)
        self.terms = arr

    def __repr__(self):
        return f"TrigPolynomial({self.terms.tolist()!r})"

    def __eq__(self, other):
        return isinstance(other, TrigPolynomial) and np.array_equal(self.terms, other.terms)

    def __hash__(self):
        return hash(self.terms.tobytes())

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return TrigPolynomial(np.vstack([self.terms, other.terms]))

    def scaled(self, c: float) -> "TrigPolynomial":
        t = self.terms.copy()
        t[:, 2:] *= c
        return TrigPolynomial(t)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.terms[:, 2:])

    @classmethod
    def zero(cls) -> "TrigPolynomial":
        return cls()

    @classmethod
    def random(cls, rng, nterms=3, amplitude=0.1, kmax=2) -> "TrigPolynomial":
        """Random non-constant polynomial with coefficients in [-amplitude, amplitude]."""
        rows = []
        for _ in range(nterms):
            kx, ky = 0, 0
            while kx == 0 and ky == 0:
                kx, ky = rng.integers(-kmax, kmax + 1, size=2)
            a, b = rng.uniform(-amplitude, amplitude, size=2)
            rows.append([kx, ky, a, b])
        return cls(rows)

    def jet(self, x, y) -> Jet:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = [np.zeros(np.broadcast(x, y).shape) for _ in range(6)]
        for kx, ky, a, b in self.terms:
            ph = TWO_PI * (kx * x + ky * y)
            c, s = np.cos(ph), np.sin(ph)
            w = a * c + b * s
            dw = TWO_PI * (b * c - a * s)
            ddw = -(TWO_PI**2) * w
            out[0] += w
            out[1] += kx * dw
            out[2] += ky * dw
            out[3] += kx * kx * ddw
            out[4] += kx * ky * ddw
            out[5] += ky * ky * ddw
        return Jet(*out)

    def __call__(self, x, y):
        return self.jet(x, y).val

    def to_list(self) -> list:
        return self.terms.tolist()


class QuadraticChart:
    """Non-periodic test function ``(a x^2 + b y^2) / 2`` with exact derivatives.

    Only used to check curvature formulas away from the torus setting.
    """

    def __init__(self, a: float = 1.0, b: float = 1.0):
        self.a, self.b = float(a), float(b)

    def jet(self, x, y) -> Jet:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        one = np.ones(np.broadcast(x, y).shape)
        return Jet(
            0.5 * (self.a * x * x + self.b * y * y),
            self.a * x * one,
            self.b * y * one,
            self.a * one,
            0.0 * one,
            self.b * one,
        )

    def __call__(self, x, y):
        return self.jet(x, y).val


@dataclass(frozen=True)
class ChartPoint:
    """Point of the torus, stored with its canonical representative in [0, 1)^2."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % 1.0)
        object.__setattr__(self, "y", float(self.y) % 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _xy(p):
    if isinstance(p, ChartPoint):
        return p.x, p.y
    x, y = p
    if np.ndim(x) or np.ndim(y):
        return np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return float(x), float(y)


@dataclass(frozen=True)
class ConformalMetric:
    """``g = exp(2 f) * identity``; ``kind`` is ``"flat"`` when ``f`` vanishes."""

    f: object = field(default_factory=TrigPolynomial.zero)

    @property
    def kind(self) -> str:
        if isinstance(self.f, TrigPolynomial) and self.f.is_zero:
            return "flat"
        return "conformal"

    def factor(self, p) -> float:
        x, y = _xy(p)
        return float(np.exp(2.0 * self.f(x, y)))

    def inner(self, p, u, w) -> float:
        return self.factor(p) * float(np.dot(u, w))

    def norm(self, p, u) -> float:
        return float(np.sqrt(self.inner(p, u, u)))

    def tensor(self, p) -> np.ndarray:
        return self.factor(p) * np.eye(2)

    def unit_vector(self, p, angle: float) -> np.ndarray:
        """Unit vector making chart angle ``angle`` with the x axis."""
        x, y = _xy(p)
        return np.exp(-self.f(x, y)) * np.array([np.cos(angle), np.sin(angle)])

    def normal(self, p, v) -> np.ndarray:
        """Unit normal ``n`` with ``(v, n)`` positively oriented."""
        n = np.array([-v[1], v[0]], dtype=float)
        return n / self.norm(p, n)


@dataclass(frozen=True)
class ClosedFormField:
    """``gamma = c1 dx + c2 dy + dU``; the field is ``E = gamma^sharp``."""

    c1: float = 0.0
    c2: float = 0.0
    U: TrigPolynomial = field(default_factory=TrigPolynomial.zero)

    def gamma(self, p) -> np.ndarray:
        x, y = _xy(p)
        j = self.U.jet(x, y)
        return np.array([self.c1 + j.dx, self.c2 + j.dy])

    def gamma_jacobian(self, p) -> np.ndarray:
        """``D[i, k] = d gamma_k / d x_i`` (symmetric because gamma is closed)."""
        x, y = _xy(p)
        j = self.U.jet(x, y)
        return np.array([[float(j.dxx), float(j.dxy)], [float(j.dxy), float(j.dyy)]])

    def with_harmonic(self, c1: float, c2: float) -> "ClosedFormField":
        return ClosedFormField(float(c1), float(c2), self.U)


@dataclass(frozen=True)
class Scenario:
    """A conformal torus chart with a closed-form field; the unit of every experiment."""

    metric: ConformalMetric = field(default_factory=ConformalMetric)
    field: ClosedFormField = field(default_factory=ClosedFormField)
    name: str = "scenario"

    def kernel_params(self):
        """Arrays consumed by the compiled integrators."""
        f = self.metric.f
        if not isinstance(f, TrigPolynomial):
            raise TypeError("compiled integrators need a trigonometric conformal factor")
        return (
            np.ascontiguousarray(f.terms, dtype=float),
            float(self.field.c1),
            float(self.field.c2),
            np.ascontiguousarray(self.field.U.terms, dtype=float),
        )

    def with_field(self, fld: ClosedFormField) -> "Scenario":
        return Scenario(self.metric, fld, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "metric": {"kind": self.metric.kind, "f": self.metric.f.to_list()},
            "field": {"c1": self.field.c1, "c2": self.field.c2, "U": self.field.U.to_list()},
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


# ---------------------------------------------------------------------------
# pointwise geometry
# ---------------------------------------------------------------------------


def christoffel_eval(metric: ConformalMetric, p) -> np.ndarray:
    """Christoffel symbols ``G[k, i, j]`` of ``exp(2f)`` times the flat metric."""
    x, y = _xy(p)
    j = metric.f.jet(x, y)
    fx, fy = float(j.dx), float(j.dy)
    G = np.empty((2, 2, 2))
    G[0] = [[fx, fy], [fy, -fx]]
    G[1] = [[-fy, fx], [fx, fy]]
    return G


def gauss_curvature(metric: ConformalMetric, p) -> float:
    """``K = -exp(-2f) (f_xx + f_yy)``."""
    x, y = _xy(p)
    j = metric.f.jet(x, y)
    return float(-np.exp(-2.0 * j.val) * (j.dxx + j.dyy))


class FieldValue(NamedTuple):
    E: np.ndarray
    gamma: np.ndarray
    gamma_v: Optional[float]


def field_eval(fld: ClosedFormField, metric: ConformalMetric, p, v=None) -> FieldValue:
    """``gamma`` at ``p``, ``E = exp(-2f) gamma`` and optionally ``gamma(v)``."""
    gam = fld.gamma(p)
    E = gam / metric.factor(p)
    gv = None if v is None else float(gam @ np.asarray(v, dtype=float))
    return FieldValue(E, gam, gv)


def field_jacobian(fld: ClosedFormField, metric: ConformalMetric, p) -> np.ndarray:
    """Chart partials ``dE[k, i] = d E^k / d x_i``."""
    x, y = _xy(p)
    j = metric.f.jet(x, y)
    grad_f = np.array([float(j.dx), float(j.dy)])
    gam = fld.gamma(p)
    D = fld.gamma_jacobian(p)  # D[i, k]
    return np.exp(-2.0 * float(j.val)) * (D.T - 2.0 * np.outer(gam, grad_f))


def covariant_derivative(metric: ConformalMetric, X, Y, p, dY) -> np.ndarray:
    """Levi-Civita ``nabla_X Y`` given chart partials ``dY[k, i] = d Y^k / d x_i``."""
    G = christoffel_eval(metric, p)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return np.asarray(dY, dtype=float) @ X + np.einsum("kij,i,j->k", G, X, Y)


def weyl_covariant_derivative(metric, fld, X, Y, p, dY) -> np.ndarray:
    """``nabla_X Y - <X, Y> E + gamma(Y) X + gamma(X) Y``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    fv = field_eval(fld, metric, p)
    base = covariant_derivative(metric, X, Y, p, dY)
    return base - metric.inner(p, X, Y) * fv.E + (fv.gamma @ Y) * X + (fv.gamma @ X) * Y


def closedness_residual(g1, g2, h: float) -> float:
    """Largest ``|d g2/dx - d g1/dy|`` over interior grid nodes.

    ``g1[i, j]`` and ``g2[i, j]`` sample the form at ``(x_i, y_j)`` on a grid
    of spacing ``h`` in both directions.
    """
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if g1.shape != g2.shape or g1.ndim != 2 or min(g1.shape) < 3:
        raise ValueError("need two equally shaped 2-D grids of at least 3x3 nodes")
    d2dx = (g2[2:, 1:-1] - g2[:-2, 1:-1]) / (2 * h)
    d1dy = (g1[1:-1, 2:] - g1[1:-1, :-2]) / (2 * h)
    return float(np.max(np.abs(d2dx - d1dy)))


def sample_form(fld: ClosedFormField, h: float, x0=0.0, y0=0.0, n=None):
    """Sample ``gamma`` on an ``n x n`` grid of spacing ``h`` (default covers [0,1))."""
    if n is None:
        n = int(round(1.0 / h))
    xs = x0 + h * np.arange(n)
    ys = y0 + h * np.arange(n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    j = fld.U.jet(X, Y)
    return fld.c1 + j.dx, fld.c2 + j.dy
