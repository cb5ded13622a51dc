"""Functionals as finite signed point measures, support boxes, primitive polynomials.

A functional is a finite list of atoms (point, weight, derivative multi-index)
and acts on a smooth function v as the sum of weight * (D^deriv v)(point).
Dirac evaluations, divided differences and quadrature rules are all of this
form. The primitive space against which samplets gain vanishing moments is the
space of polynomials up to a fixed total degree, represented in coordinates
affinely rescaled to a reference box.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .kernels import falling_factorial_table


def moment_dimension(dimension, degree):
    """Number of monomials of total degree <= degree in the given dimension."""
    if dimension < 1 or degree < 0:
        raise InputError("need dimension >= 1 and degree >= 0")
    return math.comb(dimension + degree, degree)


def _as_point(x, name="point"):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1 or x.size == 0:
        raise InputError(f"{name} must be a 1d coordinate array")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} must be finite")
    return x


@dataclass
class Atom:
    """One summand of a functional: weight times a point derivative evaluation."""

    point: np.ndarray
    weight: float
    deriv: np.ndarray = None

    def __post_init__(self):
        self.point = _as_point(self.point)
        self.weight = float(self.weight)
        if not np.isfinite(self.weight):
            raise InputError("atom weight must be finite")
        if self.deriv is None:
            self.deriv = np.zeros(self.point.size, dtype=np.int64)
        else:
            self.deriv = np.atleast_1d(np.asarray(self.deriv, dtype=np.int64))
        if self.deriv.shape != self.point.shape:
            raise InputError("derivative multi-index must match the point dimension")
        if np.any(self.deriv < 0):
            raise InputError("derivative orders must be nonnegative")

    @property
    def dimension(self):
        return self.point.size


@dataclass
class Functional:
    """A compactly supported functional given by finitely many atoms."""

    id: int
    atoms: tuple

    def __post_init__(self):
        self.id = int(self.id)
        self.atoms = tuple(self.atoms)
        if not self.atoms:
            raise InputError(f"functional {self.id} has no atoms")
        d = self.atoms[0].dimension
        for a in self.atoms:
            if not isinstance(a, Atom):
                raise InputError("atoms must be Atom instances")
            if a.dimension != d:
                raise InputError(f"functional {self.id} mixes atom dimensions")

    @property
    def dimension(self):
        return self.atoms[0].dimension

    def max_derivative_order(self):
        return max(int(a.deriv.sum()) for a in self.atoms)


def dirac(fid, point):
    """Point evaluation functional."""
    return Functional(fid, (Atom(point, 1.0),))


@dataclass(frozen=True)
class SupportBox:
    """Axis-aligned bounding box, possibly degenerate in some coordinates."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_point(self.lower, "lower")
        hi = _as_point(self.upper, "upper")
        if lo.shape != hi.shape:
            raise InputError("box corner dimensions differ")
        if np.any(lo > hi):
            raise InputError("box lower corner exceeds upper corner")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_points(cls, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def dimension(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def halfwidth(self):
        return 0.5 * (self.upper - self.lower)

    @property
    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x, tol=0.0):
        x = _as_point(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def contains_box(self, other, tol=0.0):
        return bool(
            np.all(other.lower >= self.lower - tol)
            and np.all(other.upper <= self.upper + tol)
        )

    def intersects(self, other):
        return bool(
            np.all(self.lower <= other.upper) and np.all(other.lower <= self.upper)
        )

    def union(self, other):
        if other.dimension != self.dimension:
            raise InputError("cannot union boxes of different dimensions")
        return SupportBox(
            np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper)
        )

    def distance(self, other):
        """Euclidean distance between the boxes, 0 when they intersect."""
        if other.dimension != self.dimension:
            raise InputError("cannot measure distance between boxes of different dimensions")
        g = np.maximum(self.lower - other.upper, other.lower - self.upper)
        np.maximum(g, 0.0, out=g)
        return float(np.linalg.norm(g))


def box_affine(box):
    """Center and per-coordinate scale mapping the box onto [-1, 1]^d.

    Degenerate coordinates (zero width) keep scale 1 so the map stays a shift.
    """
    if box is None:
        raise InputError("box required")
    half = box.halfwidth
    scale = np.where(half > 0.0, half, 1.0)
    return box.center, scale


def support_box(functional):
    """Smallest axis-aligned box containing all atom points of the functional."""
    pts = np.array([a.point for a in functional.atoms])
    return SupportBox.from_points(pts)


@dataclass
class Polynomial:
    """Polynomial in affinely shifted and scaled coordinates u = (x - center) / scale."""

    exponents: np.ndarray
    coefficients: np.ndarray
    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.exponents = np.atleast_2d(np.asarray(self.exponents, dtype=np.int64))
        self.coefficients = np.atleast_1d(np.asarray(self.coefficients, dtype=np.float64))
        self.center = _as_point(self.center, "center")
        self.scale = _as_point(self.scale, "scale")
        if self.exponents.shape[0] != self.coefficients.shape[0]:
            raise InputError("one coefficient per exponent row required")
        if self.exponents.shape[1] != self.center.size or self.center.size != self.scale.size:
            raise InputError("inconsistent polynomial dimensions")
        if np.any(self.exponents < 0):
            raise InputError("exponents must be nonnegative")
        if np.any(self.scale <= 0.0):
            raise InputError("scales must be positive")

    @classmethod
    def monomial(cls, exponent, center=None, scale=None):
        exponent = np.atleast_1d(np.asarray(exponent, dtype=np.int64))
        d = exponent.size
        if center is None:
            center = np.zeros(d)
        if scale is None:
            scale = np.ones(d)
        return cls(exponent[None, :], np.ones(1), center, scale)

    @property
    def dimension(self):
        return self.exponents.shape[1]

    @property
    def degree(self):
        return int(self.exponents.sum(axis=1).max())

    def _scaled(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dimension:
            raise InputError(
                f"point dimension {x.shape[1]} does not match polynomial dimension {self.dimension}"
            )
        return (x - self.center) / self.scale, single

    def __call__(self, x):
        u, single = self._scaled(x)
        vals = (u[:, None, :] ** self.exponents[None, :, :]).prod(axis=-1) @ self.coefficients
        return float(vals[0]) if single else vals

    def deriv_eval(self, x, nu):
        """Evaluate the mixed partial derivative D^nu of the polynomial at x."""
        nu = np.atleast_1d(np.asarray(nu, dtype=np.int64))
        if nu.size != self.dimension or np.any(nu < 0):
            raise InputError("derivative multi-index must be nonnegative and match dimension")
        if not nu.any():
            return self(x)
        u, single = self._scaled(x)
        ff = falling_factorial_table(max(int(self.exponents.max()), int(nu.max())))
        e = self.exponents
        alive = (nu[None, :] <= e).all(axis=1)
        red = np.maximum(e - nu[None, :], 0)
        fac = ff[e, nu[None, :]].prod(axis=1) / np.prod(self.scale ** nu)
        terms = (u[:, None, :] ** red[None, :, :]).prod(axis=-1)
        vals = terms @ (self.coefficients * fac * alive)
        return float(vals[0]) if single else vals

    def _same_frame(self, other):
        return (
            np.array_equal(self.center, other.center)
            and np.array_equal(self.scale, other.scale)
        )

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        if not self._same_frame(other):
            raise InputError("polynomials use different affine frames")
        return Polynomial(
            np.vstack((self.exponents, other.exponents)),
            np.concatenate((self.coefficients, other.coefficients)),
            self.center,
            self.scale,
        )

    def __rmul__(self, alpha):
        return Polynomial(self.exponents, float(alpha) * self.coefficients, self.center, self.scale)

    __mul__ = __rmul__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-other)


def graded_exponents(dimension, degree):
    """Exponent rows of all monomials of total degree <= degree.

    Graded order: total degree first, then within a degree the first
    coordinate dominates, so for d=2 the order is 1, t1, t2, t1^2, t1 t2, ...
    """
    combos = itertools.product(range(degree + 1), repeat=dimension)
    kept = [c for c in combos if sum(c) <= degree]
    kept.sort(key=lambda c: (sum(c), c[::-1]))
    return np.array(kept, dtype=np.int64).reshape(len(kept), dimension)


@dataclass
class PrimitiveBasis:
    """Monomial basis of the primitive polynomial space on a reference box."""

    dimension: int
    degree: int
    box: object
    exponents: np.ndarray = field(repr=False)
    center: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    elements: list = field(repr=False)

    @property
    def size(self):
        return self.exponents.shape[0]


def primitive_basis(dimension, degree, box=None):
    """Monomials spanning polynomials of total degree <= degree.

    When a box is given the monomials are taken in coordinates rescaled so the
    box maps onto [-1, 1]^d, which keeps evaluation tables well conditioned.
    Degenerate box coordinates are only shifted, not scaled.
    """
    dimension = int(dimension)
    degree = int(degree)
    if dimension < 1:
        raise InputError("dimension must be at least 1")
    if degree < 0:
        raise InputError("degree must be nonnegative")
    if box is None:
        center = np.zeros(dimension)
        scale = np.ones(dimension)
    else:
        if box.dimension != dimension:
            raise InputError("box dimension does not match")
        center, scale = box_affine(box)
    exps = graded_exponents(dimension, degree)
    elements = [Polynomial.monomial(e, center, scale) for e in exps]
    basis = PrimitiveBasis(dimension, degree, box, exps, center, scale, elements)
    assert basis.size == moment_dimension(dimension, degree)
    return basis


def evaluate(functional, p):
    """Apply the functional to a polynomial: sum of weight * (D^deriv p)(point)."""
    if p.dimension != functional.dimension:
        raise InputError(
            f"functional dimension {functional.dimension} does not match polynomial dimension {p.dimension}"
        )
    total = 0.0
    for a in functional.atoms:
        total += a.weight * p.deriv_eval(a.point, a.deriv)
    return float(total)


def analysis_vector(functionals, v):
    """Apply every functional to a test function v, returning one value each.

    v may be a Polynomial, a plain callable of a coordinate array (enough when
    no atom carries derivatives), or any object with a derivative(point, nu)
    method for functionals with derivative atoms.
    """
    out = np.empty(len(functionals))
    is_poly = isinstance(v, Polynomial)
    for i, f in enumerate(functionals):
        acc = 0.0
        for a in f.atoms:
            if is_poly:
                acc += a.weight * v.deriv_eval(a.point, a.deriv)
            elif not a.deriv.any():
                acc += a.weight * float(v(a.point))
            elif hasattr(v, "derivative"):
                acc += a.weight * float(v.derivative(a.point, a.deriv))
            else:
                raise InputError(
                    "test function must provide derivative(point, nu) for derivative atoms"
                )
        out[i] = acc
    return out


@dataclass
class PackedFunctionals:
    """Atom data of a functional set in flat arrays for the numeric kernels."""

    points: np.ndarray
    weights: np.ndarray
    derivs: np.ndarray
    offsets: np.ndarray
    dimension: int

    @property
    def count(self):
        return self.offsets.size - 1


def pack_functionals(functionals):
    if not functionals:
        raise InputError("need at least one functional")
    d = functionals[0].dimension
    counts = []
    for f in functionals:
        if f.dimension != d:
            raise InputError("functionals mix dimensions")
        counts.append(len(f.atoms))
    offsets = np.zeros(len(functionals) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    points = np.empty((total, d))
    weights = np.empty(total)
    derivs = np.empty((total, d), dtype=np.int64)
    t = 0
    for f in functionals:
        for a in f.atoms:
            points[t] = a.point
            weights[t] = a.weight
            derivs[t] = a.deriv
            t += 1
    return PackedFunctionals(points, weights, derivs, offsets, d)


def functional_boxes(functionals):
    """Per-functional support box corners as (lo, hi) arrays of shape (n, d)."""
    packed = pack_functionals(functionals)
    n = packed.count
    lo = np.empty((n, packed.dimension))
    hi = np.empty((n, packed.dimension))
    for i in range(n):
        pts = packed.points[packed.offsets[i]:packed.offsets[i + 1]]
        lo[i] = pts.min(axis=0)
        hi[i] = pts.max(axis=0)
    return lo, hi
