"""Finite frame operations: Gram models, dual bases, frame bounds, decay reports.

A Gram model pairs the functional set with itself through an inner product
(kernel reproducing kernels, P1 finite element mass matrices, or the Green
function of the 1d Dirichlet Laplacian). Dual coefficients invert the Gram
matrix, frame bounds are its extreme eigenvalues, and the decay report
measures how samplet coefficients of smooth data shrink with cluster size.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve, eigh as dense_eigh
from scipy.sparse.linalg import eigsh
from scipy.spatial.distance import cdist

from .errors import ConditionNumberError, InputError, NumericalError
from .measures import Atom, Functional

_DENSE_BOUNDS_LIMIT = 2048
_COND_CAP = 1e12
_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class Kernel:
    """Provenance tag: reproducing kernel Gram matrix."""

    name: str
    length_scale: float


@dataclass(frozen=True)
class Mass:
    """Provenance tag: P1 finite element mass matrix."""

    description: str


@dataclass(frozen=True)
class Green:
    """Provenance tag: Green function of an invertible operator."""

    description: str


@dataclass
class GramModel:
    """Symmetric positive definite pairing of a functional set with itself."""

    matrix: np.ndarray
    provenance: object
    mu: float = 0.0

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise InputError("Gram matrix must be square")
        if self.mu < 0.0:
            raise InputError("regularization shift must be nonnegative")

    @property
    def n(self):
        return self.matrix.shape[0]

    def effective(self):
        """The matrix actually inverted: Gram plus the recorded shift."""
        if self.mu == 0.0:
            return self.matrix
        return self.matrix + self.mu * np.eye(self.n)


_KERNELS = {
    "exponential": lambda r, ell: np.exp(-r / ell),
    "gaussian": lambda r, ell: np.exp(-(r**2) / (2.0 * ell**2)),
    "matern32": lambda r, ell: (1.0 + _SQRT3 * r / ell) * np.exp(-_SQRT3 * r / ell),
}


def gram_kernel(points, kernel="exponential", length_scale=1.0, regularize=False):
    """Kernel Gram matrix of Dirac functionals at pairwise distinct points.

    kernel is one of "exponential", "gaussian", "matern32". With regularize
    a Tikhonov shift mu = 1e-12 * trace(G) / N is recorded on the model for
    nearly coincident points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.ndim != 2 or points.size == 0:
        raise InputError("points must form an (n, d) array")
    if not np.all(np.isfinite(points)):
        raise InputError("points must be finite")
    if kernel not in _KERNELS:
        raise InputError(f"unknown kernel {kernel!r}, expected one of {sorted(_KERNELS)}")
    if not length_scale > 0.0:
        raise InputError("length_scale must be positive")
    uniq = np.unique(points, axis=0)
    if uniq.shape[0] != points.shape[0]:
        raise InputError("kernel Gram matrix needs pairwise distinct points")
    r = cdist(points, points)
    g = _KERNELS[kernel](r, float(length_scale))
    mu = 1e-12 * float(np.trace(g)) / g.shape[0] if regularize else 0.0
    return GramModel(g, Kernel(kernel, float(length_scale)), mu)


def gram_mass_p1(mesh):
    """P1 mass matrix on a 1d mesh and the matching quadrature functionals.

    The mesh holds at least three strictly increasing nodes. One functional
    per interior node integrates v against that node's hat function with a
    two point Gauss rule per element, exact for the piecewise cubic products
    that arise, so the assembled pairings reproduce the closed form
    tridiagonal mass matrix.
    """
    mesh = np.atleast_1d(np.asarray(mesh, dtype=np.float64))
    if mesh.ndim != 1 or mesh.size < 3:
        raise InputError("mesh needs at least three nodes")
    if not np.all(np.isfinite(mesh)):
        raise InputError("mesh nodes must be finite")
    h = np.diff(mesh)
    if np.any(h <= 0.0):
        raise InputError("mesh nodes must be strictly increasing")
    n = mesh.size - 2
    diag = (h[:-1] + h[1:]) / 3.0
    off = h[1:-1] / 6.0
    g = np.diag(diag)
    if n > 1:
        g += np.diag(off, 1) + np.diag(off, -1)
    half = 0.5 / _SQRT3
    functionals = []
    for i in range(n):
        xl, xm, xr = mesh[i], mesh[i + 1], mesh[i + 2]
        atoms = []
        for a, b, rising in ((xl, xm, True), (xm, xr, False)):
            width = b - a
            mid = 0.5 * (a + b)
            for gp in (mid - width * half, mid + width * half):
                hat = (gp - a) / width if rising else (b - gp) / width
                atoms.append(Atom(np.array([gp]), 0.5 * width * hat))
        functionals.append(Functional(i, tuple(atoms)))
    model = GramModel(g, Mass(f"p1 hats on {mesh.size} nodes in [{mesh[0]}, {mesh[-1]}]"))
    return model, functionals


def gram_green_1d(points):
    """Gram matrix of Diracs under the Green function min(x,y) - xy on (0,1)."""
    points = np.atleast_1d(np.asarray(points, dtype=np.float64))
    if points.ndim != 1 or points.size == 0:
        raise InputError("points must be a 1d array")
    if not np.all(np.isfinite(points)):
        raise InputError("points must be finite")
    if np.any(points <= 0.0) or np.any(points >= 1.0):
        raise InputError("Green function points must lie strictly inside (0, 1)")
    if np.unique(points).size != points.size:
        raise InputError("Green Gram matrix needs pairwise distinct points")
    g = np.minimum(points[:, None], points[None, :]) - points[:, None] * points[None, :]
    return GramModel(g, Green("dirichlet laplacian on (0, 1)"))


def _spd_extremes(model):
    g = model.effective()
    n = g.shape[0]
    if sparse.issparse(g):
        lo = float(eigsh(g, k=1, which="SA", return_eigenvectors=False)[0])
        hi = float(eigsh(g, k=1, which="LA", return_eigenvectors=False)[0])
        return lo, hi
    if n <= _DENSE_BOUNDS_LIMIT:
        w = np.linalg.eigvalsh(g)
        return float(w[0]), float(w[-1])
    lo = float(dense_eigh(g, subset_by_index=[0, 0], eigvals_only=True)[0])
    hi = float(dense_eigh(g, subset_by_index=[n - 1, n - 1], eigvals_only=True)[0])
    return lo, hi


@dataclass(frozen=True)
class FrameBounds:
    """Extreme eigenvalues of a Gram matrix: lower and upper frame constants."""

    lower: float
    upper: float

    @property
    def condition(self):
        return self.upper / self.lower


def frame_bounds(model):
    """Frame bounds of the Gram model; rejects non positive definite input."""
    lo, hi = _spd_extremes(model)
    if lo <= 0.0:
        raise NumericalError(f"Gram matrix is not positive definite (lambda_min = {lo:.3e})")
    return FrameBounds(lo, hi)


def _spd_solve(model, rhs, cond_cap=_COND_CAP):
    g = model.effective()
    w = np.linalg.eigvalsh(g)
    if w[0] <= 0.0:
        raise NumericalError(
            f"Gram matrix is not positive definite (lambda_min = {w[0]:.3e})"
        )
    cond = float(w[-1] / w[0])
    if cond > cond_cap:
        raise ConditionNumberError(
            f"Gram condition estimate {cond:.3e} above cap {cond_cap:.1e}",
            estimate=cond,
        )
    return cho_solve(cho_factor(g), rhs)


def dual_coefficients(model, cond_cap=_COND_CAP):
    """Coefficient matrix of the canonical dual basis: the Gram inverse.

    Column j expresses the j-th dual element in the original functional
    coordinates. Raises ConditionNumberError (with the estimate) when the
    eigenvalue ratio exceeds cond_cap.
    """
    return _spd_solve(model, np.eye(model.n), cond_cap=cond_cap)


def dual_samplet_coefficients(basis, model, cond_cap=_COND_CAP):
    """Dual samplet basis coefficients D solving G D = U^T.

    U is the dense samplet transform; column i of D expresses the dual of
    samplet i in the original functional coordinates, so U G D = I.
    """
    if model.n != basis.n:
        raise InputError("Gram model size does not match the basis")
    u = basis.to_dense()
    return _spd_solve(model, u.T, cond_cap=cond_cap)


@dataclass
class DecayReport:
    """Per-level decay of samplet coefficients of one data vector."""

    data: np.ndarray
    coefficients: np.ndarray
    levels: np.ndarray
    level_max: np.ndarray
    level_diam: np.ndarray
    level_count: np.ndarray
    slope: float
    annihilated: bool

    @property
    def peak(self):
        return float(np.abs(self.coefficients[: self.levels.size]).max()) if self.levels.size else 0.0


def decay_report(basis, functionals, v):
    """Samplet coefficient decay of the data vector f_i(v) across levels.

    Fits a log-log line of per-level maximum absolute samplet coefficient
    against per-level maximum cluster diameter; the slope estimates the decay
    order. annihilated reports whether every samplet coefficient is below
    1e-10 times the data norm, which happens exactly when v acts like a
    primitive polynomial on the functional set.
    """
    from .measures import analysis_vector

    data = analysis_vector(functionals, v)
    coeff = basis.forward(data)
    ns = basis.n_samplets
    lv = basis.samplet_levels
    diams = basis.samplet_diameters
    uniq = np.unique(lv) if ns else np.zeros(0, dtype=np.int64)
    lmax = np.zeros(uniq.size)
    ldia = np.zeros(uniq.size)
    lcnt = np.zeros(uniq.size, dtype=np.int64)
    for t, level in enumerate(uniq):
        mask = lv == level
        lmax[t] = np.abs(coeff[:ns][mask]).max()
        ldia[t] = diams[mask].max()
        lcnt[t] = int(mask.sum())
    dnorm = float(np.linalg.norm(data))
    annihilated = bool(ns == 0 or np.abs(coeff[:ns]).max() <= 1e-10 * max(dnorm, 1e-300))
    usable = (ldia > 0.0) & (lmax > 0.0)
    if annihilated or usable.sum() < 2:
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(ldia[usable]), np.log(lmax[usable]), 1)[0])
    return DecayReport(
        data=data, coefficients=coeff, levels=uniq, level_max=lmax,
        level_diam=ldia, level_count=lcnt, slope=slope, annihilated=annihilated,
    )
