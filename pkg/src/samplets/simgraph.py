"""Similarity graphs on functional supports.

Vertices are functionals, edge weights come from the Euclidean distance
between their support boxes (zero once the boxes intersect). Three schemes
are provided: a hard epsilon neighborhood, mutual k nearest neighbors
(symmetrized with OR, ties broken by ascending functional index), and a
Gaussian weight. The graph Laplacian L = D - W drives the spectral splits
of the cluster tree; it never depends on self-similarity entries because
the diagonal cancels in D - W.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from . import kernels
from .errors import InputError
from .measures import functional_boxes, support_box

_DENSE_LIMIT = 4096
_GAUSSIAN_LIMIT = 16384


@dataclass(frozen=True)
class EpsilonNeighborhood:
    """Unit weight for support distance strictly below eps."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0.0:
            raise InputError("eps must be positive")


@dataclass(frozen=True)
class MutualKNN:
    """Unit weight when either functional is among the other's k nearest."""

    k: int

    def __post_init__(self):
        if int(self.k) < 1:
            raise InputError("k must be at least 1")
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class GaussianSimilarity:
    """Weight exp(-d^2 / (2 length_scale^2)) of the support distance d."""

    length_scale: float

    def __post_init__(self):
        if not self.length_scale > 0.0:
            raise InputError("length_scale must be positive")


def support_distance(f, g):
    """Euclidean distance between the support boxes of two functionals."""
    return support_box(f).distance(support_box(g))


def _knn_neighbor_sets(lo, hi, k):
    """Dense k nearest neighbor sets by box distance, self excluded.

    Ties are resolved toward the smaller functional index by the stable sort.
    """
    n = lo.shape[0]
    k = min(k, n - 1)
    dist = kernels.box_distance_matrix(lo, hi)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def similarity(f, g, scheme, functionals=None):
    """Similarity of two functionals under the given scheme.

    MutualKNN needs the surrounding functional set to determine neighbor
    membership; pass it via the functionals argument.
    """
    if isinstance(scheme, GaussianSimilarity):
        d = support_distance(f, g)
        return float(np.exp(-d * d / (2.0 * scheme.length_scale**2)))
    if isinstance(scheme, EpsilonNeighborhood):
        return 1.0 if support_distance(f, g) < scheme.eps else 0.0
    if isinstance(scheme, MutualKNN):
        if functionals is None:
            raise InputError("MutualKNN similarity needs the full functional set")
        pos = {id(x): i for i, x in enumerate(functionals)}
        try:
            i, j = pos[id(f)], pos[id(g)]
        except KeyError:
            raise InputError("both functionals must belong to the given set") from None
        if i == j:
            return 0.0
        lo, hi = functional_boxes(functionals)
        nbrs = _knn_neighbor_sets(lo, hi, scheme.k)
        return 1.0 if (j in nbrs[i]) or (i in nbrs[j]) else 0.0
    raise InputError(f"unknown similarity scheme {scheme!r}")


def laplacian_from_weights(weights):
    """Unnormalized graph Laplacian D - W for a symmetric weight matrix."""
    if sparse.issparse(weights):
        deg = np.asarray(weights.sum(axis=1)).ravel()
        return (sparse.diags(deg) - weights).tocsr()
    deg = weights.sum(axis=1)
    lap = -np.asarray(weights, dtype=np.float64).copy()
    np.fill_diagonal(lap, deg - np.diag(weights))
    return lap


@dataclass
class SimilarityGraph:
    """Symmetric weighted graph over a functional set."""

    scheme: object
    weights: object

    def __post_init__(self):
        self._lap = None

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def degrees(self):
        if sparse.issparse(self.weights):
            return np.asarray(self.weights.sum(axis=1)).ravel()
        return self.weights.sum(axis=1)

    @property
    def degree_matrix(self):
        if sparse.issparse(self.weights):
            return sparse.diags(self.degrees).tocsr()
        return np.diag(self.degrees)

    @property
    def laplacian(self):
        if self._lap is None:
            self._lap = laplacian_from_weights(self.weights)
        return self._lap

    def subgraph_weights(self, idx):
        """Weight matrix of the induced subgraph on the given vertex positions."""
        idx = np.asarray(idx, dtype=np.int64)
        if sparse.issparse(self.weights):
            return self.weights[idx][:, idx].tocsr()
        return self.weights[np.ix_(idx, idx)]


def _build_dense(lo, hi, scheme):
    dist = kernels.box_distance_matrix(lo, hi)
    if isinstance(scheme, GaussianSimilarity):
        return np.exp(-(dist**2) / (2.0 * scheme.length_scale**2))
    if isinstance(scheme, EpsilonNeighborhood):
        return (dist < scheme.eps).astype(np.float64)
    nbrs = _knn_neighbor_sets(lo, hi, scheme.k)
    n = lo.shape[0]
    w = np.zeros((n, n))
    rows = np.repeat(np.arange(n), nbrs.shape[1])
    w[rows, nbrs.ravel()] = 1.0
    return np.maximum(w, w.T)


def _build_sparse_epsilon(lo, hi, centers, radii, scheme):
    n = lo.shape[0]
    tree = cKDTree(centers)
    reach = scheme.eps + 2.0 * float(radii.max(initial=0.0))
    pairs = tree.query_pairs(r=reach, output_type="ndarray")
    if pairs.size:
        gaps = kernels.box_gap_pairs(lo, hi, pairs[:, 0], pairs[:, 1])
        keep = gaps < scheme.eps
        pairs = pairs[keep]
    ii = np.concatenate((pairs[:, 0], pairs[:, 1], np.arange(n)))
    jj = np.concatenate((pairs[:, 1], pairs[:, 0], np.arange(n)))
    vals = np.ones(ii.size)
    return sparse.coo_matrix((vals, (ii, jj)), shape=(n, n)).tocsr()


def _build_sparse_knn(lo, hi, centers, radii, scheme):
    n = lo.shape[0]
    k = min(scheme.k, n - 1)
    tree = cKDTree(centers)
    rmax = float(radii.max(initial=0.0))
    kq = min(n, k + 17)
    while True:
        dd, ii = tree.query(centers, k=kq)
        rows = []
        cols = []
        safe = True
        for i in range(n):
            cand = ii[i][ii[i] != i]
            gaps = kernels.box_gap_pairs(lo, hi, np.full(cand.size, i), cand)
            order = np.lexsort((cand, gaps))
            take = order[:k]
            # candidate set is complete once the kth box distance cannot be
            # undercut by any center outside the query radius
            if kq < n and gaps[take[-1]] > dd[i, -1] - 2.0 * rmax:
                safe = False
                break
            rows.append(np.full(take.size, i))
            cols.append(cand[take])
        if safe:
            break
        kq = min(n, kq * 2)
    ii = np.concatenate(rows)
    jj = np.concatenate(cols)
    mat = sparse.coo_matrix((np.ones(ii.size), (ii, jj)), shape=(n, n)).tocsr()
    both = mat.maximum(mat.T)
    both.setdiag(0.0)
    both.eliminate_zeros()
    return both


def build_graph(functionals, scheme, method="auto"):
    """Similarity graph over the functional set.

    method "auto" picks a dense weight matrix up to 4096 functionals and a
    sparse one (KD tree candidate search, exact box distances) above, except
    for the Gaussian scheme whose weights are all positive and therefore stay
    dense; "dense" and "sparse" force a path.
    """
    if method not in ("auto", "dense", "sparse"):
        raise InputError("method must be auto, dense or sparse")
    lo, hi = functional_boxes(functionals)
    n = lo.shape[0]
    if isinstance(scheme, GaussianSimilarity):
        if n > _GAUSSIAN_LIMIT:
            raise InputError(
                "gaussian scheme builds a dense graph; use epsilon or knn beyond "
                f"{_GAUSSIAN_LIMIT} functionals"
            )
        if method == "sparse":
            raise InputError("gaussian weights are dense by nature")
        return SimilarityGraph(scheme, _build_dense(lo, hi, scheme))
    if not isinstance(scheme, (EpsilonNeighborhood, MutualKNN)):
        raise InputError(f"unknown similarity scheme {scheme!r}")
    dense = method == "dense" or (method == "auto" and n <= _DENSE_LIMIT)
    if dense:
        return SimilarityGraph(scheme, _build_dense(lo, hi, scheme))
    centers = 0.5 * (lo + hi)
    radii = 0.5 * np.linalg.norm(hi - lo, axis=1)
    if isinstance(scheme, EpsilonNeighborhood):
        w = _build_sparse_epsilon(lo, hi, centers, radii, scheme)
    else:
        w = _build_sparse_knn(lo, hi, centers, radii, scheme)
    return SimilarityGraph(scheme, w)
