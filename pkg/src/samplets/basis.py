"""Samplet basis construction: localized orthonormal rows with vanishing moments.

Every cluster node carries an orthogonal filter pair obtained from a complete
QR decomposition of the transposed moment matrix of its scaling inputs. Leaf
inputs are the raw functionals; an internal node stacks the moment columns of
its children's scaling outputs, rescaled to its own box by an exact monomial
change of basis. The first min(m_P, n) QR columns become scaling outputs
passed upward, the remaining columns are samplets whose rows annihilate all
primitive polynomials. Chaining the per-node factors yields one global
orthogonal transform applied in linear time by a two-scale cascade.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import kernels
from .ctree import ClusterNode, ClusterTree
from .errors import InputError
from .measures import (
    PrimitiveBasis,
    box_affine,
    graded_exponents,
    moment_dimension,
    pack_functionals,
    primitive_basis,
)


@dataclass
class MomentMatrix:
    """Pairings of primitive monomials (rows) with functionals (columns)."""

    values: np.ndarray
    cluster: int = -1


@dataclass
class ClusterFilters:
    """Orthogonal two-scale filters of one cluster.

    q is the full n x n orthogonal factor; its first m_phi columns are the
    scaling filters, the rest the samplet filters. r is the economy triangular
    factor with nonnegative diagonal.
    """

    q: np.ndarray
    r: np.ndarray
    m_phi: int

    @property
    def q_phi(self):
        return self.q[:, : self.m_phi]

    @property
    def q_psi(self):
        return self.q[:, self.m_phi:]

    @property
    def n_samplets(self):
        return self.q.shape[0] - self.m_phi


def moment_matrix(cluster, primitives, functionals=None):
    """Moment matrix of a cluster: primitives applied to its functionals.

    cluster may be a ClusterNode (then the functional set must be passed) or
    directly an iterable of Functional objects. Row a, column j holds the
    j-th functional applied to the a-th primitive monomial.
    """
    if isinstance(cluster, ClusterNode):
        if functionals is None:
            raise InputError("a ClusterNode cluster needs the functional set")
        flist = [functionals[i] for i in cluster.indices]
        cid = cluster.node_id
    else:
        flist = list(cluster)
        cid = -1
    packed = pack_functionals(flist)
    if packed.dimension != primitives.dimension:
        raise InputError("functional and primitive dimensions differ")
    vals = kernels.eval_table(
        packed.points, packed.weights, packed.derivs, packed.offsets,
        np.arange(packed.count, dtype=np.int64),
        primitives.exponents, primitives.center, primitives.scale,
    )
    return MomentMatrix(vals, cid)


def cluster_filters(moments):
    """Complete QR of the transposed moment matrix, signs fixed.

    Column signs are chosen so the triangular factor has a nonnegative
    diagonal, which makes the filters unique and rebuilds reproducible.
    """
    vals = moments.values if isinstance(moments, MomentMatrix) else np.asarray(moments, dtype=np.float64)
    if vals.ndim != 2:
        raise InputError("moment matrix must be 2d")
    m_p, n = vals.shape
    q, r = np.linalg.qr(vals.T, mode="complete")
    rmin = min(n, m_p)
    for k in range(rmin):
        if r[k, k] < 0.0:
            q[:, k] = -q[:, k]
            r[k, :] = -r[k, :]
    return ClusterFilters(q, r[:rmin, :].copy(), rmin)


def _monomial_transfer(exps, child_affine, parent_affine):
    """Exact change of basis between scaled monomials on nested boxes.

    Row alpha expresses the parent monomial u_P^alpha in child monomials:
    u_P = shift + ratio * u_C per coordinate, expanded binomially. The result
    is lower triangular in the graded order.
    """
    c_child, s_child = child_affine
    c_parent, s_parent = parent_affine
    shift = (c_child - c_parent) / s_parent
    ratio = s_child / s_parent
    m = exps.shape[0]
    d = exps.shape[1]
    pos = {tuple(int(x) for x in e): i for i, e in enumerate(exps)}
    out = np.zeros((m, m))
    for i in range(m):
        alpha = exps[i]
        for beta in itertools.product(*(range(int(a) + 1) for a in alpha)):
            coef = 1.0
            for k in range(d):
                coef *= (
                    math.comb(int(alpha[k]), beta[k])
                    * shift[k] ** (int(alpha[k]) - beta[k])
                    * ratio[k] ** beta[k]
                )
            out[i, pos[beta]] = coef
    return out


@dataclass
class SampletBasis:
    """Global orthogonal samplet transform tied to a cluster tree.

    Rows are ordered samplets first (level ascending, preorder within a
    level, QR column within a cluster), then the root scaling rows. The
    transform itself is applied through a linear-time cascade; the dense
    matrix is only materialized on request.
    """

    tree: ClusterTree
    degree: int
    dimension: int
    moment_dim: int
    primitives: PrimitiveBasis
    filters: list = field(repr=False)
    samplet_levels: np.ndarray = field(repr=False)
    samplet_clusters: np.ndarray = field(repr=False)
    samplet_box_lo: np.ndarray = field(repr=False)
    samplet_box_hi: np.ndarray = field(repr=False)
    node_out: np.ndarray = field(repr=False)
    plan: kernels.CascadePlan = field(repr=False)

    @property
    def n(self):
        return self.tree.n

    @property
    def n_samplets(self):
        return int(self.samplet_levels.size)

    @property
    def n_scaling(self):
        return self.n - self.n_samplets

    @property
    def samplet_diameters(self):
        return np.linalg.norm(self.samplet_box_hi - self.samplet_box_lo, axis=1)

    def forward(self, x):
        return kernels.cascade_forward(self.plan, x)

    def inverse(self, c):
        return kernels.cascade_inverse(self.plan, c)

    def to_dense(self):
        """The full orthogonal matrix, rows ordered as the coefficients."""
        return self.forward(np.eye(self.n))

    def cluster_samplet_range(self, node_id):
        """Coefficient rows [start, stop) owned by one cluster node."""
        flt = self.filters[node_id]
        start = int(self.node_out[node_id])
        return start, start + flt.n_samplets

    def _expand(self, node_id, coeff):
        nd = self.tree.nodes[node_id]
        if nd.is_leaf:
            return nd.indices, coeff
        c1, c2 = nd.children
        f1, f2 = self.filters[c1.node_id], self.filters[c2.node_id]
        i1, v1 = self._expand(c1.node_id, f1.q_phi @ coeff[: f1.m_phi])
        i2, v2 = self._expand(c2.node_id, f2.q_phi @ coeff[f1.m_phi:])
        return np.concatenate((i1, i2)), np.concatenate((v1, v2))

    def samplet_row(self, i):
        """Nonzero pattern of samplet row i: (functional positions, values).

        Positions are sorted ascending; all lie inside the owning cluster.
        """
        i = int(i)
        if not 0 <= i < self.n_samplets:
            raise InputError("samplet index out of range")
        node_id = int(self.samplet_clusters[i])
        flt = self.filters[node_id]
        col = flt.m_phi + (i - int(self.node_out[node_id]))
        idx, vals = self._expand(node_id, flt.q[:, col])
        order = np.argsort(idx)
        return idx[order], vals[order]

    def scaling_rows(self, node_id):
        """All scaling rows of a cluster as (positions, matrix m_phi x size)."""
        flt = self.filters[node_id]
        rows = []
        idx = None
        for k in range(flt.m_phi):
            i, v = self._expand(node_id, flt.q[:, k])
            order = np.argsort(i)
            idx = i[order]
            rows.append(v[order])
        return idx, np.array(rows)


def _build_plan(tree, filters, node_out, n, order):
    nn = len(order)
    is_leaf = np.zeros(nn, dtype=np.int64)
    nin = np.zeros(nn, dtype=np.int64)
    mphi = np.zeros(nn, dtype=np.int64)
    qoff = np.zeros(nn, dtype=np.int64)
    loff = np.zeros(nn, dtype=np.int64)
    c1slot = np.zeros(nn, dtype=np.int64)
    c1len = np.zeros(nn, dtype=np.int64)
    c2slot = np.zeros(nn, dtype=np.int64)
    c2len = np.zeros(nn, dtype=np.int64)
    slot = np.zeros(nn, dtype=np.int64)
    outoff = np.zeros(nn, dtype=np.int64)
    slot_of = {}
    pos_of = {}
    qparts = []
    leafparts = []
    srun = 0
    qrun = 0
    lrun = 0
    for t, i in enumerate(order):
        nd = tree.nodes[i]
        flt = filters[i]
        pos_of[i] = t
        k = flt.q.shape[0]
        nin[t] = k
        mphi[t] = flt.m_phi
        qoff[t] = qrun
        qparts.append(np.ascontiguousarray(flt.q).ravel())
        qrun += k * k
        slot_of[i] = srun
        slot[t] = srun
        srun += flt.m_phi
        outoff[t] = node_out[i]
        if nd.is_leaf:
            is_leaf[t] = 1
            loff[t] = lrun
            leafparts.append(nd.indices)
            lrun += nd.indices.size
        else:
            c1, c2 = nd.children
            c1slot[t] = slot_of[c1.node_id]
            c1len[t] = filters[c1.node_id].m_phi
            c2slot[t] = slot_of[c2.node_id]
            c2len[t] = filters[c2.node_id].m_phi
    root_pos = pos_of[tree.root.node_id]
    assert root_pos == nn - 1, "root must be processed last"
    n_samplets = n - filters[tree.root.node_id].m_phi
    return kernels.CascadePlan(
        is_leaf=is_leaf, nin=nin, mphi=mphi, qoff=qoff, loff=loff,
        c1slot=c1slot, c1len=c1len, c2slot=c2slot, c2len=c2len, slot=slot,
        outoff=outoff,
        leafidx=np.concatenate(leafparts) if leafparts else np.zeros(0, dtype=np.int64),
        qbuf=np.concatenate(qparts),
        n_samplets=int(n_samplets), n_total=int(n),
        work_rows=int(srun), max_nin=int(nin.max()),
    )


def build_samplet_basis(functionals, tree, degree):
    """Build the samplet basis of the functional set on a cluster tree.

    Parameters
    ----------
    functionals : sequence of Functional, positions matching the tree indices
    tree : ClusterTree over the same functionals
    degree : vanishing moment degree q; samplets annihilate all polynomials
        of total degree <= q

    Returns
    -------
    SampletBasis whose transform is orthogonal: N - m_P samplet rows plus
    m_P root scaling rows, where m_P is the primitive space dimension.
    Leaves smaller than m_P are rejected; a leaf of size exactly m_P simply
    carries no samplets.
    """
    degree = int(degree)
    if degree < 0:
        raise InputError("degree must be nonnegative")
    n = len(functionals)
    if not isinstance(tree, ClusterTree) or tree.n != n:
        raise InputError("tree does not match the functional set")
    packed = pack_functionals(functionals)
    d = packed.dimension
    m_p = moment_dimension(d, degree)
    for nd in tree.nodes:
        if nd.is_leaf and nd.size < m_p:
            raise InputError(
                f"leaf of size {nd.size} cannot reproduce {m_p} primitive moments"
            )
    exps = graded_exponents(d, degree)
    nodes = tree.nodes
    nn = len(nodes)
    affine = [box_affine(nd.box) for nd in nodes]
    order = sorted(range(nn), key=lambda i: (-nodes[i].level, i))
    filters = [None] * nn
    mom_phi = [None] * nn
    for i in order:
        nd = nodes[i]
        if nd.is_leaf:
            vals = kernels.eval_table(
                packed.points, packed.weights, packed.derivs, packed.offsets,
                nd.indices, exps, affine[i][0], affine[i][1],
            )
        else:
            blocks = []
            for ch in nd.children:
                trans = _monomial_transfer(exps, affine[ch.node_id], affine[i])
                blocks.append(trans @ mom_phi[ch.node_id])
            vals = np.hstack(blocks)
        flt = cluster_filters(vals)
        filters[i] = flt
        mom_phi[i] = flt.r[: flt.m_phi, :].T.copy()
    return assemble_basis(tree, filters, d, degree)


def assemble_basis(tree, filters, dimension, degree):
    """Assemble a SampletBasis from a tree and its per-node filters.

    Fixes the coefficient ordering (level ascending, preorder within a level,
    QR column within a node, root scaling rows last) and builds the cascade
    plan. Used by the builder and by deserialization.
    """
    nodes = tree.nodes
    nn = len(nodes)
    n = tree.n
    d = int(dimension)
    order = sorted(range(nn), key=lambda i: (-nodes[i].level, i))
    # samplet ordering: coarse to fine, preorder inside a level, QR column inside a node
    node_out = np.zeros(nn, dtype=np.int64)
    levels = []
    owners = []
    run = 0
    for i in sorted(range(nn), key=lambda i: (nodes[i].level, i)):
        node_out[i] = run
        cnt = filters[i].n_samplets
        levels.extend([nodes[i].level] * cnt)
        owners.extend([i] * cnt)
        run += cnt
    assert run == n - filters[tree.root.node_id].m_phi
    owners = np.asarray(owners, dtype=np.int64)
    levels = np.asarray(levels, dtype=np.int64)
    box_lo = np.empty((run, d))
    box_hi = np.empty((run, d))
    for s in range(run):
        nd = nodes[owners[s]]
        box_lo[s] = nd.box.lower
        box_hi[s] = nd.box.upper
    plan = _build_plan(tree, filters, node_out, n, order)
    prim = primitive_basis(d, degree, tree.root.box)
    return SampletBasis(
        tree=tree, degree=degree, dimension=d,
        moment_dim=moment_dimension(d, degree), primitives=prim,
        filters=filters, samplet_levels=levels, samplet_clusters=owners,
        samplet_box_lo=box_lo, samplet_box_hi=box_hi, node_out=node_out, plan=plan,
    )


def forward_transform(basis, x):
    """Coefficients of data x: samplet coefficients first, root scaling last."""
    return basis.forward(x)


def inverse_transform(basis, c):
    """Reconstruct data from coefficients; exact inverse of forward_transform."""
    return basis.inverse(c)


def transform_matrix(basis, a):
    """Two-sided transform U A U^T of a symmetric matrix A."""
    a = np.asarray(a, dtype=np.float64)
    n = basis.n
    if a.shape != (n, n):
        raise InputError(f"matrix must be {n} x {n}")
    scale = np.abs(a).max()
    if not np.allclose(a, a.T, atol=1e-8 * max(scale, 1.0)):
        raise InputError("matrix must be symmetric")
    return basis.forward(basis.forward(a).T)


def _vanishing_scan(basis, functionals, primitives):
    if len(functionals) != basis.n:
        raise InputError("functional count does not match the basis")
    if primitives is None:
        primitives = basis.primitives
    packed = pack_functionals(functionals)
    if packed.dimension != basis.dimension:
        raise InputError("functional dimension does not match the basis")
    sel = np.arange(basis.n, dtype=np.int64)
    for nd in basis.tree.nodes:
        start, stop = basis.cluster_samplet_range(nd.node_id)
        if stop == start:
            continue
        center, scale = box_affine(nd.box)
        table = kernels.eval_table(
            packed.points, packed.weights, packed.derivs, packed.offsets,
            sel, primitives.exponents, center, scale,
        )
        norms = np.linalg.norm(table, axis=1)
        coeff = basis.forward(np.ascontiguousarray(table.T))
        block = np.abs(coeff[start:stop])
        alive = norms > 1e-300
        resid = float((block[:, alive] / norms[alive]).max()) if alive.any() else 0.0
        yield nd, stop - start, resid


def verify_vanishing_moments(basis, functionals, primitives=None):
    """Largest normalized pairing of any samplet with any primitive monomial.

    For every cluster owning samplets, each primitive is rescaled to the
    cluster box, applied to all functionals, pushed through the forward
    transform, and the cluster's samplet coefficients are compared against
    the global norm of the evaluation vector. The maximum over all clusters,
    samplets and primitives is returned; it is zero in exact arithmetic.
    """
    worst = 0.0
    for _, _, resid in _vanishing_scan(basis, functionals, primitives):
        worst = max(worst, resid)
    return worst


def vanishing_moment_table(basis, functionals, primitives=None):
    """Per-cluster vanishing moment residuals.

    Rows are (cluster_id, level, size, samplet_count, residual) for every
    cluster that owns samplets, in preorder.
    """
    rows = []
    for nd, cnt, resid in _vanishing_scan(basis, functionals, primitives):
        rows.append((nd.node_id, nd.level, nd.size, int(cnt), resid))
    return rows


@dataclass
class CompressionReport:
    """Outcome of thresholding a coefficient array."""

    sigma: float
    threshold: float
    total: int
    kept: int
    dropped_norm: float

    @property
    def kept_fraction(self):
        return self.kept / self.total if self.total else 0.0


def threshold_compress(coeffs, sigma):
    """Zero all entries below sigma times the largest magnitude.

    Returns the compressed container (sparse CSR for matrices, dense copy for
    vectors) and a CompressionReport. sigma = 0 keeps everything; sigma > 1
    drops everything.
    """
    sigma = float(sigma)
    if sigma < 0.0:
        raise InputError("sigma must be nonnegative")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim not in (1, 2):
        raise InputError("expected a coefficient vector or matrix")
    peak = float(np.abs(coeffs).max()) if coeffs.size else 0.0
    threshold = sigma * peak
    mask = np.abs(coeffs) >= threshold
    kept = int(mask.sum())
    dropped = float(np.linalg.norm(coeffs[~mask]))
    report = CompressionReport(
        sigma=sigma, threshold=threshold, total=int(coeffs.size),
        kept=kept, dropped_norm=dropped,
    )
    if coeffs.ndim == 2:
        out = sparse.csr_matrix(np.where(mask, coeffs, 0.0))
        return out, report
    out = np.where(mask, coeffs, 0.0)
    return out, report
