"""Hot numeric kernels: numba fast path plus a pure-numpy fallback.

The backend is picked at import time from the SAMPLETS_BACKEND environment
variable ("auto", "numba", "numpy"; default "auto" which means numba when it
imports) and can be changed at runtime with set_backend(). Every kernel is a
pure function of packed arrays so both paths produce the same values up to
floating point summation order.
"""

import os

import numpy as np

from .errors import InputError

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

_BACKENDS = ("auto", "numba", "numpy")
_requested = os.environ.get("SAMPLETS_BACKEND", "auto").strip().lower()
if _requested not in _BACKENDS:
    raise InputError(
        f"SAMPLETS_BACKEND must be one of {_BACKENDS}, got {_requested!r}"
    )
if _requested == "numba" and not HAS_NUMBA:
    raise InputError("SAMPLETS_BACKEND=numba but numba is not importable")
_backend = _requested


def set_backend(name):
    """Select the kernel backend: "auto", "numba" or "numpy"."""
    global _backend
    name = str(name).strip().lower()
    if name not in _BACKENDS:
        raise InputError(f"unknown backend {name!r}, expected one of {_BACKENDS}")
    if name == "numba" and not HAS_NUMBA:
        raise InputError("numba backend requested but numba is not importable")
    _backend = name


def get_backend():
    """Return the effective backend name, "numba" or "numpy"."""
    if _backend == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return _backend


def _use_numba():
    return get_backend() == "numba"


def falling_factorial_table(max_degree):
    """Table ff[e, nu] = e! / (e - nu)! for 0 <= nu <= e <= max_degree."""
    n = max_degree + 1
    ff = np.zeros((n, n))
    for e in range(n):
        ff[e, 0] = 1.0
        for nu in range(1, e + 1):
            ff[e, nu] = ff[e, nu - 1] * (e - nu + 1)
    return ff


# ---------------------------------------------------------------------------
# evaluation tables: rows are monomials on a scaled box, columns functionals


def _eval_table_loop(points, weights, derivs, offsets, sel, exps, center, scale, ff, out):
    m = exps.shape[0]
    d = exps.shape[1]
    for j in range(sel.shape[0]):
        fi = sel[j]
        for t in range(offsets[fi], offsets[fi + 1]):
            w = weights[t]
            for a in range(m):
                prod = w
                for k in range(d):
                    e = exps[a, k]
                    nu = derivs[t, k]
                    if nu > e:
                        prod = 0.0
                        break
                    u = (points[t, k] - center[k]) / scale[k]
                    fac = ff[e, nu]
                    for _ in range(nu):
                        fac /= scale[k]
                    for _ in range(e - nu):
                        fac *= u
                    prod *= fac
                out[a, j] += prod


def _eval_table_numpy(points, weights, derivs, offsets, sel, exps, center, scale, ff, out):
    if sel.shape[0] == 0:
        return
    counts = offsets[sel + 1] - offsets[sel]
    total = int(counts.sum())
    cum = np.concatenate((np.zeros(1, dtype=np.int64), np.cumsum(counts)))
    idx = np.arange(total, dtype=np.int64)
    idx += np.repeat(offsets[sel] - cum[:-1], counts)
    u = (points[idx] - center) / scale
    dv = derivs[idx]
    wts = weights[idx]
    for a in range(exps.shape[0]):
        e = exps[a]
        term = wts * (dv <= e).all(axis=1)
        for k in range(exps.shape[1]):
            ek = int(e[k])
            nu = np.minimum(dv[:, k], ek)
            term = term * ff[ek, nu] * u[:, k] ** (ek - nu) / scale[k] ** nu
        out[a] = np.add.reduceat(term, cum[:-1])


if HAS_NUMBA:
    _eval_table_numba = numba.njit(cache=True)(_eval_table_loop)


def eval_table(points, weights, derivs, offsets, sel, exps, center, scale):
    """Pairings of monomials with functionals.

    Entry [a, j] is functional sel[j] applied to the monomial with exponent
    row exps[a] in the coordinates (x - center) / scale. Functional atoms are
    packed: rows offsets[i]:offsets[i+1] of points/weights/derivs belong to
    functional i.
    """
    sel = np.ascontiguousarray(sel, dtype=np.int64)
    out = np.zeros((exps.shape[0], sel.shape[0]))
    ff = falling_factorial_table(int(exps.max()) if exps.size else 0)
    if _use_numba():
        _eval_table_numba(points, weights, derivs, offsets, sel, exps, center, scale, ff, out)
    else:
        _eval_table_numpy(points, weights, derivs, offsets, sel, exps, center, scale, ff, out)
    return out


# ---------------------------------------------------------------------------
# pairwise distances between axis-aligned boxes (0 when boxes intersect)


def _box_dist_loop(lo, hi, out):
    n = lo.shape[0]
    d = lo.shape[1]
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                g = lo[i, k] - hi[j, k]
                g2 = lo[j, k] - hi[i, k]
                if g2 > g:
                    g = g2
                if g > 0.0:
                    s += g * g
            v = np.sqrt(s)
            out[i, j] = v
            out[j, i] = v


def _box_dist_numpy(lo, hi, out):
    n = lo.shape[0]
    step = max(1, (1 << 22) // max(1, n))
    for s in range(0, n, step):
        e = min(n, s + step)
        g = np.maximum(lo[s:e, None, :] - hi[None, :, :], lo[None, :, :] - hi[s:e, None, :])
        np.maximum(g, 0.0, out=g)
        out[s:e] = np.sqrt(np.einsum("ijk,ijk->ij", g, g))


if HAS_NUMBA:
    _box_dist_numba = numba.njit(cache=True)(_box_dist_loop)


def box_distance_matrix(lo, hi):
    """Dense matrix of Euclidean distances between boxes [lo[i], hi[i]]."""
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    out = np.empty((lo.shape[0], lo.shape[0]))
    if _use_numba():
        _box_dist_numba(lo, hi, out)
    else:
        _box_dist_numpy(lo, hi, out)
    return out


def box_gap_pairs(lo, hi, ii, jj):
    """Distances between box pairs (ii[t], jj[t]), vectorized."""
    g = np.maximum(lo[ii] - hi[jj], lo[jj] - hi[ii])
    np.maximum(g, 0.0, out=g)
    return np.sqrt(np.einsum("ij,ij->i", g, g))


# ---------------------------------------------------------------------------
# two-scale cascade transforms
#
# Nodes appear in processing order (children before parents, root last).
# qbuf holds each node's full n x n orthogonal factor row-major at qoff.
# work holds one slot block of m_phi rows per node; leaves read input rows
# through leafidx, internal nodes read their children's slot blocks.


class CascadePlan:
    """Flattened per-node arrays driving the forward/inverse cascades."""

    __slots__ = (
        "is_leaf", "nin", "mphi", "qoff", "loff", "c1slot", "c1len",
        "c2slot", "c2len", "slot", "outoff", "leafidx", "qbuf",
        "n_samplets", "n_total", "work_rows", "max_nin",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])


def _cascade_forward_loop(x, is_leaf, nin, mphi, qoff, loff, c1slot, c1len,
                          c2slot, c2len, slot, outoff, leafidx, qbuf, nsamp,
                          out, work, scratch):
    nn = nin.shape[0]
    m = x.shape[1]
    for t in range(nn):
        n = nin[t]
        mp = mphi[t]
        if is_leaf[t] == 1:
            base = loff[t]
            for r in range(n):
                src = leafidx[base + r]
                for c in range(m):
                    scratch[r, c] = x[src, c]
        else:
            a = c1slot[t]
            la = c1len[t]
            for r in range(la):
                for c in range(m):
                    scratch[r, c] = work[a + r, c]
            b = c2slot[t]
            lb = c2len[t]
            for r in range(lb):
                for c in range(m):
                    scratch[la + r, c] = work[b + r, c]
        q0 = qoff[t]
        for k in range(n):
            if k < mp:
                dst = slot[t] + k
                for c in range(m):
                    acc = 0.0
                    for l in range(n):
                        acc += qbuf[q0 + l * n + k] * scratch[l, c]
                    work[dst, c] = acc
            else:
                dst = outoff[t] + (k - mp)
                for c in range(m):
                    acc = 0.0
                    for l in range(n):
                        acc += qbuf[q0 + l * n + k] * scratch[l, c]
                    out[dst, c] = acc
    rs = slot[nn - 1]
    mr = mphi[nn - 1]
    for k in range(mr):
        for c in range(m):
            out[nsamp + k, c] = work[rs + k, c]


def _cascade_inverse_loop(cvec, is_leaf, nin, mphi, qoff, loff, c1slot, c1len,
                          c2slot, c2len, slot, outoff, leafidx, qbuf, nsamp,
                          out, work, scratch):
    nn = nin.shape[0]
    m = cvec.shape[1]
    rs = slot[nn - 1]
    mr = mphi[nn - 1]
    for k in range(mr):
        for c in range(m):
            work[rs + k, c] = cvec[nsamp + k, c]
    for t in range(nn - 1, -1, -1):
        n = nin[t]
        mp = mphi[t]
        q0 = qoff[t]
        s0 = slot[t]
        o0 = outoff[t]
        for l in range(n):
            for c in range(m):
                acc = 0.0
                for k in range(mp):
                    acc += qbuf[q0 + l * n + k] * work[s0 + k, c]
                for k in range(mp, n):
                    acc += qbuf[q0 + l * n + k] * cvec[o0 + (k - mp), c]
                scratch[l, c] = acc
        if is_leaf[t] == 1:
            base = loff[t]
            for r in range(n):
                dst = leafidx[base + r]
                for c in range(m):
                    out[dst, c] = scratch[r, c]
        else:
            a = c1slot[t]
            la = c1len[t]
            for r in range(la):
                for c in range(m):
                    work[a + r, c] = scratch[r, c]
            b = c2slot[t]
            lb = c2len[t]
            for r in range(lb):
                for c in range(m):
                    work[b + r, c] = scratch[la + r, c]


if HAS_NUMBA:
    _cascade_forward_numba = numba.njit(cache=True)(_cascade_forward_loop)
    _cascade_inverse_numba = numba.njit(cache=True)(_cascade_inverse_loop)


def _cascade_forward_numpy(x, p, out):
    work = np.empty((p.work_rows, x.shape[1]))
    for t in range(p.nin.shape[0]):
        n = p.nin[t]
        mp = p.mphi[t]
        if p.is_leaf[t] == 1:
            g = x[p.leafidx[p.loff[t]:p.loff[t] + n]]
        else:
            a, la = p.c1slot[t], p.c1len[t]
            b, lb = p.c2slot[t], p.c2len[t]
            g = np.concatenate((work[a:a + la], work[b:b + lb]))
        q = p.qbuf[p.qoff[t]:p.qoff[t] + n * n].reshape(n, n)
        y = q.T @ g
        work[p.slot[t]:p.slot[t] + mp] = y[:mp]
        out[p.outoff[t]:p.outoff[t] + (n - mp)] = y[mp:]
    rs = p.slot[-1]
    out[p.n_samplets:] = work[rs:rs + p.mphi[-1]]


def _cascade_inverse_numpy(cvec, p, out):
    work = np.empty((p.work_rows, cvec.shape[1]))
    rs = p.slot[-1]
    work[rs:rs + p.mphi[-1]] = cvec[p.n_samplets:]
    for t in range(p.nin.shape[0] - 1, -1, -1):
        n = p.nin[t]
        mp = p.mphi[t]
        y = np.concatenate((
            work[p.slot[t]:p.slot[t] + mp],
            cvec[p.outoff[t]:p.outoff[t] + (n - mp)],
        ))
        q = p.qbuf[p.qoff[t]:p.qoff[t] + n * n].reshape(n, n)
        g = q @ y
        if p.is_leaf[t] == 1:
            out[p.leafidx[p.loff[t]:p.loff[t] + n]] = g
        else:
            a, la = p.c1slot[t], p.c1len[t]
            b, lb = p.c2slot[t], p.c2len[t]
            work[a:a + la] = g[:la]
            work[b:b + lb] = g[la:]


def _as_matrix(x, n):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != n:
            raise InputError(f"expected a vector of length {n}, got {x.shape[0]}")
        return np.ascontiguousarray(x[:, None]), True
    if x.ndim == 2:
        if x.shape[0] != n:
            raise InputError(f"expected {n} rows, got {x.shape[0]}")
        return np.ascontiguousarray(x), False
    raise InputError("expected a 1d or 2d array")


def cascade_forward(plan, x):
    """Apply the orthogonal analysis cascade to a vector or to columns of a matrix."""
    xm, was_vec = _as_matrix(x, plan.n_total)
    out = np.empty_like(xm)
    if _use_numba():
        work = np.empty((plan.work_rows, xm.shape[1]))
        scratch = np.empty((plan.max_nin, xm.shape[1]))
        _cascade_forward_numba(xm, plan.is_leaf, plan.nin, plan.mphi, plan.qoff,
                               plan.loff, plan.c1slot, plan.c1len, plan.c2slot,
                               plan.c2len, plan.slot, plan.outoff, plan.leafidx,
                               plan.qbuf, plan.n_samplets, out, work, scratch)
    else:
        _cascade_forward_numpy(xm, plan, out)
    return out[:, 0] if was_vec else out


def cascade_inverse(plan, c):
    """Apply the transpose (inverse) cascade to a vector or matrix of coefficients."""
    cm, was_vec = _as_matrix(c, plan.n_total)
    out = np.empty_like(cm)
    if _use_numba():
        work = np.empty((plan.work_rows, cm.shape[1]))
        scratch = np.empty((plan.max_nin, cm.shape[1]))
        _cascade_inverse_numba(cm, plan.is_leaf, plan.nin, plan.mphi, plan.qoff,
                               plan.loff, plan.c1slot, plan.c1len, plan.c2slot,
                               plan.c2len, plan.slot, plan.outoff, plan.leafidx,
                               plan.qbuf, plan.n_samplets, out, work, scratch)
    else:
        _cascade_inverse_numpy(cm, plan, out)
    return out[:, 0] if was_vec else out
