"""Timing helpers shared by the benchmark script and the scaling test."""

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .basis import build_samplet_basis
from .ctree import build_cluster_tree
from .datasets import generate_example
from .measures import moment_dimension
from .simgraph import EpsilonNeighborhood


@dataclass
class BenchPoint:
    n: int
    backend: str
    build_s: float
    forward_s: float
    inverse_s: float


def _time_call(fn, arg, min_total=0.02):
    fn(arg)  # warm up (JIT compile, caches)
    loops = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(loops):
            fn(arg)
        dt = time.perf_counter() - t0
        if dt >= min_total or loops >= 1 << 20:
            return dt / loops
        loops *= 2 if dt > 0 else 16


def build_case(n, degree=2, leaf_max=32):
    """Uniform 1d Dirac basis with a banded epsilon graph, sized for scaling runs."""
    functionals, _ = generate_example("uniform-diracs", n, 1)
    eps = 2.5 / (n - 1)
    tree = build_cluster_tree(
        functionals, EpsilonNeighborhood(eps), leaf_max,
        moment_dim=moment_dimension(1, degree),
    )
    return functionals, tree


def scaling_run(sizes, degree=2, leaf_max=32, backend=None, seed=0):
    """Build and time the transforms for each size; returns BenchPoints."""
    old = kernels.get_backend()
    if backend:
        kernels.set_backend(backend)
    try:
        rng = np.random.default_rng(seed)
        points = []
        for n in sizes:
            functionals, tree = build_case(n, degree, leaf_max)
            t0 = time.perf_counter()
            basis = build_samplet_basis(functionals, tree, degree)
            build_s = time.perf_counter() - t0
            x = rng.standard_normal(n)
            fwd = _time_call(basis.forward, x)
            inv = _time_call(basis.inverse, basis.forward(x))
            points.append(BenchPoint(n, kernels.get_backend(), build_s, fwd, inv))
        return points
    finally:
        kernels.set_backend(old)


def fit_exponent(sizes, times):
    """Least squares slope of log(time) against log(size)."""
    return float(np.polyfit(np.log(np.asarray(sizes, dtype=float)),
                            np.log(np.asarray(times, dtype=float)), 1)[0])
