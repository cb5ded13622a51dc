"""Built-in example functional sets and named test functions."""

import numpy as np

from .errors import InputError
from .frames import gram_green_1d, gram_mass_p1
from .measures import Atom, Functional, dirac

EXAMPLE_NAMES = ("uniform-diracs", "random-diracs", "p1-mass", "green-1d")


def _grid_side(n, dimension):
    side = max(1, int(round(n ** (1.0 / dimension))))
    while side**dimension < n:
        side += 1
    while side > 1 and (side - 1) ** dimension >= n:
        side -= 1
    return side


def _uniform_points(n, dimension):
    if dimension == 1:
        if n < 2:
            raise InputError("uniform-diracs needs at least two points")
        return np.linspace(0.0, 1.0, n)[:, None]
    side = _grid_side(n, dimension)
    axes = [np.linspace(0.0, 1.0, side)] * dimension
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return grid.reshape(-1, dimension)[:n]


def generate_example(name, n, dimension=1, seed=0):
    """Deterministic example functional set.

    Returns (functionals, gram_model). The Gram model is None for the Dirac
    families; "p1-mass" pairs n interior hat functionals on a uniform mesh of
    n + 2 nodes with their mass matrix, "green-1d" pairs Diracs at k/(n+1)
    with the Green function Gram matrix of the 1d Dirichlet Laplacian.
    """
    n = int(n)
    dimension = int(dimension)
    if n < 1:
        raise InputError("n must be positive")
    if dimension < 1:
        raise InputError("dimension must be at least 1")
    if name == "uniform-diracs":
        pts = _uniform_points(n, dimension)
        return [dirac(i, pts[i]) for i in range(n)], None
    if name == "random-diracs":
        rng = np.random.default_rng(seed)
        pts = rng.random((n, dimension))
        return [dirac(i, pts[i]) for i in range(n)], None
    if name == "p1-mass":
        if dimension != 1:
            raise InputError("p1-mass is one dimensional")
        model, functionals = gram_mass_p1(np.linspace(0.0, 1.0, n + 2))
        return functionals, model
    if name == "green-1d":
        if dimension != 1:
            raise InputError("green-1d is one dimensional")
        pts = np.arange(1, n + 1) / (n + 1.0)
        model = gram_green_1d(pts)
        return [dirac(i, np.array([pts[i]])) for i in range(n)], model
    raise InputError(f"unknown example {name!r}, expected one of {EXAMPLE_NAMES}")


_KINK_AT = np.pi / 8.0


def test_function(name, dimension=1):
    """Named smooth or kinked test functions for decay studies."""
    if name == "exp":
        return lambda x: float(np.exp(np.sum(x)))
    if name == "kink":
        return lambda x: float(abs(x[0] - _KINK_AT))
    if name == "runge":
        return lambda x: float(1.0 / (1.0 + 25.0 * np.dot(x, x)))
    if name == "sine":
        return lambda x: float(np.sin(2.0 * np.pi * x[0]))
    raise InputError(f"unknown test function {name!r}")
