"""U-statistics, particle Hamiltonians and the 1D measure calculus."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, ComplexityRefusal, GridError
from .grids import GridFunction, GridMeasure
from .potentials import InteractionKernel, ModelSpec

ENUMERATION_LIMIT = 200_000
GRID_TENSOR_LIMIT = 100_000_000


@dataclass(frozen=True)
class ParticleEnsemble:
    positions: np.ndarray
    seed_lineage: tuple = (0, 0)

    def __post_init__(self):
        X = np.array(self.positions, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise ArityError(f"positions must be an n x d array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("positions must be finite")
        X.setflags(write=False)
        object.__setattr__(self, "positions", X)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


def _points(ensemble):
    X = ensemble.positions if isinstance(ensemble, ParticleEnsemble) else np.asarray(ensemble, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_arity(k, n):
    if n < k:
        raise ArityError(f"U-statistic of order {k} needs n >= {k}, got n={n}")


def _combinations(n, k):
    count = math.comb(n, k)
    if count > ENUMERATION_LIMIT:
        raise ComplexityRefusal(
            f"enumerating C({n},{k})={count} subsets exceeds the limit {ENUMERATION_LIMIT}")
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.intp).reshape(count, k)


def subset_sum(kernel: InteractionKernel, X, method="auto"):
    """Sum of W over all k-subsets of the rows of X (shape (..., n, d))."""
    X = np.asarray(X, dtype=float)
    k, n = kernel.order, X.shape[-2]
    _check_arity(k, n)
    if method in ("auto", "factored"):
        s = kernel.subset_sum(X)
        if s is not None:
            return s
        if method == "factored":
            raise ComplexityRefusal(f"{kernel!r} has no factored evaluation path")
    idx = _combinations(n, k)
    vals = kernel.evaluate(*[X[..., idx[:, j], :] for j in range(k)])
    return np.sum(vals, axis=-1)


def subset_gradient(kernel: InteractionKernel, X, method="auto"):
    """Entry i: sum over the k-subsets containing i of the partial gradient in slot i."""
    X = np.asarray(X, dtype=float)
    k, n = kernel.order, X.shape[-2]
    _check_arity(k, n)
    if method in ("auto", "factored"):
        g = kernel.subset_gradient(X)
        if g is not None:
            return g
        if method == "factored":
            raise ComplexityRefusal(f"{kernel!r} has no factored gradient path")
    idx = _combinations(n, k)
    pts = [X[..., idx[:, j], :] for j in range(k)]
    out = np.zeros_like(X)
    lead = (slice(None),) * (X.ndim - 2)
    for j in range(k):
        np.add.at(out, lead + (idx[:, j],), kernel.partial_gradient(j, pts))
    return out


def u_statistic(kernel: InteractionKernel, ensemble, method="auto") -> float:
    """Average of the kernel over all k-subsets of the sample.

    ``method`` is "auto" (power-sum path when the kernel has one),
    "enumerate" (the brute-force oracle) or "factored".
    """
    X = _points(ensemble)
    total = subset_sum(kernel, X, method=method)
    return total / math.comb(X.shape[-2], kernel.order)


def _interaction_energy(model, X, method="auto"):
    n = X.shape[-2]
    e = 0.0
    for kern in model.kernels:
        e = e + n * subset_sum(kern, X, method) / math.comb(n, kern.order)
    return e


def hamiltonian(model: ModelSpec, ensemble, method="auto"):
    X = _points(ensemble)
    _check_arity(model.max_order, X.shape[-2])
    return np.sum(model.confinement(X), axis=-1) + _interaction_energy(model, X, method)


def gradient_coefficient(n, k) -> float:
    """k! (n-k)! / (n-1)!, the weight of a subset sum inside grad(n U_n)."""
    return n / math.comb(n, k)


def interaction_gradient(model: ModelSpec, X, method="auto"):
    X = np.asarray(X, dtype=float)
    n = X.shape[-2]
    g = np.zeros_like(X)
    for kern in model.kernels:
        g += gradient_coefficient(n, kern.order) * subset_gradient(kern, X, method)
    return g


def hamiltonian_gradient(model: ModelSpec, ensemble, method="auto") -> np.ndarray:
    X = _points(ensemble)
    _check_arity(model.max_order, X.shape[-2])
    return model.confinement.grad(X) + interaction_gradient(model, X, method)


def kinetic_hamiltonian(model: ModelSpec, positions, velocities, method="auto"):
    X = _points(positions)
    Vel = _points(velocities)
    if X.shape != Vel.shape:
        raise ArityError(f"positions {X.shape} and velocities {Vel.shape} differ in shape")
    return 0.5 * np.sum(Vel * Vel, axis=(-2, -1)) + hamiltonian(model, X, method)


def decoupling_constant(k: int) -> float:
    if int(k) != k or k < 2:
        raise ArityError(f"decoupling constant needs k >= 2, got {k}")
    if k == 2:
        return 8.0
    return float(2 ** k * math.prod(j ** j - 1 for j in range(2, k + 1)))


# ---------------------------------------------------------------- grid calculus


def _tensor_cost_guard(kernel, m):
    k = kernel.order
    if kernel.kind == "table" and k > 3:
        raise ComplexityRefusal(f"order-{k} table kernel needs m^{k} evaluations")
    if m ** k > GRID_TENSOR_LIMIT:
        raise ComplexityRefusal(f"tensor quadrature of order {k} on m={m} nodes costs {m ** k}")


def _partial_integral(kernel, x, p):
    """x -> int W(x, y_2, ..., y_k) d mu(y_2) ... d mu(y_k) by tensor quadrature."""
    k = kernel.order
    _tensor_cost_guard(kernel, x.size)
    pts = x[:, None]
    if k == 2:
        W = kernel.evaluate(pts[:, None, :], pts[None, :, :])
        return W @ p
    out = np.empty_like(x)
    grids = np.meshgrid(*([x] * (k - 1)), indexing="ij")
    weight = p
    for _ in range(k - 2):
        weight = np.multiply.outer(weight, p)
    others = [g[..., None] for g in grids]
    for i, xi in enumerate(x):
        out[i] = np.sum(kernel.evaluate(np.array([xi]), *others) * weight)
    return out


def _grid_inputs(mu):
    if not isinstance(mu, GridMeasure):
        raise GridError("grid calculus needs a GridMeasure")
    return mu.grid.x, mu.masses


def monomial(kernel: InteractionKernel, mu: GridMeasure) -> float:
    """int W d mu^{(x) k} with cell-mass quadrature (moment formula for builtins)."""
    x, p = _grid_inputs(mu)
    val = kernel.grid_monomial(x, p)
    if val is not None:
        return float(val)
    return float(p @ _partial_integral(kernel, x, p))


def flat_derivative_values(kernels, mu: GridMeasure, normalize=True) -> np.ndarray:
    x, p = _grid_inputs(mu)
    out = np.zeros_like(x)
    for kern in kernels:
        f = kern.grid_flat(x, p)
        if f is None:
            # symmetric kernel: every slot contributes the same partial integral
            f = kern.order * _partial_integral(kern, x, p)
        out += f
    if normalize:
        out -= p @ out
    return out


def flat_derivative(kernels, mu: GridMeasure) -> GridFunction:
    """Linear functional derivative of F, normalized to zero mean under mu."""
    return GridFunction(mu.grid, flat_derivative_values(kernels, mu, normalize=True))


def intrinsic_derivative(kernels, mu: GridMeasure) -> GridFunction:
    vals = flat_derivative_values(kernels, mu, normalize=False)
    return GridFunction(mu.grid, np.gradient(vals, mu.grid.h))


def interaction_energy_grid(kernels, mu: GridMeasure) -> list:
    return [monomial(k, mu) for k in kernels]
