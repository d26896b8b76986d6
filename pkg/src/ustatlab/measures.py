"""Divergences, transport distances and spectral gaps for grid measures and samples."""
from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import ArityError, ComplexityRefusal, CoverageError, DomainError, GridError, NumericalError
from .grids import Grid, GridFunction, GridMeasure, PhaseGridMeasure, check_same_grid

QUANTILE_NODES = 4096
DEFAULT_BANDWIDTH = 0.0
MAX_ESCAPED_FRACTION = 1e-3
ASSIGNMENT_LIMIT = 256


class _PositiveInfinity:
    """Tagged +infinity: compares above every real but refuses arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __gt__(self, other):
        return not isinstance(other, _PositiveInfinity)

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return isinstance(other, _PositiveInfinity)

    def to_json(self):
        return "inf"


INFINITY = _PositiveInfinity()


def is_infinite(value) -> bool:
    return value is INFINITY


def histogram_density(samples, grid: Grid, bandwidth: float = DEFAULT_BANDWIDTH) -> GridMeasure:
    """Bin samples into the grid cells; the result carries ``escaped_fraction``."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise DomainError("cannot build a histogram from an empty sample")
    idx = np.rint((s - grid.lo) / grid.h).astype(np.int64)
    inside = (idx >= 0) & (idx < grid.m)
    escaped = 1.0 - inside.mean()
    if escaped > MAX_ESCAPED_FRACTION:
        raise CoverageError(escaped)
    counts = np.bincount(idx[inside], minlength=grid.m).astype(float)
    if bandwidth > 0:
        counts = gaussian_filter1d(counts, bandwidth / grid.h, mode="constant")
    mu = GridMeasure.from_density(grid, counts)
    mu.escaped_fraction = float(escaped)
    mu.bandwidth = float(bandwidth)
    return mu


def _log_ratio(nu_w, mu_w):
    support = nu_w > 0
    if np.any(support & (mu_w <= 0)):
        return None, support
    r = np.zeros_like(nu_w)
    r[support] = np.log(nu_w[support]) - np.log(mu_w[support])
    return r, support


def relative_entropy(nu: GridMeasure, mu: GridMeasure):
    """sum nu log(nu / mu) h with 0 log 0 = 0; INFINITY when nu is not absolutely continuous."""
    g = check_same_grid(nu.grid, mu.grid)
    r, support = _log_ratio(nu.weights, mu.weights)
    if r is None:
        return INFINITY
    return float(np.sum(nu.weights[support] * r[support]) * g.h)


def support_gradient(values, support, h):
    """Central differences inside the support, one-sided at its boundary."""
    m = values.size
    grad = np.zeros(m)
    left = np.zeros(m, dtype=bool)
    right = np.zeros(m, dtype=bool)
    left[1:] = support[:-1]
    right[:-1] = support[1:]
    both = support & left & right
    only_r = support & right & ~left
    only_l = support & left & ~right
    vp = np.roll(values, -1)
    vm = np.roll(values, 1)
    grad[both] = (vp[both] - vm[both]) / (2 * h)
    grad[only_r] = (vp[only_r] - values[only_r]) / h
    grad[only_l] = (values[only_l] - vm[only_l]) / h
    return grad


def fisher_information(nu: GridMeasure, mu: GridMeasure):
    """(1/4) sum nu |grad log(nu / mu)|^2 h."""
    g = check_same_grid(nu.grid, mu.grid)
    r, support = _log_ratio(nu.weights, mu.weights)
    if r is None:
        return INFINITY
    grad = support_gradient(r, support, g.h)
    return float(0.25 * np.sum(nu.weights * grad ** 2) * g.h)


def total_variation(nu: GridMeasure, mu: GridMeasure) -> float:
    g = check_same_grid(nu.grid, mu.grid)
    return float(0.5 * np.sum(np.abs(nu.weights - mu.weights)) * g.h)


def _quantiles(obj, u):
    if isinstance(obj, GridMeasure):
        return obj.quantile(u)
    if hasattr(obj, "ppf"):
        return np.asarray(obj.ppf(u), dtype=float)
    raise TypeError(f"cannot take quantiles of {type(obj).__name__}")


def wasserstein2_1d(a, b) -> float:
    """W2 on the line by quantile coupling.

    Two sample arrays: order statistics (equal counts required). Two grid
    measures: inverse CDFs on QUANTILE_NODES midpoints. A sample against a
    grid measure or any object with a ``ppf`` method: the other side's
    quantiles at the sample's own midpoints (k + 1/2) / N.
    """
    a_samples = not (isinstance(a, GridMeasure) or hasattr(a, "ppf"))
    b_samples = not (isinstance(b, GridMeasure) or hasattr(b, "ppf"))
    if a_samples and b_samples:
        xa = np.sort(np.asarray(a, dtype=float).ravel())
        xb = np.sort(np.asarray(b, dtype=float).ravel())
        if xa.size != xb.size:
            raise ArityError(f"sample counts differ ({xa.size} vs {xb.size}); resample first")
        return float(np.sqrt(np.mean((xa - xb) ** 2)))
    if a_samples or b_samples:
        samples, law = (a, b) if a_samples else (b, a)
        xs = np.sort(np.asarray(samples, dtype=float).ravel())
        u = (np.arange(xs.size) + 0.5) / xs.size
        return float(np.sqrt(np.mean((xs - _quantiles(law, u)) ** 2)))
    u = (np.arange(QUANTILE_NODES) + 0.5) / QUANTILE_NODES
    return float(np.sqrt(np.mean((_quantiles(a, u) - _quantiles(b, u)) ** 2)))


def wasserstein1_grid(a: GridMeasure, b: GridMeasure) -> float:
    """W1 = integral of |F_a - F_b| with the piecewise-linear cell CDFs."""
    g = check_same_grid(a.grid, b.grid)
    diff = np.abs(a.cdf_at_edges() - b.cdf_at_edges())
    return float(np.sum(0.5 * (diff[1:] + diff[:-1])) * g.h)


def wasserstein2_assignment(a, b) -> float:
    """Exact W2 between two equal-size point clouds via optimal assignment."""
    A = np.asarray(getattr(a, "positions", a), dtype=float)
    B = np.asarray(getattr(b, "positions", b), dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape != B.shape:
        raise ArityError(f"clouds differ in shape: {A.shape} vs {B.shape}")
    if A.shape[0] > ASSIGNMENT_LIMIT:
        raise ComplexityRefusal(f"assignment limited to n <= {ASSIGNMENT_LIMIT}, got {A.shape[0]}")
    cost = cdist(A, B, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def spectral_gap_1d(mu: GridMeasure) -> float:
    """Smallest nonzero eigenvalue of int |g'|^2 d mu against L2(mu).

    Edge conductances are geometric means of neighbouring weights, which makes
    the symmetrized operator tridiagonal with off-diagonal -1/h^2.
    """
    w = mu.weights
    h = mu.grid.h
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise NumericalError("spectral gap needs strictly positive weights on the grid")
    ratio = np.sqrt(w[1:] / w[:-1])
    diag = np.zeros(w.size)
    diag[:-1] += ratio
    diag[1:] += 1.0 / ratio
    diag /= h * h
    off = -np.ones(w.size - 1) / (h * h)
    vals = eigh_tridiagonal(diag, off, select="i", select_range=(0, 1), eigvals_only=True)
    if abs(vals[0]) > 1e-6 * abs(vals[1]) + 1e-8:
        raise NumericalError(f"ground state eigenvalue {vals[0]:.3e} is not zero")
    return float(vals[1])


def boltzmann_decompose(nu: GridMeasure, mu: GridMeasure, U):
    """(H[nu | mu_U], (H[nu | mu], int U d nu, log int e^-U d mu)) with mu_U proportional to e^-U mu."""
    g = check_same_grid(nu.grid, mu.grid)
    u = U.values if isinstance(U, GridFunction) else np.asarray(U, dtype=float)
    if isinstance(U, GridFunction):
        check_same_grid(U.grid, g)
    pos = mu.weights > 0
    log_z = float(logsumexp(-u[pos], b=mu.weights[pos] * g.h))
    log_mu_u = np.full(g.m, -np.inf)
    log_mu_u[pos] = np.log(mu.weights[pos]) - u[pos] - log_z
    mu_u = GridMeasure(g, np.exp(log_mu_u), check=False)
    lhs = relative_entropy(nu, mu_u)
    rhs = (relative_entropy(nu, mu), nu.expect(u), log_z)
    return lhs, rhs


def tensorization_gap(Q: PhaseGridMeasure, alpha1: GridMeasure, alpha2: GridMeasure):
    """(H[Q | a1 (x) a2], H[Q1 | a1] + H[Q2 | a2])."""
    check_same_grid(Q.xgrid, alpha1.grid)
    check_same_grid(Q.vgrid, alpha2.grid)
    ref = np.outer(alpha1.weights, alpha2.weights)
    q = Q.weights
    support = q > 0
    if np.any(support & (ref <= 0)):
        joint = INFINITY
    else:
        joint = float(np.sum(q[support] * np.log(q[support] / ref[support])) * Q.cell_area)
    h1 = relative_entropy(Q.x_marginal(), alpha1)
    h2 = relative_entropy(Q.v_marginal(), alpha2)
    marg = INFINITY if INFINITY in (h1, h2) else h1 + h2
    return joint, marg


__all__ = [
    "Grid", "GridMeasure", "PhaseGridMeasure", "INFINITY", "is_infinite", "histogram_density",
    "relative_entropy", "fisher_information", "total_variation", "wasserstein2_1d",
    "wasserstein1_grid", "wasserstein2_assignment", "spectral_gap_1d", "boltzmann_decompose",
    "tensorization_gap", "QUANTILE_NODES",
]
