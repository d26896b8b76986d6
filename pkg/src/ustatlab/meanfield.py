"""Measure-level objects: free energy, Gibbs fixed point, nonlinear FP and VFP flows."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import logsumexp

from .errors import GridError, NoContraction, NumericalError, StabilityError
from .grids import Grid, GridMeasure, PhaseGridMeasure, check_same_grid
from .interaction import flat_derivative_values, hamiltonian_gradient, monomial, subset_sum
from .measures import INFINITY, is_infinite, relative_entropy, support_gradient, wasserstein1_grid
from .potentials import ModelSpec


def _require_1d(model: ModelSpec):
    if model.dimension != 1:
        raise GridError("grid functionals are one-dimensional")


def confinement_on_grid(model: ModelSpec, grid: Grid) -> np.ndarray:
    _require_1d(model)
    return np.asarray(model.confinement(grid.x[:, None]), dtype=float)


def reference_measure(model: ModelSpec, grid: Grid) -> GridMeasure:
    """alpha proportional to exp(-V) on the grid."""
    return GridMeasure.from_log_density(grid, -confinement_on_grid(model, grid))


def mean_field_potential(mu: GridMeasure, model: ModelSpec) -> np.ndarray:
    """V + unnormalized flat derivative of F at mu; its gradient is the drift."""
    return confinement_on_grid(model, mu.grid) + flat_derivative_values(model.kernels, mu, normalize=False)


@dataclass
class EnergyBreakdown:
    relative_entropy_term: object
    interaction_terms: list
    total: object

    def to_dict(self):
        def enc(v):
            return v.to_json() if is_infinite(v) else v
        return {"relative_entropy_term": enc(self.relative_entropy_term),
                "interaction_terms": self.interaction_terms, "total": enc(self.total)}


def mean_field_energy(mu: GridMeasure, model: ModelSpec, alpha: GridMeasure = None) -> EnergyBreakdown:
    _require_1d(model)
    alpha = alpha or reference_measure(model, mu.grid)
    check_same_grid(mu.grid, alpha.grid)
    ent = relative_entropy(mu, alpha)
    terms = [monomial(k, mu) for k in model.kernels]
    total = INFINITY if is_infinite(ent) else ent + sum(terms)
    return EnergyBreakdown(ent, terms, total)


def gamma_map(mu: GridMeasure, model: ModelSpec) -> GridMeasure:
    """Normalized exp(-dF/dm(mu, .) - V) on the grid."""
    return GridMeasure.from_log_density(mu.grid, -mean_field_potential(mu, model))


@dataclass
class FixedPointResult:
    measure: GridMeasure
    iterations: int
    final_residual: float
    contraction_estimate: float
    residuals: list = field(default_factory=list)

    def to_dict(self):
        return {"iterations": self.iterations, "final_residual": self.final_residual,
                "contraction_estimate": self.contraction_estimate,
                "residuals": list(self.residuals), "mean": self.measure.mean(),
                "var": self.measure.var()}


def _contraction(residuals):
    ratios = [b / a for a, b in zip(residuals[:-1], residuals[1:]) if a > 0]
    if not ratios:
        return 0.0
    tail = np.array(ratios[-3:])
    if np.any(tail <= 0):
        return 0.0
    return float(np.exp(np.mean(np.log(tail))))


def solve_fixed_point(model: ModelSpec, grid: Grid, tol: float = 1e-10, max_iter: int = 500,
                      init: GridMeasure = None) -> FixedPointResult:
    """Picard iteration mu <- Gamma(mu) until W1 between iterates is at most tol."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    mu = init if init is not None else reference_measure(model, grid)
    check_same_grid(mu.grid, grid)
    residuals = []
    for it in range(1, max_iter + 1):
        nxt = gamma_map(mu, model)
        r = wasserstein1_grid(nxt, mu)
        residuals.append(r)
        mu = nxt
        if r <= tol:
            return FixedPointResult(mu, it, r, _contraction(residuals), residuals)
    report = {"iterations": max_iter, "final_residual": residuals[-1],
              "contraction_estimate": _contraction(residuals), "residuals": residuals[-10:]}
    raise NoContraction(report)


def mean_field_entropy(mu: GridMeasure, model: ModelSpec, mu_inf: GridMeasure, alpha=None) -> float:
    """E_W[mu] - E_W[mu_inf]."""
    alpha = alpha or reference_measure(model, mu.grid)
    e = mean_field_energy(mu, model, alpha).total
    if is_infinite(e):
        return INFINITY
    value = e - mean_field_energy(mu_inf, model, alpha).total
    if value < -1e-8:
        raise NumericalError(f"mean-field entropy {value:.3e} is negative: mu_inf is not the minimizer")
    return float(value)


def mean_field_fisher(mu: GridMeasure, model: ModelSpec, alpha=None) -> float:
    """(1/4) int |d/dx (log(d mu / d alpha) + dF/dm)|^2 d mu."""
    alpha = alpha or reference_measure(model, mu.grid)
    w, a = mu.weights, alpha.weights
    support = w > 0
    if np.any(support & (a <= 0)):
        return INFINITY
    psi = np.zeros_like(w)
    psi[support] = np.log(w[support]) - np.log(a[support])
    psi += flat_derivative_values(model.kernels, mu, normalize=False)
    grad = support_gradient(psi, support, mu.grid.h)
    return float(0.25 * np.sum(w * grad ** 2) * mu.grid.h)


# ---------------------------------------------------------------- Fokker-Planck


def bernoulli(z):
    """B(z) = z / (e^z - 1), with B(0) = 1."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, safe / np.expm1(safe))


def _sg_rates(phi, h):
    """Scharfetter-Gummel jump rates (to the right, to the left) across each interior face."""
    delta = np.diff(phi)
    return bernoulli(delta) / (h * h), bernoulli(-delta) / (h * h)


def fp_admissible_dt(phi, h):
    right, left = _sg_rates(phi, h)
    out = np.zeros(phi.size)
    out[:-1] += right
    out[1:] += left
    return 1.0 / float(np.max(out))


def _sg_apply(w, right, left, dt):
    flow = right * w[:-1] - left * w[1:]
    new = w.copy()
    new[:-1] -= dt * flow
    new[1:] += dt * flow
    return new


def _renormalize(w, h):
    w = np.where(w < -1e-14, 0.0, np.maximum(w, 0.0))
    return w / (w.sum() * h)


def fokker_planck_step(mu: GridMeasure, model: ModelSpec, dt: float) -> GridMeasure:
    """One explicit exponentially fitted finite-volume step of the nonlinear FP equation.

    The drift potential V + dF/dm(mu) is frozen at the start of the step. The
    Scharfetter-Gummel flux is exact on exp(-potential), so the Gamma fixed
    point is a discrete stationary state; boundaries carry zero flux.
    """
    h = mu.grid.h
    phi = mean_field_potential(mu, model)
    right, left = _sg_rates(phi, h)
    limit = fp_admissible_dt(phi, h)
    if dt > limit:
        raise StabilityError(dt, limit, "fokker_planck_step")
    return GridMeasure(mu.grid, _renormalize(_sg_apply(mu.weights, right, left, dt), h))


def fokker_planck_flow(mu0: GridMeasure, model: ModelSpec, dt: float, horizon: float,
                       record_every: int = 1, callback=None):
    """Evolve mu0 and return (times, measures) at every ``record_every`` steps and at the end."""
    h = mu0.grid.h
    V = confinement_on_grid(model, mu0.grid)
    n_steps = int(round(horizon / dt))
    w = mu0.weights.copy()
    mu = mu0
    times, out = [0.0], [mu0]
    for k in range(1, n_steps + 1):
        phi = V + flat_derivative_values(model.kernels, mu, normalize=False)
        right, left = _sg_rates(phi, h)
        if k == 1 or k % 100 == 0:
            limit = fp_admissible_dt(phi, h)
            if dt > limit:
                raise StabilityError(dt, limit, "fokker_planck_flow")
        w = _renormalize(_sg_apply(w, right, left, dt), h)
        mu = GridMeasure(mu0.grid, w, check=False)
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            out.append(GridMeasure(mu0.grid, w.copy()))
            if callback is not None:
                callback(k * dt, out[-1])
    return np.array(times), out


# ---------------------------------------------------------------- kinetic


def maxwellian(vgrid: Grid) -> GridMeasure:
    return GridMeasure.gaussian(vgrid, 0.0, 1.0)


def kinetic_equilibrium(mu_inf: GridMeasure, vgrid: Grid) -> PhaseGridMeasure:
    return PhaseGridMeasure.product(mu_inf, maxwellian(vgrid))


@lru_cache(maxsize=16)
def _ou_matrix(lo, hi, m, dt):
    """Column-stochastic exp(dt Q) for the velocity OU generator on masses."""
    vgrid = Grid(lo, hi, m)
    right, left = _sg_rates(0.5 * vgrid.x ** 2, vgrid.h)
    Q = np.zeros((m, m))
    idx = np.arange(m - 1)
    Q[idx + 1, idx] += right
    Q[idx, idx] -= right
    Q[idx, idx + 1] += left
    Q[idx + 1, idx + 1] -= left
    P = expm(dt * Q)
    P = np.maximum(P, 0.0)
    return P / P.sum(axis=0, keepdims=True)


def _transport_fluxes(phi, vgrid: Grid):
    """Face fluxes of exp(-H) u from a corner stream function; exactly divergence free."""
    v = vgrid.x
    hv = vgrid.h
    H = phi[:, None] + 0.5 * v[None, :] ** 2
    shift = H.min()
    phi_c = 0.5 * (phi[1:] + phi[:-1])
    v_c = v[:-1] + 0.5 * hv
    psi = np.zeros((phi.size + 1, v.size + 1))
    psi[1:-1, 1:-1] = -np.exp(-(phi_c[:, None] + 0.5 * v_c[None, :] ** 2 - shift))
    gx = psi[1:-1, 1:] - psi[1:-1, :-1]      # interior x faces, shape (mx-1, mv)
    gv = -(psi[1:, 1:-1] - psi[:-1, 1:-1])   # interior v faces, shape (mx, mv-1)
    M = np.exp(-(H - shift))
    return gx, gv, M


def _transport_step(p, phi, xgrid, vgrid, dt, check=True):
    """Upwind transport of masses p (mx, mv) along the frozen Hamiltonian flow."""
    gx, gv, M = _transport_fluxes(phi, vgrid)
    area = xgrid.h * vgrid.h
    inv = 1.0 / (M * area)
    gxp, gxm = np.maximum(gx, 0.0), np.maximum(-gx, 0.0)
    gvp, gvm = np.maximum(gv, 0.0), np.maximum(-gv, 0.0)
    if check:
        out = np.zeros_like(p)
        out[:-1, :] += gxp
        out[1:, :] += gxm
        out[:, :-1] += gvp
        out[:, 1:] += gvm
        limit = 1.0 / float(np.max(out * inv))
        if dt > limit:
            raise StabilityError(dt, limit, "vfp transport")
    g = p * inv
    fx = gxp * g[:-1, :] - gxm * g[1:, :]
    fv = gvp * g[:, :-1] - gvm * g[:, 1:]
    new = p.copy()
    new[:-1, :] -= dt * fx
    new[1:, :] += dt * fx
    new[:, :-1] -= dt * fv
    new[:, 1:] += dt * fv
    return new


def vfp_admissible_dt(mu: PhaseGridMeasure, model: ModelSpec) -> float:
    phi = mean_field_potential(mu.x_marginal(), model)
    gx, gv, M = _transport_fluxes(phi, mu.vgrid)
    out = np.zeros_like(M)
    out[:-1, :] += np.maximum(gx, 0)
    out[1:, :] += np.maximum(-gx, 0)
    out[:, :-1] += np.maximum(gv, 0)
    out[:, 1:] += np.maximum(-gv, 0)
    # the transport substeps each take dt / 2
    return 2.0 / float(np.max(out / (M * mu.cell_area)))


def vfp_step(mu: PhaseGridMeasure, model: ModelSpec, dt: float) -> PhaseGridMeasure:
    """Strang step: half transport, exact discrete OU in v, half transport.

    Each substep is a Markov kernel leaving exp(-Phi(x) - v^2/2) invariant,
    where Phi = V + dF/dm of the current position marginal.
    """
    xg, vg = mu.xgrid, mu.vgrid
    p = mu.masses
    phi = mean_field_potential(mu.x_marginal(), model)
    p = _transport_step(p, phi, xg, vg, 0.5 * dt)
    P = _ou_matrix(vg.lo, vg.hi, vg.m, float(dt))
    p = p @ P.T
    phi = mean_field_potential(GridMeasure.from_density(xg, p.sum(axis=1)), model)
    p = _transport_step(p, phi, xg, vg, 0.5 * dt)
    p = np.maximum(p, 0.0)
    p /= p.sum()
    return PhaseGridMeasure(xg, vg, p / mu.cell_area)


def vfp_free_energy(mu: PhaseGridMeasure, model: ModelSpec, mu_Z_inf: PhaseGridMeasure):
    """(E, S, I): kinetic free energy, its excess over mu_Z_inf, and the velocity Fisher term."""
    check_same_grid(mu.xgrid, mu_Z_inf.xgrid)
    check_same_grid(mu.vgrid, mu_Z_inf.vgrid)
    alpha = reference_measure(model, mu.xgrid)
    gauss = maxwellian(mu.vgrid)
    ref = np.outer(alpha.weights, gauss.weights)

    def energy(m):
        w = m.weights
        support = w > 0
        if np.any(support & (ref <= 0)):
            return INFINITY, None
        lr = np.zeros_like(w)
        lr[support] = np.log(w[support]) - np.log(ref[support])
        ent = float(np.sum(w * lr) * m.cell_area)
        mx = m.x_marginal()
        return ent + sum(monomial(k, mx) for k in model.kernels), (lr, support)

    E, aux = energy(mu)
    E_inf, _ = energy(mu_Z_inf)
    if is_infinite(E):
        return INFINITY, INFINITY, INFINITY
    lr, support = aux
    dv = np.zeros_like(lr)
    for i in range(lr.shape[0]):
        dv[i] = support_gradient(lr[i], support[i], mu.vgrid.h)
    I = float(np.sum(mu.weights * dv ** 2) * mu.cell_area)
    return E, E - E_inf, I


# ---------------------------------------------------------------- Cesaro limits


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def _log_alpha_normalizer(model):
    val, _ = quad(lambda x: math.exp(-float(model.confinement(np.array([[x]]))[0])),
                  -np.inf, np.inf, limit=200)
    return math.log(val)


def _sample_proposal(q: GridMeasure, shape, rng):
    x = q.sample(shape, rng)
    idx = np.clip(np.rint((x - q.grid.lo) / q.grid.h).astype(np.int64), 0, q.grid.m - 1)
    with np.errstate(divide="ignore"):
        log_q = np.log(q.weights[idx])
    return x, log_q


def log_partition_mc(model: ModelSpec, n: int, n_samples: int, seed: int, grid: Grid = None,
                     proposal: str = "auto", chunk: int = 20000) -> MCEstimate:
    """Importance-sampling estimate of (1/n) log E_{alpha^n}[exp(-n sum_k U_n)].

    ``proposal`` is "alpha" (the cell histogram of alpha) or "mean_field"
    (the histogram of the Gamma fixed point, which absorbs the linear part of
    the interaction); "auto" picks "mean_field" when kernels are present.
    The stderr is the delta-method standard error of the log-mean weight.
    """
    _require_1d(model)
    if not model.kernels:
        return MCEstimate(0.0, 0.0)
    grid = grid or Grid(-8.0, 8.0, 1601)
    if proposal == "auto":
        proposal = "mean_field"
    if proposal == "alpha":
        q = reference_measure(model, grid)
    elif proposal == "mean_field":
        q = solve_fixed_point(model, grid, tol=1e-12, max_iter=2000).measure
    else:
        raise ValueError(f"unknown proposal {proposal!r}")
    log_c = _log_alpha_normalizer(model)
    logw_all = []
    done = 0
    block = 0
    while done < n_samples:
        size = min(chunk, n_samples - done)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(n, block))))
        x, log_q = _sample_proposal(q, (size, n), rng)
        X = x[..., None]
        log_alpha = -model.confinement(X) - log_c
        energy = 0.0
        for kern in model.kernels:
            energy = energy + n * subset_sum(kern, X) / math.comb(n, kern.order)
        logw_all.append(np.sum(log_alpha - log_q, axis=-1) - energy)
        done += size
        block += 1
    logw = np.concatenate(logw_all)
    N = logw.size
    log_mean = float(logsumexp(logw) - math.log(N))
    w = np.exp(logw - logw.max())
    rel_se = float(np.std(w, ddof=1) / (np.mean(w) * math.sqrt(N)))
    return MCEstimate(log_mean / n, rel_se / n)


def cesaro_entropy(nu: GridMeasure, model: ModelSpec, n: int, n_samples: int, seed: int,
                   **mc_kwargs) -> MCEstimate:
    """(1/n) H[nu^n | mu_n] = H[nu | alpha] + sum_k int W d nu^k + (1/n) log Z_n."""
    e = mean_field_energy(nu, model)
    if is_infinite(e.total):
        return MCEstimate(INFINITY, 0.0)
    lz = log_partition_mc(model, n, n_samples, seed, **mc_kwargs)
    return MCEstimate(float(e.total + lz.value), lz.stderr)


def cesaro_fisher(nu: GridMeasure, model: ModelSpec, n: int, n_samples: int, seed: int,
                  chunk: int = 20000) -> MCEstimate:
    """(1/n) times the Fisher information of nu^n relative to the Gibbs measure.

    Uses (1/(4n)) E sum_i |d log nu(x_i) + grad_i H_n(x)|^2 under nu^n; the
    normalizing constant of the Gibbs measure drops out of the score.
    """
    _require_1d(model)
    w = nu.weights
    support = w > 0
    logw = np.where(support, np.log(np.where(support, w, 1.0)), 0.0)
    score = support_gradient(logw, support, nu.grid.h)
    vals = []
    done = 0
    block = 0
    while done < n_samples:
        size = min(chunk, n_samples - done)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(n, block, 1))))
        x = nu.sample((size, n), rng)
        g = hamiltonian_gradient(model, x[..., None])[..., 0]
        s = np.interp(x, nu.grid.x, score)
        vals.append(0.25 * np.sum((s + g) ** 2, axis=-1) / n)
        done += size
        block += 1
    vals = np.concatenate(vals)
    return MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)))
