"""Decay fits and the experiment harnesses built on the particle and grid solvers."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import ArityError, BlowUp, ComplexityRefusal, DomainError, StabilityError
from .grids import Grid, GridMeasure, PhaseGridMeasure
from .interaction import decoupling_constant, subset_sum
from .meanfield import (
    fokker_planck_flow, kinetic_equilibrium, maxwellian, mean_field_energy, mean_field_fisher,
    reference_measure, solve_fixed_point, vfp_free_energy, vfp_step,
)
from .measures import wasserstein2_1d
from .particles import SimConfig, simulate
from .potentials import InteractionKernel, ModelSpec

MIN_FIT_POINTS = 8
FLOOR = 1e-13


@dataclass
class DecayFit:
    rate: float
    prefactor: float
    r_squared: float
    window: tuple

    def to_dict(self):
        return {"rate": self.rate, "prefactor": self.prefactor, "r_squared": self.r_squared,
                "window": list(self.window)}


@dataclass
class DecaySeries:
    times: np.ndarray
    values: np.ndarray
    fit: Optional[DecayFit]

    def to_dict(self):
        return {"times": self.times.tolist(), "values": self.values.tolist(),
                "fit": self.fit.to_dict() if self.fit else None}


def fit_decay(times, values, window=None) -> DecaySeries:
    """Least squares of log(value) against t over the window; rate is the negated slope."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    lo, hi = window if window is not None else (t[0], t[-1])
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < MIN_FIT_POINTS:
        raise DomainError(f"need at least {MIN_FIT_POINTS} points in the window, got {sel.sum()}")
    if np.any(~(v[sel] > 0)):
        raise DomainError("decay fit needs strictly positive values on the window")
    y = np.log(v[sel])
    slope, intercept = np.polyfit(t[sel], y, 1)
    resid = y - (slope * t[sel] + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(y ** 2))):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return DecaySeries(t, v, DecayFit(float(-slope), float(math.exp(intercept)), r2, (float(lo), float(hi))))


def _try_fit(times, values, window):
    t = np.asarray(times)
    v = np.asarray(values)
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if sel.sum() and np.max(np.abs(v[sel])) < FLOOR:
        return DecaySeries(t, v, None)
    try:
        return fit_decay(t, v, window)
    except DomainError:
        return DecaySeries(t, v, None)


# ---------------------------------------------------------------- first order


@dataclass
class FirstOrderReport:
    entropy_series: DecaySeries
    w2_series: DecaySeries
    talagrand_margin: Optional[float]
    talagrand_relative: Optional[float]
    talagrand_margin_alt: Optional[float]
    talagrand_relative_alt: Optional[float]
    energy_max_increase: float
    lsi_ratio_min: Optional[float]
    mean: np.ndarray
    var: np.ndarray
    fixed_point: object
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fisher: np.ndarray = field(default_factory=lambda: np.zeros(0))
    final_measure: Optional[GridMeasure] = None

    def to_dict(self):
        return {
            "entropy_series": self.entropy_series.to_dict(),
            "w2_series": self.w2_series.to_dict(),
            "talagrand_margin": self.talagrand_margin,
            "talagrand_relative": self.talagrand_relative,
            "talagrand_margin_alt": self.talagrand_margin_alt,
            "talagrand_relative_alt": self.talagrand_relative_alt,
            "energy_max_increase": self.energy_max_increase,
            "lsi_ratio_min": self.lsi_ratio_min,
            "fixed_point": self.fixed_point.to_dict(),
        }

    def csv_rows(self):
        return np.column_stack([self.times, self.energy, self.entropy_series.values, self.fisher,
                                self.w2_series.values, self.mean, self.var])


CSV_FIRST_ORDER = ("t", "E_W", "H_W", "I_W", "W2_to_equilibrium", "mean", "var")


def _talagrand(H, W2, rho, convention_factor):
    """min over t of convention_factor * H / rho - W2^2, absolute and relative to W2^2."""
    margins = convention_factor * H / rho - W2 ** 2
    scale = np.where(W2 ** 2 > FLOOR, W2 ** 2, np.nan)
    rel = margins / scale
    rel = rel[np.isfinite(rel)]
    return float(np.min(margins)), (float(np.min(rel)) if rel.size else None)


def run_first_order(model: ModelSpec, grid: Grid, mu0: GridMeasure, horizon: float, dt: float,
                    record_every: int = None, window=None, fp_tol=1e-10, fixed_point=None) -> FirstOrderReport:
    """Evolve mu0 by the nonlinear FP flow and fit entropy and W2 decays.

    talagrand_margin uses rho_LS = 2 * (fitted entropy rate), i.e.
    min_t [H_W / rate - W2^2]. The ``_alt`` fields use rho = rate / 2, the
    constant of an entropy decaying like exp(-2 rho t), i.e.
    min_t [4 H_W / rate - W2^2].
    """
    fp = fixed_point or solve_fixed_point(model, grid, tol=fp_tol, max_iter=5000, init=mu0)
    mu_inf = fp.measure
    if record_every is None:
        record_every = max(1, int(round(0.05 / dt)))
    times, measures = fokker_planck_flow(mu0, model, dt, horizon, record_every)
    alpha = reference_measure(model, grid)
    e_inf = mean_field_energy(mu_inf, model, alpha).total
    E = np.array([mean_field_energy(m, model, alpha).total for m in measures])
    H = E - e_inf
    if np.min(H) < -1e-8:
        raise DomainError(f"mean-field entropy went negative ({np.min(H):.3e})")
    I = np.array([mean_field_fisher(m, model, alpha) for m in measures])
    W2 = np.array([wasserstein2_1d(m, mu_inf) for m in measures])
    window = window or (min(0.5, horizon), horizon)
    ent = _try_fit(times, H, window)
    w2 = _try_fit(times, W2, window)
    tal = tal_rel = alt = alt_rel = None
    if ent.fit is not None and ent.fit.rate > 0:
        tal, tal_rel = _talagrand(H, W2, ent.fit.rate, 1.0)
        alt, alt_rel = _talagrand(H, W2, ent.fit.rate, 4.0)
    ratio = 2 * I / np.where(H > FLOOR, H, np.nan)
    ratio = ratio[np.isfinite(ratio)]
    return FirstOrderReport(
        entropy_series=ent, w2_series=w2, talagrand_margin=tal, talagrand_relative=tal_rel,
        talagrand_margin_alt=alt, talagrand_relative_alt=alt_rel,
        energy_max_increase=float(np.max(np.diff(E))) if E.size > 1 else 0.0,
        lsi_ratio_min=float(np.min(ratio)) if ratio.size else None,
        mean=np.array([m.mean() for m in measures]), var=np.array([m.var() for m in measures]),
        fixed_point=fp, times=times, energy=E, fisher=I, final_measure=measures[-1],
    )


# ---------------------------------------------------------------- kinetic


@dataclass
class KineticReport:
    S_series: DecaySeries
    w2x_series: DecaySeries
    w2v_series: DecaySeries
    max_step_increase: float
    times: np.ndarray
    energy: np.ndarray
    fisher: np.ndarray
    final_measure: Optional[PhaseGridMeasure] = None

    def to_dict(self):
        return {"S_series": self.S_series.to_dict(), "w2x_series": self.w2x_series.to_dict(),
                "w2v_series": self.w2v_series.to_dict(), "max_step_increase": self.max_step_increase}

    def csv_rows(self):
        return np.column_stack([self.times, self.energy, self.S_series.values, self.fisher,
                                self.w2x_series.values, self.w2v_series.values])


CSV_KINETIC = ("t", "E", "S", "I", "W2_position_marginal", "W2_velocity_marginal")


def cold_start(xgrid: Grid, vgrid: Grid, x_mean=0.0, x_var=1.0, v_var=0.1) -> PhaseGridMeasure:
    """Product of a Gaussian position law and a narrow (low-temperature) velocity law."""
    return PhaseGridMeasure.product(GridMeasure.gaussian(xgrid, x_mean, x_var),
                                    GridMeasure.gaussian(vgrid, 0.0, v_var))


def run_kinetic(model: ModelSpec, xgrid: Grid, vgrid: Grid, mu0: PhaseGridMeasure, horizon: float,
                dt: float, record_every: int = 10, window=None, fixed_point=None) -> KineticReport:
    """Evolve by the VFP scheme; S is checked every step, series are recorded every few steps."""
    fp = fixed_point or solve_fixed_point(model, xgrid, tol=1e-12, max_iter=5000,
                                          init=mu0.x_marginal())
    eq = kinetic_equilibrium(fp.measure, vgrid)
    gauss = maxwellian(vgrid)
    n_steps = int(round(horizon / dt))
    mu = mu0
    times, E, S, I, wx, wv = [], [], [], [], [], []

    def record(t, vals):
        times.append(t)
        E.append(vals[0])
        S.append(vals[1])
        I.append(vals[2])
        wx.append(wasserstein2_1d(mu.x_marginal(), fp.measure))
        wv.append(wasserstein2_1d(mu.v_marginal(), gauss))

    vals = vfp_free_energy(mu, model, eq)
    record(0.0, vals)
    prev = vals[1]
    worst = -math.inf
    for k in range(1, n_steps + 1):
        mu = vfp_step(mu, model, dt)
        vals = vfp_free_energy(mu, model, eq)
        worst = max(worst, vals[1] - prev)
        prev = vals[1]
        if k % record_every == 0 or k == n_steps:
            record(k * dt, vals)
    times = np.array(times)
    window = window or (min(1.0, horizon), horizon)
    return KineticReport(
        S_series=_try_fit(times, np.array(S), window),
        w2x_series=_try_fit(times, np.array(wx), window),
        w2v_series=_try_fit(times, np.array(wv), window),
        max_step_increase=float(worst) if n_steps else 0.0,
        times=times, energy=np.array(E), fisher=np.array(I), final_measure=mu,
    )


# ---------------------------------------------------------------- uniformity in n


@dataclass
class SweepRow:
    n: int
    rate: float
    r_squared: float
    replicas: int
    rate_se: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class SweepTable:
    rows: list
    skipped: list = field(default_factory=list)
    proxy_note: str = ""

    def __post_init__(self):
        ns = [r.n for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("sweep rows must have strictly increasing n")

    @property
    def rate_ratio(self):
        rates = [r.rate for r in self.rows]
        return max(rates) / min(rates) if rates and min(rates) > 0 else math.inf

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "skipped": self.skipped,
                "rate_ratio": self.rate_ratio, "proxy_note": self.proxy_note}


PROXY_NOTE = ("Uniformity in n is probed through an observable: the squared distance of the "
              "pooled single-particle position mean and variance to their mean-field equilibrium "
              "values. No weighted Sobolev operator norm is computed.")


@dataclass
class UniformityConfig:
    total_particles: int = 32768
    dt: float = 0.05
    horizon: float = 8.0
    record_every: int = 2
    window: tuple = (1.0, 8.0)
    initial: dict = field(default_factory=lambda: {"type": "gaussian", "mean": 2.0, "var": 0.25,
                                                   "vel_var": 1.0})
    master_seed: int = 0
    batches: int = 32
    grid: Grid = field(default_factory=lambda: Grid(-12.0, 12.0, 1201))
    replicas: Optional[int] = None

    def to_dict(self):
        d = dict(self.__dict__)
        d["grid"] = self.grid.to_dict()
        d["window"] = list(self.window)
        return d


def _moment_distance(mean, second, m_inf, v_inf):
    var = second - mean ** 2
    return np.sum((mean - m_inf) ** 2 + (var - v_inf) ** 2, axis=-1)


def _uniformity_row(model, n, cfg: UniformityConfig, m_inf, v_inf):
    R = cfg.replicas or max(1, cfg.total_particles // n)
    sim = SimConfig(dt=cfg.dt, horizon=cfg.horizon, n=n, replicas=R, record_every=cfg.record_every,
                    master_seed=cfg.master_seed, scheme="kinetic_splitting", keep_snapshots=False)
    rec = simulate(model, sim, cfg.initial)
    t = rec.times
    rm = rec.series["replica_mean"]       # (T, R, d)
    rs = rec.series["replica_second"]
    D = _moment_distance(rm.mean(axis=1), rs.mean(axis=1), m_inf, v_inf)
    series = fit_decay(t, D, cfg.window)
    G = min(cfg.batches, R)
    rates = []
    for grp in np.array_split(np.arange(R), G):
        Dg = _moment_distance(rm[:, grp].mean(axis=1), rs[:, grp].mean(axis=1), m_inf, v_inf)
        try:
            rates.append(fit_decay(t, Dg, cfg.window).fit.rate)
        except DomainError:
            pass
    se = float(np.std(rates, ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else math.nan
    return SweepRow(n, series.fit.rate, series.fit.r_squared, R, se)


def run_uniformity_sweep(model: ModelSpec, ns, config: UniformityConfig = None, jobs: int = 1) -> SweepTable:
    """Kinetic particle decay rate of a moment observable for each n.

    Rows are independent jobs and are assembled by n, never by completion order.
    """
    config = config or UniformityConfig()
    ns = sorted(int(n) for n in ns)
    if len(ns) < 4:
        raise ArityError("a uniformity sweep needs at least 4 values of n")
    mu_inf = solve_fixed_point(model, config.grid, tol=1e-12, max_iter=5000).measure
    m_inf, v_inf = mu_inf.mean(), mu_inf.var()

    def job(n):
        try:
            return n, _uniformity_row(model, n, config, m_inf, v_inf), None
        except (BlowUp, StabilityError) as exc:
            return n, None, exc.diagnostic()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, ns))
    else:
        results = [job(n) for n in ns]
    rows = [r for _, r, _ in sorted(results, key=lambda x: x[0]) if r is not None]
    skipped = [{"n": n, **diag} for n, r, diag in results if r is None]
    return SweepTable(rows, skipped, PROXY_NOTE)


# ---------------------------------------------------------------- chaos


@dataclass
class ChaosGapResult:
    value: float
    per_replica_mean: float
    n: int
    replicas: int
    t_check: float

    def __float__(self):
        return self.value

    def to_dict(self):
        return dict(self.__dict__)


def chaos_gap(model: ModelSpec, n: int, t_check: float, replicas: int, grid: Grid, mu0: GridMeasure,
              dt: float = 0.005, pde_dt: float = 1e-4, seed: int = 0, pde_measure=None) -> ChaosGapResult:
    """W2 between the pooled particle positions at t_check and the FP flow at t_check.

    Particles start from i.i.d. draws of mu0 (per-particle noise keys, so runs
    with different n share their common particles' randomness).
    """
    if pde_measure is None:
        if t_check > 0:
            _, ms = fokker_planck_flow(mu0, model, pde_dt, t_check, record_every=10 ** 9)
            pde_measure = ms[-1]
        else:
            pde_measure = mu0
    horizon = t_check if t_check > 0 else 0.0
    sim = SimConfig(dt=dt if horizon == 0 else min(dt, horizon), horizon=horizon, n=n,
                    replicas=replicas, record_every=10 ** 9, master_seed=seed)
    rec = simulate(model, sim, {"type": "measure", "measure": mu0})
    X = rec.snapshots[-1][..., 0]
    pooled = wasserstein2_1d(X.ravel(), pde_measure)
    per = float(np.mean([wasserstein2_1d(X[r], pde_measure) for r in range(replicas)]))
    return ChaosGapResult(pooled, per, n, replicas, t_check)


# ---------------------------------------------------------------- decoupling

PSI = {
    "abs": lambda t, scale: t,
    "square": lambda t, scale: t * t,
    "exp_small": lambda t, scale: np.exp(scale * t),
}


def _law_sampler(sample_law):
    if callable(sample_law):
        return sample_law
    if hasattr(sample_law, "rvs"):
        return lambda rng, shape: sample_law.rvs(size=shape, random_state=rng)
    if sample_law in ("gaussian", "normal"):
        return lambda rng, shape: rng.standard_normal(shape)
    if sample_law == "uniform":
        return lambda rng, shape: rng.uniform(-1.0, 1.0, shape)
    raise ValueError(f"unknown sample law {sample_law!r}")


def _decoupled_sum(kernel, copies):
    """sum over distinct (i_1..i_k) of W(X^1_{i_1}, ..., X^k_{i_k}); copies: k arrays (S, n, d)."""
    k = kernel.order
    n = copies[0].shape[-2]
    if k == 2:
        full = kernel.evaluate(copies[0][:, :, None, :], copies[1][:, None, :, :])
        return full.sum(axis=(1, 2)) - np.trace(full, axis1=1, axis2=2)
    count = math.perm(n, k)
    if count > 200_000:
        raise ComplexityRefusal(f"{count} ordered tuples exceed the enumeration limit")
    idx = np.array(list(itertools.permutations(range(n), k)))
    return kernel.evaluate(*[copies[j][:, idx[:, j], :] for j in range(k)]).sum(axis=-1)


@dataclass
class DecouplingResult:
    lhs: float
    rhs: float
    passed: bool
    trials_passed: int
    trials: int
    lambda_n: float
    lambda_n_se: float
    lambda_bound: float
    lambda_bound_se: float
    lambda_pass: bool

    def to_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in self.__dict__.items()}


def decoupling_check(kernel: InteractionKernel, sample_law, psi: str, n: int, trials: int, seed: int,
                     samples: int = 400, lam: float = 0.1, psi_scale: float = 0.1, dim: int = 1) -> DecouplingResult:
    """Monte Carlo comparison of a U-process sum with its decoupled version.

    Each trial estimates E Psi(|sum_I W(X)|) and E Psi(C_k |sum_I W(X^1..X^k)|)
    from ``samples`` draws; it passes when lhs <= rhs (1 + 3 relative stderr).
    ``exp_small`` is Psi(t) = exp(psi_scale t / |I|) with psi_scale <= 0.1.
    """
    k = kernel.order
    if n < k:
        raise ArityError(f"need n >= k, got n={n}, k={k}")
    if trials < 100:
        raise ValueError("decoupling check needs at least 100 trials")
    if psi not in PSI:
        raise ValueError(f"unknown psi {psi!r}; expected one of {sorted(PSI)}")
    if psi == "exp_small" and psi_scale > 0.1:
        raise ValueError("exp_small requires psi_scale <= 0.1")
    n_tuples = math.perm(n, k)
    scale = psi_scale / n_tuples
    C = decoupling_constant(k)
    draw = _law_sampler(sample_law)
    psi_f = PSI[psi]
    lhs_all, rhs_all, passes = [], [], 0
    for trial in range(trials):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))
        X = draw(rng, (samples, n, dim))
        copies = [draw(rng, (samples, n, dim)) for _ in range(k)]
        coupled = math.factorial(k) * subset_sum(kernel, X)
        decoupled = _decoupled_sum(kernel, copies)
        a = psi_f(np.abs(coupled), scale)
        b = psi_f(C * np.abs(decoupled), scale)
        la, lb = a.mean(), b.mean()
        se_a = a.std(ddof=1) / math.sqrt(samples)
        se_b = b.std(ddof=1) / math.sqrt(samples)
        ra = se_a / la if la > 0 else 0.0
        rb = se_b / lb if lb > 0 else 0.0
        rel = math.hypot(ra, rb)
        passes += bool(la <= lb * (1 + 3 * rel))
        lhs_all.append(la)
        rhs_all.append(lb)

    # log-Laplace side statistic and its bound
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trials, 7))))
    N = trials * samples
    X = draw(rng, (N, n, dim))
    expo = n * lam * subset_sum(kernel, X) / math.comb(n, k)
    lam_n, lam_se = _log_mean_exp(expo, n)
    Y = draw(rng, (N, k, dim))
    bexpo = k * C * lam * np.abs(kernel.evaluate(*[Y[:, j, :] for j in range(k)]))
    bound, bound_se = _log_mean_exp(bexpo, k)
    lam_pass = bool(lam_n <= bound + 3 * math.hypot(lam_se, bound_se))
    return DecouplingResult(float(np.mean(lhs_all)), float(np.mean(rhs_all)), passes == trials,
                            passes, trials, lam_n, lam_se, bound, bound_se, lam_pass)


def _log_mean_exp(expo, divisor):
    """(1/divisor) log mean exp(expo) with its delta-method standard error."""
    N = expo.size
    val = (logsumexp(expo) - math.log(N)) / divisor
    w = np.exp(expo - expo.max())
    se = w.std(ddof=1) / (w.mean() * math.sqrt(N)) / divisor
    return float(val), float(se)


def decoupling_table(kernels, sample_law="gaussian", psi="abs", n=20, trials=200, seed=0, **kw):
    return {repr(k): decoupling_check(k, sample_law, psi, n, trials, seed, **kw) for k in kernels}


def first_order_condition_scan(model: ModelSpec, grid: Grid, means, variances):
    """Grid argmin of E_W over the Gaussian family N(m, s)."""
    best = (math.inf, None, None)
    for m in means:
        for s in variances:
            e = mean_field_energy(GridMeasure.gaussian(grid, m, s), model).total
            if e < best[0]:
                best = (e, m, s)
    return best
