"""Euler-Maruyama and BAOAB integrators for the particle systems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import BlowUp, ConfigError, StabilityError
from .interaction import ParticleEnsemble, hamiltonian, hamiltonian_gradient
from .potentials import ModelSpec
from .rng import NoiseSource


@dataclass(frozen=True)
class KineticEnsemble:
    positions: np.ndarray
    velocities: np.ndarray
    seed_lineage: tuple = (0, 0)

    def __post_init__(self):
        X = np.array(self.positions, dtype=float)
        Vel = np.array(self.velocities, dtype=float)
        if X.ndim == 1:
            X, Vel = X[:, None], Vel.reshape(-1, 1)
        if X.shape != Vel.shape:
            raise ValueError(f"positions {X.shape} and velocities {Vel.shape} differ")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Vel))):
            raise ValueError("kinetic ensemble entries must be finite")
        X.setflags(write=False)
        Vel.setflags(write=False)
        object.__setattr__(self, "positions", X)
        object.__setattr__(self, "velocities", Vel)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]


SCHEMES = ("euler_maruyama", "kinetic_splitting")


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    n: int
    replicas: int = 1
    record_every: int = 1
    master_seed: int = 0
    scheme: str = "euler_maruyama"
    stream_id: int = 0
    keep_snapshots: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be nonnegative, got {self.horizon}")
        if self.horizon > 0 and self.dt > self.horizon:
            raise ConfigError(f"dt={self.dt} exceeds the horizon {self.horizon}")
        if self.record_every < 1 or self.replicas < 1 or self.n < 1:
            raise ConfigError("record_every, replicas and n must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    @property
    def kinetic(self):
        return self.scheme == "kinetic_splitting"

    def to_dict(self):
        return asdict(self)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    snapshots: list
    velocity_snapshots: Optional[list]
    series: dict = field(default_factory=dict)

    def final_positions(self):
        return self.snapshots[-1]


def step_overdamped(ensemble, model: ModelSpec, dt, noise, t=0.0):
    """x' = x - grad H_n(x) dt + sqrt(2 dt) noise."""
    X = ensemble.positions if isinstance(ensemble, ParticleEnsemble) else np.asarray(ensemble, float)
    Xn = _em_update(model, X, dt, np.asarray(noise, float).reshape(X.shape), t)
    if isinstance(ensemble, ParticleEnsemble):
        return ParticleEnsemble(Xn, ensemble.seed_lineage)
    return Xn


def _em_update(model, X, dt, z, t):
    Xn = X - dt * hamiltonian_gradient(model, X) + math.sqrt(2 * dt) * z
    if not np.all(np.isfinite(Xn)):
        raise BlowUp(dt, t + dt)
    return Xn


def _ou_coefficients(dt):
    c = math.exp(-dt)
    return c, math.sqrt(-math.expm1(-2 * dt))


def _baoab(model, X, Vel, F, dt, z, t):
    """One BAOAB step given the cached force F = grad S_1(X); returns the new force too."""
    c, s = _ou_coefficients(dt)
    Vel = Vel - 0.5 * dt * F
    X = X + 0.5 * dt * Vel
    Vel = c * Vel + s * z
    X = X + 0.5 * dt * Vel
    F = hamiltonian_gradient(model, X)
    Vel = Vel - 0.5 * dt * F
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Vel))):
        raise BlowUp(dt, t + dt)
    return X, Vel, F


def step_kinetic(ensemble: KineticEnsemble, model: ModelSpec, dt, noise, t=0.0) -> KineticEnsemble:
    """Half kick, half drift, exact unit-friction OU velocity update, half drift, half kick."""
    X, Vel = ensemble.positions, ensemble.velocities
    F = hamiltonian_gradient(model, X)
    X, Vel, _ = _baoab(model, X, Vel, F, dt, np.asarray(noise, float).reshape(X.shape), t)
    return KineticEnsemble(X, Vel, ensemble.seed_lineage)


# ---------------------------------------------------------------- simulate


def admissible_dt(model: ModelSpec, X0, kinetic=False):
    """Linear stability limit from a curvature bound over the region of X0."""
    radius = float(np.max(np.abs(X0))) + 5.0 if np.size(X0) else 5.0
    L = model.confinement.curvature_sup(radius, model.dimension)
    for kern in model.kernels:
        if kern.hessian_bound is not None:
            L += kern.order * kern.hessian_bound
    if L <= 0:
        return math.inf
    return 2.0 / math.sqrt(L) if kinetic else 2.0 / L


def _initial_state(model, config, initial, noise, R, n, d):
    """Return (positions, velocities) arrays of shape (R, n, d)."""
    if isinstance(initial, KineticEnsemble):
        X = np.broadcast_to(initial.positions, (R, n, d)).copy()
        Vel = np.broadcast_to(initial.velocities, (R, n, d)).copy()
        return X, Vel
    if isinstance(initial, ParticleEnsemble):
        return np.broadcast_to(initial.positions, (R, n, d)).copy(), np.zeros((R, n, d))
    if isinstance(initial, np.ndarray):
        arr = np.asarray(initial, dtype=float)
        if arr.ndim == 2:
            arr = np.broadcast_to(arr, (R,) + arr.shape)
        return arr.reshape(R, n, d).copy(), np.zeros((R, n, d))
    if isinstance(initial, dict):
        kind = initial.get("type")
        if kind == "point":
            x0 = np.broadcast_to(np.asarray(initial.get("x", 0.0), float), (d,))
            v0 = np.broadcast_to(np.asarray(initial.get("v", 0.0), float), (d,))
            return (np.broadcast_to(x0, (R, n, d)).copy(), np.broadcast_to(v0, (R, n, d)).copy())
        if kind == "gaussian":
            z = noise.initial(2 * d)
            mean = np.asarray(initial.get("mean", 0.0), float)
            sd = np.sqrt(np.asarray(initial.get("var", 1.0), float))
            vmean = np.asarray(initial.get("vel_mean", 0.0), float)
            vsd = np.sqrt(np.asarray(initial.get("vel_var", 1.0), float))
            return mean + sd * z[..., :d], vmean + vsd * z[..., d:]
        if kind == "measure":
            # one-dimensional law given as a grid measure, drawn through its quantile function
            z = noise.initial(2 * d)
            X = initial["measure"].quantile(ndtr(z[..., :d]))
            vsd = math.sqrt(float(initial.get("vel_var", 1.0)))
            return X, vsd * z[..., d:]
        if kind == "file":
            data = np.loadtxt(initial["path"], delimiter=",", ndmin=2, comments="#")
            # columns: particle_index, coord_0..coord_{d-1}[, vel_0..]
            pos = data[:, 1:1 + d]
            vel = data[:, 1 + d:1 + 2 * d] if data.shape[1] >= 1 + 2 * d else np.zeros_like(pos)
            if pos.shape[0] != n:
                raise ConfigError(f"initial file has {pos.shape[0]} particles, config says n={n}")
            return (np.broadcast_to(pos, (R, n, d)).copy(), np.broadcast_to(vel, (R, n, d)).copy())
        raise ConfigError(f"unknown initial sampler {kind!r}")
    raise ConfigError(f"unsupported initial condition {type(initial).__name__}")


def simulate(model: ModelSpec, config: SimConfig, initial, particle_keys=None,
             replica_keys=None) -> TrajectoryRecord:
    """Run ``config.replicas`` independent trajectories of n particles.

    State arrays have shape (replicas, n, d). Replica r and particle i draw
    from the noise stream keyed (replica_keys[r], particle_keys[i]); the
    defaults are 0..R-1 and 0..n-1.
    """
    R, n, d = config.replicas, config.n, model.dimension
    pkeys = np.arange(n) if particle_keys is None else np.asarray(particle_keys)
    rkeys = np.arange(R) if replica_keys is None else np.asarray(replica_keys)
    noise = NoiseSource(config.master_seed, rkeys, pkeys, d, stream_id=config.stream_id)
    X, Vel = _initial_state(model, config, initial, noise, R, n, d)
    kinetic = config.kinetic

    limit = admissible_dt(model, X, kinetic)
    if config.dt > limit:
        raise StabilityError(config.dt, limit, "simulate")

    n_steps = int(round(config.horizon / config.dt))
    rec_steps = list(range(0, n_steps + 1, config.record_every))
    if rec_steps[-1] != n_steps:
        rec_steps.append(n_steps)
    rec_set = set(rec_steps)

    times, snaps, vsnaps = [], [], []
    series = {k: [] for k in ("mean", "var", "hamiltonian", "replica_mean", "replica_second",
                              "velocity_mean", "velocity_var")}

    def record(k):
        times.append(k * config.dt)
        if config.keep_snapshots:
            snaps.append(X.copy())
            if kinetic:
                vsnaps.append(Vel.copy())
        series["mean"].append(X.mean(axis=(0, 1)))
        series["var"].append(X.var(axis=(0, 1)))
        h = hamiltonian(model, X)
        if kinetic:
            h = h + 0.5 * np.sum(Vel * Vel, axis=(-2, -1))
        series["hamiltonian"].append(float(np.mean(h)))
        series["replica_mean"].append(X.mean(axis=1))
        series["replica_second"].append((X * X).mean(axis=1))
        series["velocity_mean"].append(Vel.mean(axis=(0, 1)))
        series["velocity_var"].append(Vel.var(axis=(0, 1)))

    record(0)
    F = hamiltonian_gradient(model, X) if kinetic and n_steps else None
    for k in range(n_steps):
        z = noise.step(k)
        t = k * config.dt
        if kinetic:
            X, Vel, F = _baoab(model, X, Vel, F, config.dt, z, t)
        else:
            X = _em_update(model, X, config.dt, z, t)
        if k + 1 in rec_set:
            record(k + 1)

    return TrajectoryRecord(
        times=np.array(times),
        snapshots=snaps,
        velocity_snapshots=vsnaps if kinetic else None,
        series={k: np.array(v) for k, v in series.items()},
    )


def sample_invariant(model: ModelSpec, n: int, burn_in: float, n_samples: int, thin: float,
                     seed: int, dt: float = 0.01, stream_id: int = 0) -> list:
    """Snapshots of one long overdamped run, after burn-in and spaced by ``thin``."""
    if burn_in <= 0 or thin <= 0:
        raise ConfigError("burn_in and thin must be positive")
    every = max(1, int(round(thin / dt)))
    burn_steps = int(round(burn_in / dt))
    horizon = (burn_steps + every * (n_samples - 1)) * dt
    record_every = math.gcd(every, burn_steps) or every
    cfg = SimConfig(dt=dt, horizon=horizon, n=n, replicas=1, record_every=record_every,
                    master_seed=seed, stream_id=stream_id)
    rec = simulate(model, cfg, {"type": "gaussian", "mean": 0.0, "var": 1.0})
    out = []
    for t, snap in zip(rec.times, rec.snapshots):
        k = int(round(t / dt))
        if k >= burn_steps and (k - burn_steps) % every == 0:
            out.append(ParticleEnsemble(snap[0], (seed, stream_id)))
    return out[:n_samples]
