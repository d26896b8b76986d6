"""Confinement potentials, symmetric k-body kernels and the model container.

Points are arrays whose last axis is the spatial dimension ``d``; every
evaluator broadcasts over the leading axes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import linprog

from .errors import ArityError, ConfigError, InvalidDomain, NumericalError

SIGMA = math.sqrt(2.0)
FD_STEP = 1e-5


def _fd_gradient(f, x, h=FD_STEP):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for c in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[c] = h
        g[..., c] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@dataclass(frozen=True)
class ConfinementPotential:
    tag: str
    params: dict
    evaluator: Callable
    gradient: Callable
    hessian: Optional[Callable] = None
    # constant bound on the Hessian operator norm, when one exists
    curvature_bound: Optional[float] = None

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    def grad(self, x):
        return self.gradient(np.asarray(x, dtype=float))

    def curvature_sup(self, radius, d=1):
        """sup of the Hessian operator norm over the ball of the given radius."""
        if self.curvature_bound is not None:
            return self.curvature_bound
        r = np.linspace(-radius, radius, 2001)
        pts = np.zeros((r.size, d))
        pts[:, 0] = r
        return float(np.max(_hessian_opnorm(self, pts)))

    def to_dict(self):
        if self.tag == "custom":
            raise ConfigError("custom potentials are not serializable")
        return {"type": self.tag, "params": _jsonable(self.params)}


def _jsonable(params):
    return {k: (np.asarray(v).tolist() if isinstance(v, (np.ndarray, list, tuple)) else v)
            for k, v in params.items()}


def _hessian_opnorm(pot, pts):
    pts = np.atleast_2d(pts)
    if pot.hessian is not None:
        H = pot.hessian(pts)
    else:
        d = pts.shape[-1]
        H = np.empty(pts.shape + (d,))
        for c in range(d):
            e = np.zeros(d)
            e[c] = FD_STEP
            H[..., c] = (pot.grad(pts + e) - pot.grad(pts - e)) / (2 * FD_STEP)
        H = 0.5 * (H + np.swapaxes(H, -1, -2))
    return np.max(np.abs(np.linalg.eigvalsh(H)), axis=-1)


def quadratic(a=0.5):
    """V(x) = a |x|^2."""
    a = float(a)

    def hess(x):
        d = x.shape[-1]
        return np.broadcast_to(2 * a * np.eye(d), x.shape[:-1] + (d, d)).copy()

    return ConfinementPotential(
        "quadratic", {"a": a},
        evaluator=lambda x: a * np.sum(x * x, axis=-1),
        gradient=lambda x: 2 * a * x,
        hessian=hess,
        curvature_bound=abs(2 * a),
    )


def double_well(a=0.25, b=0.5):
    """V(x) = a |x|^4 - b |x|^2."""
    a, b = float(a), float(b)

    def value(x):
        r2 = np.sum(x * x, axis=-1)
        return a * r2 * r2 - b * r2

    def grad(x):
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return (4 * a * r2 - 2 * b) * x

    def hess(x):
        d = x.shape[-1]
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        outer = x[..., :, None] * x[..., None, :]
        return (4 * a * r2 - 2 * b) * np.eye(d) + 8 * a * outer

    return ConfinementPotential("double_well", {"a": a, "b": b}, value, grad, hess)


def user_table(xs, values):
    """One-dimensional potential interpolated by a natural cubic spline."""
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != vals.shape or xs.size < 4:
        raise ConfigError("user_table needs matching 1D arrays with at least 4 nodes")
    spl = CubicSpline(xs, vals, bc_type="natural")
    d1, d2 = spl.derivative(1), spl.derivative(2)
    return ConfinementPotential(
        "user_table", {"x": xs, "values": vals},
        evaluator=lambda x: spl(x[..., 0]),
        gradient=lambda x: d1(x[..., 0])[..., None],
        hessian=lambda x: d2(x[..., 0])[..., None, None],
    )


def custom_potential(func, grad=None):
    grad = grad or (lambda x: _fd_gradient(func, x))
    return ConfinementPotential("custom", {}, func, grad)


# ---------------------------------------------------------------- kernels


class InteractionKernel:
    """Symmetric kernel W(x_1, ..., x_k).

    Subclasses may provide power-sum fast paths; ``None`` from a fast-path
    method means "not available, enumerate instead".
    """

    kind = "custom"
    separable = False

    def __init__(self, order, evaluator=None, partial_gradient=None,
                 lipschitz_bound=None, hessian_bound=None, params=None):
        if int(order) != order or order < 2:
            raise ArityError(f"kernel order must be an integer >= 2, got {order}")
        self.order = int(order)
        self._evaluator = evaluator
        self._partial = partial_gradient
        self.lipschitz_bound = lipschitz_bound
        self.hessian_bound = hessian_bound
        self.params = dict(params or {})

    def evaluate(self, *pts):
        if len(pts) != self.order:
            raise ArityError(f"kernel of order {self.order} got {len(pts)} points")
        return self._evaluator(*[np.asarray(p, dtype=float) for p in pts])

    __call__ = evaluate

    def partial_gradient(self, j, pts):
        pts = [np.asarray(p, dtype=float) for p in pts]
        if self._partial is not None:
            return self._partial(j, pts)

        def f(y):
            args = list(pts)
            args[j] = y
            return self.evaluate(*args)

        return _fd_gradient(f, pts[j])

    # fast paths over an (..., n, d) array of points
    def subset_sum(self, X):
        return None

    def subset_gradient(self, X):
        return None

    # 1D grid calculus: x nodes and cell masses p
    def grid_monomial(self, x, p):
        return None

    def grid_flat(self, x, p):
        return None

    def to_dict(self):
        if self.kind == "custom":
            raise ConfigError("custom kernels are not serializable")
        return {"order": self.order, "type": self.kind, "params": _jsonable(self.params)}

    def __repr__(self):
        return f"{type(self).__name__}(order={self.order}, params={self.params})"


class ConstantKernel(InteractionKernel):
    kind = "constant"
    separable = True

    def __init__(self, c, order=2):
        self.c = float(c)
        super().__init__(order, params={"c": self.c}, lipschitz_bound=0.0, hessian_bound=0.0)

    def evaluate(self, *pts):
        if len(pts) != self.order:
            raise ArityError(f"kernel of order {self.order} got {len(pts)} points")
        shape = np.broadcast_shapes(*[np.shape(p)[:-1] for p in pts])
        return np.full(shape, self.c)

    __call__ = evaluate

    def partial_gradient(self, j, pts):
        return np.zeros(np.broadcast_shapes(*[np.shape(p) for p in pts]))

    def subset_sum(self, X):
        n = X.shape[-2]
        return np.full(X.shape[:-2], self.c * math.comb(n, self.order))

    def subset_gradient(self, X):
        return np.zeros_like(X)

    def grid_monomial(self, x, p):
        return self.c

    def grid_flat(self, x, p):
        return np.full_like(x, self.order * self.c)


class ProductPair(InteractionKernel):
    """W(x, y) = lam <x, y>."""

    kind = "product_pair"
    separable = True

    def __init__(self, lam=1.0):
        self.lam = float(lam)
        super().__init__(2, params={"lambda": self.lam}, hessian_bound=abs(self.lam))

    def evaluate(self, *pts):
        if len(pts) != 2:
            raise ArityError(f"kernel of order 2 got {len(pts)} points")
        x, y = (np.asarray(p, dtype=float) for p in pts)
        return self.lam * np.sum(x * y, axis=-1)

    __call__ = evaluate

    def partial_gradient(self, j, pts):
        x, y = (np.asarray(p, dtype=float) for p in pts)
        other = y if j == 0 else x
        return np.broadcast_to(self.lam * other, np.broadcast_shapes(x.shape, y.shape)).copy()

    def subset_sum(self, X):
        S = X.sum(axis=-2)
        return 0.5 * self.lam * (np.sum(S * S, axis=-1) - np.sum(X * X, axis=(-2, -1)))

    def subset_gradient(self, X):
        return self.lam * (X.sum(axis=-2, keepdims=True) - X)

    def grid_monomial(self, x, p):
        m1 = p @ x
        return self.lam * m1 * m1

    def grid_flat(self, x, p):
        return 2 * self.lam * (p @ x) * x


class QuadraticPair(InteractionKernel):
    """W(x, y) = (lam / 4) |x - y|^2."""

    kind = "quadratic_pair"
    separable = True

    def __init__(self, lam=1.0):
        self.lam = float(lam)
        super().__init__(2, params={"lambda": self.lam}, hessian_bound=abs(self.lam))

    def evaluate(self, *pts):
        if len(pts) != 2:
            raise ArityError(f"kernel of order 2 got {len(pts)} points")
        x, y = (np.asarray(p, dtype=float) for p in pts)
        diff = x - y
        return 0.25 * self.lam * np.sum(diff * diff, axis=-1)

    __call__ = evaluate

    def partial_gradient(self, j, pts):
        x, y = (np.asarray(p, dtype=float) for p in pts)
        g = 0.5 * self.lam * (x - y)
        return g if j == 0 else -g

    def subset_sum(self, X):
        n = X.shape[-2]
        Xc = X - X.mean(axis=-2, keepdims=True)
        # sum_{i<j} |x_i - x_j|^2 = n sum_i |x_i - mean|^2
        return 0.25 * self.lam * n * np.sum(Xc * Xc, axis=(-2, -1))

    def subset_gradient(self, X):
        n = X.shape[-2]
        return 0.5 * self.lam * (n * X - X.sum(axis=-2, keepdims=True))

    def grid_monomial(self, x, p):
        m1 = p @ x
        return 0.5 * self.lam * (p @ (x - m1) ** 2)

    def grid_flat(self, x, p):
        m1 = p @ x
        return 0.5 * self.lam * ((x - m1) ** 2 + p @ (x - m1) ** 2)


class TripleProduct(InteractionKernel):
    """W(x, y, z) = eps * sum_c x_c y_c z_c."""

    kind = "triple_product"
    separable = True

    def __init__(self, eps=0.1):
        self.eps = float(eps)
        super().__init__(3, params={"epsilon": self.eps})

    def evaluate(self, *pts):
        if len(pts) != 3:
            raise ArityError(f"kernel of order 3 got {len(pts)} points")
        x, y, z = (np.asarray(p, dtype=float) for p in pts)
        return self.eps * np.sum(x * y * z, axis=-1)

    __call__ = evaluate

    def partial_gradient(self, j, pts):
        x, y, z = (np.asarray(p, dtype=float) for p in pts)
        a, b = [(y, z), (x, z), (x, y)][j]
        return self.eps * a * b

    def subset_sum(self, X):
        p1 = X.sum(axis=-2)
        p2 = np.sum(X ** 2, axis=-2)
        p3 = np.sum(X ** 3, axis=-2)
        e3 = (p1 ** 3 - 3 * p1 * p2 + 2 * p3) / 6.0
        return self.eps * e3.sum(axis=-1)

    def subset_gradient(self, X):
        p1 = X.sum(axis=-2, keepdims=True)
        p2 = np.sum(X ** 2, axis=-2, keepdims=True)
        e2 = 0.5 * (p1 * p1 - p2)
        # e2 of the other particles: e2 - x_i (p1 - x_i)
        return self.eps * (e2 - X * (p1 - X))

    def grid_monomial(self, x, p):
        return self.eps * (p @ x) ** 3

    def grid_flat(self, x, p):
        m1 = p @ x
        return 3 * self.eps * m1 * m1 * x


class TableKernel(InteractionKernel):
    """Radial pair kernel W(x, y) = phi(|x - y|) from a tabulated profile."""

    kind = "table"

    def __init__(self, r, values):
        r = np.asarray(r, dtype=float)
        v = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 4 or r[0] != 0.0:
            raise ConfigError("table kernel needs matching 1D arrays starting at r=0")
        # even extension keeps phi smooth through r = 0
        rr = np.concatenate([-r[:0:-1], r])
        vv = np.concatenate([v[:0:-1], v])
        self._phi = CubicSpline(rr, vv, bc_type="natural")
        self._dphi = self._phi.derivative()
        self._rmax = float(r[-1])
        super().__init__(2, params={"r": r, "values": v},
                         lipschitz_bound=float(np.max(np.abs(self._dphi(r)))))

    def _radius(self, x, y):
        return np.sqrt(np.sum((x - y) ** 2, axis=-1))

    def evaluate(self, *pts):
        if len(pts) != 2:
            raise ArityError(f"kernel of order 2 got {len(pts)} points")
        x, y = (np.asarray(p, dtype=float) for p in pts)
        r = np.minimum(self._radius(x, y), self._rmax)
        return self._phi(r)

    __call__ = evaluate

    def partial_gradient(self, j, pts):
        x, y = (np.asarray(p, dtype=float) for p in pts)
        diff = x - y if j == 0 else y - x
        r = self._radius(x, y)
        dphi = np.where(r < self._rmax, self._dphi(np.minimum(r, self._rmax)), 0.0)
        safe = np.where(r > 0, r, 1.0)
        return (dphi / safe)[..., None] * diff * (r > 0)[..., None]


def kernel_from_callable(order, func, grad=None, **bounds):
    return InteractionKernel(order, evaluator=func, partial_gradient=grad, **bounds)


_KERNEL_TYPES = {
    "product_pair": lambda order, p: ProductPair(p.get("lambda", 1.0)),
    "quadratic_pair": lambda order, p: QuadraticPair(p.get("lambda", 1.0)),
    "triple_product": lambda order, p: TripleProduct(p.get("epsilon", 0.1)),
    "table": lambda order, p: TableKernel(p["r"], p["values"]),
    "constant": lambda order, p: ConstantKernel(p.get("c", 0.0), order or 2),
}

_CONFINEMENT_TYPES = {
    "quadratic": lambda p: quadratic(**p),
    "double_well": lambda p: double_well(**p),
    "user_table": lambda p: user_table(p["x"], p["values"]),
}


# ---------------------------------------------------------------- model


@dataclass(frozen=True)
class ModelSpec:
    dimension: int
    confinement: ConfinementPotential
    kernels: tuple = ()
    sigma: float = field(default=SIGMA)

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.dimension}")
        if self.sigma != SIGMA:
            raise ConfigError("sigma is fixed to sqrt(2)")
        orders = [k.order for k in self.kernels]
        if len(set(orders)) != len(orders):
            raise ConfigError(f"kernel orders must be distinct, got {orders}")
        if self.confinement.tag == "user_table" and self.dimension != 1:
            raise ConfigError("user_table confinement is one-dimensional")

    @property
    def max_order(self) -> int:
        return max((k.order for k in self.kernels), default=1)

    def without_kernels(self):
        return ModelSpec(self.dimension, self.confinement, ())

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "confinement": self.confinement.to_dict(),
            "kernels": [k.to_dict() for k in self.kernels],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            conf = doc["confinement"]
            ctype = conf["type"]
            if ctype not in _CONFINEMENT_TYPES:
                raise ConfigError(f"unknown confinement type {ctype!r}")
            confinement = _CONFINEMENT_TYPES[ctype](dict(conf.get("params", {})))
            kernels = []
            for kd in doc.get("kernels", []):
                ktype = kd["type"]
                if ktype not in _KERNEL_TYPES:
                    raise ConfigError(f"unknown kernel type {ktype!r}")
                kern = _KERNEL_TYPES[ktype](kd.get("order"), dict(kd.get("params", {})))
                if kd.get("order") is not None and kd["order"] != kern.order:
                    raise ConfigError(f"kernel {ktype!r} has order {kern.order}, config says {kd['order']}")
                kernels.append(kern)
            return cls(int(doc.get("dimension", 1)), confinement, tuple(kernels))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed model document: {exc!r}") from exc

    @classmethod
    def from_json(cls, text_or_path):
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def eval_model_drift_inputs(model: ModelSpec, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if not np.all(np.isfinite(x)):
        raise NumericalError("input point is not finite")
    v = model.confinement(x)
    g = model.confinement.grad(x)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(g))):
        raise NumericalError(f"potential {model.confinement.tag!r} returned a non-finite value")
    return float(v) if np.ndim(v) == 0 else v, g


# ---------------------------------------------------------------- assumptions


@dataclass
class AssumptionEntry:
    name: str
    status: str
    constants: dict
    probe_count: int
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "status": self.status, "constants": self.constants,
                "probe_count": self.probe_count, "note": self.note}


@dataclass
class AssumptionReport:
    entries: list

    def __getitem__(self, name) -> AssumptionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self):
        return {"entries": [e.to_dict() for e in self.entries]}


def _box_bounds(probe_box, d):
    box = np.asarray(probe_box, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (d, 1))
    if box.shape != (d, 2):
        raise InvalidDomain(f"probe box must be an interval or {d} intervals")
    if np.any(~np.isfinite(box)) or np.any(box[:, 1] <= box[:, 0]):
        raise InvalidDomain(f"empty probe box {box.tolist()}")
    return box


def _fit_h2(r2, xg, c1=None):
    """Largest c1, smallest c2 with c1 |x|^2 - c2 <= x . grad V on the probes."""
    if c1 is not None:
        return float(c1), float(max(0.0, np.max(c1 * r2 - xg)))
    # maximize c1 - c2  s.t.  c1 r2 - c2 <= xg,  c1, c2 >= 0
    res = linprog(c=[-1.0, 1.0], A_ub=np.column_stack([r2, -np.ones_like(r2)]), b_ub=xg,
                  bounds=[(0, None), (0, None)], method="highs")
    if res.status != 0:
        return 0.0, float(max(0.0, np.max(-xg)))
    return float(res.x[0]), float(res.x[1])


def _kernel_hessian_norm(kernel, pts):
    """Operator norm of the full (k d) x (k d) Hessian by differencing gradients."""
    k = kernel.order
    d = pts[0].shape[-1]
    npts = pts[0].shape[0]
    H = np.empty((npts, k * d, k * d))
    for j in range(k):
        for c in range(d):
            plus = [p.copy() for p in pts]
            minus = [p.copy() for p in pts]
            plus[j][:, c] += FD_STEP
            minus[j][:, c] -= FD_STEP
            col = j * d + c
            for i in range(k):
                gp = kernel.partial_gradient(i, plus)
                gm = kernel.partial_gradient(i, minus)
                H[:, i * d:(i + 1) * d, col] = (gp - gm) / (2 * FD_STEP)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    return np.max(np.abs(np.linalg.eigvalsh(H)), axis=-1)


def _exp_moment_finite(model, lam, p=2, radius=8.0):
    """Grid check of int exp(lam |x|^p) d alpha: finite if doubling the box changes nothing."""
    def integral(R):
        x = np.linspace(-R, R, int(400 * R) + 1)
        logw = -model.confinement(x[:, None])
        shift = np.max(logw)
        z = trapezoid(np.exp(logw - shift), x)
        expo = lam * np.abs(x) ** p + logw - shift
        with np.errstate(over="ignore"):
            return trapezoid(np.exp(expo), x) / z

    a, b = integral(radius), integral(2 * radius)
    finite = bool(np.isfinite(b) and abs(b - a) <= 1e-6 * abs(b))
    return finite, float(a)


def verify_assumptions(model: ModelSpec, probe_box, n_probes: int = 1000, rng_seed: int = 0,
                       h2_c1=None) -> AssumptionReport:
    """Audit the standing assumptions on random probes inside a box.

    ``h2_c1`` pins c1 and only fits c2; by default both are fitted by the
    linear program maximizing c1 - c2.
    """
    d = model.dimension
    box = _box_bounds(probe_box, d)
    if n_probes < 100:
        raise InvalidDomain(f"need at least 100 probes, got {n_probes}")
    rng = np.random.default_rng(rng_seed)

    def draw(count=n_probes):
        return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((count, d))

    X = draw()
    grad = model.confinement.grad(X)
    entries = []

    r2 = np.sum(X * X, axis=-1)
    xg = np.sum(X * grad, axis=-1)
    c1, c2 = _fit_h2(r2, xg, h2_c1)
    entries.append(AssumptionEntry("H2", "verified" if c1 > 0 else "estimated",
                                   {"c1": c1, "c2": c2}, n_probes,
                                   "x.gradV >= c1|x|^2 - c2 on the probes"))

    h1 = {}
    vfp1 = {}
    vfp1_ok = True
    for kern in model.kernels:
        pts = [draw() for _ in range(kern.order)]
        h1[f"hessian_sup_k{kern.order}"] = float(np.max(_kernel_hessian_norm(kern, pts)))
        gnorm = np.sqrt(sum(np.sum(kern.partial_gradient(j, pts) ** 2, axis=-1)
                            for j in range(kern.order)))
        sup = float(np.max(gnorm))
        vfp1[f"gradient_sup_k{kern.order}"] = sup
        if kern.lipschitz_bound is not None:
            vfp1[f"declared_K_k{kern.order}"] = float(kern.lipschitz_bound)
            vfp1_ok &= sup <= kern.lipschitz_bound * (1 + 1e-9) + 1e-12
        else:
            vfp1_ok = False
    entries.append(AssumptionEntry("H1", "estimated", h1, n_probes,
                                   "sup of kernel Hessian operator norms on the probes"))
    entries.append(AssumptionEntry("VFP1", "verified" if (vfp1_ok and model.kernels) else "estimated",
                                   vfp1, n_probes, "sup |grad W| on the probes vs declared K"))

    hn = _hessian_opnorm(model.confinement, X)
    gn = np.sqrt(np.sum(grad * grad, axis=-1))
    res = linprog(c=[1.0, 1.0], A_ub=np.column_stack([-gn, -np.ones_like(gn)]), b_ub=-hn,
                  bounds=[(0, None), (0, None)], method="highs")
    K1, K2 = (float(res.x[0]), float(res.x[1])) if res.status == 0 else (0.0, float(np.max(hn)))
    entries.append(AssumptionEntry("VFP2", "estimated", {"K1": K1, "K2": K2}, n_probes,
                                   "|Hess V| <= K1 |grad V| + K2 on the probes"))

    if d == 1:
        consts = {}
        all_finite = True
        for lam in (0.1, 1.0):
            finite, val = _exp_moment_finite(model, lam)
            consts[f"finite_lambda_{lam:g}"] = float(finite)
            if finite:
                consts[f"moment_lambda_{lam:g}"] = val
            all_finite &= finite
        entries.append(AssumptionEntry("H4", "verified" if all_finite else "violated", consts, 0,
                                       "exp(lam |x|^2) integrability against alpha on a truncated grid"))
    else:
        entries.append(AssumptionEntry("H4", "unverifiable", {}, 0, "grid check is one-dimensional"))

    for name in ("H3", "H5", "H6"):
        entries.append(AssumptionEntry(name, "unverifiable", {}, 0, "requires global analysis"))
    order = ["H1", "H2", "H3", "H4", "H5", "H6", "VFP1", "VFP2"]
    entries.sort(key=lambda e: order.index(e.name))
    return AssumptionReport(entries)


def default_models():
    """Named reference models used by the experiment harnesses."""
    return {
        "gaussian_pair": ModelSpec(1, quadratic(0.5), (QuadraticPair(0.5),)),
        "triple": ModelSpec(1, quadratic(0.5), (TripleProduct(0.1),)),
        "free": ModelSpec(1, quadratic(0.5), ()),
    }

