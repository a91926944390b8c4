"""Functional pairs (phi, psi) on R^d and the named instance families.

Every ``phi``/``psi`` is vectorized over leading axes: it takes an array of
shape ``(..., d)`` and returns an array of shape ``(...)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import AlphaBetaUndetermined, ConstructionError, EvaluationError
from .extended import NEG_INF, POS_INF, ExtendedReal, sup_over

VecFn = Callable[[np.ndarray], np.ndarray]


class GrowthWarning(UserWarning):
    """The growth ratio is still decreasing at the edge of the scanned box."""


@dataclass(frozen=True)
class FunctionalPair:
    dim: int
    phi: VecFn
    psi: VecFn
    p: float
    a: float = 0.0
    b: float = math.inf
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    # analytic metadata; None means "not known for this instance"
    psi_inf: Optional[ExtendedReal] = None
    psi_sup: Optional[ExtendedReal] = None
    minimizers: Optional[Callable[[float], Sequence[np.ndarray]]] = None
    argmin: Optional[Callable[[float], np.ndarray]] = None
    multiplier: Optional[Callable[[float], float]] = None
    level_infimum: Optional[Callable[[float], float]] = None
    grad_phi: Optional[VecFn] = None
    # instances that knowingly break uniqueness of the penalized minimum
    violates_uniqueness: bool = False

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConstructionError(f"dimension must be a positive integer, got {self.dim}")
        if not self.p > 0:
            raise ConstructionError(f"growth exponent must be positive, got {self.p}")
        if not (0 <= self.a < self.b):
            raise ConstructionError(f"need 0 <= a < b, got a={self.a}, b={self.b}")
        if math.isinf(self.a):
            raise ConstructionError("a = +inf is not allowed")

    def phi_value(self, y) -> float:
        return _checked_scalar(self.phi, y, self.dim, "phi")

    def psi_value(self, y) -> float:
        return _checked_scalar(self.psi, y, self.dim, "psi")

    def objective(self, lam: float) -> VecFn:
        phi, psi = self.phi, self.psi
        return lambda y: phi(y) + lam * psi(y)

    def describe(self) -> dict:
        return {"family": self.name, "params": dict(self.params)}


def _checked_scalar(fn, y, dim, what) -> float:
    y = np.asarray(y, dtype=float).reshape(dim)
    v = float(fn(y))
    if not math.isfinite(v):
        raise EvaluationError(f"{what} is not finite at {y.tolist()}", point=y)
    return v


def normalized(pair: FunctionalPair):
    """Shift the pair so that phi(0) = psi(0) = 0.

    Returns ``(shifted_pair, phi0, psi0)``; analytic metadata is shifted too.
    """
    zero = np.zeros(pair.dim)
    phi0 = pair.phi_value(zero)
    psi0 = pair.psi_value(zero)
    if phi0 == 0.0 and psi0 == 0.0:
        return pair, 0.0, 0.0
    phi, psi = pair.phi, pair.psi
    changes = dict(
        phi=lambda y: phi(y) - phi0,
        psi=lambda y: psi(y) - psi0,
        psi_inf=None if pair.psi_inf is None else _shift_ext(pair.psi_inf, -psi0),
        psi_sup=None if pair.psi_sup is None else _shift_ext(pair.psi_sup, -psi0),
    )
    if pair.multiplier is not None:
        mult = pair.multiplier
        changes["multiplier"] = lambda r: mult(r + psi0)
    if pair.level_infimum is not None:
        li = pair.level_infimum
        changes["level_infimum"] = lambda r: li(r + psi0) - phi0
    return replace(pair, **changes), phi0, psi0


def _shift_ext(x: ExtendedReal, c: float) -> ExtendedReal:
    return x if not x.is_finite else ExtendedReal.of(x.value + c)


# --------------------------------------------------------------------------
# growth condition and alpha / beta


def growth_lower_bound(pair: FunctionalPair, box_radius: float, grid_density: int) -> float:
    """Grid estimate of inf min{phi, psi} / (1 + |y|^p) over a box.

    This can only falsify the growth condition, never prove it: the scan
    stops at ``box_radius``. A :class:`GrowthWarning` is issued when the
    smallest ratio sits in the outermost tenth of the box.
    """
    if not box_radius > 0:
        raise ValueError("box_radius must be positive")
    if grid_density < 2:
        raise ValueError("grid_density must be >= 2")
    axis = np.linspace(-box_radius, box_radius, int(grid_density))
    mesh = np.stack(np.meshgrid(*([axis] * pair.dim), indexing="ij"), axis=-1)
    pts = mesh.reshape(-1, pair.dim)
    phi = np.asarray(pair.phi(pts), dtype=float)
    psi = np.asarray(pair.psi(pts), dtype=float)
    bad = ~(np.isfinite(phi) & np.isfinite(psi))
    if bad.any():
        y = pts[np.argmax(bad)]
        raise EvaluationError(f"non-finite functional value at {y.tolist()}", point=y)
    norms = np.linalg.norm(pts, axis=-1)
    ratio = np.minimum(phi, psi) / (1.0 + norms**pair.p)
    sup_norm = np.max(np.abs(pts), axis=-1)
    outer = sup_norm > 0.9 * box_radius
    best = float(ratio.min())
    if outer.any() and (~outer).any() and ratio[outer].min() < ratio[~outer].min():
        warnings.warn(
            f"growth ratio still decreasing at radius {box_radius} (min {best:.6g} in outer shell); "
            "the growth condition may fail",
            GrowthWarning,
            stacklevel=2,
        )
    return best


@dataclass(frozen=True)
class AlphaBeta:
    alpha: ExtendedReal
    beta: ExtendedReal
    alpha_source: str  # "inf_psi" or "sup_M_b"
    beta_source: str  # "sup_psi" or "inf_M_a"
    m_a_empty: bool
    m_b_empty: bool

    @property
    def range_empty(self) -> bool:
        return not self.alpha < self.beta

    def contains(self, r: float) -> bool:
        r = ExtendedReal.of(r)
        return self.alpha < r < self.beta

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha.to_json(),
            "beta": self.beta.to_json(),
            "alpha_source": self.alpha_source,
            "beta_source": self.beta_source,
            "M_a_empty": self.m_a_empty,
            "M_b_empty": self.m_b_empty,
            "range_empty": self.range_empty,
        }


def alpha_beta(pair: FunctionalPair, minimizer_oracle=None) -> AlphaBeta:
    """alpha = max{inf psi, sup_{M_b} psi}, beta = min{sup psi, inf_{M_a} psi}.

    ``minimizer_oracle(lam)`` returns the global minimizers of phi + lam*psi
    (an empty sequence when there are none) or ``None`` when it cannot
    tell. It defaults to the analytic declaration carried by the pair.
    M_b is empty by definition when b = +inf.
    """
    oracle = minimizer_oracle if minimizer_oracle is not None else pair.minimizers
    if pair.psi_inf is None or pair.psi_sup is None:
        raise AlphaBetaUndetermined(f"{pair.name}: range of psi is not declared")

    def minimizer_set(lam):
        if math.isinf(lam):
            return []
        if oracle is None:
            raise AlphaBetaUndetermined(f"{pair.name}: no minimizer oracle for lambda={lam}")
        pts = oracle(lam)
        if pts is None:
            raise AlphaBetaUndetermined(f"{pair.name}: oracle cannot certify M_{lam}")
        return list(pts)

    m_a = minimizer_set(pair.a)
    m_b = minimizer_set(pair.b)
    sup_mb = sup_over(pair.psi_value(y) for y in m_b)
    # inf over M_a is -sup of the negatives
    inf_ma = _neg(sup_over(-pair.psi_value(y) for y in m_a))

    if sup_mb > pair.psi_inf:
        alpha, a_src = sup_mb, "sup_M_b"
    else:
        alpha, a_src = pair.psi_inf, "inf_psi"
    if inf_ma < pair.psi_sup:
        beta, b_src = inf_ma, "inf_M_a"
    else:
        beta, b_src = pair.psi_sup, "sup_psi"
    return AlphaBeta(alpha, beta, a_src, b_src, not m_a, not m_b)


def _neg(x: ExtendedReal) -> ExtendedReal:
    return ExtendedReal(-x.sign, -x.value) if x.sign == 0 else ExtendedReal(-x.sign)


# --------------------------------------------------------------------------
# instance families


def make_canonical_instance() -> FunctionalPair:
    """phi(y) = -y, psi(y) = y^2 on R; y_lambda = 1/(2 lambda)."""
    return FunctionalPair(
        dim=1,
        phi=lambda y: -y[..., 0],
        psi=lambda y: y[..., 0] ** 2,
        p=2.0,
        name="canonical",
        psi_inf=ExtendedReal.of(0.0),
        psi_sup=POS_INF,
        minimizers=lambda lam: [] if lam == 0 else [np.array([1.0 / (2.0 * lam)])],
        argmin=lambda lam: np.array([1.0 / (2.0 * lam)]),
        multiplier=lambda r: 1.0 / (2.0 * math.sqrt(r)),
        level_infimum=lambda r: -math.sqrt(r),
        grad_phi=lambda y: -np.ones_like(y),
    )


def _double_well_phi(y):
    y = y[..., 0]
    return np.where(y <= 1.0, y**2, 2.0 - y)


def _double_well_minimizers(lam):
    if lam == 0:
        return []
    if lam > 0.125:
        return [np.zeros(1)]
    if lam < 0.125:
        return [np.array([1.0 / (2.0 * lam)])]
    return [np.zeros(1), np.array([4.0])]


def make_double_well_instance() -> FunctionalPair:
    """Piecewise phi (y^2 up to 1, then 2 - y) with psi = y^2.

    phi + lambda*psi has two global minima at lambda = 1/8, which breaks the
    level-set identity for r = 1.
    """
    return FunctionalPair(
        dim=1,
        phi=_double_well_phi,
        psi=lambda y: y[..., 0] ** 2,
        p=2.0,
        name="double-well",
        psi_inf=ExtendedReal.of(0.0),
        psi_sup=POS_INF,
        minimizers=_double_well_minimizers,
        level_infimum=lambda r: min(float(_double_well_phi(np.array([s * math.sqrt(r)]))) for s in (1, -1)),
        violates_uniqueness=True,
    )


@dataclass(frozen=True)
class Eta:
    """Increasing, strictly convex map on [0, inf) with inverse and derivative."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[float], float]
    derivative: Callable[[float], float]


def _power_eta(s: float) -> Eta:
    if not s > 1:
        raise ConstructionError("power eta needs exponent > 1 for strict convexity")
    return Eta(
        f"power:{s:g}",
        lambda t: np.asarray(t) ** s,
        lambda r: r ** (1.0 / s),
        lambda t: s * t ** (s - 1.0),
    )


ETAS = {
    "expm1": Eta("expm1", np.expm1, math.log1p, math.exp),
    "quadratic": Eta(
        "quadratic",
        lambda t: np.asarray(t) + np.asarray(t) ** 2,
        lambda r: 0.5 * (math.sqrt(1.0 + 4.0 * r) - 1.0),
        lambda t: 1.0 + 2.0 * t,
    ),
}


def get_eta(spec) -> Eta:
    if isinstance(spec, Eta):
        return spec
    if isinstance(spec, str) and spec.startswith("power:"):
        return _power_eta(float(spec.split(":", 1)[1]))
    try:
        return ETAS[spec]
    except KeyError:
        raise ConstructionError(f"unknown eta {spec!r}; known: {sorted(ETAS)} or 'power:<s>'") from None


def make_linear_eta_instance(c, eta="expm1", q: float = 2.0) -> FunctionalPair:
    """Linear phi(y) = <c, y> against psi(y) = eta(|y|^q), Euclidean norm."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    norm_c = float(np.linalg.norm(c))
    if c.ndim != 1 or norm_c == 0:
        raise ConstructionError("c must be a non-zero vector")
    if not q > 1:
        raise ConstructionError("q must exceed 1")
    eta = get_eta(eta)
    unit = c / norm_c
    eta0 = float(eta.fn(0.0))

    def psi(y):
        return eta.fn(np.linalg.norm(y, axis=-1) ** q)

    def radius(lam):
        # stationarity along -c: |c| = lam * q t^{q-1} eta'(t^q), increasing in t
        g = lambda t: lam * q * t ** (q - 1.0) * eta.derivative(t**q) - norm_c
        hi = 1.0
        while g(hi) < 0:
            hi *= 2.0
        return optimize.brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def level_radius(r):
        return eta.inverse(r) ** (1.0 / q)

    return FunctionalPair(
        dim=c.size,
        phi=lambda y: y @ c,
        psi=psi,
        p=1.0,
        name="linear-eta",
        params={"c": c.tolist(), "eta": eta.name, "q": q},
        psi_inf=ExtendedReal.of(eta0),
        psi_sup=POS_INF,
        minimizers=lambda lam: [] if lam == 0 else [-radius(lam) * unit],
        argmin=lambda lam: -radius(lam) * unit,
        multiplier=lambda r: norm_c / (q * level_radius(r) ** (q - 1.0) * eta.derivative(level_radius(r) ** q)),
        level_infimum=lambda r: -norm_c * level_radius(r),
        grad_phi=lambda y: np.broadcast_to(c, np.shape(y)).copy(),
    )


def make_linear_quadratic_instance(g, L: float) -> FunctionalPair:
    """phi(y) = <g, y> (gradient Lipschitz with constant L), psi = |y|^2 / 2, a = L."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    norm_g = float(np.linalg.norm(g))
    if norm_g == 0:
        raise ConstructionError("the gradient of phi at 0 must be non-zero")
    if not L > 0:
        raise ConstructionError("L must be positive")
    return FunctionalPair(
        dim=g.size,
        phi=lambda y: y @ g,
        psi=lambda y: 0.5 * np.sum(np.asarray(y) ** 2, axis=-1),
        p=2.0,
        a=float(L),
        name="linear-quadratic",
        params={"g": g.tolist(), "L": float(L)},
        psi_inf=ExtendedReal.of(0.0),
        psi_sup=POS_INF,
        minimizers=lambda lam: [-g / lam] if lam >= L else None,
        argmin=lambda lam: -g / lam,
        multiplier=lambda r: norm_g / math.sqrt(2.0 * r),
        level_infimum=lambda r: -norm_g * math.sqrt(2.0 * r),
        grad_phi=lambda y: np.broadcast_to(g, np.shape(y)).copy(),
    )


def fd_gradient(fn: VecFn, y: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a vectorized scalar map at one point."""
    y = np.asarray(y, dtype=float)
    h = step * np.maximum(1.0, np.abs(y))
    eye = np.diag(h)
    return (fn(y + eye) - fn(y - eye)) / (2.0 * h)


def critical_radius(pair: FunctionalPair, starts: int = 8, seed: int = 0) -> float:
    """min |y|^2 over S = {y : grad phi(y) + L y = 0}, solved numerically."""
    L = pair.a
    grad = pair.grad_phi or (lambda y: fd_gradient(pair.phi, y))
    rng = np.random.default_rng(seed)
    best = math.inf
    for y0 in rng.normal(size=(starts, pair.dim)):
        sol = optimize.root(lambda y: grad(y) + L * y, y0, tol=1e-14)
        if sol.success and np.linalg.norm(grad(sol.x) + L * sol.x) < 1e-10:
            best = min(best, float(sol.x @ sol.x))
    if math.isinf(best):
        raise AlphaBetaUndetermined("S could not be located numerically")
    return best


@dataclass(frozen=True)
class LogPowerFunction:
    """f(y) = a0 log(1 + (y+)^p) + sum_i a_i (y+)^{q_i}, with 0 < q_i < p."""

    a0: float
    coeffs: tuple
    exponents: tuple
    p: float

    def __call__(self, y):
        yp = np.maximum(np.asarray(y, dtype=float), 0.0)
        out = self.a0 * np.log1p(yp**self.p)
        for ai, qi in zip(self.coeffs, self.exponents):
            out = out + ai * yp**qi
        return out

    def to_json(self) -> dict:
        return {"a0": self.a0, "coeffs": list(self.coeffs), "exponents": list(self.exponents), "p": self.p}


def make_log_power_f(a0: float = 0.0, coeffs=(), exponents=(), p: float = 2.0) -> LogPowerFunction:
    coeffs = tuple(float(x) for x in coeffs)
    exponents = tuple(float(x) for x in exponents)
    if len(coeffs) != len(exponents):
        raise ConstructionError("coeffs and exponents must have the same length")
    if not p > 0:
        raise ConstructionError("p must be positive")
    if a0 < 0 or any(x < 0 for x in coeffs):
        raise ConstructionError("coefficients must be non-negative")
    if a0 + sum(coeffs) <= 0:
        raise ConstructionError("at least one coefficient must be positive")
    bad = [q for q in exponents if not 0 < q < p]
    if bad:
        raise ConstructionError(f"exponents must lie in (0, p={p}), got {bad}")
    return LogPowerFunction(float(a0), coeffs, exponents, float(p))


def make_jensen_pair(f, p: float, delta: float = 0.0, name: str = "jensen", params=None) -> FunctionalPair:
    """phi = -f, psi = |y|^p on R with a = delta, b = +inf.

    Minimizer sets are declared only for log-power functions (which are
    unbounded above, so M_0 is empty).
    """
    known = isinstance(f, LogPowerFunction) and delta == 0.0

    def level_inf(r):
        t = r ** (1.0 / p)
        return -max(float(f(t)), float(f(-t)))

    return FunctionalPair(
        dim=1,
        phi=lambda y: -f(y[..., 0]),
        psi=lambda y: np.abs(y[..., 0]) ** p,
        p=float(p),
        a=float(delta),
        name=name,
        params=params if params is not None else (f.to_json() if isinstance(f, LogPowerFunction) else {}),
        psi_inf=ExtendedReal.of(0.0),
        psi_sup=POS_INF,
        minimizers=(lambda lam: [] if lam == 0 else None) if known else None,
        level_infimum=level_inf,
    )


def make_log_power_pair(a0: float = 1.0, coeffs=(), exponents=(), p: float = 2.0) -> FunctionalPair:
    f = make_log_power_f(a0, coeffs, exponents, p)
    return make_jensen_pair(f, p, 0.0, name="log-power", params=f.to_json())


@dataclass(frozen=True)
class SourceTerm:
    """Non-negative source f with antiderivative F(y) = int_0^y f."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    params: Mapping = field(default_factory=dict)
    # F(y) grows like y^e (up to a log factor) at infinity; None when unknown
    growth_exponent: Optional[float] = None


def make_source(family: str = "power", **params) -> SourceTerm:
    """Source families for the quasilinear problem.

    ``power``: f(y) = (y+)^s. ``log-power``: f = LogPowerFunction, F by quadrature.
    """
    if family == "power":
        s = float(params.get("s", 1.0))
        if not s > 0:
            raise ConstructionError("power source needs s > 0")
        return SourceTerm(
            "power",
            lambda y: np.maximum(np.asarray(y, dtype=float), 0.0) ** s,
            lambda y: np.maximum(np.asarray(y, dtype=float), 0.0) ** (s + 1.0) / (s + 1.0),
            {"s": s},
            growth_exponent=s + 1.0,
        )
    if family == "log-power":
        fr = make_log_power_f(params.get("a0", 0.0), params.get("coeffs", ()), params.get("exponents", ()), params.get("p", 2.0))
        growth = max(fr.exponents) + 1.0 if fr.exponents else 1.0
        return SourceTerm("log-power", fr, _antiderivative(fr), fr.to_json(), growth_exponent=growth)
    raise ConstructionError(f"unknown source family {family!r}")


def _antiderivative(f):
    from scipy import integrate

    def F(y):
        y = np.asarray(y, dtype=float)
        flat = [integrate.quad(lambda t: float(f(t)), 0.0, v, epsabs=1e-14, epsrel=1e-13)[0] if v > 0 else 0.0 for v in y.ravel()]
        return np.asarray(flat).reshape(y.shape)

    return F


def make_quasilinear_pair(p: float = 3.0, nu: float = 1.0, source=None) -> FunctionalPair:
    """phi = -nu F, psi = |y|^p on R with a = 0 (F/y^p -> 0 at infinity)."""
    src = source if isinstance(source, SourceTerm) else make_source(**(source or {"family": "power", "s": 1.0}))
    if not p > 1:
        raise ConstructionError("p must exceed 1")
    if not 0 < nu:
        raise ConstructionError("nu must be positive")
    if src.growth_exponent is not None and not p > src.growth_exponent:
        # F(y)/|y|^p must vanish at infinity, else phi + lambda psi is not coercive for small lambda
        raise ConstructionError(f"p={p} must exceed the growth exponent {src.growth_exponent} of F")
    F = src.F
    return FunctionalPair(
        dim=1,
        phi=lambda y: -nu * F(y[..., 0]),
        psi=lambda y: np.abs(y[..., 0]) ** p,
        p=float(p),
        name="quasilinear",
        params={"p": p, "nu": nu, "source": {"family": src.name, **dict(src.params)}},
        psi_inf=ExtendedReal.of(0.0),
        psi_sup=POS_INF,
        minimizers=lambda lam: [] if lam == 0 else None,
        level_infimum=lambda r: -nu * float(F(np.asarray(r ** (1.0 / p)))),
    )


FAMILIES = {
    "canonical": (make_canonical_instance, "phi=-y, psi=y^2 on R (closed forms available)"),
    "double-well": (make_double_well_instance, "piecewise phi with psi=y^2; non-unique minimum at lambda=1/8"),
    "linear-eta": (make_linear_eta_instance, "linear phi=<c,y>, psi=eta(|y|^q); params c, eta, q"),
    "linear-quadratic": (make_linear_quadratic_instance, "linear phi=<g,y>, psi=|y|^2/2, a=L; params g, L"),
    "log-power": (make_log_power_pair, "phi=-f (f from the log/power family), psi=|y|^p; params a0, coeffs, exponents, p"),
    "quasilinear": (make_quasilinear_pair, "phi=-nu F, psi=|y|^p; params p, nu, source"),
}


def make_instance(family: str, **params) -> FunctionalPair:
    try:
        ctor = FAMILIES[family][0]
    except KeyError:
        raise ConstructionError(f"unknown family {family!r}; known: {sorted(FAMILIES)}") from None
    return ctor(**params)
