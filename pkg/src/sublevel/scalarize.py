"""Global minimization of phi + lambda*psi and the level-set multiplier.

The global minimum is certified only statistically: quasi-random multistart
local descent inside a box that is grown until the objective visibly
increases toward its boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional, Union

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import (
    AlphaBetaUndetermined,
    CoercivityError,
    LevelJumpError,
    LevelSetNotFound,
    OutOfRangeError,
)
from .functionals import FunctionalPair, alpha_beta

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SearchConfig:
    starts: int = 8
    pool: int = 64
    box_radius: Union[float, str] = "auto"
    box_init: float = 1.0
    box_max: float = 1e12
    descent_tol: float = 1e-12
    x_tol: float = 1e-8  # declared accuracy of a returned minimizer, relative to max(1, |y|)
    seed: int = 0
    tie_tol: float = 1e-8
    separation: float = 1e-3
    bisect_tol: float = 1e-7
    bisect_max_iter: int = 400
    lambda_max: float = 1e12

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "SearchConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown search options: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class MultistartCertificate:
    starts: int
    basins: int
    best_values: tuple  # objective at the best (up to) two basins
    box_radius: float
    suspected_nonunique: bool
    rival: Optional[tuple] = None  # competing minimizer when non-uniqueness is suspected

    def to_json(self) -> dict:
        return {
            "starts": self.starts,
            "basins": self.basins,
            "best_values": list(self.best_values),
            "box_radius": self.box_radius,
            "suspected_nonunique": self.suspected_nonunique,
            "rival": None if self.rival is None else list(self.rival),
        }


@dataclass(frozen=True)
class PenalizedMinimum:
    lam: float
    y_hat: tuple
    phi_value: float
    psi_value: float
    objective: float
    psi_tol: float  # psi spread over the declared minimizer accuracy
    certificate: MultistartCertificate

    @property
    def point(self) -> np.ndarray:
        return np.array(self.y_hat)

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "y_hat": list(self.y_hat),
            "phi": self.phi_value,
            "psi": self.psi_value,
            "objective": self.objective,
            "psi_tol": self.psi_tol,
            "certificate": self.certificate.to_json(),
        }


@dataclass(frozen=True)
class MultiplierResult:
    lambda_r: float
    minimum: PenalizedMinimum
    residual: float
    history: tuple  # (lambda, psi(y_lambda)) for every evaluation, in order

    def to_json(self) -> dict:
        return {
            "lambda_r": self.lambda_r,
            "residual": self.residual,
            "minimum": self.minimum.to_json(),
            "evaluations": len(self.history),
        }


def _scalar(obj):
    return lambda x: float(obj(np.asarray(x, dtype=float)))


def _sobol(dim, n, seed):
    m = max(1, math.ceil(math.log2(max(n, 2))))
    pts = qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)[:n]
    return 2.0 * pts - 1.0


def _boundary_points(dim, R, n, seed):
    if dim == 1:
        return np.array([[-R], [R]])
    raw = _sobol(dim, n, seed + 7919)
    raw = raw / np.max(np.abs(raw), axis=1, keepdims=True)
    return R * raw


def _search_radius(obj, dim, search: SearchConfig) -> float:
    if search.box_radius != "auto":
        return float(search.box_radius)
    interior = _sobol(dim, search.pool, search.seed)
    R = float(search.box_init)
    prev_edge = None
    rising = 0
    while R <= search.box_max:
        inner = np.vstack([R * interior, np.zeros((1, dim))])
        best_in = float(np.min(obj(inner)))
        edge = float(np.min(obj(_boundary_points(dim, R, search.pool, search.seed))))
        rising = rising + 1 if prev_edge is not None and edge > prev_edge else 0
        if edge > best_in + 1e-9 * (1.0 + abs(best_in)) and rising >= 2:
            return R
        prev_edge = edge
        R *= 2.0
    raise CoercivityError(f"coercivity not observed up to radius {search.box_max:g}")


def _descend(f, x0, R, search: SearchConfig):
    res = optimize.minimize(
        f,
        x0,
        method="L-BFGS-B",
        jac="3-point",
        bounds=[(-R, R)] * x0.size,
        options={"ftol": search.descent_tol * 1e-3, "gtol": search.descent_tol, "maxiter": 1000},
    )
    return np.asarray(res.x, dtype=float), float(res.fun)


def _polish(f, x, fx, R, search: SearchConfig):
    # derivative-free polish copes with kinks where the gradient model stalls
    dim = x.size
    size = max(1.0, float(np.max(np.abs(x))))
    simplex = np.clip(np.vstack([x, x + 1e-3 * size * np.eye(dim)]), -R, R)
    nm = optimize.minimize(
        f,
        x,
        method="Nelder-Mead",
        bounds=[(-R, R)] * dim,
        options={"initial_simplex": simplex, "xatol": 1e-12 * size, "fatol": 1e-16, "maxiter": 400 * dim},
    )
    # ties within rounding noise keep the gradient-based point, which is sharper
    if float(nm.fun) < fx - 16 * _EPS * max(1.0, abs(fx)):
        return np.asarray(nm.x, dtype=float), float(nm.fun)
    return x, fx


def _cluster(found, separation):
    basins = []
    for x, fx in found:
        if all(np.linalg.norm(x - bx) >= separation for bx, _ in basins):
            basins.append((x, fx))
    return basins


def minimize_penalized(pair: FunctionalPair, lam: float, search: Optional[SearchConfig] = None) -> PenalizedMinimum:
    search = search or SearchConfig()
    if not (pair.a < lam < pair.b):
        raise ValueError(f"lambda={lam} is outside ]{pair.a}, {pair.b}[")
    obj = pair.objective(lam)
    dim = pair.dim
    R = _search_radius(obj, dim, search)

    pool = np.vstack([np.zeros((1, dim)), R * _sobol(dim, search.pool, search.seed)])
    values = obj(pool)
    half = max(1, search.starts // 2)
    spread = list(range(1, 1 + half))
    best = [int(i) for i in np.argsort(values, kind="stable") if i not in spread][: search.starts - half]
    start_idx = sorted(set(spread + best))

    f = _scalar(obj)
    found = sorted((_descend(f, pool[i], R, search) for i in start_idx), key=lambda t: t[1])
    basins = _cluster(found, search.separation)
    # polish the leading basins only; polishing can reorder near-ties
    for i in range(len(basins)):
        if i < 2 or basins[i][1] - basins[0][1] <= 1e3 * search.tie_tol:
            basins[i] = _polish(f, *basins[i], R, search)
    basins = _cluster(sorted(basins, key=lambda t: t[1]), search.separation)
    y, fy = basins[0]

    if search.box_radius != "auto" and np.max(np.abs(y)) >= R * (1 - 1e-7):
        raise CoercivityError(f"coercivity not observed in box of radius {R:g}: minimizer on the boundary")

    rival = None
    for x, fx in basins[1:]:
        if fx - fy <= search.tie_tol:
            rival = tuple(float(v) for v in x)
            break
    cert = MultistartCertificate(
        starts=len(start_idx),
        basins=len(basins),
        best_values=tuple(float(b[1]) for b in basins[:2]),
        box_radius=R,
        suspected_nonunique=rival is not None,
        rival=rival,
    )
    phi_v = pair.phi_value(y)
    psi_v = pair.psi_value(y)
    h = search.x_tol * max(1.0, float(np.max(np.abs(y))))
    probes = np.vstack([y + h * np.eye(dim), y - h * np.eye(dim)])
    psi_tol = float(np.max(np.abs(pair.psi(probes) - psi_v)))
    return PenalizedMinimum(
        lam=float(lam),
        y_hat=tuple(float(v) for v in y),
        phi_value=phi_v,
        psi_value=psi_v,
        objective=phi_v + lam * psi_v,
        psi_tol=psi_tol,
        certificate=cert,
    )


def psi_along_lambda(pair: FunctionalPair, lambdas, search: Optional[SearchConfig] = None):
    """[(lambda, psi(y_lambda))] for each requested multiplier."""
    return [(float(lam), minimize_penalized(pair, lam, search).psi_value) for lam in lambdas]


def find_lambda_r(
    pair: FunctionalPair,
    r: float,
    tol: Optional[float] = None,
    search: Optional[SearchConfig] = None,
    check_range: bool = True,
) -> MultiplierResult:
    """Bisect on lambda so that the penalized minimizer lands on psi = r.

    Uses that lambda -> psi(y_lambda) is nonincreasing. Raises
    :class:`LevelJumpError` when the bracket collapses while psi still jumps
    over r, which is what happens when some phi + lambda*psi has two global
    minima.
    """
    search = search or SearchConfig()
    tol = search.bisect_tol * max(1e-6, abs(r)) if tol is None else tol
    if not tol > 0:
        raise ValueError("tol must be positive")
    if check_range:
        try:
            ab = alpha_beta(pair)
        except AlphaBetaUndetermined:
            ab = None
        if ab is not None and not ab.contains(r):
            raise OutOfRangeError(f"r={r} is not in ]{ab.alpha}, {ab.beta}[")

    a, b = pair.a, pair.b
    history = []

    def evaluate(lam):
        m = minimize_penalized(pair, lam, search)
        history.append((lam, m.psi_value))
        return m

    def done(m):
        return MultiplierResult(m.lam, m, abs(m.psi_value - r), tuple(history))

    lam0 = a + 1.0 if math.isinf(b) else 0.5 * (a + b)
    m0 = evaluate(lam0)
    if abs(m0.psi_value - r) <= tol:
        return done(m0)
    if m0.psi_value > r:
        lo, m_lo = lam0, m0
        k = 1
        while True:
            hi = a + (lam0 - a) * 2.0**k if math.isinf(b) else b - (b - lam0) / 2.0**k
            if hi > search.lambda_max or not hi < b:
                raise OutOfRangeError(f"psi(y_lambda) stays above r={r} up to lambda={lo:g}")
            m_hi = evaluate(hi)
            if abs(m_hi.psi_value - r) <= tol:
                return done(m_hi)
            if m_hi.psi_value < r:
                break
            lo, m_lo = hi, m_hi
            k += 1
    else:
        hi, m_hi = lam0, m0
        k = 1
        while True:
            lo = a + (lam0 - a) / 2.0**k
            if not lo - a > 1e-13 * max(1.0, a):
                raise OutOfRangeError(f"psi(y_lambda) stays below r={r} down to lambda={hi:g}")
            m_lo = evaluate(lo)
            if abs(m_lo.psi_value - r) <= tol:
                return done(m_lo)
            if m_lo.psi_value > r:
                break
            hi, m_hi = lo, m_lo
            k += 1

    for _ in range(search.bisect_max_iter):
        if hi - a > 4.0 * (lo - a):
            mid = a + math.sqrt((lo - a) * (hi - a))
        else:
            mid = 0.5 * (lo + hi)
        if not lo < mid < hi or hi - lo <= 8 * _EPS * hi:
            break
        m = evaluate(mid)
        if abs(m.psi_value - r) <= tol:
            return done(m)
        if m.psi_value > r:
            lo, m_lo = mid, m
        else:
            hi, m_hi = mid, m
    # a jump no larger than the accuracy of the minimizers is not a jump
    if m_lo.psi_value - m_hi.psi_value <= 2.0 * max(m_lo.psi_tol, m_hi.psi_tol):
        return done(m_lo if m_lo.psi_value - r <= r - m_hi.psi_value else m_hi)
    raise LevelJumpError(
        f"level jump detected in lambda interval [{lo!r}, {hi!r}]: "
        f"psi jumps from {m_lo.psi_value:.6g} to {m_hi.psi_value:.6g} across r={r}",
        lo,
        hi,
        m_lo.psi_value,
        m_hi.psi_value,
    )


def level_set_infimum(pair: FunctionalPair, r: float, tol: Optional[float] = None, search: Optional[SearchConfig] = None) -> float:
    """inf of phi over psi^{-1}(r), read off the penalized minimizer at lambda_r."""
    return find_lambda_r(pair, r, tol, search).minimum.phi_value


# --------------------------------------------------------------------------
# independent oracle: parameterize the level set along rays


def _psi_minimizer(pair: FunctionalPair) -> np.ndarray:
    f = _scalar(pair.psi)
    best = None
    for x0 in np.vstack([np.zeros((1, pair.dim)), _sobol(pair.dim, 8, 11)]):
        res = optimize.minimize(f, x0, method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-16})
        if best is None or res.fun < best.fun:
            best = res
    y0 = best.x
    # prefer the origin when it is at least as good (exact zeros keep rays clean)
    if float(pair.psi(np.zeros(pair.dim))) <= best.fun:
        y0 = np.zeros(pair.dim)
    return np.asarray(y0, dtype=float)


def _ray_roots(pair, y0, direction, r, n_t=400, t_max=1e8):
    g = lambda t: float(pair.psi(y0 + t * direction)) - r
    T = 1.0
    while g(T) <= 0 and T < t_max:
        T *= 2.0
    ts = np.concatenate([np.geomspace(1e-12 * T, T, n_t // 2), np.linspace(0.0, T, n_t)[1:]])
    ts = np.unique(ts)
    vals = pair.psi(y0[None, :] + ts[:, None] * direction[None, :]) - r
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(optimize.brentq(g, ts[i], ts[i + 1], xtol=1e-15, rtol=4 * _EPS))
    roots += [float(t) for t, v in zip(ts, vals) if v == 0.0]
    return roots


def level_set_infimum_direct(pair: FunctionalPair, r: float, grid: int = 720) -> float:
    """inf phi over {psi = r} by root-finding along rays from a psi-minimizer.

    Independent of the penalized route; only for d <= 2.
    """
    if pair.dim > 2:
        raise ValueError("direct level-set oracle supports d <= 2 only")
    y0 = _psi_minimizer(pair)
    psi0 = float(pair.psi(y0))
    if abs(psi0 - r) <= 1e-14 * max(1.0, abs(r)):
        return pair.phi_value(y0)
    if psi0 > r:
        raise LevelSetNotFound(f"psi >= {psi0:.6g} > r={r} everywhere scanned")

    if pair.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
        angles = None
    else:
        angles = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])

    best_val, best_k, best_t = math.inf, None, None
    for k, u in enumerate(dirs):
        for t in _ray_roots(pair, y0, u, r):
            v = pair.phi_value(y0 + t * u)
            if v < best_val:
                best_val, best_k, best_t = v, k, t
    if best_k is None:
        raise LevelSetNotFound(f"level set psi={r} not found along {len(dirs)} rays")
    if angles is None:
        return best_val

    # refine the angle around the best ray, following the root closest to best_t
    def along(theta):
        u = np.array([math.cos(theta), math.sin(theta)])
        roots = _ray_roots(pair, y0, u, r)
        if not roots:
            return math.inf
        t = min(roots, key=lambda s: abs(s - best_t))
        return pair.phi_value(y0 + t * u)

    step = 2 * np.pi / grid
    th = angles[best_k]
    res = optimize.minimize_scalar(along, bounds=(th - step, th + step), method="bounded", options={"xatol": 1e-12})
    return min(best_val, float(res.fun))
