"""Jensen-type inequality in weighted L^p and its hypothesis checks.

For f continuous with f <= 0 on (-inf, 0], limsup f(y)/y^p = delta, no global
minimum of delta|y|^p - f, and y -> f'(y)/y^(p-1) injective on (0, inf):

    sum w f(u) <= f((sum w |u|^p / W)^(1/p)) * W,   W = sum w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .functionals import LogPowerFunction, make_log_power_f
from .measure import StepFunction, WeightedMeasureSpace

DEFAULT_GRID = np.geomspace(1e-6, 1e6, 481)


@dataclass(frozen=True)
class JensenInstance:
    f: Callable[[np.ndarray], np.ndarray]
    p: float
    delta: float
    space: WeightedMeasureSpace
    u: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ValueError("delta must be finite and non-negative")
        u = self.u.values[:, 0] if isinstance(self.u, StepFunction) else np.asarray(self.u, dtype=float).ravel()
        if u.size != self.space.size:
            raise ValueError(f"u has {u.size} values, space has {self.space.size} atoms")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


class HypothesisCheck(NamedTuple):
    name: str
    passed: bool
    evidence: dict


class JensenCheck(NamedTuple):
    lhs: float
    rhs: float
    margin: float
    holds: bool


class NaiveComparison(NamedTuple):
    rhs12: float
    rhs_naive: float
    stronger: bool
    mean_of_powers: float
    power_of_mean: float


def _fd_derivative(f, y):
    h = 1e-5 * y
    return (f(y + h) - f(y - h)) / (2 * h)


def _monotone_steps(g, rel_noise=1e-7):
    """Signs of resolvable moves of g along the grid (plateaus within noise are merged)."""
    signs = []
    anchor = g[0]
    for v in g[1:]:
        if abs(v - anchor) > rel_noise * max(abs(v), abs(anchor)):
            signs.append(1 if v > anchor else -1)
            anchor = v
    return signs


def validate_jensen_hypotheses(inst: JensenInstance, grid=None) -> list:
    """Sampled checks of the hypotheses; evidence is returned even on failure.

    These are semi-decisions on a finite grid, not proofs.
    """
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("grid must lie in ]0, inf[")
    f, p, delta = inst.f, inst.p, inst.delta
    y_max = float(grid.max())
    checks = []

    neg = np.concatenate([-grid[::-1], [0.0]])
    fneg = np.asarray(f(neg), dtype=float)
    checks.append(HypothesisCheck(
        "sup_nonpositive_on_negative_axis",
        bool(np.all(fneg <= 0.0)),
        {"max_f": float(fneg.max()), "at": float(neg[int(np.argmax(fneg))])},
    ))

    tail = np.geomspace(y_max, y_max**2, 49)
    dist = np.abs(np.asarray(f(tail), dtype=float) / tail**p - delta)
    scale = max(1.0, delta)
    if dist[-1] <= 1e-3 * scale:
        ok, rate = True, None
    else:
        rate = -math.log(dist[-1] / dist[0]) / math.log(tail[-1] / tail[0]) if dist[0] > 0 else 0.0
        ok = bool(np.all(np.diff(dist) <= 1e-12 * scale) and rate >= 1e-3)
    checks.append(HypothesisCheck(
        "limsup_ratio_equals_delta",
        ok,
        {"delta": delta, "distance_at_end": float(dist[-1]), "decay_rate": rate, "y_end": float(tail[-1])},
    ))

    fprime = _fd_derivative(f, grid)
    finite = bool(np.all(np.isfinite(fprime)))
    checks.append(HypothesisCheck("differentiable_on_positive_axis", finite, {"points": int(grid.size)}))
    g = fprime / grid ** (p - 1)
    signs = _monotone_steps(g) if finite else []
    injective = bool(signs) and (all(s < 0 for s in signs) or all(s > 0 for s in signs))
    checks.append(HypothesisCheck(
        "derivative_ratio_injective",
        injective,
        {"resolvable_steps": len(signs), "decreasing": sum(s < 0 for s in signs), "increasing": sum(s > 0 for s in signs),
         "ratio_range": [float(np.nanmin(g)), float(np.nanmax(g))] if finite else None},
    ))

    ys = np.concatenate([-grid[::-1], [0.0], grid])
    h = delta * np.abs(ys) ** p - np.asarray(f(ys), dtype=float)
    i = int(np.argmin(h))
    at_edge = abs(ys[i]) == y_max
    strict = at_edge and np.sum(h == h[i]) == 1
    checks.append(HypothesisCheck(
        "no_global_minimum",
        bool(strict),
        {"argmin_on_grid": float(ys[i]), "min_value": float(h[i]), "scan_radius": y_max},
    ))
    return checks


def all_passed(checks) -> bool:
    return all(c.passed for c in checks)


def jensen_check(inst: JensenInstance) -> JensenCheck:
    w = inst.space.weights
    W = inst.space.total_gamma
    lhs = math.fsum(w * np.asarray(inst.f(inst.u), dtype=float))
    mean = math.fsum(w * np.abs(inst.u) ** inst.p) / W
    rhs = float(inst.f(np.asarray(mean ** (1.0 / inst.p)))) * W
    margin = rhs - lhs
    guard = 1e-12 * max(1.0, abs(lhs), abs(rhs))
    return JensenCheck(lhs, rhs, margin, bool(lhs <= rhs + guard))


def naive_jensen_comparison(space: WeightedMeasureSpace, u, p: float) -> NaiveComparison:
    """For a probability space with gamma = 1 and 0 < p < 1, compare the bound
    log(1 + int u^p) with the classical-Jensen bound log(1 + (int u)^p)."""
    if not 0 < p < 1:
        raise ValueError("the comparison is stated for 0 < p < 1")
    if any(g != 1.0 for g in space.gamma) or abs(space.total_gamma - 1.0) > 1e-12:
        raise ValueError("needs gamma = 1 and total mass 1")
    u = np.asarray(u.values[:, 0] if isinstance(u, StepFunction) else u, dtype=float).ravel()
    if np.any(u < 0):
        raise ValueError("u must be non-negative")
    mu = np.asarray(space.mu)
    mean_pow = math.fsum(mu * u**p)
    pow_mean = math.fsum(mu * u) ** p
    rhs12 = math.log1p(mean_pow)
    naive = math.log1p(pow_mean)
    return NaiveComparison(rhs12, naive, rhs12 <= naive + 1e-12 * max(1.0, naive), mean_pow, pow_mean)


# --------------------------------------------------------------------------
# randomized sweeps


def random_log_power_f(rng: np.random.Generator, p_range=(0.3, 4.0)) -> LogPowerFunction:
    p = float(rng.uniform(*p_range))
    a0 = float(rng.uniform(0.1, 3.0)) if rng.random() < 0.7 else 0.0
    k = int(rng.integers(0, 3))
    if a0 == 0.0 and k == 0:
        k = 1
    coeffs = rng.uniform(0.05, 2.0, size=k)
    exps = rng.uniform(0.05, 0.95, size=k) * p
    return make_log_power_f(a0, coeffs, exps, p)


def random_space(rng: np.random.Generator, max_atoms: int = 8) -> WeightedMeasureSpace:
    n = int(rng.integers(1, max_atoms + 1))
    mu = rng.uniform(0.05, 1.0, size=n)
    gamma = rng.uniform(0.0, 2.0, size=n)
    gamma[rng.random(n) < 0.1] = 0.0
    if not np.any(gamma * mu > 0):
        gamma[0] = 1.0
    return WeightedMeasureSpace.from_weights(mu, gamma)


def random_u(rng: np.random.Generator, n: int) -> np.ndarray:
    scale = 10.0 ** rng.uniform(-1.0, 1.0)
    mode = rng.random()
    if mode < 0.1:
        return np.full(n, scale * rng.normal())
    if mode < 0.3:
        return scale * np.abs(rng.normal(size=n))
    return scale * rng.normal(size=n)


def _case(f, space, u):
    return {"f": f.to_json(), "space": space.to_json(), "u": [float(x) for x in u]}


@dataclass
class SweepResult:
    samples: int = 0
    functions: int = 0
    violations: list = field(default_factory=list)
    equality_violations: list = field(default_factory=list)
    hypothesis_failures: list = field(default_factory=list)
    equality_hits: int = 0
    absolute_flags: int = 0
    min_margin: float = math.inf

    @property
    def passed(self) -> bool:
        return not (self.violations or self.equality_violations or self.hypothesis_failures)

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "functions": self.functions,
            "violations": self.violations,
            "equality_violations": self.equality_violations,
            "hypothesis_failures": self.hypothesis_failures,
            "equality_hits": self.equality_hits,
            "absolute_flags": self.absolute_flags,
            "min_margin": self.min_margin,
            "passed": self.passed,
        }


def jensen_sweep(samples: int = 10_000, seed: int = 0, p_range=(0.3, 4.0), per_function: int = 50, max_atoms: int = 8) -> SweepResult:
    """Random (f, space, u) triples; failing cases are kept as replayable dicts.

    The equality detector applies to functions with a logarithmic term: a
    margin below 1e-9 must come with u constant (spread < 1e-6) on the atoms
    of positive weight.  The threshold is taken relative to max(|lhs|, |rhs|):
    for tiny u the two sides agree to O(|u|^(2p)) even when u is far from
    constant, so an absolute cut flags genuinely strict cases.  Hits of the
    absolute cut are still counted in ``absolute_flags``.
    """
    rng = np.random.default_rng(seed)
    out = SweepResult()
    while out.samples < samples:
        f = random_log_power_f(rng, p_range)
        out.functions += 1
        probe = JensenInstance(f, f.p, 0.0, WeightedMeasureSpace.from_weights([1.0]), np.zeros(1))
        checks = validate_jensen_hypotheses(probe)
        if not all_passed(checks):
            out.hypothesis_failures.append({"f": f.to_json(), "checks": [c._asdict() for c in checks if not c.passed]})
            continue
        for _ in range(min(per_function, samples - out.samples)):
            space = random_space(rng, max_atoms)
            u = random_u(rng, space.size)
            res = jensen_check(JensenInstance(f, f.p, 0.0, space, u))
            out.samples += 1
            out.min_margin = min(out.min_margin, res.margin)
            if not res.holds:
                out.violations.append({**_case(f, space, u), "lhs": res.lhs, "rhs": res.rhs})
                continue
            if f.a0 <= 0:
                continue
            active = u[space.weights > 0]
            constant = np.ptp(active) < 1e-6 and np.min(active) >= 0
            if res.margin < 1e-9 and not constant:
                out.absolute_flags += 1
            if res.margin < 1e-9 * max(abs(res.lhs), abs(res.rhs)):
                out.equality_hits += 1
                if not constant:
                    out.equality_violations.append({**_case(f, space, u), "margin": res.margin})
    return out


@dataclass
class NaiveSweepResult:
    samples: int
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"samples": self.samples, "failures": self.failures, "passed": self.passed}


def naive_comparison_sweep(samples: int = 1000, seed: int = 0, max_atoms: int = 8) -> NaiveSweepResult:
    rng = np.random.default_rng(seed)
    failures = []
    tested = 0
    while tested < samples:
        n = int(rng.integers(1, max_atoms + 1))
        mu = rng.dirichlet(np.ones(n))
        mu[-1] = 1.0 - math.fsum(mu[:-1])
        space = WeightedMeasureSpace.from_weights(np.abs(mu))
        if abs(space.total_gamma - 1.0) > 1e-12:
            continue
        u = 10.0 ** rng.uniform(-1, 1) * np.abs(rng.normal(size=n))
        p = float(rng.uniform(0.01, 0.99))
        res = naive_jensen_comparison(space, u, p)
        tested += 1
        if not res.stronger:
            failures.append({"space": space.to_json(), "u": u.tolist(), "p": p, **res._asdict()})
    return NaiveSweepResult(tested, failures)
