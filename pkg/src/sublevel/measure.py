"""Discrete weighted measure spaces and the integral identity check.

A space is a finite list of atoms ``(label, mu, gamma)``; a step function
assigns one point of R^d to each atom. Integrals are sums of
``gamma_i * mu_i * g(u_i)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import EvaluationError, InfeasibleError, LevelJumpError, OutOfRangeError, SublevelError
from .functionals import FunctionalPair, normalized
from .scalarize import SearchConfig, find_lambda_r, level_set_infimum_direct

REPORT_SCHEMA_VERSION = "1.0"


@dataclass(frozen=True)
class WeightedMeasureSpace:
    labels: tuple
    mu: tuple
    gamma: tuple

    def __post_init__(self):
        if not (len(self.labels) == len(self.mu) == len(self.gamma)):
            raise ValueError("labels, mu and gamma must have equal length")
        if not self.labels:
            raise ValueError("a space needs at least one atom")
        for name, arr in (("mu", self.mu), ("gamma", self.gamma)):
            if any(not math.isfinite(x) or x < 0 for x in arr):
                raise ValueError(f"{name} weights must be finite and non-negative")
        if not self.total_gamma > 0:
            raise ValueError("gamma must not vanish on the whole space (total gamma mass is 0)")

    @classmethod
    def from_atoms(cls, atoms) -> "WeightedMeasureSpace":
        """``atoms``: iterable of ``(label, mu, gamma)`` or dicts with those keys."""
        rows = [(a["label"], a["mu"], a.get("gamma", 1.0)) if isinstance(a, dict) else tuple(a) for a in atoms]
        return cls(
            tuple(str(r[0]) for r in rows),
            tuple(float(r[1]) for r in rows),
            tuple(float(r[2]) for r in rows),
        )

    @classmethod
    def from_weights(cls, weights, gamma=None) -> "WeightedMeasureSpace":
        """Atoms with mu = weights and gamma = 1 unless given."""
        weights = [float(w) for w in weights]
        gamma = [1.0] * len(weights) if gamma is None else [float(g) for g in gamma]
        return cls(tuple(f"t{i}" for i in range(len(weights))), tuple(weights), tuple(gamma))

    @classmethod
    def uniform(cls, n: int, length: float = 1.0, gamma: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        """Midpoint cells of (0, length); gamma sampled at the midpoints."""
        h = length / n
        mids = (np.arange(n) + 0.5) * h
        g = np.ones(n) if gamma is None else np.asarray(gamma(mids), dtype=float)
        return cls(tuple(f"x{m:.6g}" for m in mids), tuple([h] * n), tuple(float(v) for v in g))

    @classmethod
    def sequence(cls, a) -> "WeightedMeasureSpace":
        """Counting measure on {1..N} with gamma_n = a_n (truncated sequence setting)."""
        a = [float(v) for v in a]
        return cls(tuple(f"n{i + 1}" for i in range(len(a))), tuple([1.0] * len(a)), tuple(a))

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.gamma) * np.asarray(self.mu)

    @property
    def total_gamma(self) -> float:
        return math.fsum(g * m for g, m in zip(self.gamma, self.mu))

    def scaled(self, c: float) -> "WeightedMeasureSpace":
        if not c > 0:
            raise ValueError("scale must be positive")
        return WeightedMeasureSpace(self.labels, self.mu, tuple(c * g for g in self.gamma))

    def to_json(self) -> dict:
        return {"atoms": [{"label": l, "mu": m, "gamma": g} for l, m, g in zip(self.labels, self.mu, self.gamma)]}


@dataclass(frozen=True)
class StepFunction:
    values: np.ndarray  # shape (atoms, d)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError("step function values must have shape (atoms, d)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, space: WeightedMeasureSpace, y) -> "StepFunction":
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return cls(np.tile(y, (space.size, 1)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _check_dims(space, u, dim=None):
    if u.values.shape[0] != space.size:
        raise ValueError(f"step function has {u.values.shape[0]} atoms, space has {space.size}")
    if dim is not None and u.dim != dim:
        raise ValueError(f"step function dimension {u.dim} does not match the pair ({dim})")


def _atom_values(space, u, g):
    vals = np.asarray(g(u.values), dtype=float).reshape(space.size)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise EvaluationError(f"non-finite integrand at atom {space.labels[i]!r}", point=u.values[i], label=space.labels[i])
    return vals


def integrate(space: WeightedMeasureSpace, u: StepFunction, g) -> float:
    """sum_i gamma_i mu_i g(u_i)."""
    _check_dims(space, u)
    return math.fsum(space.weights * _atom_values(space, u, g))


def is_feasible(space: WeightedMeasureSpace, pair: FunctionalPair, u: StepFunction, r: float) -> bool:
    """Exact test of sum gamma mu psi(u) <= r sum gamma mu.

    Evaluated as sum gamma mu (psi(u) - r) <= 0 so that a constant function
    sitting exactly on psi = r is feasible without rounding artefacts.
    """
    _check_dims(space, u, pair.dim)
    return math.fsum(space.weights * (_atom_values(space, u, pair.psi) - r)) <= 0.0


def witness(space, pair, r, lambda_result, atom_subset=None) -> StepFunction:
    """y_lambda_r on ``atom_subset`` (all atoms by default) and 0 elsewhere.

    The constraint level used is psi(y_lambda_r) as computed whenever that
    exceeds r by the bisection residual.
    """
    n = space.size
    subset = range(n) if atom_subset is None else atom_subset
    mask = np.zeros(n, dtype=bool)
    for i in subset:
        mask[space.labels.index(i) if isinstance(i, str) else int(i)] = True
    y = np.asarray(lambda_result.minimum.y_hat, dtype=float)
    vals = np.zeros((n, pair.dim))
    vals[mask] = y
    u = StepFunction(vals)
    level = max(r, lambda_result.minimum.psi_value)
    if not is_feasible(space, pair, u, level):
        raise InfeasibleError(f"witness on {int(mask.sum())} atoms is not feasible at level {level}")
    return u


# --------------------------------------------------------------------------
# independent left-hand side: penalty method on the product space


@dataclass(frozen=True)
class OracleConfig:
    starts: int = 8
    max_dim: int = 64
    penalty_start: float = 10.0
    penalty_growth: float = 10.0
    penalty_stages: int = 10
    seed: int = 0
    fd_step: float = 1e-7

    @classmethod
    def from_dict(cls, d) -> "OracleConfig":
        return cls(**dict(d or {}))


def _feasible_anchor(pair, r):
    zero = np.zeros(pair.dim)
    if pair.psi_value(zero) <= r:
        return zero
    res = optimize.minimize(lambda y: float(pair.psi(y)), zero, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    if res.fun > r:
        raise InfeasibleError(f"no point with psi <= {r} found (min psi ~ {res.fun:.6g})")
    return np.asarray(res.x)


def _oracle_radius(pair, level):
    # beyond this radius a single atom already exceeds the whole budget
    R = 1.0
    rng = np.random.default_rng(12345)
    dirs = rng.normal(size=(64, pair.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if pair.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    while R < 1e8:
        if np.min(pair.psi(R * dirs)) > level:
            break
        R *= 2.0
    # small budgets: shrink so the starts live on the scale of the constraint
    while R > 1e-8 and np.min(pair.psi(0.5 * R * dirs)) > level:
        R *= 0.5
    return R


def sublevel_minimizer(space, pair, r, config: Optional[OracleConfig] = None):
    """Best feasible (value, StepFunction) for inf sum w phi(u) s.t. sum w psi(u) <= r sum w.

    Deliberately does not use the scalarization: quadratic exterior penalty
    with increasing weight, multistart local descent, then a radial pull
    toward a feasible anchor to land exactly inside the constraint.
    """
    config = config or OracleConfig()
    n, d = space.size, pair.dim
    if n * d > config.max_dim:
        raise ValueError(f"decision dimension {n * d} exceeds cap {config.max_dim}")
    w = space.weights
    W = space.total_gamma
    budget = r * W
    phi, psi = pair.phi, pair.psi
    h = config.fd_step

    def grads(U):
        # per-atom central differences, one vectorized call per coordinate
        gphi = np.empty((n, d))
        gpsi = np.empty((n, d))
        for j in range(d):
            step = h * np.maximum(1.0, np.abs(U[:, j]))
            E = np.zeros_like(U)
            E[:, j] = step
            gphi[:, j] = (phi(U + E) - phi(U - E)) / (2 * step)
            gpsi[:, j] = (psi(U + E) - psi(U - E)) / (2 * step)
        return gphi * w[:, None], gpsi * w[:, None]

    anchor = np.tile(_feasible_anchor(pair, r), (n, 1))
    floor = min(0.0, float(pair.psi_inf.value)) if pair.psi_inf is not None and pair.psi_inf.is_finite else 0.0
    active = w > 0
    m = int(active.sum())
    # radius of the constant budget, and per-atom radius where one atom exhausts it
    R0 = _oracle_radius(pair, r - floor)
    radii = {wi: _oracle_radius(pair, (budget - floor * W) / wi) for wi in set(w[active].tolist())}
    R_atom = np.array([radii[wi] for wi in w[active]])
    # optimize z = sqrt(w) u on active atoms: the Hessian of sum w phi(u) no longer carries the weights
    sw = np.repeat(np.sqrt(w[active]), d)
    box = [(-4 * Ri * si, 4 * Ri * si) for Ri, si in zip(np.repeat(R_atom, d), sw)]
    rng_pts = qmc.Sobol(m * d, scramble=True, seed=config.seed).random_base2(max(1, math.ceil(math.log2(max(2, config.starts)))))
    rng_pts = (2 * rng_pts - 1) * R0
    dir_rng = np.random.default_rng(config.seed)
    starts = []
    for k in range(config.starts):
        if k % 2 == 0:
            starts.append(rng_pts[k // 2 % len(rng_pts)])
        else:
            # aligned start: every atom on a common ray with its own scale
            v = dir_rng.normal(size=d)
            v /= np.linalg.norm(v)
            scales = dir_rng.uniform(0.05, 1.0, size=m) * R0
            starts.append((scales[:, None] * v[None, :]).ravel())

    def full(z):
        U = anchor.copy()
        U[active] = (z / sw).reshape(m, d)
        return U

    # budgets below one are measured relative to themselves, else the penalty is too weak
    cscale = min(1.0, max(budget - floor * W, 1e-300))

    def penalized(mu):
        def fun(z):
            U = full(z)
            fv, cv = float(w @ phi(U)), float(w @ psi(U))
            excess = max(0.0, cv - budget) / cscale
            gphi, gpsi = grads(U)
            g = (gphi + 2 * mu * excess * gpsi / cscale)[active].ravel()
            return fv + mu * excess**2, g / sw

        return fun

    def project(x):
        U = x.reshape(n, d)
        if is_feasible(space, pair, StepFunction(U), r):
            return U
        lo, hi = 0.0, 1.0
        for _ in range(80):
            t = 0.5 * (lo + hi)
            if is_feasible(space, pair, StepFunction(anchor + t * (U - anchor)), r):
                lo = t
            else:
                hi = t
        return anchor + lo * (U - anchor)

    best_val, best_u = float(w @ phi(anchor)), anchor
    for x0 in starts:
        x = np.clip(np.asarray(x0, dtype=float) * sw, [b[0] for b in box], [b[1] for b in box])
        mu = config.penalty_start
        for _ in range(config.penalty_stages):
            with np.errstate(over="ignore", invalid="ignore"):
                res = optimize.minimize(
                    penalized(mu), x, jac=True, method="L-BFGS-B", bounds=box,
                    options={"ftol": 1e-15, "gtol": 1e-11, "maxiter": 2000},
                )
            x = res.x
            mu *= config.penalty_growth
        U = project(full(x).ravel())
        val = float(w @ phi(U))
        if val < best_val:
            best_val, best_u = val, U
    return best_val, StepFunction(best_u)


def sublevel_infimum_oracle(space, pair, r, config: Optional[OracleConfig] = None) -> float:
    """Left-hand side of the identity, computed without the multiplier."""
    return sublevel_minimizer(space, pair, r, config)[0]


# --------------------------------------------------------------------------
# the identity


@dataclass(frozen=True)
class Tolerances:
    abs: float = 1e-6
    rel: float = 1e-4
    margin: float = 0.5  # gap <= -margin confirms a counterexample

    @classmethod
    def from_dict(cls, d) -> "Tolerances":
        return cls(**dict(d or {}))


@dataclass(frozen=True)
class VerificationReport:
    r: float
    lambda_r: Optional[float]
    lhs: float
    rhs: float
    gap: float
    tolerances: Tolerances
    verdict: str
    lower_bound_ok: bool
    hypothesis_violation: Optional[dict]
    provenance: dict
    shifts: dict
    rhs_direct: Optional[float] = None
    residual: Optional[float] = None
    elapsed_s: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self, include_timing: bool = False) -> dict:
        out = {
            "r": self.r,
            "lambda_r": self.lambda_r,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "rhs_direct": self.rhs_direct,
            "residual": self.residual,
            "tolerances": {"abs": self.tolerances.abs, "rel": self.tolerances.rel, "margin": self.tolerances.margin},
            "verdict": self.verdict,
            "lower_bound_ok": self.lower_bound_ok,
            "hypothesis_violation": self.hypothesis_violation,
            "provenance": self.provenance,
            "shifts": self.shifts,
        }
        if include_timing:
            out["elapsed_s"] = self.elapsed_s
        return out


def verify_identity(
    space: WeightedMeasureSpace,
    pair: FunctionalPair,
    r: float,
    tols: Optional[Tolerances] = None,
    search: Optional[SearchConfig] = None,
    oracle: Optional[OracleConfig] = None,
    exploratory: bool = False,
) -> VerificationReport:
    """Compare the sub-level infimum with (level-set infimum) x (gamma mass).

    Works on the pair shifted to phi(0) = psi(0) = 0; reported lhs/rhs are
    shifted back. A level jump is recorded as a hypothesis violation and the
    right-hand side then comes from the direct level-set oracle.
    """
    t0 = time.perf_counter()
    tols = tols or Tolerances()
    pair0, phi0, psi0 = normalized(pair)
    r0 = r - psi0
    W = space.total_gamma

    violation = None
    lam = residual = None
    rhs_direct = None
    try:
        res = find_lambda_r(pair0, r0, search=search, check_range=not exploratory)
        rhs0 = res.minimum.phi_value * W
        lam, residual = res.lambda_r, res.residual
        rhs_src = "scalarization"
        if res.minimum.certificate.suspected_nonunique:
            violation = {"kind": "non-unique global minimum", "lambda": lam, "rival": res.minimum.certificate.rival}
    except LevelJumpError as err:
        violation = {
            "kind": "non-unique global minimum",
            "lambda_interval": [err.lo, err.hi],
            "lambda": err.location,
            "psi_jump": [err.psi_lo, err.psi_hi],
        }
        rhs0 = None
        rhs_src = "direct"
    except OutOfRangeError as err:
        if not exploratory:
            raise
        violation = {"kind": "r outside attainable range", "detail": str(err)}
        rhs0 = None
        rhs_src = "direct"

    if pair.dim <= 2:
        try:
            rhs_direct = level_set_infimum_direct(pair0, r0) * W
        except SublevelError:
            rhs_direct = None
    if rhs0 is None:
        if rhs_direct is None:
            raise SublevelError("no route to the right-hand side")
        rhs0 = rhs_direct

    lhs0 = sublevel_infimum_oracle(space, pair0, r0, oracle)
    gap = lhs0 - rhs0
    bound = tols.abs + tols.rel * abs(rhs0)
    lower_ok = gap >= -bound
    if violation is not None or pair.violates_uniqueness:
        verdict = "counterexample-confirmed" if gap <= -tols.margin else "counterexample-not-confirmed"
    else:
        verdict = "pass" if abs(gap) <= bound else "fail"

    shift = phi0 * W
    return VerificationReport(
        r=float(r),
        lambda_r=lam,
        lhs=lhs0 + shift,
        rhs=rhs0 + shift,
        gap=gap,
        tolerances=tols,
        verdict=verdict,
        lower_bound_ok=bool(lower_ok),
        hypothesis_violation=violation,
        provenance={"lhs": "penalty multistart oracle", "rhs": rhs_src, "rhs_direct": "ray level-set scan" if rhs_direct is not None else None},
        shifts={"phi0": phi0, "psi0": psi0, "total_gamma": W},
        rhs_direct=None if rhs_direct is None else rhs_direct + shift,
        residual=residual,
        elapsed_s=time.perf_counter() - t0,
    )
