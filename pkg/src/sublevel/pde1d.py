"""Quasilinear Dirichlet problem -(|u'|^(p-2) u')' = nu f(u) on (0, L).

The positive solution is found by shooting on the first-order system
(u, w = |u'|^(p-2) u') and then polished by Newton's method on the discrete
weak form over hat functions, so that the reported residual refers to the
same discretization in which the energy is measured.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from .errors import ConsistencyError, ConstructionError, EvaluationError, NoPositiveSolution
from .extended import POS_INF, ExtendedReal
from .functionals import SourceTerm, make_source, make_quasilinear_pair
from .measure import Tolerances, WeightedMeasureSpace, verify_identity
from .scalarize import SearchConfig


def pi_p(p: float) -> float:
    """Half-period of the p-sine: 2 pi / (p sin(pi/p))."""
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def eigenvalue_closed_form(p: float, L: float) -> float:
    if not p > 1 or not L > 0:
        raise ConstructionError("need p > 1 and L > 0")
    return (p - 1.0) * (pi_p(p) / L) ** p


def _rayleigh(v, h, p):
    """Discrete quotient sum h|Dv|^p / sum h|v|^p and its gradient (interior nodes)."""
    full = np.concatenate([[0.0], v, [0.0]])
    D = np.diff(full) / h
    num = h * np.sum(np.abs(D) ** p)
    den = h * np.sum(np.abs(v) ** p)
    aD = np.abs(D) ** (p - 1) * np.sign(D)
    gnum = p * (aD[:-1] - aD[1:])
    gden = p * h * np.abs(v) ** (p - 1) * np.sign(v)
    q = num / den
    return q, (gnum - q * gden) / den


def rayleigh_oracle(p: float, L: float, cells: int = 2048) -> float:
    """Minimize the discrete Rayleigh quotient over piecewise-linear functions."""
    h = L / cells
    x = np.linspace(0.0, L, cells + 1)[1:-1]
    v0 = np.sin(math.pi * x / L)
    res = optimize.minimize(
        _rayleigh, v0, args=(h, p), jac=True, method="L-BFGS-B",
        options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12, "maxcor": 30},
    )
    return float(res.fun)


def principal_eigenvalue(p: float, L: float, cells: Optional[int] = None) -> float:
    """lambda_{1,p} of (0, L); with ``cells`` the closed form is cross-checked
    against the mesh oracle and a ConsistencyError is raised above 1e-3."""
    lam = eigenvalue_closed_form(p, L)
    if cells:
        oracle = rayleigh_oracle(p, L, cells)
        if abs(oracle - lam) > 1e-3 * lam:
            raise ConsistencyError(f"closed form {lam!r} vs mesh oracle {oracle!r} at {cells} cells")
    return lam


@dataclass(frozen=True)
class IntervalProblem:
    L: float = 1.0
    p: float = 3.0
    nu: float = 1.0
    source: SourceTerm = field(default_factory=lambda: make_source("power", s=1.0))
    cells: int = 1024

    def __post_init__(self):
        if not self.L > 0:
            raise ConstructionError("L must be positive")
        if not self.p > 1:
            raise ConstructionError("p must exceed 1")
        if not 0 < self.nu <= 1:
            raise ConstructionError("nu must lie in ]0, 1]")
        if self.cells < 4 or self.cells % 2:
            raise ConstructionError("cells must be an even integer >= 4")
        grid = np.linspace(0.0, 10.0, 201)
        if np.any(np.asarray(self.source.f(grid)) < 0):
            raise ConstructionError("source must be non-negative")
        # F must be an antiderivative of f
        y = np.array([0.5, 1.0, 2.0])
        dF = (self.source.F(y + 1e-5) - self.source.F(y - 1e-5)) / 2e-5
        if not np.allclose(dF, self.source.f(y), rtol=1e-5, atol=1e-8):
            raise ConstructionError("F is not consistent with f")

    @property
    def h(self) -> float:
        return self.L / self.cells

    @property
    def eigenvalue(self) -> float:
        return eigenvalue_closed_form(self.p, self.L)


def check_energy_condition(prob: IntervalProblem, rho: float):
    """Threshold lambda_1 rho^p / (p F(rho)) and whether nu is strictly below it.

    Strictness carries a relative guard of 1e-12 so a threshold that equals
    nu up to rounding does not pass.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    Fr = float(prob.source.F(np.asarray(rho)))
    if Fr <= 0.0:
        return POS_INF, True
    thr = prob.eigenvalue * rho**prob.p / (prob.p * Fr)
    return ExtendedReal.of(thr), bool(prob.nu < thr * (1.0 - 1e-12))


@dataclass(frozen=True)
class DiscreteSolution:
    x: np.ndarray
    u: np.ndarray
    p: float
    nu: float
    slope: float
    residual: float
    newton_iterations: int

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def derivative(self) -> np.ndarray:
        return np.diff(self.u) / self.h

    @property
    def energy(self) -> float:
        return math.fsum(self.h * np.abs(self.derivative) ** self.p)

    @property
    def lp_norm_p(self) -> float:
        return math.fsum(self.h * np.abs(self.u) ** self.p)

    def to_csv(self, path) -> None:
        mids = np.concatenate([self.derivative, [np.nan]])
        with open(path, "w", newline="") as fh:
            fh.write("# x u du_forward\n")
            w = csv.writer(fh, delimiter=" ")
            for xi, ui, di in zip(self.x, self.u, mids):
                w.writerow([repr(float(xi)), repr(float(ui)), "nan" if np.isnan(di) else repr(float(di))])


def _flux_inv(w, p):
    return np.abs(w) ** (1.0 / (p - 1.0)) * np.sign(w)


def _shoot(prob: IntervalProblem, s: float, steps: int, length: float):
    """Explicit midpoint from x=0 with u'(0)=s; returns node values of u, w."""
    p, nu, f = prob.p, prob.nu, prob.source.f
    h = length / steps
    u = np.empty(steps + 1)
    w = np.empty(steps + 1)
    u[0], w[0] = 0.0, s ** (p - 1.0)
    for k in range(steps):
        uk, wk = u[k], w[k]
        um = uk + 0.5 * h * _flux_inv(wk, p)
        wm = wk - 0.5 * h * nu * float(f(um))
        u[k + 1] = uk + h * _flux_inv(wm, p)
        w[k + 1] = wk - h * nu * float(f(um))
    return u, w


def _residual(u_int, prob: IntervalProblem):
    h, p, nu = prob.h, prob.p, prob.nu
    full = np.concatenate([[0.0], u_int, [0.0]])
    D = np.diff(full) / h
    a = np.abs(D) ** (p - 1.0) * np.sign(D)
    return a[:-1] - a[1:] - h * nu * np.asarray(prob.source.f(u_int), dtype=float), D


def _newton(u_int, prob: IntervalProblem, tol: float, max_iter: int = 50):
    h, p, nu = prob.h, prob.p, prob.nu
    f = prob.source.f
    R, D = _residual(u_int, prob)
    norm = np.max(np.abs(R)) / h
    it = 0
    while norm > tol and it < max_iter:
        it += 1
        ad = (p - 1.0) * np.maximum(np.abs(D), 1e-300) ** (p - 2.0) / h
        eps = 1e-6 * np.maximum(1.0, np.abs(u_int))
        fp = (np.asarray(f(u_int + eps)) - np.asarray(f(u_int - eps))) / (2 * eps)
        ab = np.zeros((3, u_int.size))
        ab[0, 1:] = -ad[1:-1]
        ab[1] = ad[:-1] + ad[1:] - h * nu * fp
        ab[2, :-1] = -ad[1:-1]
        step = linalg.solve_banded((1, 1), ab, -R)
        t = 1.0
        while True:
            trial = u_int + t * step
            Rt, Dt = _residual(trial, prob)
            nt = np.max(np.abs(Rt)) / h
            if nt < norm or t < 1e-4:
                break
            t *= 0.5
        u_int, R, D, norm = trial, Rt, Dt, nt
    return u_int, norm, it


def solve_positive(prob: IntervalProblem, tol: float = 1e-8, mode: str = "symmetric",
                   s_bracket=(1e-6, 1e6)) -> DiscreteSolution:
    """Shooting on the slope s = u'(0), then Newton polish of the weak form.

    ``symmetric`` bisects on the sign of w(L/2; s) (the peak of a positive
    solution of an autonomous problem is at the midpoint); ``terminal``
    bisects on the sign of u(L; s).
    """
    half = prob.cells // 2
    if mode == "symmetric":
        def g(s):
            return _shoot(prob, s, half, prob.L / 2)[1][-1]
    elif mode == "terminal":
        def g(s):
            return _shoot(prob, s, prob.cells, prob.L)[0][-1]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    ss = np.geomspace(s_bracket[0], s_bracket[1], 61)
    vals = [g(s) for s in ss]
    lo = hi = None
    for k in range(len(ss) - 1):
        if np.sign(vals[k]) != np.sign(vals[k + 1]) and vals[k] != 0:
            lo, hi, glo = ss[k], ss[k + 1], vals[k]
            break
    if lo is None:
        raise NoPositiveSolution(f"no positive solution found in slope bracket [{s_bracket[0]:g}, {s_bracket[1]:g}]")
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            lo = hi = mid
            break
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    s = 0.5 * (lo + hi)

    if mode == "symmetric":
        uh, _ = _shoot(prob, s, half, prob.L / 2)
        u = np.concatenate([uh, uh[-2::-1]])
    else:
        u, _ = _shoot(prob, s, prob.cells, prob.L)
        u[-1] = 0.0
    u_int, res, iters = _newton(u[1:-1].copy(), prob, tol)
    u = np.concatenate([[0.0], u_int, [0.0]])
    if not np.all(u_int > 0):
        raise NoPositiveSolution("polished solution is not positive in the interior")
    if not res <= tol:
        raise EvaluationError(f"weak-form residual {res:.3e} above tolerance {tol:.1e}")
    u.setflags(write=False)
    x = np.linspace(0.0, prob.L, prob.cells + 1)
    x.setflags(write=False)
    return DiscreteSolution(x, u, prob.p, prob.nu, float(s), float(res), iters)


def cubic_energy_bound(L: float, nu: float) -> float:
    return 27.0 * L / (8.0 * eigenvalue_closed_form(3.0, L) ** 2) * nu**3


def verify_cubic_energy_bound(L: float = 1.0, nu: float = 1.0, cells: int = 1024, tol: float = 1e-8) -> dict:
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in ]0, 1]")
    prob = IntervalProblem(L=L, p=3.0, nu=nu, source=make_source("power", s=1.0), cells=cells)
    sol = solve_positive(prob, tol=tol)
    bound = cubic_energy_bound(L, nu)
    energy = sol.energy
    return {
        "kind": "pde-corollary2",
        "L": L,
        "nu": nu,
        "cells": cells,
        "lambda_1_3": prob.eigenvalue,
        "bound": bound,
        "energy": energy,
        "ratio": energy / bound,
        "energy_per_nu3": energy / nu**3,
        "residual": sol.residual,
        "slope": sol.slope,
        "peak": float(sol.u.max()),
        "verdict": "pass" if (energy <= bound and sol.residual <= tol) else "fail",
    }


def verify_sup_identity(L: float = 1.0, p: float = 3.0, source=None, rho: float = 1.0, atoms: int = 16,
                      nu: float = 1.0, tols: Optional[Tolerances] = None,
                      search: Optional[SearchConfig] = None) -> dict:
    """sup over {int |u|^p <= rho^p L} of int F(u) against F(rho) L on a
    midpoint discretization of (0, L)."""
    src = source if isinstance(source, SourceTerm) else make_source(**(source or {"family": "power", "s": 1.0}))
    pair = make_quasilinear_pair(p=p, nu=nu, source=src)
    space = WeightedMeasureSpace.uniform(atoms, L)
    rep = verify_identity(space, pair, rho**p, tols=tols, search=search)
    expected = float(src.F(np.asarray(rho))) * L
    sup_oracle = -rep.lhs / nu
    sup_scalar = -rep.rhs / nu
    tol = max(1e-12, 1e-4 * abs(expected))
    ok = abs(sup_oracle - expected) <= tol and abs(sup_scalar - expected) <= tol
    return {
        "kind": "pde-identity14",
        "L": L,
        "p": p,
        "nu": nu,
        "rho": rho,
        "atoms": atoms,
        "source": {"family": src.name, **dict(src.params)},
        "sup_oracle": sup_oracle,
        "sup_scalarized": sup_scalar,
        "expected": expected,
        "identity_report": rep.to_json(),
        "verdict": "pass" if ok and rep.verdict == "pass" else "fail",
    }
