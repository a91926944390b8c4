"""Acceptance gate: every criterion at its stated tolerance.

Each test is one criterion; conftest prints a PASS/FAIL line per test.
"""

import json
import math
import time

import numpy as np
import pytest

from sublevel.functionals import make_canonical_instance, make_double_well_instance, make_linear_eta_instance
from sublevel.inequalities import JensenInstance, jensen_check, jensen_sweep, make_log_power_f, naive_comparison_sweep
from sublevel.measure import WeightedMeasureSpace, verify_identity
from sublevel.pde1d import IntervalProblem, cubic_energy_bound, principal_eigenvalue, rayleigh_oracle, solve_positive
from sublevel.pde1d import verify_sup_identity
from sublevel.scalarize import LevelJumpError, find_lambda_r, minimize_penalized
from sublevel.suite import load_config, run_suite, strip_timestamp

from _instances import lambda_grid, random_instance

DEFAULT_SUITE = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs" / "default_suite.json"


def test_01_canonical_identity():
    space = WeightedMeasureSpace.from_weights([0.5, 0.3, 0.2])
    pair = make_canonical_instance()
    t0 = time.perf_counter()
    for r in (1.0, 4.0, 9.0):
        rep = verify_identity(space, pair, r)
        rhs = -math.sqrt(r)
        assert rep.provenance["lhs"] != rep.provenance["rhs"]
        assert rep.rhs == pytest.approx(rhs, rel=1e-4)
        assert abs(rep.lhs - rep.rhs) <= 1e-4 * abs(rhs)
        assert rep.verdict == "pass"
    assert time.perf_counter() - t0 < 5.0


def test_02_linear_eta_closed_form():
    space = WeightedMeasureSpace.from_weights([0.25, 0.5], gamma=[2.0, 1.0])
    total = space.total_gamma
    rep = verify_identity(space, make_linear_eta_instance([2.0], eta="expm1", q=2.0), math.e - 1.0)
    assert rep.rhs == pytest.approx(-2.0 * total, rel=1e-4)
    assert rep.lhs == pytest.approx(-2.0 * total, rel=1e-4)
    assert rep.verdict == "pass"


def test_03_double_well_counterexample():
    rep = verify_identity(WeightedMeasureSpace.from_weights([1.0]), make_double_well_instance(), 1.0)
    assert rep.rhs == 1.0
    assert rep.lhs <= 0.0 + 1e-9
    assert rep.gap <= -0.99
    assert rep.verdict == "counterexample-confirmed"
    lam = rep.hypothesis_violation["lambda"]
    assert 0.12 <= lam <= 0.13
    with pytest.raises(LevelJumpError) as exc:
        find_lambda_r(make_double_well_instance(), 1.0)
    assert 0.12 <= exc.value.lo <= exc.value.hi <= 0.13


def test_04_multiplier_monotonicity():
    rng = np.random.default_rng(2024)
    violations = []
    for i in range(100):
        pair = random_instance(rng)
        mins = [minimize_penalized(pair, lam) for lam in lambda_grid(pair, 20)]
        slack = 2 * max(m.psi_tol for m in mins)
        for m1, m2 in zip(mins, mins[1:]):
            if m2.psi_value > m1.psi_value + slack:
                violations.append((i, pair.name, m1.lam, m2.lam))
    assert violations == []


def test_05_jensen_sweep():
    t0 = time.perf_counter()
    sweep = jensen_sweep(samples=10_000, seed=0)
    elapsed = time.perf_counter() - t0
    assert sweep.samples >= 10_000
    assert sweep.violations == []
    assert sweep.equality_violations == []
    assert sweep.hypothesis_failures == []
    assert elapsed < 60.0
    # the detector does see equality at constant non-negative u
    f = make_log_power_f(1.0, [0.5], [1.0], 2.0)
    space = WeightedMeasureSpace.from_weights([0.2, 0.3, 0.5])
    check = jensen_check(JensenInstance(f, 2.0, 0.0, space, np.full(3, 1.7)))
    assert abs(check.margin) < 1e-9 * max(abs(check.lhs), abs(check.rhs))


def test_06_naive_jensen_comparison():
    res = naive_comparison_sweep(1000, seed=0)
    assert res.samples == 1000
    assert res.failures == []


def test_07_principal_eigenvalue():
    lam = principal_eigenvalue(2.0, math.pi)
    assert abs(lam - 1.0) <= 1e-6
    assert abs(lam - rayleigh_oracle(2.0, math.pi, 2048)) <= 1e-3


def test_08_cubic_energy_bound():
    per_nu3 = []
    for nu in (0.25, 0.5, 1.0):
        t0 = time.perf_counter()
        sol = solve_positive(IntervalProblem(L=1.0, p=3.0, nu=nu, cells=1024))
        assert time.perf_counter() - t0 < 10.0
        assert sol.residual <= 1e-8
        assert sol.energy <= cubic_energy_bound(1.0, nu)
        per_nu3.append(sol.energy / nu**3)
    assert (max(per_nu3) - min(per_nu3)) / max(per_nu3) <= 1e-4


def test_09_sup_identity():
    for rho in (0.5, 1.0, 2.0):
        rep = verify_sup_identity(L=1.0, p=3.0, source={"family": "power", "s": 1.0}, rho=rho, atoms=16)
        expected = rho**2 / 2
        assert rep["expected"] == pytest.approx(expected, rel=1e-12)
        assert rep["sup_oracle"] == pytest.approx(expected, rel=1e-4)
        assert rep["sup_scalarized"] == pytest.approx(expected, rel=1e-4)


def test_10_determinism(tmp_path):
    cfg = load_config(DEFAULT_SUITE)
    a = run_suite(cfg, tmp_path / "a", jobs=4)
    b = run_suite(cfg, tmp_path / "b", jobs=4)
    assert a.exit_status == 0
    assert [strip_timestamp(r) for r in a.reports] == [strip_timestamp(r) for r in b.reports]
    for pa, pb in zip(a.paths, b.paths):
        assert strip_timestamp(json.loads(pa.read_text())) == strip_timestamp(json.loads(pb.read_text()))
    assert (tmp_path / "a" / "summary.csv").read_text() == (tmp_path / "b" / "summary.csv").read_text()
