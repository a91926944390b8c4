import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import lambda_grid, random_instance
from sublevel.errors import CoercivityError, LevelJumpError, OutOfRangeError
from sublevel.functionals import (
    FunctionalPair,
    make_canonical_instance,
    make_double_well_instance,
    make_linear_eta_instance,
    make_linear_quadratic_instance,
)
from sublevel.scalarize import (
    SearchConfig,
    find_lambda_r,
    level_set_infimum,
    level_set_infimum_direct,
    minimize_penalized,
    psi_along_lambda,
)


def test_canonical_penalized_minimum():
    m = minimize_penalized(make_canonical_instance(), 0.25)
    assert m.y_hat[0] == pytest.approx(2.0, rel=1e-7)
    assert m.phi_value == pytest.approx(-2.0, rel=1e-7)
    assert m.psi_value == pytest.approx(4.0, rel=1e-7)
    assert not m.certificate.suspected_nonunique


def test_values_are_reevaluated():
    pair = make_canonical_instance()
    m = minimize_penalized(pair, 0.4)
    assert m.phi_value == pair.phi_value(m.point)
    assert m.psi_value == pair.psi_value(m.point)


def test_double_well_unique_branch():
    m = minimize_penalized(make_double_well_instance(), 1.0)
    assert abs(m.y_hat[0]) < 1e-6
    assert abs(m.objective) < 1e-10


def test_double_well_tie_is_flagged():
    m = minimize_penalized(make_double_well_instance(), 0.125)
    assert m.certificate.suspected_nonunique
    pts = sorted([m.y_hat[0], m.certificate.rival[0]])
    assert pts[0] == pytest.approx(0.0, abs=1e-5)
    assert pts[1] == pytest.approx(4.0, abs=1e-5)


def test_lambda_outside_interval_rejected():
    with pytest.raises(ValueError):
        minimize_penalized(make_linear_quadratic_instance([1.0], 1.0), 0.5)


def test_fixed_box_detects_missing_coercivity():
    pair = FunctionalPair(dim=1, phi=lambda y: -y[..., 0] ** 3, psi=lambda y: y[..., 0] ** 2, p=2.0)
    with pytest.raises(CoercivityError):
        minimize_penalized(pair, 1.0, SearchConfig(box_radius=5.0))


def test_psi_along_lambda_canonical():
    out = psi_along_lambda(make_canonical_instance(), [0.1, 0.25, 0.5])
    assert [lam for lam, _ in out] == [0.1, 0.25, 0.5]
    assert [v for _, v in out] == pytest.approx([25.0, 4.0, 1.0], rel=1e-6)


def test_psi_along_lambda_double_well_jump():
    out = psi_along_lambda(make_double_well_instance(), [0.05, 0.2])
    assert out[0][1] == pytest.approx(100.0, rel=1e-6)
    assert out[1][1] == pytest.approx(0.0, abs=1e-10)


def test_determinism():
    pair = make_linear_eta_instance([1.0, -2.0], eta="expm1", q=1.5)
    a = find_lambda_r(pair, 0.7)
    b = find_lambda_r(pair, 0.7)
    assert a == b


@pytest.mark.parametrize("r,lam", [(4.0, 0.25), (1.0, 0.5), (9.0, 1 / 6)])
def test_canonical_multiplier(r, lam):
    res = find_lambda_r(make_canonical_instance(), r)
    assert res.lambda_r == pytest.approx(lam, rel=1e-6)
    assert res.minimum.y_hat[0] == pytest.approx(math.sqrt(r), rel=1e-6)
    assert res.residual <= 1e-7 * max(1.0, r)


def test_double_well_level_jump():
    with pytest.raises(LevelJumpError) as exc:
        find_lambda_r(make_double_well_instance(), 1.0)
    err = exc.value
    assert 0.12 <= err.lo <= err.hi <= 0.13
    assert err.psi_lo > 1.0 > err.psi_hi


def test_out_of_range_is_refused():
    # beta = |g|^2 / (2 L^2) = 1/2
    with pytest.raises(OutOfRangeError):
        find_lambda_r(make_linear_quadratic_instance([1.0, 0.0], 1.0), 0.5)
    with pytest.raises(OutOfRangeError):
        find_lambda_r(make_canonical_instance(), 0.0)


def test_level_set_infimum_values():
    assert level_set_infimum(make_canonical_instance(), 4.0) == pytest.approx(-2.0, rel=1e-7)
    assert level_set_infimum(make_linear_eta_instance([-2.0], "expm1", 2.0), math.e - 1) == pytest.approx(-2.0, rel=1e-6)
    # |y| = 1 on the sphere psi = 1/2 ; L = 1/2 keeps r inside ]0, 2[
    assert level_set_infimum(make_linear_quadratic_instance([1.0, 0.0], 0.5), 0.5) == pytest.approx(-1.0, rel=1e-6)


def test_linear_quadratic_multiplier_closed_form():
    g, r = np.array([1.0, 0.0]), 0.3
    res = find_lambda_r(make_linear_quadratic_instance(g, 1.0), r)
    assert res.lambda_r == pytest.approx(np.linalg.norm(g) / math.sqrt(2 * r), rel=1e-6)
    assert res.minimum.phi_value == pytest.approx(-math.sqrt(2 * r), rel=1e-6)


def test_direct_oracle_values():
    assert level_set_infimum_direct(make_canonical_instance(), 4.0) == pytest.approx(-2.0, abs=1e-9)
    assert level_set_infimum_direct(make_linear_eta_instance([-2.0], "expm1", 2.0), math.e - 1) == pytest.approx(-2.0, abs=1e-9)
    pair = FunctionalPair(dim=2, phi=lambda y: np.sin(y[..., 0]) + y[..., 1], psi=lambda y: np.sum(y**2, axis=-1), p=2.0)
    assert level_set_infimum_direct(pair, 0.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("pair,r", [
    (make_canonical_instance(), 2.0),
    (make_linear_eta_instance([1.0, 1.0], "expm1", 2.0), 1.5),
    (make_linear_eta_instance([0.5, -1.0], "quadratic", 1.5), 0.8),
    (make_linear_quadratic_instance([1.0, 2.0], 1.0), 1.0),
])
def test_oracle_agreement(pair, r):
    a = level_set_infimum(pair, r)
    b = level_set_infimum_direct(pair, r)
    assert abs(a - b) <= max(1e-4, 1e-3 * abs(a))


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_multiplier_monotonicity(seed):
    rng = np.random.default_rng(seed)
    pair = random_instance(rng)
    mins = [minimize_penalized(pair, lam) for lam in lambda_grid(pair, 6)]
    slack = 2 * max(m.psi_tol for m in mins)
    for m1, m2 in zip(mins, mins[1:]):
        assert m2.psi_value <= m1.psi_value + slack


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(min_value=0.2, max_value=5.0))
def test_scalarization_lower_bound(seed, r):
    rng = np.random.default_rng(seed)
    pair = make_linear_eta_instance(rng.normal(size=2), eta="expm1", q=float(rng.uniform(1.2, 3.0)))
    res = find_lambda_r(pair, r)
    lam = res.lambda_r
    lhs = res.minimum.phi_value + lam * r
    ax = np.linspace(-4, 4, 81)
    grid = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    rhs = pair.phi(grid) + lam * pair.psi(grid)
    tol = 1e-6 * max(1.0, abs(lhs)) + lam * res.residual
    assert np.all(lhs <= rhs + tol)
