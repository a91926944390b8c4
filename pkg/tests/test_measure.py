import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublevel.errors import EvaluationError
from sublevel.functionals import (
    make_canonical_instance,
    make_double_well_instance,
    make_linear_eta_instance,
    make_linear_quadratic_instance,
)
from sublevel.measure import (
    OracleConfig,
    StepFunction,
    Tolerances,
    WeightedMeasureSpace,
    integrate,
    is_feasible,
    sublevel_infimum_oracle,
    verify_identity,
    witness,
)
from sublevel.scalarize import find_lambda_r

THREE = WeightedMeasureSpace.from_weights([0.5, 0.3, 0.2])
UNIT = WeightedMeasureSpace.from_weights([1.0])


def sq(y):
    return y[..., 0] ** 2


# -- spaces and integrals ---------------------------------------------------


def test_space_validation():
    with pytest.raises(ValueError):
        WeightedMeasureSpace.from_weights([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        WeightedMeasureSpace.from_weights([-1.0])
    with pytest.raises(ValueError):
        WeightedMeasureSpace.from_weights([])


def test_space_constructors():
    s = WeightedMeasureSpace.from_atoms([("a", 2.0, 0.5), {"label": "b", "mu": 1.0}])
    assert s.labels == ("a", "b") and s.total_gamma == 2.0
    u = WeightedMeasureSpace.uniform(4, 2.0)
    assert u.total_gamma == pytest.approx(2.0, rel=1e-15)
    seq = WeightedMeasureSpace.sequence([0.25, 0.0625])
    assert seq.mu == (1.0, 1.0) and seq.gamma == (0.25, 0.0625)
    assert WeightedMeasureSpace.from_atoms(s.to_json()["atoms"]) == s


def test_integrate_examples():
    assert integrate(UNIT, StepFunction([[2.0]]), sq) == 4.0
    assert integrate(THREE, StepFunction.constant(THREE, 2.0), sq) == pytest.approx(4.0, rel=1e-15)
    two = WeightedMeasureSpace.from_weights([1.0, 1.0])
    assert integrate(two, StepFunction([0.0, 3.0]), make_double_well_instance().phi) == -1.0


def test_integrate_reports_atom_label():
    with np.errstate(divide="ignore"), pytest.raises(EvaluationError) as exc:
        integrate(THREE, StepFunction([1.0, 0.0, 2.0]), lambda y: 1.0 / y[..., 0])
    assert exc.value.label == "t1"


def test_integrate_dimension_mismatch():
    with pytest.raises(ValueError):
        integrate(THREE, StepFunction([1.0, 2.0]), sq)


def test_feasibility_examples():
    assert is_feasible(UNIT, make_double_well_instance(), StepFunction([0.0]), 1.0)
    canon = make_canonical_instance()
    for r in (0.3, 2.0, 7.0):
        u = StepFunction.constant(THREE, math.sqrt(r))
        assert is_feasible(THREE, canon, u, canon.psi_value([math.sqrt(r)]))
    assert not is_feasible(UNIT, canon, StepFunction([math.sqrt(4.0) + 1.0]), 4.0)


# -- witness -----------------------------------------------------------------


def test_witness_full_and_partial():
    pair = make_canonical_instance()
    res = find_lambda_r(pair, 4.0)
    full = witness(THREE, pair, 4.0, res)
    assert np.allclose(full.values, 2.0, rtol=1e-7)
    part = witness(THREE, pair, 4.0, res, atom_subset=[0])
    assert part.values[:, 0].tolist()[1:] == [0.0, 0.0]
    assert integrate(THREE, part, pair.psi) == pytest.approx(2.0, rel=1e-6)
    empty = witness(THREE, pair, 4.0, res, atom_subset=[])
    assert np.all(empty.values == 0.0)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(min_value=0.01, max_value=3.0), min_size=1, max_size=6),
    st.floats(min_value=0.1, max_value=20.0),
    st.data(),
)
def test_witness_always_feasible(weights, r, data):
    space = WeightedMeasureSpace.from_weights(weights)
    pair = make_canonical_instance()
    res = find_lambda_r(pair, r)
    subset = data.draw(st.lists(st.integers(0, len(weights) - 1), unique=True))
    u = witness(space, pair, r, res, subset or None)
    assert is_feasible(space, pair, u, max(r, res.minimum.psi_value))


# -- sub-level oracle ------------------------------------------------------


def test_oracle_canonical():
    assert sublevel_infimum_oracle(THREE, make_canonical_instance(), 4.0) == pytest.approx(-2.0, abs=1e-6)


def test_oracle_double_well_not_above_zero():
    for space in (UNIT, THREE):
        assert sublevel_infimum_oracle(space, make_double_well_instance(), 1.0) <= 0.0


def test_oracle_linear_eta():
    pair = make_linear_eta_instance([-2.0], "expm1", 2.0)
    assert sublevel_infimum_oracle(UNIT, pair, math.e - 1) == pytest.approx(-2.0, abs=1e-6)


def test_oracle_dimension_cap():
    big = WeightedMeasureSpace.from_weights([1.0] * 40)
    with pytest.raises(ValueError):
        sublevel_infimum_oracle(big, make_linear_quadratic_instance([1.0, 0.0], 1.0), 0.1, OracleConfig(max_dim=64))


# -- the identity --------------------------------------------------------------


def test_identity_canonical_pass():
    rep = verify_identity(THREE, make_canonical_instance(), 4.0)
    assert rep.verdict == "pass"
    assert rep.lhs == pytest.approx(-2.0, abs=1e-6) and rep.rhs == pytest.approx(-2.0, abs=1e-6)
    assert rep.lower_bound_ok


def test_identity_double_well_counterexample():
    rep = verify_identity(UNIT, make_double_well_instance(), 1.0)
    assert rep.verdict == "counterexample-confirmed"
    assert rep.rhs == 1.0 and rep.lhs <= 1e-9
    assert rep.hypothesis_violation["kind"] == "non-unique global minimum"
    lo, hi = rep.hypothesis_violation["lambda_interval"]
    assert 0.12 <= lo <= hi <= 0.13


@pytest.mark.parametrize("r", [0.1, 0.3, 0.45])
def test_identity_linear_quadratic(r):
    rep = verify_identity(UNIT, make_linear_quadratic_instance([1.0, 0.0], 1.0), r)
    assert rep.verdict == "pass"
    assert rep.rhs == pytest.approx(-math.sqrt(2 * r), rel=1e-6)
    assert rep.lhs == pytest.approx(-math.sqrt(2 * r), rel=1e-5)


def test_identity_shift_is_added_back():
    from sublevel.functionals import FunctionalPair
    from sublevel.extended import ExtendedReal, POS_INF

    pair = FunctionalPair(dim=1, phi=lambda y: 1.0 - y[..., 0], psi=lambda y: y[..., 0] ** 2 + 0.5, p=2.0,
                          psi_inf=ExtendedReal.of(0.5), psi_sup=POS_INF, minimizers=lambda lam: [])
    rep = verify_identity(THREE, pair, 4.5)
    assert rep.shifts["phi0"] == 1.0 and rep.shifts["psi0"] == 0.5
    assert rep.rhs == pytest.approx(-1.0, abs=1e-6)
    assert rep.verdict == "pass"


def test_report_json_excludes_timing_by_default():
    rep = verify_identity(UNIT, make_canonical_instance(), 1.0)
    assert "elapsed_s" not in rep.to_json()
    assert rep.to_json(include_timing=True)["elapsed_s"] >= 0.0


# -- properties ---------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(
    st.lists(st.floats(min_value=0.05, max_value=2.0), min_size=1, max_size=5),
    st.floats(min_value=0.2, max_value=10.0),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_lower_bound_holds_for_random_feasible_functions(weights, r, seed):
    space = WeightedMeasureSpace.from_weights(weights)
    pair = make_linear_eta_instance([1.0, -0.5], "quadratic", 2.0)
    res = find_lambda_r(pair, r)
    bound = res.minimum.phi_value * space.total_gamma
    rng = np.random.default_rng(seed)
    for _ in range(50):
        u = rng.normal(size=(space.size, 2)) * rng.uniform(0.1, 3.0)
        level = integrate(space, StepFunction(u), pair.psi) / space.total_gamma
        if level > r:
            u = u * (r / level) ** 0.5 * (1 - 1e-12)  # psi is quadratic-type in |y|^2 here
        step = StepFunction(u)
        if not is_feasible(space, pair, step, r):
            continue
        assert integrate(space, step, pair.phi) >= bound - 1e-7 * max(1.0, abs(bound))


@settings(max_examples=5, deadline=None)
@given(st.floats(min_value=0.1, max_value=10.0), st.floats(min_value=0.5, max_value=9.0))
def test_gamma_scaling(c, r):
    pair = make_canonical_instance()
    base = verify_identity(THREE, pair, r)
    scaled = verify_identity(THREE.scaled(c), pair, r)
    assert scaled.rhs == pytest.approx(c * base.rhs, rel=1e-12)
    assert scaled.lhs == pytest.approx(c * base.lhs, rel=1e-6)


def test_sequence_truncation_is_stable():
    pair = make_canonical_instance()
    a = [4.0 ** -n for n in range(1, 17)]
    tols = Tolerances()
    short = verify_identity(WeightedMeasureSpace.sequence(a[:8]), pair, 2.0, tols)
    long = verify_identity(WeightedMeasureSpace.sequence(a), pair, 2.0, tols)
    assert short.verdict == long.verdict == "pass"
    tol = tols.abs + tols.rel * abs(long.rhs)
    assert abs(short.lhs - long.lhs) < tol and abs(short.rhs - long.rhs) < tol
    assert long.rhs == pytest.approx(-math.sqrt(2.0) * math.fsum(a), rel=1e-6)
