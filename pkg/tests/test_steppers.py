import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polyak_surrogate.exceptions import ConfigurationError, DomainError
from polyak_surrogate.problems import deterministic_names, get_problem
from polyak_surrogate.steppers import (
    StepperConfig,
    draw_component,
    eta_rewrite_check,
    family_for,
    generalized_step,
    map_T,
    parse_stepper,
    polyak_step,
    run,
    surrogate_gd_step,
)
from polyak_surrogate.surrogates import LowerBound, ShiftByOpt, SurrogateSpec, make_surrogate


def test_polyak_step_examples():
    assert polyak_step(get_problem("quad"), 2.0).tolist() == [1.0]
    assert polyak_step(get_problem("abs1d"), 5.0).tolist() == [0.0]
    assert polyak_step(get_problem("quad"), 0.0).tolist() == [0.0]


def test_surrogate_gd_step_examples():
    sur = make_surrogate(SurrogateSpec(get_problem("quad"), ShiftByOpt()))
    assert sur.psi_subgradient(2.0).tolist() == [4.0]
    assert surrogate_gd_step(sur, 2.0).tolist() == [1.0] == polyak_step(sur.base, 2.0).tolist()
    assert surrogate_gd_step(sur, 0.0).tolist() == [0.0]


def test_generalized_step_unclipped_matches_polyak():
    spec = SurrogateSpec(get_problem("shifted_quad?a=0.0"), LowerBound(0.0))
    rec, x = generalized_step(spec, 2.0, math.inf)
    assert x.tolist() == [1.0] and rec.eta == 0.25 and not rec.clipped


def test_generalized_step_clipped_branch():
    spec = SurrogateSpec(get_problem("shifted_quad?a=0.5"), LowerBound(0.0))
    rec, x = generalized_step(spec, 1.0, 0.5)
    assert x.tolist() == [0.5]
    assert rec.clipped and rec.eta == 0.5 and rec.h_val == 1.0
    assert abs(rec.eta * rec.h_val - 0.5) <= 1e-12


def test_generalized_step_stay_branch_and_errors():
    spec = SurrogateSpec(get_problem("shifted_quad?a=0.5"), LowerBound(0.0))
    rec, x = generalized_step(spec, 0.0, 0.1)
    assert x.tolist() == [0.0] and rec.eta == 0.0
    with pytest.raises(ConfigurationError):
        generalized_step(spec, 1.0, 0.0)


def test_generalized_step_zero_h_is_zero_displacement():
    # h = 0 with g != 0 (hinge boundary excluded): LowerBound makes h vanish off the minimizer
    spec = SurrogateSpec(get_problem("abs1d"), LowerBound(2.0))
    with pytest.warns(UserWarning):
        sur = make_surrogate(spec)
    rec, x = generalized_step(sur, 2.0, 1.0)
    assert rec.h_val == 0.0 and x.tolist() == [2.0]


@pytest.mark.parametrize("name", deterministic_names(3))
def test_generalized_infinite_gamma_reproduces_polyak(name):
    f = get_problem(name)
    sur = make_surrogate(SurrogateSpec(f, ShiftByOpt()))
    rng = np.random.default_rng(1)
    for x in rng.uniform(-5, 5, (50, f.dim)):
        _, y = generalized_step(sur, x, math.inf)
        assert np.array_equal(y, polyak_step(f, x))


def test_map_T_examples():
    h = get_problem("cycle_quad")
    x = 1.0 / math.tan(math.pi / 7)
    assert map_T(h, x)[0] == pytest.approx(1.0 / math.tan(2 * math.pi / 7), abs=1e-12)
    sq = get_problem("shifted_quad?a=0.5")
    assert map_T(sq, 0.0).tolist() == [0.0]
    assert map_T(sq, 1.0).tolist() == [0.0]


def test_eta_rewrite_check():
    # stepsize of T read as gradient descent on (h - h*)^2 / 2, with lambda = ||g||^2
    direct, rewritten = eta_rewrite_check(get_problem("cycle_quad"), 2.0)
    assert direct == pytest.approx(5 / 64, abs=1e-15)
    assert rewritten == pytest.approx(5 / 64, abs=1e-15)
    direct, rewritten = eta_rewrite_check(get_problem("shifted_quad?a=1"), 1.0)
    assert direct == pytest.approx(3.0) and rewritten == pytest.approx(3.0)
    # h* = 0: the factor h / (h - h*) is 1 and both reduce to 1 / ||g||^2
    direct, rewritten = eta_rewrite_check(get_problem("quad"), 2.0)
    assert direct == rewritten == 0.25
    with pytest.raises(DomainError):
        eta_rewrite_check(get_problem("cycle_quad"), 0.0)


@given(st.floats(min_value=-50, max_value=50).filter(lambda x: abs(x) > 1e-3))
def test_eta_rewrite_agrees(x):
    direct, rewritten = eta_rewrite_check(get_problem("cycle_quad"), x)
    assert direct == pytest.approx(rewritten, rel=1e-12)


def test_run_examples():
    tr = run("polyak", get_problem("quad"), 8.0, 3)
    assert tr.xs[:, 0].tolist() == [8.0, 4.0, 2.0, 1.0]
    assert len(run("polyak", get_problem("quad"), 8.0, 1)) == 2
    with pytest.raises(ConfigurationError):
        run("polyak", get_problem("quad"), 8.0, 0)


def test_run_sps_fail_random_walk():
    tr = run("alg1:gamma=inf,c=0.5", get_problem("sps_fail"), 1.0, 200, seed=11)
    assert set(tr.xs[:, 0].tolist()) == {1.0, -1.0}
    same = run("alg1:gamma=inf,c=0.5", get_problem("sps_fail"), 1.0, 200, seed=11)
    assert np.array_equal(tr.xs, same.xs)
    assert [r.xi for r in tr.records[:-1]] == [r.xi for r in same.records[:-1]]


def test_run_rejects_deterministic_stepper_on_finite_sum():
    with pytest.raises(ConfigurationError):
        run("polyak", get_problem("sps_fail"), 1.0, 5)


def test_divergence_aborts():
    tr = run("gd:eta=10", get_problem("quad"), 1.0, 100)
    assert tr.status.startswith("aborted") and len(tr.records) < 100


def test_gd_schedules():
    tr = run("gd:eta=0.5,schedule=sqrt", get_problem("abs1d"), 3.0, 4)
    assert [r.eta for r in tr.records[:-1]] == [0.5 / math.sqrt(t) for t in range(1, 5)]
    assert tr.direction == "grad"


@pytest.mark.parametrize("stepper, problem, x1", [
    ("polyak", "fig1", 5.0),
    ("surrogate_gd", "l1?dim=3", [1.0, -2.0, 3.0]),
    ("alg1:gamma=0.1", "quad", 8.0),
    ("alg1:gamma=0.3,c=0.5", "sps_fail", 2.0),
    ("map_t", "cycle_quad", 0.3),
])
def test_trajectory_update_invariant(stepper, problem, x1):
    tr = run(stepper, get_problem(problem), x1, 30, seed=4)
    for cur, nxt in zip(tr.records[:-1], tr.records[1:]):
        assert cur.eta >= 0
        expected = cur.x - cur.eta * cur.h_val * cur.g
        assert np.allclose(nxt.x, expected, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", deterministic_names(3))
def test_fejer_monotone(name):
    f = get_problem(name)
    x1 = np.full(f.dim, 3.7) if f.dim > 1 else np.array([-6.3])
    tr = run("polyak", f, x1, 200)
    d = np.linalg.norm(tr.xs - f.opt_point, axis=1)
    assert np.all(d[1:] <= d[:-1] + 1e-12)


def test_fejer_monotone_interpolating_stochastic():
    tr = run("alg1:gamma=1", get_problem("interp_pair"), 5.0, 100, seed=2)
    d = np.abs(tr.xs[:, 0])
    assert np.all(d[1:] <= d[:-1] + 1e-12)


@given(x=st.floats(-20, 20), gamma=st.floats(1e-4, 10))
def test_clipping_iff_gamma_g2_below_h(x, gamma):
    spec = SurrogateSpec(get_problem("shifted_quad?a=0.5"), LowerBound(0.0))
    rec, _ = generalized_step(spec, x, gamma)
    gg = float(rec.g @ rec.g)
    # the stay branch (g = 0) takes precedence over the min
    assert rec.clipped == (gg > 0 and gamma * gg < rec.h_val)
    if rec.clipped:
        assert abs(rec.eta * rec.h_val - gamma) <= 1e-12 * max(1.0, gamma)


def test_draw_component():
    w = np.array([0.25, 0.75])
    draws = [draw_component(5, t, w) for t in range(1, 4001)]
    assert draws == [draw_component(5, t, w) for t in range(1, 4001)]
    assert np.mean(draws) == pytest.approx(0.75, abs=0.03)
    assert draw_component(5, 3, np.array([1.0])) == 0


def test_parse_stepper():
    assert parse_stepper("polyak") == StepperConfig("polyak")
    assert parse_stepper("alg1:gamma=inf").gamma == math.inf
    assert parse_stepper("alg1:0.1").gamma == 0.1
    assert parse_stepper("alg1:gamma=0.1,c=0.5").c == 0.5
    assert parse_stepper("gd:eta=0.1").name == "gd:eta=0.1"
    for bad in ("adam", "gd", "gd:eta=-1", "alg1:gamma=0", "polyak:x=1", "alg1:gamma=abc"):
        with pytest.raises(ConfigurationError):
            parse_stepper(bad)


def test_family_for_matches_stepper():
    assert family_for("gd:eta=0.1", get_problem("quad")) is None
    assert family_for("map_t", get_problem("cycle_quad")).transform_name == "lower_bound:0"
    assert family_for("alg1:gamma=1", get_problem("sps_fail")).transform_name == \
        "shift_per_component_inf"
    with pytest.raises(ConfigurationError):
        family_for("polyak", get_problem("quad"), "hinge:1")
