import math

import numpy as np
import pytest

from polyak_surrogate import diagnostics as dg
from polyak_surrogate.exceptions import ConfigurationError
from polyak_surrogate.problems import deterministic_names, get_problem
from polyak_surrogate.steppers import family_for, run
from polyak_surrogate.surrogates import (
    Hinge,
    LowerBound,
    ShiftByOpt,
    SurrogateSpec,
    build_family,
    make_surrogate,
)

FIG1 = get_problem("fig1")


# -- grids


def test_standard_grid_handles_kinks():
    g = dg.standard_grid(FIG1)
    xs = g.points[:, 0]
    assert xs.min() == -10.0 and xs.max() == 10.0
    assert np.count_nonzero(xs == -2.0) == 1
    assert not np.any((np.abs(xs + 2.0) <= 1e-9) & (xs != -2.0))
    assert len(xs) == 2001


def test_ball_grid_is_deterministic_and_in_ball():
    l1 = get_problem("l1?dim=3")
    a, b = dg.ball_grid(l1), dg.ball_grid(l1)
    assert np.array_equal(a.points, b.points)
    assert a.points.shape == (10_000, 3)
    assert np.linalg.norm(a.points, axis=1).max() <= 10.0


# -- certificates


def test_fig1_lsuc_and_self_bounded():
    assert dg.check_lsuc(FIG1, 2.0, dg.grid_1d(-6, 2, 0.01, [-2.0])).holds
    assert dg.check_lsuc(FIG1, 2.0).holds
    assert dg.check_self_bounded(FIG1, 9.0).holds
    assert not dg.check_self_bounded(FIG1, 8.9).holds


def test_fig1_lsuc_small_lambda_fails_near_kink():
    cert = dg.check_lsuc(FIG1, 0.5)
    assert not cert.holds
    assert abs(cert.scaled_witness[0] + 2.0) <= 0.1
    # raw margins grow quadratically, so the unscaled minimum sits on the grid edge
    assert cert.witness[0] in (-10.0, 10.0)


@pytest.mark.parametrize("name", deterministic_names(3))
def test_shift_surrogate_has_gradient_norm_curvature(name):
    sur = make_surrogate(SurrogateSpec(get_problem(name), ShiftByOpt()))
    cert = dg.check_lsuc(sur.psi_oracle(), dg.surrogate_curvature_rule(sur))
    assert cert.holds, cert.worst_margin


def test_approx_lsuc_examples():
    exact = make_surrogate(SurrogateSpec(get_problem("shifted_quad?a=0.0"), LowerBound(0.0)))
    assert dg.check_approx_lsuc(exact).holds
    sur = make_surrogate(SurrogateSpec(get_problem("shifted_quad?a=0.5"), LowerBound(0.0)))
    psi_x, psi_star = sur.psi_value(1.0), sur.psi_value(0.0)
    assert (psi_x, psi_star) == (0.5, 0.125)
    assert 2 * math.sqrt(psi_x * psi_star) - psi_star == 0.375
    assert dg.check_approx_lsuc(sur).holds
    assert dg.check_approx_lsuc(make_surrogate(SurrogateSpec(FIG1, Hinge(2.0)))).holds


def test_approx_lsuc_fails_without_slack():
    # the same surrogate is not exactly ||g||^2-curved when psi(x*) > 0
    sur = make_surrogate(SurrogateSpec(get_problem("shifted_quad?a=0.5"), LowerBound(0.0)))
    assert not dg.check_lsuc(sur.psi_oracle(), dg.surrogate_curvature_rule(sur)).holds


def test_class_examples():
    quad = get_problem("quad")
    cert = dg.check_self_bounded(quad, 1.0)
    assert cert.holds and cert.worst_margin == 0.0
    abs1d = get_problem("abs1d")
    assert dg.check_sharp(abs1d, 1.0).holds
    assert not dg.check_sharp(abs1d, 1.01).holds
    assert not dg.check_sharp(quad, 1.0).holds
    assert dg.check_qg_plus(quad, 1.0).holds
    assert not dg.check_qg_plus(quad, 0.1).holds
    assert not dg.check_lipschitz(quad, 5.0).holds


@pytest.mark.parametrize("check, f, const", [
    (dg.check_lsuc, "fig1", 2.0),
    (dg.check_self_bounded, "fig1", 9.0),
    (dg.check_lipschitz, "abs1d", 1.0),
    (dg.check_qg_plus, "quad", 1.0),
])
def test_monotone_in_constant(check, f, const):
    f = get_problem(f)
    base = check(f, const)
    doubled = check(f, 2 * const)
    assert base.holds and doubled.holds
    assert doubled.worst_margin >= base.worst_margin - 1e-12


@pytest.mark.parametrize("check, f, const", [
    (dg.check_sharp, "abs1d", 1.0),
    (dg.check_qg, "quad", 1.0),
])
def test_monotone_lower_constants(check, f, const):
    f = get_problem(f)
    assert check(f, const).holds and check(f, const / 2).holds


def test_sharp_surrogate_has_quadratic_growth():
    sur = make_surrogate(SurrogateSpec(get_problem("abs1d"), ShiftByOpt()))
    assert dg.check_qg(sur.psi_oracle(), 1.0).holds


def test_surrogate_local_quadratic_growth():
    # self-boundedness only gives f - f* >= ||g||^2 / (2L), so the bound holds with mu / 2;
    # on quad that version is tight (x^4 / 8 on both sides)
    for name in ("quad", "quad?dim=3"):
        cert = dg.check_surrogate_local_qg(get_problem(name), 0.5, 1.0)
        assert cert.holds and abs(cert.worst_margin) <= 1e-9
    stated = dg.check_surrogate_local_qg(get_problem("quad"), 1.0, 1.0)
    assert not stated.holds and stated.worst_margin == -1250.0


def test_holder_constant_and_check():
    assert dg.holder_K(1.0, 0.0) == 1.0
    assert dg.holder_K(3.0, 1.0) == pytest.approx(6.0)
    assert dg.check_holder(get_problem("abs1d"), 1.0, 0.0).holds
    assert dg.check_holder(get_problem("quad"), 1.0, 1.0).holds
    assert not dg.check_holder(get_problem("quad"), 0.4, 1.0).holds


def test_equivalence_examples():
    rep = dg.check_lsuc_qgplus_equivalence(get_problem("quad"), 1.0)
    assert rep.holds and rep.qg_plus.holds and rep.lsuc.holds
    rep = dg.check_lsuc_qgplus_equivalence(FIG1, 2.0)
    assert rep.holds and rep.worst_margin >= -1e-9
    fixed = dg.check_lsuc_qgplus_equivalence(FIG1, 2.0, lambda_rule=2.0)
    assert fixed.backward.holds
    bad = dg.check_lsuc_qgplus_equivalence(get_problem("quad"), 0.1)
    assert not bad.holds and not bad.qg_plus.holds
    assert bad.qg_plus.witness[0] != 0.0
    assert bad.forward_holds


def test_certificate_needs_optimum():
    from polyak_surrogate.problems import FunctionOracle
    f = FunctionOracle("f", 1, lambda x: x[0] ** 2, lambda x: 2 * x)
    with pytest.raises(ConfigurationError):
        dg.check_lsuc(f, 1.0)
    with pytest.raises(ConfigurationError):
        dg.check_self_bounded(f, 1.0)


# -- one-step ledger


def test_one_step_quad_cumulative():
    tr = run("polyak", get_problem("quad"), 8.0, 50)
    led = dg.audit_one_step(tr, family_for("polyak", get_problem("quad")))
    assert led.kind == "exact" and led.satisfied
    assert led.initial_half_dist2 == 32.0
    assert led.cumulative_left <= 32.0


def test_one_step_abs_single_step():
    f = get_problem("abs1d")
    tr = run("polyak", f, 5.0, 1)
    led = dg.audit_one_step(tr, family_for("polyak", f))
    assert led.satisfied and len(led.left) == 1
    # one step lands on x*: eta phi = (1/1)(25/2) equals |x1|^2 / 2
    assert led.left[0] == 12.5 == led.right[0]


def test_one_step_master_ledger_with_eps():
    f = get_problem("shifted_quad?a=0.5")
    tr = run("alg1:gamma=0.1", f, 3.0, 60, transform="lower_bound:0")
    led = dg.audit_one_step(tr, family_for("alg1:gamma=0.1", f, "lower_bound:0"))
    assert led.kind == "approximate" and led.satisfied
    assert any(r.clipped for r in tr.records)


def test_one_step_mismatch_raises():
    tr = run("polyak", get_problem("quad"), 8.0, 5)
    with pytest.raises(ConfigurationError):
        dg.audit_one_step(tr, family_for("polyak", get_problem("fig1")))
    f = get_problem("shifted_quad?a=0.5")
    tr = run("alg1:gamma=0.1", f, 3.0, 5)
    with pytest.raises(ConfigurationError):
        dg.audit_one_step(tr, build_family(f, "lower_bound:0"))
    with pytest.raises(ConfigurationError):
        dg.audit_one_step(run("gd:eta=0.1", f, 1.0, 3), build_family(f))


# -- rates


def test_rate_sharp_l1():
    l1 = get_problem("l1?dim=4")
    fam = family_for("polyak", l1)
    for x1 in ([1.0, 1.0, 1.0, 1.0], [1.0, 2.0, 3.0, 4.0], [-3.0, 0.5, 2.0, 7.0]):
        rep = dg.audit_rates(run("polyak", l1, x1, 60), "sharp", fam)
        assert rep.constants == {"s": 1.0, "G": 2.0}
        assert rep.holds and rep.violations == 0


def test_rate_self_bounded_quad():
    q = get_problem("quad")
    rep = dg.audit_rates(run("polyak", q, 8.0, 100), "self_bounded", family_for("polyak", q))
    assert rep.holds
    for T in (10, 100):
        assert rep.measured[T - 1] <= 4 * 64 ** 2 / T ** 2


def test_rate_lipschitz_l1_weighted_average():
    l1 = get_problem("l1?dim=4")
    rep = dg.audit_rates(run("polyak", l1, [-3.0, 0.5, 2.0, 7.0], 80), "lipschitz",
                         family_for("polyak", l1))
    assert rep.holds and rep.violations == 0


def test_rate_constants_missing():
    q = get_problem("quad")
    tr = run("polyak", q, 8.0, 10)
    with pytest.raises(ConfigurationError):
        dg.audit_rates(tr, "lipschitz", family_for("polyak", q))
    with pytest.raises(ConfigurationError):
        dg.audit_rates(tr, "warp", family_for("polyak", q))
    with pytest.raises(ConfigurationError):
        dg.audit_rates(tr, "alg1_linear", family_for("polyak", q), L=1.0)


def test_rate_rejects_aborted_runs():
    q = get_problem("quad")
    tr = run("gd:eta=10", q, 1.0, 100)
    with pytest.raises(ConfigurationError):
        dg.audit_rates(tr, "self_bounded", family_for("polyak", q))


def test_stochastic_self_bounded_average_bound():
    p = get_problem("sps_fail")
    trajs = [run("alg1:gamma=0.1", p, 1.0, 100, seed=s) for s in range(100)]
    rep = dg.audit_rates(trajs, "alg1_self_bounded", family_for("alg1:gamma=0.1", p))
    assert rep.constants == {"L": 4.0, "gamma": 0.1}
    assert rep.holds and rep.details["strict_holds"]
    assert rep.details["per_seed_average_bound"] and rep.details["per_seed_regret_bound"]
    # D^2 / T + 2 gamma H*, with D = |1 - 1/3| and H* = 4/3
    assert rep.bound[-1] == pytest.approx((2 / 3) ** 2 / 100 + 2 * 0.1 * 4 / 3)


def test_sps_plus_rate_on_interpolating_pair():
    p = get_problem("interp_pair")
    trajs = [run("alg1:gamma=inf", p, 4.0, 40, seed=s, transform="sps_plus")
             for s in range(20)]
    fam = family_for("alg1:gamma=inf", p, "sps_plus")
    assert dg.audit_rates(trajs, "sps_plus_self_bounded", fam, L=4.0).holds
    with pytest.raises(ConfigurationError):
        dg.audit_rates(trajs, "sps_plus_self_bounded", fam)


def test_holder_identities_at_nu_one():
    y = np.logspace(-6, 4, 1000)
    for L, gamma in ((1.0, 0.1), (4.0, 0.01), (0.3, 5.0)):
        q = dg.holder_Q(y, L, 1.0, gamma)
        assert np.max(np.abs(q - (2 * y + 4 * L * gamma * y)) / q) <= 1e-12
        inv = dg.holder_C_inverse(y, L, 1.0, gamma)
        sb = 2 * dg.self_bounded_average_bound(y, L, gamma)
        assert np.max(np.abs(inv - sb) / sb) <= 1e-12


@pytest.mark.parametrize("nu", [0.0, 0.3, 0.7])
def test_holder_C_inverse_inverts(nu):
    L, gamma = 2.0, 0.2
    K = dg.holder_K(L, nu)
    x = np.logspace(-4, 4, 200)
    C = 0.5 * np.minimum(x, x ** (2 / (1 + nu)) / (gamma * K))
    assert np.allclose(dg.holder_C_inverse(C, L, nu, gamma), x, rtol=1e-10)


def test_holder_rate_gamma_limit():
    q = get_problem("quad")
    rep = dg.audit_rates(run("polyak", q, 8.0, 50), "holder", family_for("polyak", q))
    # nu = 1, L = 1: Q -> 4 D^2 / T as gamma grows
    assert rep.holds and rep.bound[9] == pytest.approx(4 * 64 / 10)
    sq = get_problem("shifted_quad?a=0.5")
    tr = run("alg1:gamma=inf", sq, 2.0, 20, transform="lower_bound:0")
    with pytest.raises(ConfigurationError):
        dg.audit_rates(tr, "holder", family_for("alg1:gamma=inf", sq, "lower_bound:0"),
                       L_nu=1.0, nu=1.0)
