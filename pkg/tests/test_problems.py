import numpy as np
import pytest

from polyak_surrogate import diagnostics as dg
from polyak_surrogate.exceptions import ContractError
from polyak_surrogate.problems import (
    FunctionOracle,
    PropertyConstants,
    StochasticProblem,
    deterministic_names,
    eval,
    get_problem,
    problem_names,
    zoo,
)


def all_oracles():
    """Every convex oracle in the catalog, components of finite sums included."""
    out = []
    for spec in deterministic_names(3):
        out.append(get_problem(spec))
    for p in zoo().values():
        if isinstance(p, StochasticProblem):
            out.extend(c for c in p.components if c.convex)
    return out


def test_eval_quadratic():
    f, g = eval(get_problem("quad"), 2.0)
    assert f == 2.0 and g.tolist() == [2.0]


def test_eval_fig1_smooth_branch_and_kink():
    fig1 = get_problem("fig1")
    f, g = eval(fig1, [0.0])
    assert (f, g.tolist()) == (2.0, [1.0])
    f, g = eval(fig1, [-2.0])  # |.| contributes 0 at its kink
    assert (f, g.tolist()) == (2.0, [-2.0])


def test_eval_is_deterministic_and_checks_dimension():
    l1 = get_problem("l1?dim=3")
    a = eval(l1, [1.0, -2.0, 0.0])
    b = eval(l1, [1.0, -2.0, 0.0])
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    with pytest.raises(ContractError):
        eval(l1, [1.0, 2.0])


def test_zoo_contents():
    names = set(zoo())
    assert {"fig1", "quad", "abs1d", "linf", "l1", "shifted_quad", "cycle_quad",
            "sps_fail"} <= names
    assert problem_names() == sorted(names)


def test_fig1_optimum():
    fig1 = get_problem("fig1")
    assert fig1.opt_point.tolist() == [-1.0]
    assert fig1.opt_value == 1.5
    assert fig1.declared.self_bounded_L == 9.0
    xs = np.linspace(-5, 3, 8001)
    assert min(fig1.value(np.array([x])) for x in xs) == pytest.approx(1.5, abs=1e-12)


def test_sps_fail_objective():
    p = get_problem("sps_fail")
    assert p.weights.tolist() == [0.5, 0.5]
    for x in (-2.0, 0.0, 1.0 / 3.0, 1.0, 4.5):
        assert p.value(np.array([x])) == pytest.approx(1.5 * x * x - x + 7.5, abs=1e-12)
    assert p.opt_value == pytest.approx(44.0 / 6.0, abs=1e-15)
    assert p.value(p.opt_point) == pytest.approx(44.0 / 6.0, abs=1e-12)


def test_quad_at_zero():
    f, g = eval(get_problem("quad"), 0.0)
    assert f == 0.0 and g.tolist() == [0.0]


def test_lookup_and_parameters():
    assert get_problem("shifted_quad?a=0.5").opt_value == 0.5
    assert get_problem("l1?dim=4").dim == 4
    assert get_problem("quad?dim=2").value(np.array([3.0, 4.0])) == 12.5
    with pytest.raises(LookupError):
        get_problem("rosenbrock")
    with pytest.raises(ContractError):
        get_problem("fig1?a=2")


@pytest.mark.parametrize("oracle", all_oracles(), ids=lambda o: o.name)
def test_optimum_value_and_zero_subgradient(oracle):
    x = oracle.opt_point
    assert abs(oracle.value(x) - oracle.opt_value) <= 1e-12
    assert np.all(oracle.subgradient(x) == 0.0)


@pytest.mark.parametrize("oracle", all_oracles(), ids=lambda o: o.name)
def test_subgradient_inequality(oracle):
    rng = np.random.default_rng(7)
    xs = rng.uniform(-10, 10, (10_000, oracle.dim))
    ys = rng.uniform(-10, 10, (10_000, oracle.dim))
    worst = min(
        oracle.value(y) - oracle.value(x) - float(oracle.subgradient(x) @ (y - x))
        for x, y in zip(xs, ys)
    )
    assert worst >= -1e-10


@pytest.mark.parametrize("oracle", all_oracles(), ids=lambda o: o.name)
def test_declared_constants_certify(oracle):
    d = oracle.declared
    checks = []
    if d.lipschitz_G is not None:
        checks.append(dg.check_lipschitz(oracle, d.lipschitz_G))
    if d.self_bounded_L is not None:
        checks.append(dg.check_self_bounded(oracle, d.self_bounded_L))
    if d.sharp_s is not None:
        checks.append(dg.check_sharp(oracle, d.sharp_s))
    if d.quadratic_growth_mu is not None:
        checks.append(dg.check_qg(oracle, d.quadratic_growth_mu))
    if d.holder is not None:
        checks.append(dg.check_holder(oracle, *d.holder))
    assert checks
    for cert in checks:
        assert cert.holds, (cert.property, cert.worst_margin, cert.witness)


def test_property_constants_contract():
    with pytest.raises(ContractError):
        PropertyConstants(lipschitz_G=0.5, sharp_s=1.0)
    with pytest.raises(ContractError):
        PropertyConstants(holder=(1.0, 1.5))
    assert PropertyConstants(lipschitz_G=1.0, sharp_s=1.0).sharp_s == 1.0


def test_stochastic_problem_contract():
    f = get_problem("quad")
    with pytest.raises(ContractError):
        StochasticProblem("bad", (f, f), np.array([0.5, 0.6]))
    with pytest.raises(ContractError):
        StochasticProblem("bad", (f, get_problem("l1?dim=2")), np.array([0.5, 0.5]))
    with pytest.raises(ContractError):
        StochasticProblem("bad", (), np.array([]))


def test_nonconvex_mix_objective_is_certified_not_components():
    p = get_problem("nonconvex_mix")
    assert not p.components[0].convex and p.components[0].opt_value is None
    F = p.as_oracle()
    assert not F.convex
    # F = |x| / 2: the objective itself is sharp and Lipschitz with constant 1/2
    assert dg.check_sharp(F, 0.5).holds
    assert dg.check_lipschitz(F, 0.5).holds
    assert not dg.check_sharp(F, 0.51).holds


def test_custom_oracle_dimension_contract():
    o = FunctionOracle("c", 2, lambda x: float(x @ x), lambda x: 2 * x)
    assert o.point([1, 2]).shape == (2,)
    with pytest.raises(ContractError):
        o.dist_to_opt([0, 0])
