"""Function oracles and the catalog of test problems.

Every problem is a convex (or, for ``nonconvex_mix``, partly non-convex)
function with a known minimum and a set of declared property constants that
the certificate checks in :mod:`polyak_surrogate.diagnostics` can verify.

Problems are addressed by name plus an optional query string, e.g.
``"shifted_quad?a=0.5"`` or ``"l1?dim=4"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence
from urllib.parse import parse_qsl

import numpy as np

from .exceptions import ContractError

Point = np.ndarray


@dataclass(frozen=True)
class PropertyConstants:
    """Constants a problem claims to satisfy. ``None`` means not claimed."""

    lipschitz_G: float | None = None
    self_bounded_L: float | None = None
    sharp_s: float | None = None
    quadratic_growth_mu: float | None = None
    holder: tuple[float, float] | None = None  # (L_nu, nu)

    def __post_init__(self):
        if self.sharp_s is not None and self.lipschitz_G is not None:
            if self.lipschitz_G < self.sharp_s:
                raise ContractError(
                    f"lipschitz_G={self.lipschitz_G} < sharp_s={self.sharp_s}"
                )
        if self.holder is not None and not 0.0 <= self.holder[1] <= 1.0:
            raise ContractError(f"holder exponent {self.holder[1]} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class FunctionOracle:
    """A real function on R^dim with a canonical subgradient selection.

    ``kinks`` lists the 1-d points where the function is not differentiable;
    ``subgradient_extremes`` returns the extreme points of the subdifferential
    there (defaults to the canonical subgradient alone).
    """

    name: str
    dim: int
    value: Callable[[Point], float]
    subgradient: Callable[[Point], Point]
    opt_value: float | None = None
    opt_point: Point | None = None
    declared: PropertyConstants = field(default_factory=PropertyConstants)
    kinks: tuple[float, ...] = ()
    subgradient_extremes: Callable[[Point], list[Point]] | None = None
    convex: bool = True

    def point(self, x) -> Point:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ContractError(
                f"{self.name}: expected a point of length {self.dim}, got shape {x.shape}"
            )
        return x

    def eval(self, x) -> tuple[float, Point]:
        x = self.point(x)
        return float(self.value(x)), np.asarray(self.subgradient(x), dtype=float)

    def extremes(self, x) -> list[Point]:
        x = self.point(x)
        if self.subgradient_extremes is None:
            return [np.asarray(self.subgradient(x), dtype=float)]
        return [np.asarray(g, dtype=float) for g in self.subgradient_extremes(x)]

    def dist_to_opt(self, x) -> float:
        if self.opt_point is None:
            raise ContractError(f"{self.name}: no optimum point declared")
        return float(np.linalg.norm(self.point(x) - self.opt_point))


def eval(oracle: FunctionOracle, x) -> tuple[float, Point]:
    """Return ``(f(x), g)`` with ``g`` the canonical subgradient at ``x``."""
    return oracle.eval(x)


@dataclass(frozen=True, eq=False)
class StochasticProblem:
    """A finite-sum objective F(x) = sum_i w_i f_i(x)."""

    name: str
    components: tuple[FunctionOracle, ...]
    weights: np.ndarray
    interpolating: bool = False
    opt_value: float | None = None
    opt_point: Point | None = None

    def __post_init__(self):
        if not self.components:
            raise ContractError("a stochastic problem needs at least one component")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ContractError(f"components disagree on dimension: {sorted(dims)}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.components),) or np.any(w < 0):
            raise ContractError("weights must be a nonnegative vector, one per component")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ContractError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def value(self, x) -> float:
        return float(sum(w * c.value(x) for w, c in zip(self.weights, self.components)))

    def subgradient(self, x) -> Point:
        return sum(w * np.asarray(c.subgradient(x), dtype=float)
                   for w, c in zip(self.weights, self.components))

    def as_oracle(self) -> FunctionOracle:
        """The expected objective F as a deterministic oracle."""
        return FunctionOracle(
            name=self.name,
            dim=self.dim,
            value=self.value,
            subgradient=self.subgradient,
            opt_value=self.opt_value,
            opt_point=self.opt_point,
            convex=all(c.convex for c in self.components),
        )


# ---------------------------------------------------------------------------
# zoo


def _sign(x):
    # np.sign returns 0 at 0: the midpoint of [-1, 1] is our canonical choice
    return np.sign(x)


def _quad(dim: int = 1) -> FunctionOracle:
    return FunctionOracle(
        name=f"quad?dim={dim}" if dim != 1 else "quad",
        dim=dim,
        value=lambda x: 0.5 * float(x @ x),
        subgradient=lambda x: x.copy(),
        opt_value=0.0,
        opt_point=np.zeros(dim),
        declared=PropertyConstants(self_bounded_L=1.0, quadratic_growth_mu=1.0,
                                   holder=(1.0, 1.0)),
    )


def _fig1() -> FunctionOracle:
    def extremes(x):
        if x[0] == -2.0:
            return [np.array([-3.0]), np.array([-1.0])]
        return [_sign(x + 2.0) + x]

    return FunctionOracle(
        name="fig1",
        dim=1,
        value=lambda x: abs(x[0] + 2.0) + 0.5 * x[0] ** 2,
        subgradient=lambda x: _sign(x + 2.0) + x,
        opt_value=1.5,
        opt_point=np.array([-1.0]),
        declared=PropertyConstants(self_bounded_L=9.0, quadratic_growth_mu=1.0),
        kinks=(-2.0,),
        subgradient_extremes=extremes,
    )


def _abs_extremes(center: float = 0.0):
    def extremes(x):
        if x[0] == center:
            return [np.array([-1.0]), np.array([1.0])]
        return [_sign(x - center)]
    return extremes


def _abs1d() -> FunctionOracle:
    return FunctionOracle(
        name="abs1d",
        dim=1,
        value=lambda x: abs(x[0]),
        subgradient=lambda x: _sign(x),
        opt_value=0.0,
        opt_point=np.zeros(1),
        declared=PropertyConstants(lipschitz_G=1.0, sharp_s=1.0, holder=(1.0, 0.0)),
        kinks=(0.0,),
        subgradient_extremes=_abs_extremes(),
    )


def _l1(dim: int = 2) -> FunctionOracle:
    return FunctionOracle(
        name=f"l1?dim={dim}",
        dim=dim,
        value=lambda x: float(np.abs(x).sum()),
        subgradient=lambda x: _sign(x),
        opt_value=0.0,
        opt_point=np.zeros(dim),
        declared=PropertyConstants(lipschitz_G=math.sqrt(dim), sharp_s=1.0),
    )


def _linf(dim: int = 2) -> FunctionOracle:
    def subgradient(x):
        g = np.zeros_like(x)
        i = int(np.argmax(np.abs(x)))
        g[i] = _sign(x[i])
        return g

    return FunctionOracle(
        name=f"linf?dim={dim}",
        dim=dim,
        value=lambda x: float(np.abs(x).max()),
        subgradient=subgradient,
        opt_value=0.0,
        opt_point=np.zeros(dim),
        declared=PropertyConstants(lipschitz_G=1.0, sharp_s=1.0 / math.sqrt(dim)),
    )


def _shifted_quad(a: float = 0.5) -> FunctionOracle:
    return FunctionOracle(
        name=f"shifted_quad?a={a!r}",
        dim=1,
        value=lambda x: 0.5 * x[0] ** 2 + a,
        subgradient=lambda x: x.copy(),
        opt_value=float(a),
        opt_point=np.zeros(1),
        declared=PropertyConstants(self_bounded_L=1.0, quadratic_growth_mu=1.0,
                                   holder=(1.0, 1.0)),
    )


def _shifted_abs(a: float = 1.0) -> FunctionOracle:
    return FunctionOracle(
        name=f"shifted_abs?a={a!r}",
        dim=1,
        value=lambda x: abs(x[0]) + a,
        subgradient=lambda x: _sign(x),
        opt_value=float(a),
        opt_point=np.zeros(1),
        declared=PropertyConstants(lipschitz_G=1.0, sharp_s=1.0),
        kinks=(0.0,),
        subgradient_extremes=_abs_extremes(),
    )


def _cycle_quad() -> FunctionOracle:
    return FunctionOracle(
        name="cycle_quad",
        dim=1,
        value=lambda x: x[0] ** 2 + 1.0,
        subgradient=lambda x: 2.0 * x,
        opt_value=1.0,
        opt_point=np.zeros(1),
        declared=PropertyConstants(self_bounded_L=2.0, quadratic_growth_mu=2.0),
    )


def _poly1d(name, c2, c1, c0, declared=None) -> FunctionOracle:
    """c2 x^2 + c1 x + c0 with c2 > 0."""
    xmin = -c1 / (2 * c2)
    return FunctionOracle(
        name=name,
        dim=1,
        value=lambda x: c2 * x[0] ** 2 + c1 * x[0] + c0,
        subgradient=lambda x: 2 * c2 * x + c1,
        opt_value=c0 - c1 * c1 / (4 * c2),
        opt_point=np.array([xmin]),
        declared=declared or PropertyConstants(self_bounded_L=2 * c2,
                                               quadratic_growth_mu=2 * c2),
    )


def _sps_fail() -> StochasticProblem:
    f1 = _poly1d("sps_fail/f1", 1.0, 2.0, 5.0)
    f2 = _poly1d("sps_fail/f2", 2.0, -4.0, 10.0)
    return StochasticProblem(
        name="sps_fail",
        components=(f1, f2),
        weights=np.array([0.5, 0.5]),
        interpolating=False,
        opt_value=44.0 / 6.0,
        opt_point=np.array([1.0 / 3.0]),
    )


def _interp_pair() -> StochasticProblem:
    f1 = _poly1d("interp_pair/f1", 0.5, 0.0, 0.0)
    f2 = _poly1d("interp_pair/f2", 2.0, 0.0, 0.0)
    return StochasticProblem(
        name="interp_pair",
        components=(f1, f2),
        weights=np.array([0.5, 0.5]),
        interpolating=True,
        opt_value=0.0,
        opt_point=np.zeros(1),
    )


def _abs_at(center: float, name: str) -> FunctionOracle:
    return FunctionOracle(
        name=name,
        dim=1,
        value=lambda x: abs(x[0] - center),
        subgradient=lambda x: _sign(x - center),
        opt_value=0.0,
        opt_point=np.array([center]),
        declared=PropertyConstants(lipschitz_G=1.0, sharp_s=1.0),
        kinks=(center,),
        subgradient_extremes=_abs_extremes(center),
    )


def _abs_pair() -> StochasticProblem:
    return StochasticProblem(
        name="abs_pair",
        components=(_abs_at(1.0, "abs_pair/f1"), _abs_at(-1.0, "abs_pair/f2")),
        weights=np.array([0.5, 0.5]),
        interpolating=False,
        opt_value=1.0,
        opt_point=np.zeros(1),
    )


def _nonconvex_mix() -> StochasticProblem:
    f1 = FunctionOracle(
        name="nonconvex_mix/f1",
        dim=1,
        value=lambda x: -abs(x[0]),
        subgradient=lambda x: -_sign(x),
        convex=False,
    )
    f2 = FunctionOracle(
        name="nonconvex_mix/f2",
        dim=1,
        value=lambda x: 2.0 * abs(x[0]),
        subgradient=lambda x: 2.0 * _sign(x),
        opt_value=0.0,
        opt_point=np.zeros(1),
        declared=PropertyConstants(lipschitz_G=2.0, sharp_s=2.0),
        kinks=(0.0,),
    )
    return StochasticProblem(
        name="nonconvex_mix",
        components=(f1, f2),
        weights=np.array([0.5, 0.5]),
        interpolating=True,
        opt_value=0.0,
        opt_point=np.zeros(1),
    )


_FACTORIES: dict[str, Callable] = {
    "fig1": _fig1,
    "quad": _quad,
    "abs1d": _abs1d,
    "l1": _l1,
    "linf": _linf,
    "shifted_quad": _shifted_quad,
    "shifted_abs": _shifted_abs,
    "cycle_quad": _cycle_quad,
    "sps_fail": _sps_fail,
    "interp_pair": _interp_pair,
    "abs_pair": _abs_pair,
    "nonconvex_mix": _nonconvex_mix,
}

_INT_PARAMS = {"dim"}


def zoo() -> dict[str, FunctionOracle | StochasticProblem]:
    """Every catalog problem at its default parameters, keyed by base name."""
    return {name: factory() for name, factory in _FACTORIES.items()}


def problem_names() -> list[str]:
    return sorted(_FACTORIES)


def get_problem(spec: str) -> FunctionOracle | StochasticProblem:
    """Resolve ``"name?key=value&..."`` to a problem instance.

    >>> get_problem("shifted_quad?a=0.5").opt_value
    0.5
    """
    name, _, query = spec.partition("?")
    name = name.strip()
    if name not in _FACTORIES:
        raise LookupError(f"unknown problem {name!r}; known: {', '.join(problem_names())}")
    params = {}
    for key, raw in parse_qsl(query, keep_blank_values=True, strict_parsing=bool(query)):
        params[key] = int(raw) if key in _INT_PARAMS else float(raw)
    try:
        return _FACTORIES[name](**params)
    except TypeError as exc:
        raise ContractError(f"bad parameters for {name!r}: {params}") from exc


def deterministic_names(dim: int = 3) -> list[str]:
    """Specs of the deterministic zoo problems, multi-d ones at ``dim``."""
    out = []
    for name, factory in _FACTORIES.items():
        if name in ("l1", "linf", "quad"):
            out.append(f"{name}?dim={dim}")
        elif isinstance(factory(), FunctionOracle):
            out.append(name)
    return out


def as_points(xs: Sequence, dim: int) -> np.ndarray:
    return np.asarray(xs, dtype=float).reshape(-1, dim)
