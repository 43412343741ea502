"""Surrogate losses psi = h^2 / 2 built from a base oracle through an h-transform.

Three transforms are supported:

* :class:`ShiftByOpt` -- ``h = f - f*`` (needs the optimal value),
* :class:`Hinge` -- ``h = (f - a)_+``,
* :class:`LowerBound` -- ``h = f - q`` for a constant ``q <= inf f``.

A :class:`SurrogateFamily` applies one transform to every component of a
finite-sum problem and exposes ``H(x) = E[h(x, xi)]`` exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import ConfigurationError
from .problems import FunctionOracle, StochasticProblem


@dataclass(frozen=True)
class ShiftByOpt:
    pass


@dataclass(frozen=True)
class Hinge:
    level: float


@dataclass(frozen=True)
class LowerBound:
    q: float


Transform = Union[ShiftByOpt, Hinge, LowerBound]


@dataclass(frozen=True, eq=False)
class SurrogateSpec:
    base: FunctionOracle
    transform: Transform


def _offset(spec: SurrogateSpec) -> float:
    t = spec.transform
    if isinstance(t, ShiftByOpt):
        if spec.base.opt_value is None:
            raise ConfigurationError(
                f"ShiftByOpt on {spec.base.name!r} needs a known optimal value"
            )
        return float(spec.base.opt_value)
    if isinstance(t, Hinge):
        return float(t.level)
    if isinstance(t, LowerBound):
        return float(t.q)
    raise ConfigurationError(f"unknown transform {t!r}")


class SurrogateOracle:
    """Evaluates h, a subgradient of h, psi = h^2/2 and its subgradient h*g."""

    def __init__(self, spec: SurrogateSpec):
        self.spec = spec
        self.base = spec.base
        self.offset = _offset(spec)
        self.hinged = isinstance(spec.transform, Hinge)

    def __repr__(self):
        return f"SurrogateOracle({self.base.name!r}, {self.spec.transform!r})"

    @property
    def dim(self) -> int:
        return self.base.dim

    def h_value(self, x) -> float:
        v = float(self.base.value(self.base.point(x))) - self.offset
        return max(v, 0.0) if self.hinged else v

    def h_subgradient(self, x) -> np.ndarray:
        x = self.base.point(x)
        g = np.asarray(self.base.subgradient(x), dtype=float)
        if self.hinged:
            return hinge_subgradient(self.spec, x, _g=g)
        return g

    def h_eval(self, x) -> tuple[float, np.ndarray]:
        return self.h_value(x), self.h_subgradient(x)

    def psi_value(self, x) -> float:
        h = self.h_value(x)
        return 0.5 * h * h

    def psi_subgradient(self, x) -> np.ndarray:
        return self.h_value(x) * self.h_subgradient(x)

    def psi_minimizer(self) -> np.ndarray:
        """A minimizer of psi.

        When the base optimum is known it also minimizes psi for every
        transform here (h is a nondecreasing function of f on {h > 0}).
        Otherwise a dense scan over [-10, 10] at step 1e-4 (1-d only).
        """
        if self.base.opt_point is not None:
            return np.asarray(self.base.opt_point, dtype=float)
        if self.dim != 1:
            raise ConfigurationError(f"cannot locate the psi minimizer of {self!r}")
        xs = np.linspace(-10.0, 10.0, 200_001)
        vals = np.array([self.psi_value(np.array([x])) for x in xs])
        return np.array([xs[int(np.argmin(vals))]])

    def h_oracle(self) -> FunctionOracle:
        xstar = self.psi_minimizer()
        return FunctionOracle(
            name=f"h[{self.base.name}]",
            dim=self.dim,
            value=self.h_value,
            subgradient=self.h_subgradient,
            opt_value=self.h_value(xstar),
            opt_point=xstar,
            kinks=self.base.kinks,
            subgradient_extremes=self._h_extremes if self.base.subgradient_extremes else None,
        )

    def psi_oracle(self) -> FunctionOracle:
        """psi as a plain oracle, e.g. for the curvature certificates."""
        xstar = self.psi_minimizer()
        return FunctionOracle(
            name=f"psi[{self.base.name}]",
            dim=self.dim,
            value=self.psi_value,
            subgradient=self.psi_subgradient,
            opt_value=self.psi_value(xstar),
            opt_point=xstar,
            kinks=self.base.kinks,
            subgradient_extremes=self._psi_extremes if self.base.subgradient_extremes else None,
        )

    def _h_extremes(self, x):
        f = float(self.base.value(x))
        out = []
        for g in self.base.extremes(x):
            if self.hinged and f <= self.offset:
                g = np.zeros_like(g)
            out.append(g)
        return out

    def _psi_extremes(self, x):
        h = self.h_value(x)
        return [h * g for g in self._h_extremes(x)]


def make_surrogate(spec: SurrogateSpec) -> SurrogateOracle:
    """Build the surrogate oracle; warns if a lower bound exceeds f on a grid."""
    sur = SurrogateOracle(spec)
    if isinstance(spec.transform, LowerBound):
        _warn_if_negative(sur)
    return sur


def _warn_if_negative(sur: SurrogateOracle) -> None:
    base = sur.base
    if base.opt_value is not None:
        bad = base.opt_value < sur.offset
    elif base.dim == 1:
        bad = any(sur.h_value(np.array([x])) < 0 for x in np.linspace(-10, 10, 2001))
    else:
        return
    if bad:
        warnings.warn(
            f"lower bound q={sur.offset} exceeds inf f for {base.name!r}; h can be negative",
            stacklevel=3,
        )


def hinge_subgradient(spec: SurrogateSpec, x, _g=None) -> np.ndarray:
    """Subgradient of ``(f - a)_+``: g if f > a, else the zero vector.

    At f == a the subdifferential is {alpha g : alpha in [0, 1]}; we pick alpha = 0.
    """
    if not isinstance(spec.transform, Hinge):
        raise ConfigurationError("hinge_subgradient needs a Hinge transform")
    x = spec.base.point(x)
    g = np.asarray(spec.base.subgradient(x), dtype=float) if _g is None else _g
    if float(spec.base.value(x)) > spec.transform.level:
        return g
    return np.zeros_like(g)


# ---------------------------------------------------------------------------
# families over finite sums


class SurrogateFamily:
    """Per-component surrogates of a finite-sum problem plus H = E[h]."""

    def __init__(self, name: str, surrogates, weights, opt_point=None, transform_name=""):
        self.name = name
        self.components: tuple[SurrogateOracle, ...] = tuple(surrogates)
        self.weights = np.asarray(weights, dtype=float)
        self.transform_name = transform_name
        self._opt_point = None if opt_point is None else np.atleast_1d(
            np.asarray(opt_point, dtype=float))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def deterministic(self) -> bool:
        return len(self.components) == 1

    def H(self, x) -> float:
        return float(sum(w * s.h_value(x) for w, s in zip(self.weights, self.components)))

    @property
    def opt_point(self) -> np.ndarray:
        if self._opt_point is None:
            self._opt_point = self._scan_H()
        return self._opt_point

    @property
    def H_star(self) -> float:
        return self.H(self.opt_point)

    def _scan_H(self) -> np.ndarray:
        if self.deterministic:
            return self.components[0].psi_minimizer()
        if self.dim != 1:
            raise ConfigurationError(f"cannot locate the minimizer of H for {self.name!r}")
        xs = np.linspace(-10.0, 10.0, 200_001)
        vals = [self.H(np.array([x])) for x in xs]
        return np.array([xs[int(np.argmin(vals))]])


def parse_transform(text: str) -> tuple[str, float | None]:
    """``"hinge:0.5"`` or ``"hinge:a=0.5"`` -> ("hinge", 0.5)."""
    name, _, arg = text.strip().partition(":")
    if not arg:
        return name, None
    _, _, num = arg.rpartition("=")
    try:
        return name, float(num)
    except ValueError as exc:
        raise ConfigurationError(f"bad transform parameter in {text!r}") from exc


TRANSFORM_NAMES = ("shift_opt", "shift_per_component_inf", "sps_plus", "hinge:a", "lower_bound:q")


def build_family(problem: FunctionOracle | StochasticProblem, transform: str = "shift_opt"
                 ) -> SurrogateFamily:
    """Apply a named transform to every component of ``problem``.

    ``shift_opt`` / ``shift_per_component_inf``: h_i = f_i - inf f_i (SPS_max);
    ``sps_plus``: h_i = (f_i - f_i(x*))_+;  ``hinge:a``: h_i = (f_i - a)_+;
    ``lower_bound:q``: h_i = f_i - q.
    """
    name, arg = parse_transform(transform)
    if isinstance(problem, FunctionOracle):
        comps, weights, xstar = (problem,), [1.0], problem.opt_point
    else:
        comps, weights, xstar = problem.components, problem.weights, problem.opt_point

    def spec_for(c: FunctionOracle) -> SurrogateSpec:
        if name in ("shift_opt", "shift_per_component_inf"):
            if c.opt_value is None:
                raise ConfigurationError(f"{c.name!r} has no known infimum")
            return SurrogateSpec(c, ShiftByOpt())
        if name == "sps_plus":
            if xstar is None:
                raise ConfigurationError(f"sps_plus needs the optimum of {problem.name!r}")
            return SurrogateSpec(c, Hinge(float(c.value(c.point(xstar)))))
        if name == "hinge":
            if arg is None:
                raise ConfigurationError("hinge transform needs a level, e.g. hinge:0.5")
            return SurrogateSpec(c, Hinge(arg))
        if name == "lower_bound":
            if arg is None:
                raise ConfigurationError("lower_bound transform needs q, e.g. lower_bound:0")
            return SurrogateSpec(c, LowerBound(arg))
        raise ConfigurationError(
            f"unknown transform {transform!r}; known: {', '.join(TRANSFORM_NAMES)}")

    surrogates = [make_surrogate(spec_for(c)) for c in comps]
    # H = F - const for shifts, and H(x*) = 0 for sps_plus, so F's optimum minimizes H
    known = name in ("shift_opt", "shift_per_component_inf", "lower_bound", "sps_plus")
    opt = xstar if known else None
    if isinstance(problem, FunctionOracle) and opt is None:
        opt = surrogates[0].psi_minimizer()
    return SurrogateFamily(problem.name, surrogates, weights, opt_point=opt,
                           transform_name=transform)


def family_from_h(h: FunctionOracle) -> SurrogateFamily:
    """Treat ``h`` itself as the transformed function (q = 0), as the map T does."""
    sur = make_surrogate(SurrogateSpec(h, LowerBound(0.0)))
    return SurrogateFamily(h.name, [sur], [1.0], opt_point=h.opt_point,
                           transform_name="lower_bound:0")
