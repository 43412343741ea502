"""Update rules and the trajectory runner.

All surrogate-based steppers move along the psi-subgradient ``h(x) * g``
and record ``eta`` as the multiplier of that direction, so that
``x_{t+1} = x_t - eta_t * h_t * g_t`` for every record.  Plain subgradient
descent (``gd``) moves along ``g`` instead; see :attr:`Trajectory.direction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .problems import FunctionOracle, StochasticProblem
from .surrogates import (
    SurrogateFamily,
    SurrogateOracle,
    SurrogateSpec,
    build_family,
    family_from_h,
    make_surrogate,
)

DIVERGENCE_NORM = 1e12


@dataclass
class StepRecord:
    t: int
    x: np.ndarray
    f_val: float
    g: np.ndarray
    eta: float
    h_val: float
    clipped: bool = False
    xi: int = 0  # sampled component; -1 on the terminal record


@dataclass
class Trajectory:
    records: list[StepRecord]
    problem_name: str
    stepper_name: str
    seed: int | None = None
    transform: str = ""
    direction: str = "psi"  # "psi": step along h*g; "grad": step along g
    status: str = "ok"

    def __len__(self):
        return len(self.records)

    @property
    def xs(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def etas(self) -> np.ndarray:
        return np.array([r.eta for r in self.records])


# ---------------------------------------------------------------------------
# single steps


def polyak_step(oracle: FunctionOracle, x) -> np.ndarray:
    """One classic Polyak step ``x - (f(x) - f*) / ||g||^2 * g``; stays put if g = 0."""
    if oracle.opt_value is None:
        raise ConfigurationError(f"Polyak step on {oracle.name!r} needs f*")
    x = oracle.point(x)
    f, g = oracle.eval(x)
    gg = float(g @ g)
    if gg == 0.0:
        return x.copy()
    return x - ((f - oracle.opt_value) / gg) * g


def surrogate_gd_step(surrogate: SurrogateOracle, x) -> np.ndarray:
    """Subgradient step on psi with stepsize 1 / ||g||^2 (g a subgradient of h).

    The scalar ``h / ||g||^2`` is formed before scaling ``g`` so the result is
    bit-identical to :func:`polyak_step` for the ShiftByOpt surrogate.
    """
    x = surrogate.base.point(x)
    h, g = surrogate.h_eval(x)
    gg = float(g @ g)
    if gg == 0.0:
        return x.copy()
    return x - (h / gg) * g


def _gen_step(sur: SurrogateOracle, x, gamma: float, c: float = 1.0):
    h, g = sur.h_eval(x)
    gg = float(g @ g)
    if gg == 0.0:
        return x.copy(), h, g, 0.0, False
    eta = 1.0 / (c * gg)
    if gamma != math.inf and gamma * c * gg < h:
        # eta * h = gamma on the clipped branch
        return x - gamma * g, h, g, gamma / h, True
    # h / (c ||g||^2) first, as in polyak_step, so c = 1 matches it bit for bit
    return x - (h / (c * gg)) * g, h, g, eta, False


def generalized_step(spec: SurrogateSpec | SurrogateOracle, x, gamma: float = math.inf,
                     rng_draw: int = 0, c: float = 1.0, t: int = 1):
    """One step of the generalized Polyak method on the sampled component.

    ``eta = min(1 / (c ||g||^2), gamma / h)`` and ``x' = x - eta * h * g``;
    ``c = 1`` is the method as stated, ``c = 1/2`` the classic SPS scaling.
    ``gamma = inf`` selects the pure ``1/||g||^2`` branch.  Returns
    ``(StepRecord, x_next)``.
    """
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    sur = spec if isinstance(spec, SurrogateOracle) else make_surrogate(spec)
    x = sur.base.point(x)
    x_next, h, g, eta, clipped = _gen_step(sur, x, gamma, c)
    rec = StepRecord(t=t, x=x.copy(), f_val=float(sur.base.value(x)), g=g, eta=eta,
                     h_val=h, clipped=clipped, xi=rng_draw)
    return rec, x_next


def map_T(h_oracle: FunctionOracle, x) -> np.ndarray:
    """``x - h(x) / ||g||^2 * g`` if the subgradient is nonzero, else ``x``."""
    x = h_oracle.point(x)
    h, g = h_oracle.eval(x)
    gg = float(g @ g)
    if gg == 0.0:
        return x.copy()
    return x - (h / gg) * g


def eta_rewrite_check(h_oracle: FunctionOracle, x) -> tuple[float, float]:
    """Stepsize of the map T seen as gradient descent on ``(h - h*)^2 / 2``.

    ``eta_direct`` is measured from the displacement:
    ``||T(x) - x|| / ||(h - h*) g||``.  ``eta_rewritten`` is
    ``h / (h - h*) * 1 / lambda`` with ``lambda = ||g||^2`` the local
    curvature constant of the shifted surrogate.
    """
    if h_oracle.opt_value is None:
        raise ConfigurationError("eta_rewrite_check needs h*")
    x = h_oracle.point(x)
    h, g = h_oracle.eval(x)
    gap = h - h_oracle.opt_value
    gg = float(g @ g)
    if gap <= 0.0 or gg == 0.0:
        raise DomainError(f"rewrite undefined at x={x}: h - h* = {gap}, ||g||^2 = {gg}")
    step = np.linalg.norm(map_T(h_oracle, x) - x)
    eta_direct = float(step / (gap * math.sqrt(gg)))
    eta_rewritten = (h / gap) * (1.0 / gg)
    return eta_direct, eta_rewritten


# ---------------------------------------------------------------------------
# stepper configuration


@dataclass(frozen=True)
class StepperConfig:
    kind: str  # polyak | surrogate_gd | gd | alg1 | map_t
    gamma: float = math.inf
    c: float = 1.0
    eta: float = 0.0
    schedule: str = "constant"  # gd only: constant | sqrt

    @property
    def name(self) -> str:
        if self.kind == "alg1":
            tail = f"gamma={self.gamma!r}" + (f",c={self.c!r}" if self.c != 1.0 else "")
            return f"alg1:{tail}"
        if self.kind == "gd":
            tail = f"eta={self.eta!r}" + (f",schedule={self.schedule}"
                                           if self.schedule != "constant" else "")
            return f"gd:{tail}"
        return self.kind


STEPPER_NAMES = ("polyak", "surrogate_gd", "gd:eta", "alg1:gamma", "map_t")


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, val = part.partition("=")
        out[key.strip() if sep else ""] = val.strip() if sep else key.strip()
    return out


def _float(v: str) -> float:
    return math.inf if v.lower() in ("inf", "infinity") else float(v)


def parse_stepper(text: str) -> StepperConfig:
    """Parse ``polyak``, ``gd:eta=0.1[,schedule=sqrt]``, ``alg1:gamma=0.1[,c=0.5]``, ``map_t``."""
    kind, _, rest = text.strip().partition(":")
    kv = _parse_kv(rest)
    try:
        if kind in ("polyak", "surrogate_gd", "map_t"):
            if kv:
                raise ConfigurationError(f"{kind} takes no parameters")
            return StepperConfig(kind)
        if kind == "gd":
            eta = _float(kv.get("eta", kv.get("", "nan")))
            schedule = kv.get("schedule", "constant")
            if not eta > 0 or schedule not in ("constant", "sqrt"):
                raise ConfigurationError(f"bad gd parameters in {text!r}")
            return StepperConfig("gd", eta=eta, schedule=schedule)
        if kind == "alg1":
            gamma = _float(kv.get("gamma", kv.get("", "inf")))
            c = float(kv.get("c", "1"))
            if not gamma > 0 or not c > 0:
                raise ConfigurationError(f"bad alg1 parameters in {text!r}")
            return StepperConfig("alg1", gamma=gamma, c=c)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse stepper {text!r}") from exc
    raise ConfigurationError(f"unknown stepper {text!r}; known: {', '.join(STEPPER_NAMES)}")


# ---------------------------------------------------------------------------
# runner


def draw_component(seed: int, t: int, weights: np.ndarray) -> int:
    """Counter-based draw keyed by (seed, t): reproducible in any order."""
    if len(weights) == 1:
        return 0
    u = np.random.Generator(np.random.Philox(key=seed, counter=t)).random()
    idx = int(np.searchsorted(np.cumsum(weights), u, side="right"))
    return min(idx, len(weights) - 1)


def _diverged(x: np.ndarray) -> bool:
    return not np.all(np.isfinite(x)) or float(np.linalg.norm(x)) > DIVERGENCE_NORM


def family_for(stepper: StepperConfig | str, problem, transform: str | None = None
               ) -> SurrogateFamily | None:
    """The surrogate family :func:`run` uses for this stepper and problem."""
    cfg = parse_stepper(stepper) if isinstance(stepper, str) else stepper
    if cfg.kind == "map_t":
        return family_from_h(problem)
    if cfg.kind == "gd":
        return None
    stochastic = isinstance(problem, StochasticProblem)
    if cfg.kind in ("polyak", "surrogate_gd") and transform not in (None, "shift_opt"):
        raise ConfigurationError(f"{cfg.kind} only uses the shift_opt transform")
    return build_family(problem, transform or (
        "shift_per_component_inf" if stochastic else "shift_opt"))


def run(stepper: StepperConfig | str, problem: FunctionOracle | StochasticProblem, x1,
        steps: int, seed: int = 0, transform: str | None = None) -> Trajectory:
    """Run ``steps`` iterations from ``x1``; the trajectory has ``steps + 1`` records.

    For stochastic problems the component index at step t is drawn from the
    weights by :func:`draw_component`.  The terminal record carries the
    objective value, ``H`` in ``h_val`` and ``eta = 0``.
    """
    cfg = parse_stepper(stepper) if isinstance(stepper, str) else stepper
    if steps < 1:
        raise ConfigurationError(f"steps must be >= 1, got {steps}")
    stochastic = isinstance(problem, StochasticProblem)
    if stochastic and cfg.kind != "alg1":
        raise ConfigurationError(f"stepper {cfg.kind!r} needs a deterministic problem")

    family = family_for(cfg, problem, transform)

    objective = problem.as_oracle() if stochastic else problem
    x = objective.point(x1).copy()
    records: list[StepRecord] = []
    status = "ok"
    for t in range(1, steps + 1):
        if cfg.kind == "gd":
            f, g = objective.eval(x)
            eta = cfg.eta / math.sqrt(t) if cfg.schedule == "sqrt" else cfg.eta
            h = f - objective.opt_value if objective.opt_value is not None else math.nan
            records.append(StepRecord(t, x.copy(), f, g, eta, h))
            x = x - eta * g
        else:
            xi = draw_component(seed, t, family.weights) if stochastic else 0
            sur = family.components[xi]
            if cfg.kind == "polyak":
                x_next = polyak_step(problem, x)
            elif cfg.kind == "surrogate_gd":
                x_next = surrogate_gd_step(sur, x)
            elif cfg.kind == "map_t":
                x_next = map_T(problem, x)
            if cfg.kind == "alg1":
                x_next, h, g, eta, clipped = _gen_step(sur, x, cfg.gamma, cfg.c)
            else:
                h, g = sur.h_eval(x)
                gg = float(g @ g)
                eta, clipped = (1.0 / gg if gg > 0 else 0.0), False
            f = float(sur.base.value(x)) if not stochastic else objective.value(x)
            records.append(StepRecord(t, x.copy(), f, g, eta, h, clipped, xi))
            x = x_next
        if _diverged(x):
            status = f"aborted at t={t}: iterate {'non-finite' if not np.all(np.isfinite(x)) else 'norm > 1e12'}"
            break
    if status == "ok":
        f, g = objective.eval(x)
        h = family.H(x) if family is not None else (
            f - objective.opt_value if objective.opt_value is not None else math.nan)
        records.append(StepRecord(steps + 1, x.copy(), f, g, 0.0, h, False, -1))
    return Trajectory(
        records=records,
        problem_name=problem.name,
        stepper_name=cfg.name,
        seed=seed if stochastic else None,
        transform="" if family is None else family.transform_name,
        direction="grad" if cfg.kind == "gd" else "psi",
        status=status,
    )

