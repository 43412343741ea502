"""Constructions where the generalized Polyak iteration fails to converge.

* unstable fixed points of the map ``T(x) = x - h(x) / ||g||^2 g`` when
  ``h* > 0``, and the subregion where its stepsize stays bounded;
* the repelling 3-cycle of ``T`` for ``h(x) = x^2 + 1``;
* the preimage tree of ``x* = 0`` for ``h(x) = x^2/2 + a`` (a null set of
  converging starts) and a simulation of random starts;
* the exact two-point random walk of SPS on ``sps_fail``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .exceptions import ConfigurationError
from .problems import FunctionOracle, StochasticProblem, get_problem
from .steppers import StepRecord, Trajectory, _gen_step, map_T, run
from .surrogates import build_family

# ---------------------------------------------------------------------------
# instability regions


@dataclass(frozen=True)
class InstabilityRegion:
    """S = {y != x*: h(y) - h* < threshold} with threshold = c h*."""

    kind: str  # "SelfBoundedQG" or "LipschitzSharp"
    h_star: float
    mu: float
    L: float

    @property
    def c(self) -> float:
        denom = (8.0 if self.kind == "SelfBoundedQG" else 2.0) * self.L - self.mu
        if denom <= 0:
            raise ConfigurationError(f"region constant undefined: denominator {denom}")
        return self.mu / denom

    @property
    def threshold(self) -> float:
        return self.h_star * self.c

    def contains(self, h: FunctionOracle, x) -> bool:
        x = h.point(x)
        if np.array_equal(x, h.opt_point):
            return False
        return float(h.value(x)) - self.h_star < self.threshold


REGION_KINDS = ("SelfBoundedQG", "LipschitzSharp")


def instability_region(h: FunctionOracle, kind: str | None = None,
                       mu: float | None = None, L: float | None = None) -> InstabilityRegion:
    """Region for ``h`` from explicit or declared constants.

    ``SelfBoundedQG`` reads (self_bounded_L, quadratic_growth_mu);
    ``LipschitzSharp`` reads (lipschitz_G, sharp_s).
    """
    if h.opt_value is None or h.opt_point is None:
        raise ConfigurationError(f"{h.name!r}: the region needs x* and h*")
    if h.opt_value <= 0:
        raise ConfigurationError(f"{h.name!r}: h* = {h.opt_value} must be positive")
    dec = h.declared
    if kind is None:
        kind = "SelfBoundedQG" if dec.self_bounded_L is not None else "LipschitzSharp"
    if kind not in REGION_KINDS:
        raise ConfigurationError(f"unknown region kind {kind!r}")
    if kind == "SelfBoundedQG":
        L = dec.self_bounded_L if L is None else L
        mu = dec.quadratic_growth_mu if mu is None else mu
    else:
        L = dec.lipschitz_G if L is None else L
        mu = dec.sharp_s if mu is None else mu
    if L is None or mu is None:
        raise ConfigurationError(f"{h.name!r}: missing constants for {kind}")
    return InstabilityRegion(kind, float(h.opt_value), float(mu), float(L))


def _region_radius(h: FunctionOracle, level: float) -> float:
    """Distance along e1 from x* at which h - h* reaches ``level`` (bisection)."""
    e = np.zeros(h.dim)
    e[0] = 1.0
    gap = lambda r: float(h.value(h.opt_point + r * e)) - h.opt_value  # noqa: E731
    hi = 1.0
    while gap(hi) < level:
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if gap(mid) < level else (lo, mid)
    return hi


def sample_region(h: FunctionOracle, region: InstabilityRegion, n: int = 1000,
                  seed: int = 0) -> np.ndarray:
    """``n`` points of S by rejection from a ball around x*."""
    rng = np.random.default_rng(seed)
    r = 2.0 * _region_radius(h, region.threshold)
    out: list[np.ndarray] = []
    while len(out) < n:
        z = rng.uniform(-r, r, size=(4 * n, h.dim))
        for x in h.opt_point + z:
            if region.contains(h, x):
                out.append(x)
                if len(out) == n:
                    break
    return np.array(out)


@dataclass
class InstabilityReport:
    region: InstabilityRegion
    n_checked: int
    n_skipped: int
    n_expanding: int
    min_ratio: float  # min over samples of |T(x) - x*| / |x - x*|

    @property
    def all_expand(self) -> bool:
        return self.n_checked > 0 and self.n_expanding == self.n_checked


def instability_check(h: FunctionOracle, region: InstabilityRegion, samples) -> InstabilityReport:
    """Check ``|T(x) - x*| > |x - x*|`` for every sample inside S; others are skipped."""
    xs = h.opt_point
    checked = skipped = expanding = 0
    min_ratio = math.inf
    for x in np.asarray(samples, dtype=float).reshape(-1, h.dim):
        if not region.contains(h, x):
            skipped += 1
            continue
        checked += 1
        before = float(np.linalg.norm(x - xs))
        after = float(np.linalg.norm(map_T(h, x) - xs))
        expanding += after > before
        min_ratio = min(min_ratio, after / before)
    return InstabilityReport(region, checked, skipped, expanding, min_ratio)


@dataclass
class QuasiFirmReport:
    n_samples: int
    n_violations: int
    worst_excess: float  # max of |Tx - x*|^2 - (|x - x*|^2 - |Tx - x|^2)
    witness: np.ndarray | None


def quasi_firm_violations(h: FunctionOracle, samples) -> QuasiFirmReport:
    """Count samples where ``|Tx - x*|^2 > |x - x*|^2 - |Tx - x|^2``."""
    xs = h.opt_point
    n = bad = 0
    worst, witness = -math.inf, None
    for x in np.asarray(samples, dtype=float).reshape(-1, h.dim):
        tx = map_T(h, x)
        excess = float((tx - xs) @ (tx - xs)) - float((x - xs) @ (x - xs)) + float(
            (tx - x) @ (tx - x))
        n += 1
        bad += excess > 0
        if excess > worst:
            worst, witness = excess, x.copy()
    return QuasiFirmReport(n, bad, worst, witness)


@dataclass
class BoundedSubregion:
    region: InstabilityRegion
    k: float | None
    description: str
    bound: float
    n_checked: int
    max_stepsize: float

    @property
    def holds(self) -> bool:
        return self.max_stepsize <= self.bound


def bounded_subregion(h: FunctionOracle, region: InstabilityRegion, k: float | None = 2.0,
                      samples=None, n: int = 1000, seed: int = 0) -> BoundedSubregion:
    """Stepsize bound ``h(x) / ||g||^2`` on the part of S away from the boundary.

    QG case: on S minus S_k = {h - h* < (c/k) h*} the bound is 2k(c+1)/(mu c).
    Sharp case: (c+1) h* / mu^2 on all of S (``k`` is ignored).
    """
    c, hs = region.c, region.h_star
    if samples is None:
        samples = sample_region(h, region, n, seed)
    if region.kind == "SelfBoundedQG":
        if k is None or not k > 1:
            raise ConfigurationError(f"k must exceed 1, got {k}")
        bound = 2.0 * k * (c + 1.0) / (region.mu * c)
        inner = (c / k) * hs
        desc = f"S minus {{h - h* < {inner!r}}}"
    else:
        k, inner = None, -math.inf
        bound = (c + 1.0) * hs / region.mu ** 2
        desc = "S"
    checked, worst = 0, 0.0
    for x in np.asarray(samples, dtype=float).reshape(-1, h.dim):
        if not region.contains(h, x):
            continue
        f, g = h.eval(x)
        if f - hs < inner:
            continue
        checked += 1
        worst = max(worst, f / float(g @ g))
    return BoundedSubregion(region, k, desc, bound, checked, worst)


def gap_conditions(f, f_star, c) -> tuple[bool, bool]:
    """``(f - f* < c f*, f - f* < c/(c+1) f)``; equivalent whenever f* > 0 and c > 0.

    Works with any ordered field type, e.g. :class:`fractions.Fraction`.
    """
    gap = f - f_star
    return gap < c * f_star, gap < c / (c + 1) * f


def gap_equivalence_check(n: int = 1000, seed: int = 0) -> int:
    """Number of random (f, f*, c) triples where the two conditions disagree."""
    rng = np.random.default_rng(seed)
    f_star = rng.uniform(0.01, 10.0, n)
    c = rng.uniform(0.01, 5.0, n)
    f = f_star * (1.0 + rng.uniform(0.0, 2.0, n) * c)
    return sum(a != b for a, b in (gap_conditions(*t) for t in zip(f, f_star, c)))


# ---------------------------------------------------------------------------
# 3-cycle


CYCLE_PROBLEM = "cycle_quad"


def cycle_points(dps: int | None = None):
    """(cot(pi/7), cot(2pi/7), cot(4pi/7)) as floats, or mpf at ``dps`` digits."""
    if dps is None:
        return tuple(1.0 / math.tan(k * math.pi / 7.0) for k in (1, 2, 4))
    with mpmath.workdps(dps):
        return tuple(mpmath.cot(k * mpmath.pi / 7) for k in (1, 2, 4))


@dataclass
class CycleReport:
    precision: str
    xs: np.ndarray  # x_1 .. x_{steps+1} as floats
    avg_gaps: np.ndarray  # h(mean(x_1..x_t)) - h*, t = 1..steps
    closure_error: float  # |x_4 - x_1|
    multiplier: float  # product of |T'(x_i)| over the first period
    trajectory: Trajectory = field(repr=False, default=None)

    @property
    def min_avg_gap(self) -> float:
        return float(self.avg_gaps.min())


EXTENDED_DPS = 100


def run_cycle(precision: str = "double", steps: int | None = None) -> CycleReport:
    """Iterate T on h(x) = x^2 + 1 from cot(pi/7).

    ``extended`` evaluates the map in mpmath at 100 digits: the cycle
    expands errors by about 8 per period, so 200 steps need roughly 60
    more digits than double precision offers.
    """
    h = get_problem(CYCLE_PROBLEM)
    if precision == "double":
        steps = 36 if steps is None else steps
        traj = run("map_t", h, cycle_points()[0], steps)
        xs = traj.xs[:, 0]
    elif precision == "extended":
        steps = 200 if steps is None else steps
        with mpmath.workdps(EXTENDED_DPS):
            x = cycle_points(EXTENDED_DPS)[0]
            seq = [x]
            for _ in range(steps):
                x = x - (x * x + 1) / (2 * x)
                seq.append(x)
            run_sum = mpmath.mpf(0)
            gaps = []
            for t, v in enumerate(seq[:-1], start=1):
                run_sum += v
                gaps.append(float((run_sum / t) ** 2))
        xs = np.array([float(v) for v in seq])
        records = [StepRecord(t, np.array([v]), v * v + 1.0, np.array([2.0 * v]),
                              1.0 / (4.0 * v * v), v * v + 1.0)
                   for t, v in enumerate(xs, start=1)]
        records[-1].eta, records[-1].xi = 0.0, -1
        traj = Trajectory(records, h.name, "map_t[mp]", transform="lower_bound:0")
    else:
        raise ConfigurationError(f"precision must be 'double' or 'extended', got {precision!r}")
    if precision == "double":
        means = np.cumsum(xs[:-1]) / np.arange(1, steps + 1)
        gaps = means ** 2  # h(m) - h* = m^2
    mult = float(np.prod([(v * v + 1.0) / (2.0 * v * v) for v in xs[:3]]))
    closure = abs(xs[3] - xs[0]) if len(xs) > 3 else math.nan
    return CycleReport(precision, xs, np.asarray(gaps), float(closure), mult, traj)


# ---------------------------------------------------------------------------
# preimage tree and random starts


@dataclass
class PreimageTree:
    a: float
    levels: list[np.ndarray]

    @property
    def sizes(self) -> list[int]:
        return [len(lv) for lv in self.levels]

    def symmetric(self, tol: float = 1e-9) -> bool:
        return all(np.allclose(np.sort(lv), -np.sort(lv)[::-1], rtol=tol, atol=tol)
                   for lv in self.levels)

    def max_residual(self) -> float:
        """max |T(y) - parent(y)| relative to max(1, |parent|) over all levels."""
        worst = 0.0
        for parent, child in zip(self.levels[:-1], self.levels[1:]):
            p = np.repeat(parent, 2)
            ty = child / 2.0 - self.a / child
            worst = max(worst, float(np.max(np.abs(ty - p) / np.maximum(1.0, np.abs(p)))))
        return worst


MAX_DEPTH = 30


def preimage_roots(y: np.ndarray, a: float) -> np.ndarray:
    """Both solutions of x/2 - a/x = y, interleaved; the small root avoids cancellation."""
    y = np.asarray(y, dtype=float)
    r = np.sqrt(y * y + 2.0 * a)
    big = np.where(y >= 0, y + r, y - r)
    small = -2.0 * a / big
    out = np.empty(2 * len(y))
    out[0::2] = np.maximum(big, small)
    out[1::2] = np.minimum(big, small)
    return out


def preimage_tree(a: float, depth: int) -> PreimageTree:
    """Levels {0}, T^-1{0} minus {0}, ... for T(x) = x/2 - a/x (h = x^2/2 + a)."""
    if not a > 0:
        raise ConfigurationError(f"a must be positive, got {a}")
    if not 0 <= depth <= MAX_DEPTH:
        raise ConfigurationError(f"depth must be in [0, {MAX_DEPTH}], got {depth}")
    levels = [np.zeros(1)]
    for _ in range(depth):
        levels.append(preimage_roots(levels[-1], a))
    return PreimageTree(float(a), levels)


@dataclass
class NonconvergenceReport:
    a: float
    n_starts: int
    steps: int
    delta: float
    n_converged: int  # stayed within delta of x* for the whole tail window
    tail_min: np.ndarray = field(repr=False)  # per start, min |x_t| over the tail

    @property
    def frac_tail_min_above_delta(self) -> float:
        return float(np.mean(self.tail_min > self.delta))


def nonconvergence_sim(a: float = 0.5, n_starts: int = 10_000, steps: int = 10_000,
                       delta: float = 1e-3, seed: int = 0, lo: float = -10.0,
                       hi: float = 10.0, tail_frac: float = 0.1) -> NonconvergenceReport:
    """Iterate T(x) = x/2 - a/x from uniform random starts, vectorized over starts.

    A start counts as converged when |x_t| < delta at every step of the final
    ``tail_frac`` of the run; visiting the neighbourhood is not convergence.
    """
    x = np.random.default_rng(seed).uniform(lo, hi, n_starts)
    tail_start = steps - max(1, int(round(tail_frac * steps)))
    inside = np.ones(n_starts, dtype=bool)
    tail_min = np.full(n_starts, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(steps):
            x = np.where(x == 0.0, 0.0, 0.5 * x - a / x)  # g = 0 only at x* itself: stay
            if t >= tail_start:
                ax = np.abs(x)
                inside &= ax < delta
                np.minimum(tail_min, ax, out=tail_min)
    return NonconvergenceReport(a, n_starts, steps, delta, int(inside.sum()), tail_min)


# ---------------------------------------------------------------------------
# exact Markov chain


@dataclass
class MarkovChainState:
    step: int
    support: np.ndarray
    probs: np.ndarray
    expected_F: float
    gap: float
    exact: bool = True

    def __post_init__(self):
        if abs(float(np.sum(self.probs)) - 1.0) > 1e-9:
            raise ConfigurationError(f"probabilities sum to {np.sum(self.probs)}")


MERGE_TOL = 1e-12
SUPPORT_CAP = 10_000


def _merge(points: np.ndarray, probs: np.ndarray, tol: float = MERGE_TOL):
    order = np.argsort(points, kind="stable")
    pts, pr = points[order], probs[order]
    keep_p, keep_w = [pts[0]], [pr[0]]
    for p, w in zip(pts[1:], pr[1:]):
        if abs(p - keep_p[-1]) <= tol:
            keep_w[-1] += w
        else:
            keep_p.append(p)
            keep_w.append(w)
    return np.array(keep_p), np.array(keep_w)


def exact_sps_chain(problem: StochasticProblem | str, x1: float, T: int, c: float = 0.5,
                    gamma: float = math.inf, cap: int = SUPPORT_CAP,
                    mc_samples: int = 10_000, seed: int = 0) -> list[MarkovChainState]:
    """Evolve the exact law of x_t under SPS with h_i = f_i - inf f_i, t = 1..T.

    ``c = 1/2`` gives the classic SPS stepsize ``(f_i - inf f_i) / (c ||g||^2)``.
    If the support outgrows ``cap`` the chain continues by Monte Carlo
    with ``mc_samples`` particles and a warning.
    """
    if isinstance(problem, str):
        problem = get_problem(problem)
    if not isinstance(problem, StochasticProblem) or problem.dim != 1:
        raise ConfigurationError("exact_sps_chain needs a 1-d finite-sum problem")
    family = build_family(problem, "shift_per_component_inf")
    F = problem.value
    F_star = problem.opt_value if problem.opt_value is not None else F(family.opt_point)
    w = problem.weights

    def step_point(x: float, i: int) -> float:
        return float(_gen_step(family.components[i], np.array([x]), gamma, c)[0][0])

    support, probs = np.array([float(x1)]), np.array([1.0])
    states: list[MarkovChainState] = []
    particles = None
    rng = np.random.default_rng(seed)
    for t in range(1, T + 1):
        if particles is None:
            e = float(np.dot(probs, [F(np.array([x])) for x in support]))
            states.append(MarkovChainState(t, support, probs, e, e - F_star))
            nxt = np.array([step_point(x, i) for x in support for i in range(len(w))])
            pr = np.array([p * wi for p in probs for wi in w])
            support, probs = _merge(nxt, pr)
            if len(support) > cap:
                warnings.warn(f"support exceeded {cap} points at t={t + 1}; "
                              f"switching to Monte Carlo with {mc_samples} samples",
                              stacklevel=2)
                particles = rng.choice(support, size=mc_samples, p=probs / probs.sum())
        else:
            vals = np.array([F(np.array([x])) for x in particles])
            e = float(vals.mean())
            uniq, counts = np.unique(particles, return_counts=True)
            states.append(MarkovChainState(t, uniq, counts / counts.sum(), e, e - F_star,
                                           exact=False))
            idx = rng.choice(len(w), size=len(particles), p=w)
            particles = np.array([step_point(x, i) for x, i in zip(particles, idx)])
    return states


def chain_table(states: Sequence[MarkovChainState]) -> np.ndarray:
    """Rows (t, E[F(x_t)], gap, support size)."""
    return np.array([[s.step, s.expected_F, s.gap, len(s.support)] for s in states])
