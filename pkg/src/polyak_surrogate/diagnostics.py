"""Certificates for function-class inequalities and audits of run bounds.

A certificate evaluates the pointwise slack of an inequality on a sample
grid and keeps the most violated point.  Positive slack means the
inequality holds there; a certificate holds when the worst slack is at
least ``-TOL``.

Audits replay a :class:`~polyak_surrogate.steppers.Trajectory` against the
one-step inequalities and the convergence-rate bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .exceptions import ConfigurationError
from .problems import FunctionOracle
from .steppers import Trajectory, parse_stepper
from .surrogates import SurrogateFamily, SurrogateOracle

TOL = 1e-9
LEDGER_TOL = 1e-10


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid:
    points: np.ndarray  # (n, dim)
    description: str


def standard_grid(oracle: FunctionOracle, lo: float = -10.0, hi: float = 10.0,
                  step: float = 1e-2, n_ball: int = 10_000, radius: float = 10.0) -> Grid:
    """Default sample set for certificates.

    1-d: a regular grid on [lo, hi]; points within 1e-9 of a kink are
    replaced by the kink itself, where every extreme subgradient is tested.
    d > 1: ``n_ball`` Halton points in the ball of ``radius`` around x*.
    """
    if oracle.dim == 1:
        n = int(round((hi - lo) / step)) + 1
        xs = np.linspace(lo, hi, n)
        for k in oracle.kinks:
            xs = xs[np.abs(xs - k) > 1e-9]
        kinks = [k for k in oracle.kinks if lo <= k <= hi]
        xs = np.sort(np.concatenate([xs, kinks]))
        return Grid(xs.reshape(-1, 1), f"1d[{lo},{hi}] step {step}")
    return ball_grid(oracle, n_ball, radius)


def ball_grid(oracle: FunctionOracle, n: int = 10_000, radius: float = 10.0) -> Grid:
    center = np.zeros(oracle.dim) if oracle.opt_point is None else oracle.opt_point
    d = oracle.dim
    sampler = qmc.Halton(d=d, scramble=False)
    pts = np.empty((0, d))
    while len(pts) < n:
        cube = 2.0 * sampler.random(4 * n) - 1.0
        pts = np.vstack([pts, cube[np.einsum("ij,ij->i", cube, cube) <= 1.0]])
    return Grid(center + radius * pts[:n], f"halton ball r={radius} n={n} d={d}")


def grid_1d(lo: float, hi: float, step: float, kinks: Sequence[float] = ()) -> Grid:
    fake = FunctionOracle("grid", 1, lambda x: 0.0, lambda x: x, kinks=tuple(kinks))
    return standard_grid(fake, lo, hi, step)


def _as_grid(oracle: FunctionOracle, grid) -> Grid:
    if grid is None:
        return standard_grid(oracle)
    if isinstance(grid, Grid):
        return grid
    return Grid(np.asarray(grid, dtype=float).reshape(-1, oracle.dim), "custom")


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    property: str
    constants: dict
    sample_count: int
    worst_margin: float
    witness: np.ndarray
    tol: float = TOL
    points: np.ndarray = field(default=None, repr=False)
    margins: np.ndarray = field(default=None, repr=False)
    # margins divided by ||x - x*||^degree, so the witness does not drift to the grid edge
    scaled_worst_margin: float | None = None
    scaled_witness: np.ndarray | None = None
    grid: str = ""

    @property
    def holds(self) -> bool:
        return self.worst_margin >= -self.tol

    def to_dict(self) -> dict:
        out = {
            "property": self.property,
            "constants": self.constants,
            "grid": self.grid,
            "sample_count": self.sample_count,
            "worst_margin": self.worst_margin,
            "witness": self.witness.tolist(),
            "holds": self.holds,
            "tol": self.tol,
        }
        if self.scaled_witness is not None:
            out["scaled_worst_margin"] = self.scaled_worst_margin
            out["scaled_witness"] = self.scaled_witness.tolist()
        return out


MarginFn = Callable[[np.ndarray, float, np.ndarray], float]


def _certify(oracle: FunctionOracle, grid, name: str, constants: dict, margin: MarginFn,
             degree: int = 0) -> Certificate:
    grid = _as_grid(oracle, grid)
    kinks = set(oracle.kinks) if oracle.dim == 1 else set()
    pts, vals = [], []
    for x in grid.points:
        f = float(oracle.value(x))
        gs = oracle.extremes(x) if (kinks and float(x[0]) in kinks) else [
            np.asarray(oracle.subgradient(x), dtype=float)]
        for g in gs:
            pts.append(x)
            vals.append(margin(x, f, g))
    pts = np.array(pts)
    vals = np.array(vals, dtype=float)
    i = int(np.argmin(vals))
    cert = Certificate(name, constants, len(vals), float(vals[i]), pts[i].copy(),
                       points=pts, margins=vals, grid=grid.description)
    if degree and oracle.opt_point is not None:
        dist = np.linalg.norm(pts - oracle.opt_point, axis=1)
        scaled = np.where(dist > 0, vals / np.where(dist > 0, dist, 1.0) ** degree, vals)
        j = int(np.argmin(scaled))
        cert.scaled_worst_margin = float(scaled[j])
        cert.scaled_witness = pts[j].copy()
    return cert


def _need_opt(f: FunctionOracle, what: str):
    if f.opt_value is None or f.opt_point is None:
        raise ConfigurationError(f"{what} on {f.name!r} needs the optimum point and value")


def _quad_term(gg: float, lam: float) -> float:
    if gg == 0.0:
        return 0.0
    return gg / (2.0 * lam) if lam > 0 else math.inf


def check_lsuc(f: FunctionOracle, lambda_rule, grid=None) -> Certificate:
    """Local star upper curvature: f(x*) - f(y) - <g, x* - y> >= ||g||^2 / (2 lambda_y).

    ``lambda_rule`` is a constant or a callable ``(y, g) -> lambda_y``.
    """
    _need_opt(f, "check_lsuc")
    rule = (lambda y, g: float(lambda_rule)) if not callable(lambda_rule) else lambda_rule
    fs, xs = f.opt_value, f.opt_point

    def margin(y, fy, g):
        gg = float(g @ g)
        return fs - fy - float(g @ (xs - y)) - _quad_term(gg, rule(y, g))

    consts = {"lambda": lambda_rule} if not callable(lambda_rule) else {"lambda": "rule"}
    return _certify(f, grid, "LSUC", consts, margin, degree=2)


def surrogate_curvature_rule(sur: SurrogateOracle):
    """lambda_y = ||g_y||^2 for g_y the h-subgradient paired with the psi-subgradient."""
    def rule(y, g_psi):
        h = sur.h_value(y)
        return float(g_psi @ g_psi) / (h * h) if h != 0 else 0.0
    return rule


def check_approx_lsuc(psi: SurrogateOracle, grid=None) -> Certificate:
    """Approximate LSUC of psi = h^2/2 with lambda = ||g||^2 and
    eps = 2 sqrt(psi(y) psi(x*)) - psi(x*)."""
    xs = psi.psi_minimizer()
    h_star = psi.h_value(xs)
    psi_star = 0.5 * h_star * h_star
    base = psi.base
    h_oracle = psi.h_oracle()

    def margin(y, _f, g):
        h = psi.h_value(y)
        gt = h * g
        bregman = psi_star - 0.5 * h * h - float(gt @ (xs - y))
        quad = 0.5 * h * h if float(g @ g) > 0 else 0.0
        eps = h * h_star - psi_star
        return bregman - quad + eps

    oracle = FunctionOracle(f"psi[{base.name}]", base.dim, h_oracle.value, h_oracle.subgradient,
                            opt_value=psi_star, opt_point=xs, kinks=base.kinks,
                            subgradient_extremes=h_oracle.subgradient_extremes)
    return _certify(oracle, grid if grid is not None else standard_grid(base),
                    "ApproxLSUC", {"lambda": "||g||^2", "eps": "2sqrt(psi psi*)-psi*"},
                    margin, degree=2)


def check_self_bounded(f: FunctionOracle, L: float, grid=None) -> Certificate:
    """||g||^2 <= 2 L (f(x) - inf f)."""
    if f.opt_value is None:
        raise ConfigurationError(f"self-boundedness of {f.name!r} needs inf f")
    fs = f.opt_value
    return _certify(f, grid, "SelfBounded", {"L": L},
                    lambda x, fx, g: 2.0 * L * (fx - fs) - float(g @ g), degree=2)


def check_lipschitz(f: FunctionOracle, G: float, grid=None) -> Certificate:
    """Every sampled subgradient has norm at most G."""
    return _certify(f, grid, "Lipschitz", {"G": G},
                    lambda x, fx, g: G - float(np.linalg.norm(g)))


def check_sharp(f: FunctionOracle, s: float, grid=None) -> Certificate:
    _need_opt(f, "check_sharp")
    fs, xs = f.opt_value, f.opt_point
    return _certify(f, grid, "Sharp", {"s": s},
                    lambda x, fx, g: fx - fs - s * float(np.linalg.norm(x - xs)), degree=1)


def check_qg(f: FunctionOracle, mu: float, grid=None) -> Certificate:
    _need_opt(f, "check_qg")
    fs, xs = f.opt_value, f.opt_point
    return _certify(f, grid, "QuadGrowth", {"mu": mu},
                    lambda x, fx, g: fx - fs - 0.5 * mu * float((x - xs) @ (x - xs)), degree=2)


def check_qg_plus(f: FunctionOracle, L: float, grid=None) -> Certificate:
    """f(x) - f* <= (L/2) dist(x, X*)^2 with dist measured to the declared optimum."""
    _need_opt(f, "check_qg_plus")
    fs, xs = f.opt_value, f.opt_point
    return _certify(f, grid, "QGPlus", {"L": L},
                    lambda x, fx, g: 0.5 * L * float((x - xs) @ (x - xs)) - (fx - fs), degree=2)


def _inv_power(nu: float, p: float) -> float:
    """(1 + 1/nu)^p, evaluated in logs so tiny nu does not overflow; 1 at nu = 0."""
    if nu == 0:
        return 1.0
    return math.exp(p * (math.log1p(nu) - math.log(nu)))


def holder_K(L_nu: float, nu: float) -> float:
    """(1 + 1/nu)^(2 nu / (1 + nu)) * L_nu^(2 / (1 + nu)); the nu -> 0 limit is L_0^2."""
    return _inv_power(nu, 2.0 * nu / (1.0 + nu)) * L_nu ** (2.0 / (1.0 + nu))


def check_holder(f: FunctionOracle, L_nu: float, nu: float, grid=None) -> Certificate:
    """Hoelder-self-bounded: ||g||^2 <= K(L_nu, nu) (f(x) - f*)^(2 nu / (1 + nu))."""
    if f.opt_value is None:
        raise ConfigurationError(f"Hoelder check on {f.name!r} needs f*")
    K = holder_K(L_nu, nu)
    p = 2.0 * nu / (1.0 + nu)
    fs = f.opt_value
    return _certify(f, grid, "Holder", {"L_nu": L_nu, "nu": nu},
                    lambda x, fx, g: K * max(fx - fs, 0.0) ** p - float(g @ g))


def check_surrogate_local_qg(f: FunctionOracle, mu: float, L: float, grid=None) -> Certificate:
    """phi(x) >= (1/2) (mu ||g||^2 / (2L)) ||x - x*||^2 for phi = (f - f*)^2 / 2."""
    _need_opt(f, "check_surrogate_local_qg")
    fs, xs = f.opt_value, f.opt_point

    def margin(x, fx, g):
        d2 = float((x - xs) @ (x - xs))
        return 0.5 * (fx - fs) ** 2 - 0.5 * mu * float(g @ g) / (2.0 * L) * d2

    return _certify(f, grid, "SurrogateLocalQG", {"mu": mu, "L": L}, margin)


@dataclass
class EquivalenceReport:
    qg_plus: Certificate
    lsuc: Certificate
    backward: Certificate

    @property
    def forward_holds(self) -> bool:
        """The implication QG+(L) => LSUC(L) is not contradicted on the grid."""
        return (not self.qg_plus.holds) or self.lsuc.holds

    @property
    def worst_margin(self) -> float:
        return min(self.qg_plus.worst_margin, self.lsuc.worst_margin,
                   self.backward.worst_margin)

    @property
    def holds(self) -> bool:
        """Both properties hold at L and the pointwise backward bound holds."""
        return self.qg_plus.holds and self.lsuc.holds and self.backward.holds


def check_lsuc_qgplus_equivalence(f: FunctionOracle, L: float, grid=None,
                                  lambda_rule=None) -> EquivalenceReport:
    """Numerically confirm both directions linking QG+ and star upper curvature.

    Forward: QG+(L) on the grid implies LSUC with lambda = L on the grid.
    Backward: wherever LSUC holds with lambda_x (default: the tightest
    pointwise value ||g||^2 / (2 D_f(x*, x))), f(x) - f* <= lambda_x/2 ||x - x*||^2.
    """
    _need_opt(f, "equivalence check")
    qgp = check_qg_plus(f, L, grid)
    lsuc = check_lsuc(f, L, grid)
    fs, xs = f.opt_value, f.opt_point

    def tightest(y, g):
        bregman = fs - float(f.value(y)) - float(g @ (xs - y))
        gg = float(g @ g)
        return gg / (2.0 * bregman) if bregman > 0 else math.inf

    rule = tightest if lambda_rule is None else (
        lambda_rule if callable(lambda_rule) else (lambda y, g: float(lambda_rule)))

    def margin(y, fy, g):
        lam = rule(y, g)
        gg = float(g @ g)
        lsuc_slack = fs - fy - float(g @ (xs - y)) - _quad_term(gg, lam)
        if gg == 0.0 or not math.isfinite(lam) or lsuc_slack < -TOL:
            return math.inf  # premise fails or is vacuous: nothing to check
        return 0.5 * lam * float((y - xs) @ (y - xs)) - (fy - fs)

    back = _certify(f, grid, "LSUC=>QGPlus", {"lambda": "pointwise"}, margin)
    return EquivalenceReport(qgp, lsuc, back)


# ---------------------------------------------------------------------------
# one-step ledger


@dataclass
class BoundLedger:
    kind: str  # "exact" or "approximate"
    left: np.ndarray
    right: np.ndarray
    cumulative_left: float
    cumulative_right: float
    initial_half_dist2: float

    @property
    def slack(self) -> np.ndarray:
        return self.right - self.left

    @property
    def worst_slack(self) -> float:
        return float(self.slack.min()) if len(self.slack) else math.inf

    @property
    def rows_ok(self) -> bool:
        return bool(np.all(self.slack >= -LEDGER_TOL))

    @property
    def cumulative_ok(self) -> bool:
        return self.cumulative_left <= self.cumulative_right + LEDGER_TOL

    @property
    def satisfied(self) -> bool:
        return self.rows_ok and self.cumulative_ok


def audit_one_step(traj: Trajectory, family: SurrogateFamily) -> BoundLedger:
    """Replay each step against the one-step inequality with approximation slack.

    Row t checks
    ``eta (psi_t(x_t) - psi_t(x*)) <= |x_t-x*|^2/2 - |x_{t+1}-x*|^2/2
    + eta/2 (eta - 1/lambda) |h g|^2 + eta eps_t``
    with ``lambda = ||g||^2`` and ``eps_t = h_t(x_t) h_t(x*) - h_t(x*)^2/2``.
    When every psi_t(x*) is zero the extra terms vanish for unclipped
    steps and the row is the exact per-step inequality; the cumulative
    check is then ``sum eta psi(x_t) <= |x_1 - x*|^2 / 2``.
    """
    if traj.direction != "psi":
        raise ConfigurationError("one-step ledger needs a surrogate-based trajectory")
    if traj.problem_name != family.name or (
            traj.transform and traj.transform != family.transform_name):
        raise ConfigurationError(
            f"trajectory ({traj.problem_name}, {traj.transform}) does not match "
            f"surrogate family ({family.name}, {family.transform_name})")
    xs = family.opt_point
    h_stars = [s.h_value(xs) for s in family.components]
    exact = all(hs == 0.0 for hs in h_stars)
    recs = traj.records
    left, right, extras = [], [], []
    for cur, nxt in zip(recs[:-1], recs[1:]):
        eta, h, g = cur.eta, cur.h_val, cur.g
        hs = h_stars[cur.xi]
        gg = float(g @ g)
        d0 = float((cur.x - xs) @ (cur.x - xs))
        d1 = float((nxt.x - xs) @ (nxt.x - xs))
        left.append(eta * (0.5 * h * h - 0.5 * hs * hs))
        extra = 0.5 * eta * (eta * gg - 1.0) * h * h if gg > 0 else 0.0
        extra += eta * (h * hs - 0.5 * hs * hs)
        extras.append(extra)
        right.append(0.5 * d0 - 0.5 * d1 + extra)
    left, right = np.array(left), np.array(right)
    half_d1 = 0.5 * float((recs[0].x - xs) @ (recs[0].x - xs))
    # telescoped sum with the final distance dropped
    cum_right = half_d1 + float(np.sum(extras))
    return BoundLedger("exact" if exact else "approximate", left, right,
                       float(left.sum()), cum_right, half_d1)


# ---------------------------------------------------------------------------
# rate audits


@dataclass
class RateReport:
    regime: str
    constants: dict
    horizons: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    holds: bool
    details: dict = field(default_factory=dict)
    band: np.ndarray | float = 0.0  # 3 standard errors for seed averages

    @property
    def violations(self) -> int:
        return int(np.sum(self.measured > self.bound + self.band + LEDGER_TOL))

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "constants": {k: (v if math.isfinite(v) else str(v)) for k, v in self.constants.items()},
            "T": int(self.horizons[-1]),
            "measured_final": float(self.measured[-1]),
            "bound_final": float(self.bound[-1]),
            "holds": self.holds,
            "details": {k: v for k, v in self.details.items() if np.isscalar(v)},
        }


DETERMINISTIC_REGIMES = ("lipschitz", "self_bounded", "sharp", "holder")
STOCHASTIC_REGIMES = ("alg1_self_bounded", "alg1_lipschitz", "alg1_linear", "holder",
                      "sps_plus_self_bounded")
REGIMES = tuple(dict.fromkeys(DETERMINISTIC_REGIMES + STOCHASTIC_REGIMES))


def holder_Q(y, L_nu: float, nu: float, gamma: float):
    """Q(y) = 2y + L_nu (2 gamma y)^((1+nu)/2) (1 + 1/nu)^nu  (nu -> 0 limit factor 1)."""
    y = np.asarray(y, dtype=float)
    factor = _inv_power(nu, nu)
    return 2.0 * y + L_nu * (2.0 * gamma * y) ** ((1.0 + nu) / 2.0) * factor


def holder_C_inverse(y, L_nu: float, nu: float, gamma: float):
    """Exact inverse of C(x) = min(x, x^(2/(1+nu)) / (gamma K)) / 2."""
    y = np.asarray(y, dtype=float)
    gk = gamma * holder_K(L_nu, nu)
    if nu == 1.0:
        return 2.0 * y * max(1.0, gk)
    x0 = gk ** ((1.0 + nu) / (1.0 - nu))
    return np.where(2.0 * y >= x0, 2.0 * y, (2.0 * gk * y) ** ((1.0 + nu) / 2.0))


def self_bounded_average_bound(y, L: float, gamma: float):
    """Averaged self-bounded bound on (1/T) sum E[H], written through y = D^2/(T gamma) + 2 H*."""
    return gamma * np.asarray(y, dtype=float) / min(1.0 / (2.0 * L), gamma)


def _declared(family: SurrogateFamily, attr: str):
    vals = [getattr(s.base.declared, attr) for s in family.components]
    if any(v is None for v in vals):
        return None
    if attr in ("sharp_s", "quadratic_growth_mu"):
        return min(vals)
    return max(vals)


_DECLARED_ATTR = {"G": "lipschitz_G", "L": "self_bounded_L", "s": "sharp_s",
                  "mu": "quadratic_growth_mu"}


def _constants(regime: str, family: SurrogateFamily, given: dict, names: Sequence[str]) -> dict:
    out = {}
    shift_like = family.transform_name.split(":")[0] in (
        "shift_opt", "shift_per_component_inf", "lower_bound")
    for n in names:
        if n in given and given[n] is not None:
            out[n] = float(given[n])
            continue
        v = None
        if n in _DECLARED_ATTR and shift_like and not (n == "mu" and not family.deterministic):
            v = _declared(family, _DECLARED_ATTR[n])
        if n in ("L_nu", "nu") and shift_like and family.deterministic:
            hol = family.components[0].base.declared.holder
            if hol is not None:
                v = hol[0] if n == "L_nu" else hol[1]
        if v is None:
            raise ConfigurationError(f"regime {regime!r} needs constant {n!r}")
        out[n] = float(v)
    return out


def _prefix_average(traj: Trajectory, family: SurrogateFamily):
    """Per horizon T: phi at the eta-weighted average and at the best iterate."""
    recs = traj.records[:-1]
    sur = family.components[0]
    x_avg, best = [], []
    num = np.zeros(family.dim)
    den = 0.0
    stay = None
    best_val = math.inf
    for r in recs:
        gg = float(r.g @ r.g)
        if gg == 0.0 and stay is None:
            stay = r.x  # a minimizer: lambda -> 0 so its weight dominates
        if gg > 0:
            num += r.eta * r.x
            den += r.eta
        xbar = stay if stay is not None else num / den
        x_avg.append(sur.psi_value(xbar))
        best_val = min(best_val, sur.psi_value(r.x))
        best.append(best_val)
    return np.array(x_avg), np.array(best)


def _mean_se(rows: np.ndarray):
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(len(rows)) if len(rows) > 1 else np.zeros_like(mean)
    return mean, se


def audit_rates(trajectories: Trajectory | Sequence[Trajectory], regime: str,
                family: SurrogateFamily, **constants) -> RateReport:
    """Compare measured progress against a convergence bound at every horizon.

    Deterministic regimes (``lipschitz``, ``self_bounded``, ``sharp``) use a
    single trajectory and bound phi at the eta-weighted average iterate and
    at the best iterate.  Stochastic regimes take one trajectory per seed,
    evaluate ``H`` exactly and accept when ``mean <= bound + 3 * SE``.
    """
    trajs = [trajectories] if isinstance(trajectories, Trajectory) else list(trajectories)
    if not trajs:
        raise ConfigurationError("audit_rates needs at least one trajectory")
    if regime not in REGIMES:
        raise ConfigurationError(f"unknown regime {regime!r}; known: {', '.join(REGIMES)}")
    for tr in trajs:
        if tr.status != "ok":
            raise ConfigurationError(f"cannot audit an aborted run: {tr.status}")
    if constants.get("gamma") is None and trajs[0].stepper_name.startswith("alg1"):
        constants["gamma"] = parse_stepper(trajs[0].stepper_name).gamma
    xs = family.opt_point
    x1 = trajs[0].records[0].x
    D2 = float((x1 - xs) @ (x1 - xs))
    T = len(trajs[0].records) - 1
    Ts = np.arange(1, T + 1, dtype=float)

    if regime in ("lipschitz", "self_bounded"):
        tr = trajs[0]
        c = _constants(regime, family, constants, ["G"] if regime == "lipschitz" else ["L"])
        avg, best = _prefix_average(tr, family)
        measured = np.maximum(avg, best)
        if regime == "lipschitz":
            bound = c["G"] ** 2 * D2 / (2.0 * Ts)
        else:
            bound = 4.0 * c["L"] ** 2 * D2 * D2 / Ts ** 2
        holds = bool(np.all(measured <= bound + LEDGER_TOL))
        return RateReport(regime, c, Ts, measured, bound, holds,
                          {"phi_avg_final": float(avg[-1]), "phi_best_final": float(best[-1])})

    if regime == "sharp":
        tr = trajs[0]
        c = _constants(regime, family, constants, ["s", "G"])
        rho = 1.0 - c["s"] ** 2 / c["G"] ** 2
        d2 = np.array([float((r.x - xs) @ (r.x - xs)) for r in tr.records])
        ts = np.arange(len(d2), dtype=float)  # exponent t - 1 for record t
        bound = rho ** ts * D2
        holds = bool(np.all(d2 <= bound * (1 + 1e-12) + LEDGER_TOL * 1e-2))
        return RateReport(regime, c, ts + 1, d2, bound, holds, {"rho": rho})

    # expectation regimes: one row per seed
    H = np.array([[family.H(r.x) for r in tr.records] for tr in trajs])  # (seeds, T+1)
    H_star = family.H_star
    details: dict = {"seeds": len(trajs), "H_star": H_star}

    if regime == "holder":
        if constants.get("gamma") is None and trajs[0].stepper_name in ("polyak", "surrogate_gd"):
            constants["gamma"] = math.inf
        c = _constants(regime, family, constants, ["L_nu", "nu", "gamma"])
        per_seed = np.cumsum(H[:, :-1], axis=1) / Ts
        if math.isinf(c["gamma"]):
            # gamma -> inf limit of Q(D^2/(T gamma)), finite only when H* = 0
            if H_star > LEDGER_TOL:
                raise ConfigurationError("holder regime with gamma = inf needs H(x*) = 0")
            nu = c["nu"]
            factor = _inv_power(nu, nu)
            bound = c["L_nu"] * (2.0 * D2 / Ts) ** ((1.0 + nu) / 2.0) * factor
        else:
            bound = holder_Q(D2 / (Ts * c["gamma"]) + 2.0 * H_star, c["L_nu"], c["nu"],
                             c["gamma"])
    elif regime == "alg1_self_bounded":
        c = _constants(regime, family, constants, ["L", "gamma"])
        m = min(1.0 / (2.0 * c["L"]), c["gamma"])
        per_seed = m * np.cumsum(H[:, :-1], axis=1) / Ts
        bound = D2 / Ts + 2.0 * c["gamma"] * H_star
        details.update(_per_seed_regret(trajs, family, c["L"], c["gamma"], D2))
    elif regime == "alg1_lipschitz":
        c = _constants(regime, family, constants, ["G", "gamma"])
        per_seed = np.cumsum(H[:, :-1], axis=1) / Ts
        g, D = c["G"], math.sqrt(D2)
        bound = (D2 / (c["gamma"] * Ts) + 2.0 * H_star + g * D / np.sqrt(Ts)
                 + g * math.sqrt(2.0 * c["gamma"] * H_star))
    elif regime == "alg1_linear":
        c = _constants(regime, family, constants, ["L", "mu", "gamma"])
        m = min(1.0 / (2.0 * c["L"]), c["gamma"])
        a = 0.5 * c["mu"] * m
        b = 2.0 * c["gamma"] - m
        d2 = np.array([[float((r.x - xs) @ (r.x - xs)) for r in tr.records[1:]] for tr in trajs])
        per_seed = d2  # column k is E|x_{k+2} - x*|^2 ... indexed by horizon T = k + 1
        floor = 0.0 if H_star == 0.0 else b * H_star * (1.0 - (1.0 - a) ** Ts) / a
        bound = (1.0 - a) ** Ts * D2 + floor
        details.update({"a": a, "contraction": 1.0 - a})
    elif regime == "sps_plus_self_bounded":
        c = _constants(regime, family, constants, ["L"])
        prob_F = [s.base for s in family.components]
        w = family.weights
        F = lambda x: float(sum(wi * f.value(x) for wi, f in zip(w, prob_F)))  # noqa: E731
        F_star = F(xs)
        inf_mean = float(sum(wi * f.opt_value for wi, f in zip(w, prob_F)))
        gaps = []
        for tr in trajs:
            xs_run = np.array([r.x for r in tr.records[:-1]])
            avg = np.cumsum(xs_run, axis=0) / Ts[:, None]
            gaps.append([F(x) - F_star for x in avg])
        per_seed = np.array(gaps)
        D = math.sqrt(D2)
        bound = (2.0 * c["L"] * D2 / Ts
                 + math.sqrt(2.0 * c["L"] * max(F_star - inf_mean, 0.0)) * D / np.sqrt(Ts))
    else:
        raise ConfigurationError(f"regime {regime!r} is deterministic-only")

    mean, se = _mean_se(per_seed)
    band = 3.0 * se
    holds = bool(np.all(mean <= bound + band + LEDGER_TOL))
    details.update({"se_final": float(se[-1]), "strict_holds": bool(np.all(mean + band <= bound))})
    return RateReport(regime, c, Ts, mean, bound, holds, details, band)


def _per_seed_regret(trajs, family, L, gamma, D2) -> dict:
    """Realization-wise sums behind the averaged bound; both must hold for every seed."""
    xs = family.opt_point
    m = min(1.0 / (2.0 * L), gamma)
    ok1 = ok2 = True
    for tr in trajs:
        recs = tr.records[:-1]
        lhs = sum(m * r.h_val for r in recs)
        hstar = sum(family.components[r.xi].h_value(xs) for r in recs)
        g2 = sum(float(r.g @ r.g) for r in recs)
        ok1 &= lhs <= D2 + 2.0 * gamma * hstar + LEDGER_TOL
        ok2 &= lhs <= 0.5 * D2 + 0.5 * gamma ** 2 * g2 + gamma * hstar + LEDGER_TOL
    return {"per_seed_average_bound": bool(ok1), "per_seed_regret_bound": bool(ok2)}
