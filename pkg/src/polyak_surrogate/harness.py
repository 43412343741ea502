"""Run configuration, persistence, audits and the reproduction registry.

Trajectory CSV columns (schema version 1)::

    t, x0, ..., x{d-1}, f, eta, h, clipped

``f`` is the objective (F for finite sums), ``eta`` the stepsize applied to
the psi-direction ``h * g`` (to ``g`` for plain ``gd``), ``h`` the sampled
transformed value (``H`` on the final row) and ``clipped`` is 1 when the
gamma cap was active.  Floats are written with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .counterexamples import (
    bounded_subregion,
    chain_table,
    exact_sps_chain,
    instability_check,
    instability_region,
    nonconvergence_sim,
    preimage_tree,
    quasi_firm_violations,
    run_cycle,
    sample_region,
)
from .diagnostics import REGIMES, audit_one_step, audit_rates
from .exceptions import ConfigurationError
from .problems import StochasticProblem, get_problem
from .steppers import Trajectory, family_for, map_T, parse_stepper, run

CSV_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
OUTPUT_ENV = "POLYAK_SURROGATE_OUT"


class UsageError(ConfigurationError):
    """Invalid configuration; the message names the offending field."""


def output_root(override: str | None = None) -> Path:
    return Path(override or os.environ.get(OUTPUT_ENV) or "runs")


def fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    problem: str
    stepper: str
    x1: list[float]
    steps: int
    transform: str | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = ""
    audits: list[str] = field(default_factory=list)


def parse_seeds(text: str) -> list[int]:
    """``"0..99"`` (inclusive), ``"1,4,9"`` or a mix like ``"0..3,10"``."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in str(text).split(","))):
        lo, sep, hi = part.partition("..")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError as exc:
            raise UsageError(f"seeds: cannot parse {part!r}") from exc
    if not out:
        raise UsageError("seeds: empty seed list")
    return out


def parse_audits(text: str) -> list[str]:
    """Split on commas, re-attaching bare ``k=v`` tokens to the preceding audit.

    ``"one_step,rate:self_bounded:L=1,gamma=0.1"`` ->
    ``["one_step", "rate:self_bounded:L=1,gamma=0.1"]``.
    """
    out: list[str] = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        if "=" in tok and ":" not in tok and out:
            out[-1] += "," + tok
        else:
            out.append(tok)
    return out


def parse_vector(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"x1: cannot parse {text!r}") from exc


def read_config_file(path: str | Path) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"config line {n}: expected key=value, got {line!r}")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def make_config(values: dict) -> RunConfig:
    """Build and validate a :class:`RunConfig` from string-or-typed values."""
    for key in ("problem", "stepper", "x1", "steps"):
        if values.get(key) in (None, ""):
            raise UsageError(f"{key}: required")
    try:
        steps = int(values["steps"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"steps: not an integer: {values['steps']!r}") from exc
    if steps < 1:
        raise UsageError(f"steps: must be >= 1, got {steps}")
    seeds = values.get("seeds", [0])
    seeds = parse_seeds(seeds) if isinstance(seeds, str) else [int(s) for s in seeds]
    audits = values.get("audits") or []
    audits = parse_audits(audits) if isinstance(audits, str) else list(audits)
    cfg = RunConfig(
        problem=str(values["problem"]),
        stepper=str(values["stepper"]),
        x1=parse_vector(values["x1"]),
        steps=steps,
        transform=values.get("transform") or None,
        seeds=seeds,
        output_dir=str(values.get("output_dir") or ""),
        audits=audits,
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    try:
        problem = get_problem(cfg.problem)
    except (LookupError, ValueError) as exc:
        raise UsageError(f"problem: {exc}") from exc
    try:
        stepper = parse_stepper(cfg.stepper)
        family_for(stepper, problem, cfg.transform)
    except ConfigurationError as exc:
        raise UsageError(f"stepper/transform: {exc}") from exc
    if len(cfg.x1) != problem.dim:
        raise UsageError(f"x1: expected {problem.dim} coordinates, got {len(cfg.x1)}")
    if isinstance(problem, StochasticProblem) and stepper.kind != "alg1":
        raise UsageError(f"stepper: {stepper.kind!r} cannot run the finite-sum problem "
                         f"{cfg.problem!r}; use alg1")
    for a in cfg.audits:
        parse_audit(a)


@dataclass(frozen=True)
class AuditSpec:
    name: str  # as requested
    kind: str  # one_step | rate
    regime: str = ""
    constants: tuple = ()


def parse_audit(text: str) -> AuditSpec:
    kind, _, rest = text.partition(":")
    if kind == "one_step" and not rest:
        return AuditSpec(text, "one_step")
    if kind == "rate":
        regime, _, kv = rest.partition(":")
        if regime not in REGIMES:
            raise UsageError(f"audits: unknown regime {regime!r}; known: {', '.join(REGIMES)}")
        consts = []
        for part in filter(None, kv.split(",")):
            k, sep, v = part.partition("=")
            if not sep:
                raise UsageError(f"audits: expected k=v in {text!r}")
            try:
                consts.append((k.strip(), math.inf if v.strip() == "inf" else float(v)))
            except ValueError as exc:
                raise UsageError(f"audits: bad number in {text!r}") from exc
        return AuditSpec(text, "rate", regime, tuple(consts))
    raise UsageError(f"audits: unknown audit {text!r}; use one_step or rate:<regime>[:k=v,...]")


# ---------------------------------------------------------------------------
# persistence


def trajectory_csv(traj: Trajectory) -> str:
    dim = len(traj.records[0].x)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *[f"x{i}" for i in range(dim)], "f", "eta", "h", "clipped"])
    for r in traj.records:
        w.writerow([r.t, *map(fmt, r.x), fmt(r.f_val), fmt(r.eta), fmt(r.h_val),
                    int(r.clipped)])
    return buf.getvalue()


def read_trajectory_csv(path: str | Path) -> np.ndarray:
    """The numeric table of a trajectory CSV (header dropped)."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_margins(cert, stem: str, root: Path) -> Path:
    """Pointwise margins of a certificate as ``x0..x{d-1}, margin``."""
    out = root / "certify"
    out.mkdir(parents=True, exist_ok=True)
    path = out / (re.sub(r"[^A-Za-z0-9_.-]+", "_", stem) + ".csv")
    dim = cert.points.shape[1]
    write_rows(path, [*[f"x{i}" for i in range(dim)], "margin"],
               ([*map(float, p), float(m)] for p, m in zip(cert.points, cert.margins)))
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# run


@dataclass
class RunManifest:
    config: dict
    artifact_version: str
    csv_schema_version: int
    files: dict[str, str]
    verdicts: list[dict]
    summary: dict
    path: str = ""

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("path")
        d["schema_version"] = MANIFEST_SCHEMA_VERSION
        d["passed"] = self.passed
        return d


def _run_audit(spec: AuditSpec, trajs: list[Trajectory], family) -> dict:
    try:
        if spec.kind == "one_step":
            ledgers = [audit_one_step(tr, family) for tr in trajs]
            return {
                "audit": spec.name,
                "passed": all(lg.satisfied for lg in ledgers),
                "worst_slack": min(lg.worst_slack for lg in ledgers),
                "cumulative_ok": all(lg.cumulative_ok for lg in ledgers),
                "kind": ledgers[0].kind,
            }
        rep = audit_rates(trajs, spec.regime, family, **dict(spec.constants))
        return {"audit": spec.name, "passed": rep.holds, **rep.to_dict()}
    except ConfigurationError as exc:
        return {"audit": spec.name, "passed": False, "error": str(exc)}


def execute(cfg: RunConfig, out_root: str | Path | None = None, workers: int = 4) -> RunManifest:
    """Run every seed, write CSVs and the manifest, and return it."""
    validate(cfg)
    problem = get_problem(cfg.problem)
    stepper = parse_stepper(cfg.stepper)
    family = family_for(stepper, problem, cfg.transform)
    out = Path(cfg.output_dir) if cfg.output_dir else output_root(
        str(out_root) if out_root else None) / "run"
    out.mkdir(parents=True, exist_ok=True)
    stochastic = isinstance(problem, StochasticProblem)
    seeds = cfg.seeds if stochastic else cfg.seeds[:1]

    def one(seed: int) -> tuple[int, Trajectory, str]:
        traj = run(stepper, problem, np.array(cfg.x1), cfg.steps, seed=seed,
                   transform=cfg.transform)
        path = out / f"trajectory_seed{seed}.csv"
        path.write_text(trajectory_csv(traj))
        return seed, traj, path.name

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, seeds))
    trajs = [tr for _, tr, _ in results]
    files = {str(s): name for s, _, name in results}

    verdicts = []
    for a in cfg.audits:
        spec = parse_audit(a)
        if any(tr.status != "ok" for tr in trajs):
            verdicts.append({"audit": a, "passed": False, "error": "run aborted"})
        elif family is None:
            verdicts.append({"audit": a, "passed": False,
                             "error": "audits need a surrogate-based stepper"})
        else:
            verdicts.append(_run_audit(spec, trajs, family))

    objective = problem.as_oracle() if stochastic else problem
    summary: dict = {"statuses": sorted({tr.status for tr in trajs})}
    if objective.opt_value is not None:
        gaps = np.array([[r.f_val - objective.opt_value for r in tr.records] for tr in trajs
                         if tr.status == "ok"])
        if gaps.size:
            summary["mean_final_gap"] = float(gaps[:, -1].mean())
            summary["mean_gap_t_ge_2"] = float(gaps[:, 1:].mean())
            summary["min_mean_gap"] = float(gaps.mean(axis=0).min())
    manifest = RunManifest(asdict(cfg), __version__, CSV_SCHEMA_VERSION, files, verdicts, summary)
    path = out / "manifest.json"
    write_json(path, manifest.to_dict())
    manifest.path = str(path)
    return manifest


# ---------------------------------------------------------------------------
# reproductions


@dataclass
class Reproduction:
    name: str
    claim: str
    passed: bool
    measured: dict
    header: list[str]
    rows: list


def _reproduce_cycle() -> Reproduction:
    dbl = run_cycle("double", 36)
    ext = run_cycle("extended", 200)
    rows = [[t, dbl.xs[t - 1] if t <= 36 else "", dbl.avg_gaps[t - 1] if t <= 36 else "",
             ext.xs[t - 1], ext.avg_gaps[t - 1]] for t in range(1, 201)]
    measured = {
        "closure_error": dbl.closure_error,
        "multiplier": dbl.multiplier,
        "min_avg_gap_double_t_le_36": dbl.min_avg_gap,
        "min_avg_gap_extended_t_le_200": ext.min_avg_gap,
    }
    ok = (dbl.closure_error <= 1e-12 and dbl.min_avg_gap >= 0.77
          and ext.min_avg_gap >= 0.77 and 7.5 <= dbl.multiplier <= 8.5)
    return Reproduction("cycle", "3-cycle from cot(pi/7); average gap stays above 0.77",
                        ok, measured, ["t", "x_double", "avg_gap_double", "x_extended",
                                       "avg_gap_extended"], rows)


def _reproduce_measure_zero() -> Reproduction:
    a, depth = 0.5, 20
    tree = preimage_tree(a, depth)
    sim = nonconvergence_sim(a, 10_000, 10_000, 1e-3, seed=0)
    sizes = tree.sizes
    rows = [[k, n, 2 ** k] for k, n in enumerate(sizes)]
    level1 = sorted(tree.levels[1].tolist())
    root = math.sqrt(2 * a)
    ok = (all(n <= 2 ** k for k, n in enumerate(sizes))
          and np.allclose(level1, [-root, root], rtol=0, atol=1e-15)
          and sim.n_converged == 0)
    measured = {
        "level_sizes": sizes,
        "level1": level1,
        "symmetric": tree.symmetric(),
        "max_residual": tree.max_residual(),
        "converged_starts": sim.n_converged,
        "n_starts": sim.n_starts,
        "steps": sim.steps,
        "median_tail_min": float(np.median(sim.tail_min)),
        "frac_tail_min_above_delta": sim.frac_tail_min_above_delta,
    }
    return Reproduction("measure_zero", "no random start converges to x*", ok, measured,
                        ["level", "size", "bound"], rows)


def _reproduce_sps_fail() -> Reproduction:
    states = exact_sps_chain("sps_fail", 1.0, 1000)
    table = chain_table(states)
    e_after = table[1:, 1]
    ok = bool(np.all(table[:, 2] >= 2.0 / 3.0 - 1e-12) and np.all(np.abs(e_after - 9.0) <= 1e-12))
    measured = {
        "gap_t1": float(table[0, 2]),
        "min_gap": float(table[:, 2].min()),
        "max_abs_EF_minus_9": float(np.abs(e_after - 9.0).max()),
        "max_support": int(table[:, 3].max()),
    }
    rows = [[int(t), e, g, int(n)] for t, e, g, n in table]
    return Reproduction("sps_fail", "E[F(x_t)] - min F >= 2/3 for every t", ok, measured,
                        ["t", "expected_F", "gap", "support_size"], rows)


def _reproduce_instability() -> Reproduction:
    h = get_problem("shifted_quad?a=1")
    region = instability_region(h, "SelfBoundedQG")
    xs = sample_region(h, region, 1000, seed=0)
    rep = instability_check(h, region, xs)
    qf = quasi_firm_violations(h, xs)
    ha = get_problem("shifted_abs?a=1")
    region_s = instability_region(ha, "LipschitzSharp")
    rep_s = instability_check(ha, region_s, sample_region(ha, region_s, 1000, seed=0))
    rows = [[x[0], map_T(h, x)[0]] for x in xs]
    ok = rep.all_expand and rep_s.all_expand and qf.n_violations > 0
    measured = {
        "threshold": region.threshold,
        "checked": rep.n_checked,
        "expanding": rep.n_expanding,
        "min_ratio": rep.min_ratio,
        "quasi_firm_violations": qf.n_violations,
        "sharp_checked": rep_s.n_checked,
        "sharp_expanding": rep_s.n_expanding,
    }
    return Reproduction("instability", "every sampled point near x* moves away", ok, measured,
                        ["x", "T_x"], rows)


def _reproduce_bounded_region() -> Reproduction:
    h = get_problem("shifted_quad?a=1")
    region = instability_region(h, "SelfBoundedQG")
    xs = sample_region(h, region, 1000, seed=0)
    qg = bounded_subregion(h, region, 2.0, samples=xs)
    ha = get_problem("shifted_abs?a=1")
    region_s = instability_region(ha, "LipschitzSharp")
    sh = bounded_subregion(ha, region_s, samples=sample_region(ha, region_s, 1000, seed=0))
    rows = [[x[0], float(h.value(x)) / float(x[0] ** 2)] for x in xs]
    measured = {
        "qg_bound": qg.bound, "qg_max_stepsize": qg.max_stepsize, "qg_checked": qg.n_checked,
        "sharp_bound": sh.bound, "sharp_max_stepsize": sh.max_stepsize,
    }
    return Reproduction("bounded_region", "stepsizes stay bounded away from the boundary",
                        qg.holds and sh.holds, measured, ["x", "stepsize"], rows)


EXPERIMENTS: dict[str, Callable[[], Reproduction]] = {
    "cycle": _reproduce_cycle,
    "measure_zero": _reproduce_measure_zero,
    "sps_fail": _reproduce_sps_fail,
    "instability": _reproduce_instability,
    "bounded_region": _reproduce_bounded_region,
}


def reproduce(name: str, out_root: str | Path | None = None) -> tuple[Reproduction, Path]:
    """Run a registered reproduction; writes ``<name>.csv`` and ``<name>.json``."""
    if name not in EXPERIMENTS:
        raise UsageError(f"experiment: unknown {name!r}; known: {', '.join(EXPERIMENTS)}")
    rep = EXPERIMENTS[name]()
    out = output_root(str(out_root) if out_root else None) / "reproduce"
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / f"{name}.csv", rep.header, rep.rows)
    write_json(out / f"{name}.json", {
        "experiment": name,
        "claim": rep.claim,
        "measured": rep.measured,
        "passed": rep.passed,
        "artifact_version": __version__,
    })
    return rep, out
