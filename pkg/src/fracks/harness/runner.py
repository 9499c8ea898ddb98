"""Scenario execution: per-child runs, persistence and the summary table."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..diagnostics import (approximation_distance, check_l2_inequality, check_ode_bound, estimate_c0,
                           normalize_fluctuation, rage_average)
from ..errors import OutputError
from ..evolve import EXIT_CODES, SimConfig, Status, initial_state, run
from ..flows import cfl_limit, transport_history
from ..torus import ifft_real, write_snapshot
from .config import Child, Scenario

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["label", "value", "status", "exit_code", "t_final", "steps", "sup_rho", "sup_ratio",
                   "blowup_time", "rage_average", "approximation_distance", "verification"]


def ensure_writable(path: Path) -> Path:
    """Create ``path`` and prove it accepts files, before any compute."""
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".probe-"):
            pass
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc}") from exc
    return path


def _snap_name(t: float) -> str:
    return f"rho_t{t:.6f}"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


@dataclass
class ChildResult:
    label: str
    value: Optional[float]
    status: str
    exit_code: int
    t_final: float
    steps: int
    sup_rho: float
    sup_ratio: float
    blowup_time: Optional[float]
    rage_average: Optional[float]
    approximation_distance: Optional[float]
    verification: str  # "pass" | "fail" | "skipped"
    diag_interval: float
    message: str = ""


def monitors(series, cfg: SimConfig) -> list[dict]:
    """Differential-inequality monitors of a finished run."""
    out = [check_l2_inequality(series).as_dict()]
    if 0 < cfg.alpha < 2:
        C0 = None if cfg.beta >= cfg.d else estimate_c0(cfg.d, cfg.beta, min(cfg.n, 64))
        rep = check_ode_bound(series, cfg.alpha, cfg.dichotomy_p, cfg.beta, C0=C0, n=cfg.n)
        out.append(rep.as_dict())
    return out


def run_child(child: Child, outdir: Path, snapshot_times=(), report: Optional[dict] = None,
              expect: str = "completed") -> ChildResult:
    report = report or {}
    cfg = child.config
    outdir.mkdir(parents=True, exist_ok=True)
    snapdir = outdir / "snapshots"
    pending = sorted(set(float(t) for t in snapshot_times))
    meta = dict(alpha=cfg.alpha, beta=cfg.beta, A=cfg.flow.amplitude)
    if pending:
        snapdir.mkdir(exist_ok=True)
    if pending and pending[0] == 0.0:
        write_snapshot(snapdir / _snap_name(0.0), initial_state(cfg).rho, t=0.0, **meta)
        pending.pop(0)
    sup = [0.0]

    def hook(state):
        sup[0] = max(sup[0], float(np.abs(ifft_real(state.coef)).max()))
        while pending and abs(state.t - pending[0]) <= 1e-9 * max(1.0, pending[0]):
            write_snapshot(snapdir / _snap_name(pending[0]), state.rho, t=state.t, **meta)
            pending.pop(0)

    state, series = run(cfg, hook, stops=pending)
    sup_rho = max(sup[0], state.sup0)
    series.to_csv(outdir / "diag.csv")

    checks = monitors(series, cfg) if state.status is Status.COMPLETED and report.get("monitors", True) else []
    verdict = "skipped" if not checks else ("pass" if all(c["pass"] for c in checks) else "fail")
    mass = series.column("mean")
    verification = {
        "label": child.label,
        "status": state.status.value,
        "message": state.message,
        "certificate": asdict(state.certificate) if state.certificate else None,
        "mass_drift": float(np.abs(mass - mass[0]).max() / max(abs(mass[0]), 1e-300)),
        "min_rho_ratio": float(series.column("min_rho").min() / state.sup0),
        "monitors": checks,
        "pass": verdict != "fail",
    }
    (outdir / "verification.json").write_text(json.dumps(verification, indent=2, sort_keys=True) + "\n")

    rage = None
    if report.get("rage"):
        r = report["rage"]
        rho0 = normalize_fluctuation(initial_state(cfg).rho)
        rage = rage_average(rho0, cfg.flow, cfg.flow.amplitude, r["N"], r["T"])
    approx = None
    if report.get("approximation"):
        approx = approximation_distance(cfg, cfg.flow.amplitude, report["approximation"]["t_probe"]).distance

    code = EXIT_CODES[state.status]
    if state.status is Status.BLOWUP and expect == "blowup":
        code = 0
    if verdict == "fail":
        code = EXIT_CODES[Status.FAILED]
    times = series.column("t")
    interval = float(np.diff(times).max()) if len(times) > 1 else 0.0
    return ChildResult(child.label, child.value, state.status.value, code, float(state.t), state.step_count,
                       sup_rho, sup_rho / state.sup0,
                       state.certificate.t if state.certificate else None, rage, approx, verdict, interval,
                       state.message)


def _run_child_args(args):
    return run_child(*args)


def worst_exit(codes) -> int:
    """FAILED (1) outranks unexpected BLOWUP (2), which outranks success (0)."""
    codes = set(codes)
    return 1 if 1 in codes else (2 if 2 in codes else 0)


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def summary_csv(rows: list[ChildResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def format_table(rows: list[ChildResult]) -> str:
    head = ["label", "status", "sup|rho|", "blowup t", "rage", "approx", "verify"]
    num = lambda v: "-" if v is None else f"{v:.4g}"
    body = [[r.label, r.status, num(r.sup_rho), num(r.blowup_time), num(r.rage_average),
             num(r.approximation_distance), r.verification] for r in rows]
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
    line = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths))
    return "\n".join([line(head)] + [line(b) for b in body])


def mass_monotonicity(rows: list[ChildResult]) -> Optional[bool]:
    """Larger mass blows up no later, up to one diagnostic interval (reported only)."""
    pts = sorted((r.value, r.blowup_time, r.diag_interval) for r in rows if r.blowup_time is not None)
    if len(pts) < 2:
        return None
    return all(b1 <= b0 + max(i0, i1) for (_, b0, i0), (_, b1, i1) in zip(pts[:-1], pts[1:]))


@dataclass
class ScenarioResult:
    exit_code: int
    rows: list
    outputs: Path


def run_scenario(scenario: Scenario, workers: Optional[int] = None) -> ScenarioResult:
    out = ensure_writable(scenario.outputs)
    children = scenario.children()
    jobs = [(c, out / c.label, scenario.snapshot_times, scenario.report, scenario.expect) for c in children]
    workers = workers or scenario.workers or default_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_run_child_args, jobs))
    else:
        rows = [run_child(*j) for j in jobs]
    (out / "summary.csv").write_text(summary_csv(rows))
    summary = {
        "name": scenario.name,
        "expect": scenario.expect,
        "sweep": scenario.sweep,
        "rows": [asdict(r) for r in rows],
        "exit_code": worst_exit(r.exit_code for r in rows),
    }
    if scenario.sweep and scenario.sweep["axis"] == "mass":
        summary["blowup_time_monotone_in_mass"] = mass_monotonicity(rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(scenario.document, indent=2, sort_keys=True) + "\n")
    return ScenarioResult(summary["exit_code"], rows, out)


def run_transport(scenario: Scenario) -> ScenarioResult:
    """Pure transport of the initial datum; writes transport.csv and snapshots."""
    out = ensure_writable(scenario.outputs)
    cfg = scenario.base
    rho0 = initial_state(cfg).rho
    lim = cfl_limit(cfg.flow, cfg.grid)
    dt = cfg.t_end if math.isinf(lim) else lim
    times = sorted(set(np.linspace(0.0, cfg.t_end, 21).tolist()) | set(scenario.snapshot_times))
    fields = transport_history(rho0, cfg.flow, times, max(dt, 1e-15)) if cfg.t_end > 0 else [rho0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mean", "l2_fluct", "max", "min"])
    for t, f in zip(times, fields):
        s = f.samples
        w.writerow([_fmt(float(t)), _fmt(float(s.mean())), _fmt(float(np.sqrt(np.mean((s - s.mean()) ** 2)))),
                    _fmt(float(s.max())), _fmt(float(s.min()))])
        if t in scenario.snapshot_times:
            (out / "snapshots").mkdir(exist_ok=True)
            write_snapshot(out / "snapshots" / _snap_name(t), f, t=t, alpha=cfg.alpha, beta=cfg.beta,
                           A=cfg.flow.amplitude)
    (out / "transport.csv").write_text(buf.getvalue())
    sup0 = float(np.abs(rho0.samples).max())
    sup = float(max(np.abs(f.samples).max() for f in fields))
    row = ChildResult(scenario.name, None, Status.COMPLETED.value, 0, cfg.t_end, len(times) - 1,
                      sup, sup / sup0, None, None, None, "skipped", 0.0)
    return ScenarioResult(0, [row], out)
