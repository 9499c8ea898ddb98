"""Per-snapshot diagnostics and numerical checks of the a-priori estimates."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma

from .errors import ConfigurationError, InputError, VerificationError
from .operators import frac_constant, frac_laplacian, low_mode_energy, sobolev_norm, sobolev_seminorm
from .torus import ScalarField, lp_norm

ABS_FLOOR = 1e-12


class Dichotomy(str, enum.Enum):
    LOWER_BOUND = "LOWER_BOUND"
    LP_DOMINATED = "LP_DOMINATED"
    VIOLATION = "VIOLATION"
    NOT_APPLICABLE = "N/A"


def unit_ball_volume(d: int) -> float:
    return float(np.pi ** (d / 2) / gamma(d / 2 + 1))


@dataclass(frozen=True)
class MaxPrincipleConstants:
    """Explicit constants of the periodic nonlinear maximum principle."""

    alpha: float
    d: int
    p: float
    M: float
    C_frac: float
    omega_d: float
    C_lower: float
    C_upper: float

    @classmethod
    def build(cls, alpha: float, d: int, p: float, M: float = 0.25) -> "MaxPrincipleConstants":
        c = frac_constant(alpha, d)
        w = unit_ball_volume(d)
        lower = c * 2.0**p / (2.0 * (2.0 / w) ** ((d + alpha) / d) * 2.0 ** (p * (d + alpha) / d))
        upper = 2.0 / (M ** (d / p) * (w / 2.0) ** (1.0 / p))
        return cls(alpha, d, p, M, c, w, lower, upper)


@dataclass
class DichotomyEvaluation:
    flag: Dichotomy
    f_max: float
    argmax: tuple
    lp: float
    fraclap_at_max: float
    lower_rhs: float
    upper_rhs: float
    radius: float
    lower_slack: float
    upper_slack: float


def evaluate_dichotomy(field: ScalarField, alpha: float, p: float, consts: MaxPrincipleConstants,
                       rel_tol: float = 1e-6, fraclap: Optional[np.ndarray] = None) -> DichotomyEvaluation:
    """Evaluate both branches of the maximum principle at the grid maximum.

    Slack is reported relative to the magnitude of the larger side, so a
    branch holds when its slack is >= -rel_tol.
    """
    f = field.samples
    flat = int(np.argmax(f))
    fmax = float(f.flat[flat])
    if fmax <= 0:
        raise InputError(f"maximum principle needs max f > 0, got {fmax}")
    idx = tuple(int(i) for i in np.unravel_index(flat, f.shape))
    if fraclap is None:
        fraclap = frac_laplacian(field, alpha).samples
    lhs = float(fraclap[idx])
    norm = lp_norm(field, p)
    d = field.grid.d
    expo = p * alpha / d
    lower_rhs = consts.C_lower * fmax ** (1 + expo) / norm**expo
    upper_rhs = consts.C_upper * norm
    radius = (2.0 / consts.omega_d) ** (1.0 / d) * (2.0 * norm / fmax) ** (p / d)
    lower_slack = (lhs - lower_rhs) / max(abs(lhs), abs(lower_rhs), ABS_FLOOR)
    upper_slack = (upper_rhs - fmax) / max(abs(upper_rhs), abs(fmax), ABS_FLOOR)
    if lower_slack >= -rel_tol:
        flag = Dichotomy.LOWER_BOUND
    elif upper_slack >= -rel_tol:
        flag = Dichotomy.LP_DOMINATED
    else:
        flag = Dichotomy.VIOLATION
    return DichotomyEvaluation(flag, fmax, idx, norm, lhs, lower_rhs, upper_rhs, radius, lower_slack, upper_slack)


def maxprinciple_dichotomy(field: ScalarField, alpha: float, p: float, consts: MaxPrincipleConstants,
                           rel_tol: float = 1e-6) -> Dichotomy:
    ev = evaluate_dichotomy(field, alpha, p, consts, rel_tol)
    if ev.flag is Dichotomy.VIOLATION:
        raise VerificationError(
            f"neither branch holds: (-Lap)^(a/2) f(x*)={ev.fraclap_at_max:.6g} < {ev.lower_rhs:.6g} "
            f"and f(x*)={ev.f_max:.6g} > {ev.upper_rhs:.6g}")
    return ev.flag


# --- records -------------------------------------------------------------------


def _p_label(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


@dataclass
class DiagRecord:
    t: float
    step: int
    mass: float
    mean: float
    min_rho: float
    rho_tilde: float
    argmax: tuple
    l2_fluct: float
    hs_half: float
    lp: dict
    fraclap_at_max: float
    dichotomy_flag: Dichotomy
    h3: float
    tail_fraction: float


def record(state) -> DiagRecord:
    """Diagnostics of one synchronized snapshot of a SimState."""
    from .evolve import tail_fraction

    cfg = state.config
    rho = state.rho
    s = rho.samples
    lap = frac_laplacian(rho, cfg.alpha).samples
    flat = int(np.argmax(s))
    idx = tuple(int(i) for i in np.unravel_index(flat, s.shape))
    mean = float(s.mean())
    ps = sorted(set(cfg.p_list) | {cfg.dichotomy_p})
    lp = {p: lp_norm(rho, p) for p in ps}
    flag = Dichotomy.NOT_APPLICABLE
    if 0 < cfg.alpha < 2 and s.max() > 0:
        consts = MaxPrincipleConstants.build(cfg.alpha, cfg.d, cfg.dichotomy_p)
        flag = evaluate_dichotomy(rho, cfg.alpha, cfg.dichotomy_p, consts, fraclap=lap).flag
    return DiagRecord(
        t=float(state.t),
        step=int(state.step_count),
        mass=lp_norm(rho, 1),
        mean=mean,
        min_rho=float(s.min()),
        rho_tilde=float(s.flat[flat]),
        argmax=idx,
        l2_fluct=float(np.sqrt(np.mean((s - mean) ** 2))),
        hs_half=sobolev_seminorm(rho, cfg.alpha / 2),
        lp=lp,
        fraclap_at_max=float(lap[idx]),
        dichotomy_flag=flag,
        h3=sobolev_norm(rho, 3.0),
        tail_fraction=tail_fraction(cfg.grid, state.coef),
    )


class DiagSeries:
    """Append-only time series of DiagRecords with a fixed CSV layout."""

    def __init__(self, config=None, records: Optional[list] = None):
        self.config = config
        self.records: list[DiagRecord] = list(records or [])

    def append(self, rec: DiagRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def header(self) -> list[str]:
        d = len(self.records[0].argmax) if self.records else self.config.d
        ps = list(self.records[0].lp) if self.records else []
        return (["t", "step", "mass", "mean", "min_rho", "rho_tilde"]
                + [f"argmax_{i + 1}" for i in range(d)]
                + ["l2_fluct", "hs_half"] + [f"lp_{_p_label(p)}" for p in ps]
                + ["fraclap_at_max", "dichotomy", "h3", "tail_fraction"])

    def to_csv(self, path=None) -> str:
        fmt = lambda v: "%.17g" % v
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.records:
            w.writerow([fmt(r.t), str(r.step), fmt(r.mass), fmt(r.mean), fmt(r.min_rho), fmt(r.rho_tilde)]
                       + [str(i) for i in r.argmax]
                       + [fmt(r.l2_fluct), fmt(r.hs_half)] + [fmt(v) for v in r.lp.values()]
                       + [fmt(r.fraclap_at_max), r.dichotomy_flag.value, fmt(r.h3), fmt(r.tail_fraction)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "DiagSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], rows[1:]
        col = {name: i for i, name in enumerate(head)}
        d = sum(1 for name in head if name.startswith("argmax_"))
        pnames = [name for name in head if name.startswith("lp_")]
        recs = []
        for row in body:
            lp = {float(n[3:]) if n[3:] != "inf" else math.inf: float(row[col[n]]) for n in pnames}
            recs.append(DiagRecord(
                t=float(row[col["t"]]), step=int(row[col["step"]]), mass=float(row[col["mass"]]),
                mean=float(row[col["mean"]]), min_rho=float(row[col["min_rho"]]),
                rho_tilde=float(row[col["rho_tilde"]]),
                argmax=tuple(int(row[col[f"argmax_{i + 1}"]]) for i in range(d)),
                l2_fluct=float(row[col["l2_fluct"]]), hs_half=float(row[col["hs_half"]]), lp=lp,
                fraclap_at_max=float(row[col["fraclap_at_max"]]),
                dichotomy_flag=Dichotomy(row[col["dichotomy"]]), h3=float(row[col["h3"]]),
                tail_fraction=float(row[col["tail_fraction"]])))
        return cls(None, recs)


# --- inequality monitors ----------------------------------------------------------


@dataclass
class Violation:
    check: str
    t: float
    lhs: float
    rhs: float
    slack: float

    def as_dict(self, passed=False):
        return {"check": self.check, "t": self.t, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "pass": passed}


@dataclass
class MonitorReport:
    check: str
    checked: int = 0
    skipped_jumps: int = 0
    skipped_branch: int = 0
    violations: list = field(default_factory=list)
    worst_slack: float = math.inf

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self):
        return {"check": self.check, "checked": self.checked, "skipped_jumps": self.skipped_jumps,
                "skipped_branch": self.skipped_branch, "worst_slack": self.worst_slack,
                "violations": [v.as_dict() for v in self.violations], "pass": self.passed}


def _torus_jump(a: tuple, b: tuple, n: int) -> int:
    return max(min(abs(i - j), n - abs(i - j)) for i, j in zip(a, b))


def check_ode_bound(series: DiagSeries, alpha: float, p: float, beta: float, C0: Optional[float] = None,
                    n: Optional[int] = None, tol: float = 0.05) -> MonitorReport:
    """Forward-difference check of the running-maximum differential inequality.

    beta = d: d/dt max <= max (max - mean) - C_lower max^(1+p a/d) / ||rho||_p^(p a/d)
    beta < d: the quadratic term is C0 max^2.
    Pairs whose argmax moves more than two cells, or where the lower branch
    of the dichotomy is not active at both ends, are skipped and counted.
    """
    recs = series.records
    if len(recs) < 2:
        raise InputError("ODE check needs at least two records")
    d = len(recs[0].argmax)
    if n is None:
        n = series.config.n
    if beta < d and C0 is None:
        raise ConfigurationError("beta < d needs the constant C0", key="C0")
    consts = MaxPrincipleConstants.build(alpha, d, p)
    expo = p * alpha / d
    rep = MonitorReport("ode_bound")

    def bound(r):
        quad = r.rho_tilde * (r.rho_tilde - r.mean) if beta >= d else C0 * r.rho_tilde**2
        return quad - consts.C_lower * r.rho_tilde ** (1 + expo) / r.lp[p] ** expo

    for r0, r1 in zip(recs[:-1], recs[1:]):
        dt = r1.t - r0.t
        if dt <= 0:
            continue
        if r0.dichotomy_flag is not Dichotomy.LOWER_BOUND or r1.dichotomy_flag is not Dichotomy.LOWER_BOUND:
            rep.skipped_branch += 1
            continue
        if _torus_jump(r0.argmax, r1.argmax, n) > 2:
            rep.skipped_jumps += 1
            continue
        rep.checked += 1
        lhs = (r1.rho_tilde - r0.rho_tilde) / dt
        rhs = max(bound(r0), bound(r1))
        scale = max(r0.rho_tilde**2, r1.rho_tilde**2, abs(bound(r0)), abs(bound(r1)), ABS_FLOOR)
        slack = (rhs - lhs) / scale
        rep.worst_slack = min(rep.worst_slack, slack)
        if slack < -tol:
            rep.violations.append(Violation("ode_bound", r1.t, lhs, rhs, slack))
    return rep


def check_l2_inequality(series: DiagSeries, tol: float = 0.05) -> MonitorReport:
    """d/dt ||rho - mean||^2 <= -2 |rho|_{H^(a/2)}^2 + 6 (||rho||_inf + mean) ||rho - mean||^2.

    Forward differences against the less negative of the two endpoint
    bounds; tolerance is ``tol`` times the dominant term.
    """
    recs = series.records
    rep = MonitorReport("l2_inequality")
    if len(recs) < 2:
        return rep

    def terms(r):
        sup = r.lp.get(math.inf, r.rho_tilde)
        return -2.0 * r.hs_half**2, 6.0 * (sup + r.mean) * r.l2_fluct**2

    for r0, r1 in zip(recs[:-1], recs[1:]):
        dt = r1.t - r0.t
        if dt <= 0:
            continue
        rep.checked += 1
        lhs = (r1.l2_fluct**2 - r0.l2_fluct**2) / dt
        a0, b0 = terms(r0)
        a1, b1 = terms(r1)
        rhs = max(a0 + b0, a1 + b1)
        scale = max(abs(a0), abs(b0), abs(a1), abs(b1), ABS_FLOOR)
        slack = (rhs - lhs) / scale
        rep.worst_slack = min(rep.worst_slack, slack)
        if slack < -tol:
            rep.violations.append(Violation("l2_inequality", r1.t, lhs, rhs, slack))
    return rep


# --- positivity and mean-zero lemmas ----------------------------------------------


@dataclass
class CheckResult:
    check: str
    passed: bool
    lhs: float
    rhs: float
    slack: float

    def as_dict(self):
        return {"check": self.check, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "pass": self.passed}


def cordoba_sides(field: ScalarField, alpha: float, p: float) -> tuple[float, float]:
    """(2/p) ||(-Lap)^(a/4) |f|^(p/2)||^2 and int |f|^(p-2) f (-Lap)^(a/2) f."""
    from .torus import dealias, fft

    g = field.grid
    f = field.samples
    half = ScalarField(g, coef=dealias(g, fft(np.abs(f) ** (p / 2))))
    lhs = 2.0 / p * sobolev_seminorm(half, alpha / 2) ** 2
    lap = frac_laplacian(field, alpha).samples
    rhs = float(np.mean(np.abs(f) ** (p - 2) * f * lap))
    return lhs, rhs


def check_cordoba(field: ScalarField, alpha: float, p: float, rel_tol: float = 1e-8) -> CheckResult:
    if p < 2:
        raise ConfigurationError(f"positivity lemma needs p >= 2, got {p}", key="p")
    lhs, rhs = cordoba_sides(field, alpha, p)
    scale = max(lp_norm(field, p) ** p, ABS_FLOOR)
    slack = (rhs - lhs) / scale
    return CheckResult("cordoba", slack >= -rel_tol, lhs, rhs, slack)


def check_meanzero(field: ScalarField, alpha: float, rel_tol: float = 1e-13) -> CheckResult:
    m = float(frac_laplacian(field, alpha).samples.mean())
    scale = max(lp_norm(field, 2), ABS_FLOOR)
    return CheckResult("meanzero", abs(m) <= rel_tol * scale, abs(m), rel_tol * scale, 1.0 - abs(m) / (rel_tol * scale))


# --- mixing and approximation -----------------------------------------------------


def default_cadence(flow, T: float) -> float:
    from .flows import FlowKind

    if flow.kind is FlowKind.ALTERNATING_SHEAR:
        return flow.switch_period / 10.0
    return T / 20.0


def rage_average(rho0: ScalarField, flow, A: float, N: int, T: float, dt: Optional[float] = None,
                 cadence: Optional[float] = None) -> float:
    """(1/T) int_0^T ||P_N w(t)||^2 dt for the pure transport of a normalized rho0."""
    from .flows import cfl_limit, transport_history

    if N <= 0 or T <= 0:
        raise ConfigurationError("N and T must be positive", key="rage")
    m = float(rho0.samples.mean())
    norm = lp_norm(rho0, 2)
    if abs(m) > 1e-8 * max(norm, 1.0) or abs(norm - 1.0) > 1e-8:
        raise InputError(f"rage_average needs mean-zero, unit-L2 data (mean={m:.3g}, norm={norm:.6g})")
    flow = flow.with_amplitude(A)
    cadence = cadence or default_cadence(flow, T)
    K = max(1, int(round(T / cadence)))
    times = np.linspace(0.0, T, K + 1)
    if dt is None:
        lim = cfl_limit(flow, rho0.grid)
        dt = T if math.isinf(lim) else lim
    fields = transport_history(rho0, flow, times, dt)
    vals = np.array([low_mode_energy(w, N) for w in fields])
    return float(trapezoid(vals, times) / T)


def normalize_fluctuation(field: ScalarField) -> ScalarField:
    s = field.samples - field.samples.mean()
    return ScalarField(field.grid, samples=s / np.sqrt(np.mean(s * s)))


@dataclass
class ApproximationResult:
    A: float
    t_probe: float
    distance: Optional[float]
    status: str


def approximation_distance(config, A: float, t_probe: Optional[float] = None) -> ApproximationResult:
    """||rho^A(t_probe) - w^A(t_probe)||_{L^2}: full dynamics vs pure transport."""
    from dataclasses import replace

    from .evolve import Status, initial_state, run
    from .flows import cfl_limit, transport_solve

    if t_probe is None:
        t_probe = min(0.1, config.t_end)
    if t_probe < 0:
        raise ConfigurationError("t_probe must be >= 0", key="t_probe")
    cfg = replace(config, flow=config.flow.with_amplitude(A), t_end=t_probe)
    rho0 = initial_state(cfg).rho
    if t_probe == 0:
        return ApproximationResult(A, 0.0, 0.0, Status.COMPLETED.value)
    state, _ = run(cfg)
    if state.status is not Status.COMPLETED:
        return ApproximationResult(A, t_probe, None, state.status.value)
    lim = cfl_limit(cfg.flow, cfg.grid)
    w = transport_solve(rho0, cfg.flow, t_probe, t_probe if math.isinf(lim) else lim)
    dist = float(np.sqrt(np.mean((state.rho.samples - w.samples) ** 2)))
    return ApproximationResult(A, t_probe, dist, state.status.value)


def estimate_c0(d: int, beta: float, n: int, trials: int = 100, seed: int = 0, safety: float = 2.0) -> float:
    """Empirical constant for ||div B(rho)||_inf <= C0 ||rho||_inf, with headroom."""
    from .initial import random_smooth
    from .operators import drift_divergence_coef
    from .torus import ifft_real, make_grid

    grid = make_grid(d, n)
    worst = 0.0
    for i in range(trials):
        rho = random_smooth(grid, seed + i)
        div = ifft_real(drift_divergence_coef(grid, rho.coef, beta))
        worst = max(worst, float(np.abs(div).max() / np.abs(rho.samples).max()))
    return safety * worst
