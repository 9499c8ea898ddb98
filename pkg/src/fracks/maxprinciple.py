"""Periodic nonlinear maximum principle: constants, the proof's radius choice
and a falsification battery over random and adversarial fields.

At the grid maximum x* of f (with f(x*) > 0) one of

    (-Lap)^(a/2) f(x*) >= C_lower f(x*)^(1 + p a/d) / ||f||_p^(p a/d)    (lower branch)
    f(x*) <= C_upper ||f||_p                                           (Lp branch)

holds. Which one is forced depends on whether the radius R of
:func:`optimal_radius` fits inside the box (R <= M).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import Dichotomy, MaxPrincipleConstants, evaluate_dichotomy, unit_ball_volume
from .errors import ConfigurationError, InputError
from .initial import bump, random_smooth
from .torus import Grid, ScalarField, make_grid

SLACK_TOL = 1e-6


def lemma_constants(alpha: float, d: int, p: float, M: float = 0.25) -> MaxPrincipleConstants:
    if not 0.0 < alpha < 2.0:
        raise ConfigurationError(f"need 0 < alpha < 2, got {alpha}", key="alpha")
    if int(d) != d or d < 1:
        raise ConfigurationError(f"need integer d >= 1, got {d}", key="d")
    if not p >= 1.0 or math.isinf(p):
        raise ConfigurationError(f"need finite p >= 1, got {p}", key="p")
    if not 0.0 < M <= 0.5:
        raise ConfigurationError(f"need 0 < M <= 1/2, got {M}", key="M")
    return MaxPrincipleConstants.build(alpha, int(d), p, M)


def optimal_radius(f_max: float, lp_norm_value: float, d: int, p: float) -> float:
    """Radius whose ball has twice the measure bound on the near-maximum set."""
    if not f_max > 0:
        raise InputError(f"optimal radius needs f_max > 0, got {f_max}")
    w = unit_ball_volume(d)
    return (2.0 / w) ** (1.0 / d) * (2.0 * lp_norm_value / f_max) ** (p / d)


@dataclass
class ProofQuantities:
    """Intermediate quantities of the proof, measured on the grid."""

    f_max: float
    lp: float
    radius: float
    n1_measure: float  # |{l in B(0,R): f(x*) - f(x* - l) > f(x*)/2}|
    n2_measure: float
    n2_bound: float  # (2 ||f||_p / f(x*))^p
    fraclap_at_max: float
    intermediate_bound: float  # C f(x*) |N1| / (2 R^(d+a))
    lower_rhs: float


def proof_quantities(field: ScalarField, alpha: float, p: float, M: float = 0.25) -> ProofQuantities:
    g = field.grid
    consts = lemma_constants(alpha, g.d, p, M)
    ev = evaluate_dichotomy(field, alpha, p, consts)
    # periodic displacement of every node from the maximum
    dist2 = np.zeros(g.shape)
    for axis, x in enumerate(g.coords):
        dx = x - g.nodes_1d[ev.argmax[axis]]
        dx = dx - np.round(dx)
        dist2 = dist2 + dx * dx
    ball = dist2 < ev.radius**2
    drop = ev.f_max - field.samples > 0.5 * ev.f_max
    n1 = float(np.count_nonzero(ball & drop)) * g.cell_volume
    n2 = float(np.count_nonzero(ball & ~drop)) * g.cell_volume
    inter = consts.C_frac * ev.f_max * n1 / (2.0 * ev.radius ** (g.d + alpha))
    return ProofQuantities(ev.f_max, ev.lp, ev.radius, n1, n2, (2.0 * ev.lp / ev.f_max) ** p,
                           ev.fraclap_at_max, inter, ev.lower_rhs)


@dataclass
class TrialResult:
    radius: float
    active: Dichotomy  # branch forced by R <= M (lower) or R > M (Lp)
    active_slack: float
    lower_slack: float
    upper_slack: float
    ratio: float  # lhs / rhs of the active inequality


def _trial(field: ScalarField, alpha: float, p: float, consts: MaxPrincipleConstants) -> TrialResult:
    ev = evaluate_dichotomy(field, alpha, p, consts)
    if ev.radius <= consts.M:
        active, slack = Dichotomy.LOWER_BOUND, ev.lower_slack
        ratio = ev.fraclap_at_max / ev.lower_rhs
    else:
        active, slack = Dichotomy.LP_DOMINATED, ev.upper_slack
        ratio = ev.upper_rhs / ev.f_max
    return TrialResult(ev.radius, active, slack, ev.lower_slack, ev.upper_slack, ratio)


@dataclass
class FalsifyReport:
    alpha: float
    d: int
    p: float
    n: int
    trials: int
    seed: int
    c_lower_scale: float
    min_slack: float  # over every trial, on the branch its radius forces
    min_dichotomy_slack: float  # over every trial, of the better branch
    violations: int  # trials whose forced branch fails beyond tolerance
    dichotomy_failures: int  # trials where neither branch holds
    branch_counts: dict = field(default_factory=dict)
    tightness: dict = field(default_factory=dict)  # informational: worst lhs/rhs per branch
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.dichotomy_failures == 0 and self.min_slack >= -SLACK_TOL

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _random_field(grid: Grid, rng: np.random.Generator) -> ScalarField:
    """One member of the battery, normalised to max 1."""
    kind = rng.integers(3)
    if kind == 0:
        f = random_smooth(grid, int(rng.integers(2**31)), decay=float(rng.uniform(1.5, 5.0)),
                          mean=float(rng.uniform(-0.5, 1.5)), amplitude=1.0,
                          kmax=int(rng.integers(2, grid.dealias_cutoff + 1)))
    else:
        width_lo = 4.0 * grid.h
        s = np.zeros(grid.shape)
        for _ in range(int(rng.integers(1, 4))):
            w = float(np.exp(rng.uniform(np.log(width_lo), np.log(0.25))))
            s += rng.uniform(0.2, 1.0) * bump(grid, 1.0, w, rng.uniform(-0.5, 0.5, grid.d)).samples
        f = ScalarField(grid, samples=s + rng.uniform(-0.2, 0.3) * s.max())
    s = f.samples
    if s.max() <= 0:
        s = -s
    return ScalarField(grid, samples=s / s.max())


def default_resolution(d: int) -> int:
    return {1: 256, 2: 64}.get(d, 32)


def falsify(alpha: float, d: int, p: float, trials: int, seed: int, n: Optional[int] = None,
            M: float = 0.25, c_lower_scale: float = 1.0, fields=None) -> FalsifyReport:
    """Run the battery: ``trials`` random fields, plus any explicit ``fields``.

    ``c_lower_scale`` multiplies the lower-branch constant; values above one
    probe whether the battery is sensitive enough to see a wrong constant.
    """
    if trials < 1 and not fields:
        raise ConfigurationError("need trials >= 1", key="trials")
    n = default_resolution(d) if n is None else n
    grid = make_grid(d, n)
    consts = lemma_constants(alpha, d, p, M)
    if c_lower_scale != 1.0:
        consts = MaxPrincipleConstants(consts.alpha, consts.d, consts.p, consts.M, consts.C_frac,
                                       consts.omega_d, consts.C_lower * c_lower_scale, consts.C_upper)
    rng = np.random.default_rng(seed)
    batch = [_random_field(grid, rng) for _ in range(trials)] + list(fields or [])
    results = [_trial(f, alpha, p, consts) for f in batch]
    counts = {b.value: 0 for b in (Dichotomy.LOWER_BOUND, Dichotomy.LP_DOMINATED)}
    worst = {}
    for r in results:
        counts[r.active.value] += 1
        worst[r.active.value] = min(worst.get(r.active.value, math.inf), r.ratio)
    return FalsifyReport(
        alpha=alpha, d=d, p=p, n=n, trials=len(batch), seed=seed, c_lower_scale=c_lower_scale,
        min_slack=min(r.active_slack for r in results),
        min_dichotomy_slack=min(max(r.lower_slack, r.upper_slack) for r in results),
        violations=sum(r.active_slack < -SLACK_TOL for r in results),
        dichotomy_failures=sum(max(r.lower_slack, r.upper_slack) < -SLACK_TOL for r in results),
        branch_counts=counts, tightness=worst,
        constants={"C_frac": consts.C_frac, "C_lower": consts.C_lower, "C_upper": consts.C_upper,
                   "omega_d": consts.omega_d, "M": consts.M})


def shrinking_bumps(grid: Grid, widths=None) -> list[ScalarField]:
    """Single centred bumps whose width shrinks towards four cells."""
    if widths is None:
        widths = np.geomspace(0.2, 4.0 * grid.h, 12)
    return [bump(grid, 1.0, float(w)) for w in widths]


def adversarial_sweep(alpha: float, d: int, p: float, n: Optional[int] = None, M: float = 0.25) -> list[TrialResult]:
    grid = make_grid(d, default_resolution(d) if n is None else n)
    consts = lemma_constants(alpha, d, p, M)
    return [_trial(f, alpha, p, consts) for f in shrinking_bumps(grid)]


@dataclass
class ScalingCheck:
    c: float
    branch_ok: bool
    lhs_ratio: float
    rhs_ratio: float
    expected: float


def scaling_covariance(f: ScalarField, alpha: float, p: float, c: float, M: float = 0.25) -> ScalingCheck:
    """Compare the forced inequality for f and c*f.

    Lower branch sides both scale by c after the normalisation by
    ||f||^(pa/d) (the radius is invariant); Lp branch sides scale by c.
    """
    if c <= 0:
        raise InputError("scaling factor must be positive")
    consts = lemma_constants(alpha, f.grid.d, p, M)
    a = evaluate_dichotomy(f, alpha, p, consts)
    b = evaluate_dichotomy(ScalarField(f.grid, samples=c * f.samples), alpha, p, consts)
    same = (a.radius <= M) == (b.radius <= M)
    if a.radius <= M:
        lhs_ratio = b.fraclap_at_max / a.fraclap_at_max
        rhs_ratio = b.lower_rhs / a.lower_rhs
    else:
        lhs_ratio = b.f_max / a.f_max
        rhs_ratio = b.upper_rhs / a.upper_rhs
    return ScalingCheck(c, same, lhs_ratio, rhs_ratio, c)
