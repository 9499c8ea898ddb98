"""Pinned property battery bundled behind ``fracks verify``."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..diagnostics import check_cordoba, check_meanzero
from ..evolve import DtPolicy, SimConfig, run
from ..flows import FlowKind, FlowSpec, transport_solve
from ..initial import random_smooth
from ..maxprinciple import adversarial_sweep, falsify
from ..operators import (drift_divergence_coef, frac_laplacian, frac_laplacian_quadrature_field)
from ..torus import ScalarField, from_function, ifft_real, make_grid


@dataclass
class SuiteCheck:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self):
        return {"check": self.name, "pass": self.passed, "seconds": round(self.seconds, 3), **self.detail}


def _operators():
    worst = 0.0
    for d in (1, 2):
        g = make_grid(d, 32)
        k = (3,) + (2,) * (d - 1)
        f = from_function(g, lambda *x: np.cos(2 * np.pi * sum(ki * xi for ki, xi in zip(k, x))))
        for a in (0.5, 1.0, 1.5):
            lam = (2 * np.pi * np.sqrt(sum(ki * ki for ki in k))) ** a
            worst = max(worst, float(np.abs(frac_laplacian(f, a).samples - lam * f.samples).max() / lam))
    return worst <= 1e-12, {"max_rel_error": worst}


def _quadrature():
    worst = 0.0
    for d, n in ((1, 256), (2, 128)):
        f = random_smooth(make_grid(d, n), seed=11, kmax=6)
        for a in (0.5, 1.0, 1.5):
            ref = frac_laplacian(f, a).samples
            q = frac_laplacian_quadrature_field(f, a, image_radius=32)
            worst = max(worst, float(np.abs(q - ref).max() / np.abs(ref).max()))
    return worst <= 1e-2, {"max_rel_linf_error": worst}


def _meanzero():
    g = make_grid(2, 64)
    res = [check_meanzero(random_smooth(g, s, mean=float(s % 3)), a) for s in range(100) for a in (0.5, 1.0, 1.5)]
    return all(r.passed for r in res), {"min_slack": min(r.slack for r in res)}


def _cordoba():
    g = make_grid(2, 64)
    res = [check_cordoba(random_smooth(g, 100 + s, amplitude=0.9), a, p)
           for s in range(50) for a in (0.5, 1.0, 1.5) for p in (2, 4)]
    return all(r.passed for r in res), {"min_slack": min(r.slack for r in res)}


def _maxprinciple():
    worst, failures = np.inf, 0
    for a in (0.5, 1.0, 1.5):
        for d in (1, 2):
            for p in (1.0, 2.0):
                rep = falsify(a, d, p, trials=1000, seed=7)
                adv = [r.active_slack for r in adversarial_sweep(a, d, p)]
                worst = min(worst, rep.min_slack, min(adv))
                failures += rep.violations + rep.dichotomy_failures + sum(s < -1e-6 for s in adv)
    return failures == 0 and worst >= -1e-6, {"min_slack": worst, "failures": failures}


def _integrator():
    def final(dt):
        cfg = SimConfig(d=2, n=32, alpha=1.0, beta=2.0, initial={"kind": "random_smooth", "seed": 3},
                        t_end=0.5, dt=DtPolicy("fixed", dt), diag_every=10**6)
        return run(cfg)[0].rho.samples

    sols = [final(0.1 / 2**i) for i in range(4)]
    e = [np.abs(a - b).max() for a, b in zip(sols[:-1], sols[1:])]
    orders = [float(np.log2(e[i] / e[i + 1])) for i in range(len(e) - 1)]
    return abs(orders[-1] - 4.0) <= 0.3, {"orders": orders}


def _transport():
    g = make_grid(2, 64)
    flow = FlowSpec(FlowKind.STEADY_SHEAR, amplitude=1.0)
    rho0 = random_smooth(g, 5, kmax=4)
    T = 0.5
    w = transport_solve(rho0, flow, T, g.h / 2)
    # exact solution of a steady shear: x1 shifted by T sin(2 pi x2)
    exact = ScalarField(g, coef=rho0.coef)
    kap = g.kappa[0]
    line = np.fft.fft(exact.samples, axis=0) * np.exp(-1j * kap * T * np.sin(2 * np.pi * g.coords[1]))
    ref = np.fft.ifft(line, axis=0).real
    err = float(np.abs(w.samples - ref).max())
    drift = abs(float(w.samples.mean() - rho0.samples.mean()))
    return err <= 1e-5 and drift <= 1e-10, {"max_error": err, "mean_drift": drift}


def _drift():
    g = make_grid(2, 64)
    rho = random_smooth(g, 9)
    div = ifft_real(drift_divergence_coef(g, rho.coef, 2.0))
    err = float(np.abs(div + (rho.samples - rho.samples.mean())).max())
    return err <= 1e-10, {"identity_error": err}


CHECKS = {
    "operators": _operators,
    "quadrature": _quadrature,
    "meanzero": _meanzero,
    "cordoba": _cordoba,
    "maxprinciple": _maxprinciple,
    "integrator": _integrator,
    "transport": _transport,
    "drift": _drift,
}


def verify_suite(filter: str | None = None) -> list[SuiteCheck]:
    """Run every check whose name contains ``filter``."""
    out = []
    for name, fn in CHECKS.items():
        if filter and filter not in name:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # reported per check, not raised
            ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        out.append(SuiteCheck(name, bool(ok), detail, time.perf_counter() - t0))
    return out
