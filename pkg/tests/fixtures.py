"""Shared run configurations and helpers for the test suite."""

import numpy as np

from fracks.evolve import DtPolicy, SimConfig, Status, Stepper, initial_state
from fracks.torus import dealias, fft, from_function

# pinned by the mass sweep: blows up at n=128 with A=0, stays bounded under strong mixing
BUMP = {"kind": "bump", "mass": 1.0, "width": 0.05, "center": [0, 0], "background": 1.0}


def blowup_config(**kw):
    base = dict(d=2, n=128, alpha=1.0, beta=2.0, t_end=1.0, initial=dict(BUMP),
                dt=DtPolicy("cfl", c_max=1e-3), scheme="split", diag_every=5, blowup_threshold=4.0)
    base.update(kw)
    return SimConfig(**base)


def state_from(cfg, f):
    """Initial state of ``cfg`` with samples replaced by the function ``f``."""
    st = initial_state(cfg)
    samples = from_function(cfg.grid, f).samples
    st.coef = dealias(cfg.grid, fft(samples))
    st.sup0 = float(np.abs(samples).max())
    st.mass0 = float(samples.mean())
    return st


def advance(cfg, state, dt):
    """Fixed-step integration of ``state`` to ``cfg.t_end``."""
    stepper = Stepper(cfg)
    while state.t < cfg.t_end - 1e-14 and state.status is Status.RUNNING:
        stepper.step(state, min(dt, cfg.t_end - state.t))
    return state
