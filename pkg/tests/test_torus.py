import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracks.errors import ConfigurationError, InputError
from fracks.initial import random_smooth
from fracks.torus import (ScalarField, VectorField, dealias, from_function, inverse_transform, lp_norm, make_grid,
                          mean, parseval_energy, read_snapshot, transform, write_snapshot)


class TestGrid:
    def test_centered_lattice_1d(self):
        g = make_grid(1, 8)
        assert g.h == 1 / 8
        assert sorted(g.k1d.tolist()) == list(range(-4, 4))
        assert g.h * g.n == 1.0

    def test_sample_count(self):
        assert make_grid(2, 64).size == 4096

    @pytest.mark.parametrize("d,n", [(2, 7), (1, 6), (4, 8), (0, 8), (2, 9)])
    def test_bad_parameters(self, d, n):
        with pytest.raises(ConfigurationError):
            make_grid(d, n)

    def test_nodes_start_at_minus_half(self):
        g = make_grid(1, 16)
        assert g.nodes_1d[0] == -0.5
        assert g.nodes_1d[-1] == pytest.approx(0.5 - 1 / 16)

    def test_grids_compare_by_shape(self):
        assert make_grid(2, 16) == make_grid(2, 16)
        assert make_grid(2, 16) != make_grid(2, 32)


class TestFromFunction:
    def test_constant(self):
        g = make_grid(2, 16)
        f = from_function(g, lambda x, y: np.ones_like(x))
        assert np.all(f.samples == 1.0)
        c = transform(f)
        nz = np.argwhere(np.abs(c) > 1e-14)
        assert nz.tolist() == [[0, 0]]

    def test_single_mode_support(self):
        g = make_grid(2, 32)
        f = from_function(g, lambda x, y: np.cos(2 * np.pi * x))
        c = transform(f)
        ks = [np.broadcast_to(k, g.shape) for k in g.k]
        support = {tuple(int(k[tuple(i)]) for k in ks) for i in np.argwhere(np.abs(c) > 1e-12)}
        assert support == {(1, 0), (-1, 0)}

    def test_nan_rejected(self):
        g = make_grid(1, 16)

        def f(x):
            y = np.sin(x)
            y[3] = np.nan
            return y

        with pytest.raises(InputError):
            from_function(g, f)


class TestTransform:
    def test_constant_five(self):
        g = make_grid(2, 8)
        c = transform(ScalarField(g, samples=np.full(g.shape, 5.0)))
        assert c[0, 0] == pytest.approx(5.0, abs=1e-14)
        c[0, 0] = 0
        assert np.abs(c).max() < 1e-14

    def test_cosine_half_at_pm_e1(self):
        g = make_grid(1, 16)
        c = transform(from_function(g, lambda x: np.cos(2 * np.pi * x)))
        assert c[1] == pytest.approx(0.5, abs=1e-14)
        assert c[-1] == pytest.approx(0.5, abs=1e-14)

    @pytest.mark.parametrize("d,n", [(1, 8), (1, 256), (2, 16), (2, 64), (3, 8), (3, 16)])
    def test_round_trip(self, d, n, rng):
        g = make_grid(d, n)
        s = rng.normal(size=g.shape)
        back = inverse_transform(g, transform(ScalarField(g, samples=s)))
        assert np.abs(back - s).max() <= 1e-12 * np.abs(s).max()

    def test_hermitian_symmetry(self, rng):
        g = make_grid(2, 16)
        c = transform(ScalarField(g, samples=rng.normal(size=g.shape)))
        # conj(c(k)) = c(-k); index -k is (-i) mod n
        flip = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
        assert np.abs(np.conj(c) - flip).max() < 1e-14

    def test_spectral_setter_path(self, rng):
        g = make_grid(2, 16)
        f = ScalarField(g, samples=rng.normal(size=g.shape))
        h = ScalarField.from_spectral(g, f.spectral)
        assert np.allclose(h.samples, f.samples, atol=1e-13)


class TestDealias:
    def test_high_mode_removed(self):
        g = make_grid(2, 32)
        f = from_function(g, lambda x, y: np.cos(2 * np.pi * 15 * x))
        assert abs(f.coef[15, 0]) == pytest.approx(0.5)
        out = dealias(g, f.coef)
        assert out[15, 0] == 0 and out[-15, 0] == 0
        assert np.abs(out).max() < 1e-14

    def test_low_mode_kept(self):
        g = make_grid(2, 32)
        f = from_function(g, lambda x, y: np.cos(2 * np.pi * x))
        out = dealias(g, f.coef)
        assert out[1, 0] == f.coef[1, 0] and out[-1, 0] == f.coef[-1, 0]
        assert np.abs(out - f.coef).max() < 1e-14

    def test_idempotent(self, rng):
        g = make_grid(2, 32)
        c = transform(ScalarField(g, samples=rng.normal(size=g.shape)))
        once = dealias(g, c)
        assert np.array_equal(dealias(g, once), once)

    def test_nyquist_zeroed(self, rng):
        g = make_grid(1, 32)
        c = dealias(g, transform(ScalarField(g, samples=rng.normal(size=g.shape))))
        assert c[16] == 0


class TestNorms:
    @pytest.mark.parametrize("p", [1, 2, 3.5, math.inf])
    def test_constant(self, p):
        g = make_grid(2, 16)
        assert lp_norm(ScalarField(g, samples=np.full(g.shape, -3.0)), p) == pytest.approx(3.0, rel=1e-14)

    def test_cosine_l2(self):
        g = make_grid(1, 64)
        f = from_function(g, lambda x: np.cos(2 * np.pi * x))
        assert lp_norm(f, 2) == pytest.approx(1 / math.sqrt(2), rel=1e-14)

    def test_mean_of_cosine(self):
        g = make_grid(1, 64)
        assert abs(mean(from_function(g, lambda x: np.cos(2 * np.pi * x)))) < 1e-14

    def test_p_below_one(self):
        g = make_grid(1, 8)
        with pytest.raises(ConfigurationError):
            lp_norm(ScalarField(g, samples=np.ones(8)), 0.5)

    @given(seed=st.integers(0, 10**6))
    def test_parseval(self, seed):
        g = make_grid(2, 32)
        f = random_smooth(g, seed, decay=1.0)
        assert parseval_energy(f) == pytest.approx(lp_norm(f, 2) ** 2, rel=1e-12)

    @given(seed=st.integers(0, 10**6))
    def test_monotone_in_p(self, seed):
        g = make_grid(2, 32)
        f = random_smooth(g, seed, mean=0.0, amplitude=1.0)
        norms = [lp_norm(f, p) for p in (1, 1.5, 2, 4, 8, math.inf)]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(norms[:-1], norms[1:]))


class TestVectorField:
    def test_component_grids_must_agree(self):
        a = ScalarField(make_grid(2, 8), samples=np.zeros((8, 8)))
        b = ScalarField(make_grid(2, 16), samples=np.zeros((16, 16)))
        with pytest.raises(InputError):
            VectorField([a, b])


def test_snapshot_round_trip(tmp_path, rng):
    g = make_grid(2, 16)
    f = ScalarField(g, samples=rng.normal(size=g.shape))
    jpath, bpath = write_snapshot(tmp_path / "rho", f, t=0.25, alpha=1.0, beta=2.0, A=10.0)
    assert jpath.name == "rho.json" and bpath.name == "rho.f64"
    assert bpath.stat().st_size == 8 * g.size
    back, header = read_snapshot(tmp_path / "rho")
    assert np.array_equal(back.samples, f.samples)
    assert header == {"d": 2, "n": 16, "t": 0.25, "alpha": 1.0, "beta": 2.0, "A": 10.0, "field_name": "rho"}
    raw = np.fromfile(bpath, dtype="<f8").reshape(g.shape)
    assert np.array_equal(raw, f.samples)
