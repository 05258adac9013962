import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_elm.datagen import GridSpec, SingleSine, make_grid, sample
from spectral_elm.spectral import (
    capture_verdict,
    mean_square,
    per_frequency_errors,
    project_sines,
    relative_l2_error,
)

X = make_grid()


def fft_oracle(values, k_max):
    """Coefficients from the FFT of the periodic samples (drop the duplicated endpoint)."""
    v = np.asarray(values)[:-1]
    m = v.size
    c = np.fft.rfft(v) / m
    # samples start at -pi, so shift the phase by (-1)^k
    c = c * (-1.0) ** np.arange(c.size)
    a = 2 * c.real[: k_max + 1]
    b = -2 * c.imag[: k_max + 1]
    a[0] /= 2
    return a, b


class TestProjection:
    def test_zero(self):
        s = project_sines(np.zeros_like(X), X, 30)
        assert not s.a.any() and not s.b.any()

    @pytest.mark.parametrize("k", [1, 3, 11, 20])
    def test_pure_sine(self, k):
        s = project_sines(np.sin(k * X), X, 40)
        expected = np.zeros(41)
        expected[k] = 1.0
        np.testing.assert_allclose(s.b, expected, atol=1e-6)
        np.testing.assert_allclose(s.a, 0.0, atol=1e-6)

    @pytest.mark.parametrize("k", [0, 1, 7, 20])
    def test_pure_cosine(self, k):
        s = project_sines(np.cos(k * X), X, 40)
        expected = np.zeros(41)
        expected[k] = 1.0
        np.testing.assert_allclose(s.a, expected, atol=1e-6)
        np.testing.assert_allclose(s.b, 0.0, atol=1e-6)

    def test_eq11_amplitude(self):
        ds = sample(SingleSine(10))
        assert project_sines(ds.y, ds.x, 20).b[10] == pytest.approx(-0.01, abs=1e-6)

    def test_matches_fft(self, rng):
        v = sum(rng.normal() * np.sin(k * X) + rng.normal() * np.cos(k * X) for k in range(0, 30))
        s = project_sines(v, X, 40)
        a, b = fft_oracle(v, 40)
        np.testing.assert_allclose(s.a, a, atol=1e-10)
        np.testing.assert_allclose(s.b, b, atol=1e-10)

    def test_rejects_nonuniform(self):
        g = X.copy()
        g[3] += 1e-4
        with pytest.raises(ValueError, match="uniform"):
            project_sines(np.zeros_like(g), g, 5)

    def test_rejects_wrong_period(self):
        g = make_grid(GridSpec(0.0, 1.0, 50))
        with pytest.raises(ValueError, match="period"):
            project_sines(np.zeros_like(g), g, 5)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            project_sines(np.zeros(10), X, 5)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_parseval(self, seed):
        rng = np.random.default_rng(seed)
        v = sum(rng.normal() * np.sin(k * X) + rng.normal() * np.cos(k * X) for k in range(1, 21))
        s = project_sines(v, X, 20)
        lhs = 0.5 * np.sum(s.a**2 + s.b**2)
        assert lhs == pytest.approx(mean_square(v, X), rel=1e-6)
        assert s.energy() == pytest.approx(lhs, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_linear(self, seed):
        rng = np.random.default_rng(seed)
        u, v = rng.normal(size=(2, X.size))
        su, sv, suv = (project_sines(w, X, 25) for w in (u, v, u + v))
        np.testing.assert_allclose(suv.a, su.a + sv.a, atol=1e-10)
        np.testing.assert_allclose(suv.b, su.b + sv.b, atol=1e-10)

    def test_csv(self):
        text = project_sines(np.sin(X), X, 2).to_csv().splitlines()
        assert text[0] == "k,a_k,b_k" and len(text) == 4


class TestRelativeError:
    def test_identity(self, rng):
        t = rng.normal(size=20)
        assert relative_l2_error(t, t) == 0.0

    def test_null_predictor(self, rng):
        t = rng.normal(size=20)
        assert relative_l2_error(np.zeros(20), t) == 1.0

    def test_scaling(self, rng):
        t = rng.normal(size=20)
        assert relative_l2_error(1.1 * t, t) == pytest.approx(0.1, abs=1e-12)

    def test_zero_target(self):
        with pytest.raises(ValueError, match="zero norm"):
            relative_l2_error(np.ones(3), np.zeros(3))


class TestCaptureVerdict:
    def test_perfect(self):
        y = sample(SingleSine(4)).y
        rep = capture_verdict(y, y, grid=X)
        assert rep.captured and rep.rel_l2 == 0.0
        assert rep.per_freq_rel_error == {4: 0.0}

    def test_null_predictor(self):
        y = sample(SingleSine(2)).y
        rep = capture_verdict(np.zeros_like(y), y)
        assert rep.rel_l2 == 1.0 and not rep.captured

    def test_threshold_boundary(self, rng):
        t = rng.normal(size=50)
        assert not capture_verdict(1.05 * t, t, threshold=0.05).captured
        assert capture_verdict(1.04 * t, t, threshold=0.05).captured

    @settings(max_examples=40, deadline=None)
    @given(c=st.floats(1e-6, 1e6) | st.floats(-1e6, -1e-6), seed=st.integers(0, 1000))
    def test_scale_invariant(self, c, seed):
        rng = np.random.default_rng(seed)
        t = rng.normal(size=64)
        p = t + 0.05 * rng.normal(size=64)
        a, b = capture_verdict(p, t), capture_verdict(c * p, c * t)
        assert b.rel_l2 == pytest.approx(a.rel_l2, rel=1e-9)
        assert a.captured == b.captured

    def test_per_frequency(self):
        target = np.sin(2 * X) / 2 + np.sin(10 * X) / 10
        pred = np.sin(2 * X) / 2 * 0.9 + np.sin(10 * X) / 10 * 0.5
        errs = per_frequency_errors(pred, target, X, 20)
        assert set(errs) == {2, 10}
        assert errs[2] == pytest.approx(0.1, abs=1e-9)
        assert errs[10] == pytest.approx(0.5, abs=1e-9)

    def test_serialisation(self):
        y = sample(SingleSine(4)).y
        rep = capture_verdict(0.9 * y, y, grid=X)
        lines = rep.to_csv().splitlines()
        assert lines[0] == "k,rel_err" and lines[1].startswith("4,0.0999")
        assert '"captured": false' in rep.to_json()
