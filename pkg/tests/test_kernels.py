"""Pure-numpy vs compiled kernel backends must agree to float rounding."""

import numpy as np
import pytest

from ddsp_voxkit import kernels
from ddsp_voxkit.kernels import pure

compiled = pytest.importorskip(
    "ddsp_voxkit.kernels._core", reason="compiled kernel core not built"
)


def test_active_backend_reported():
    assert kernels.BACKEND in ("pure", "compiled")


class TestParity:
    def test_nccf(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=4000)
        starts = (160 * np.arange(12)).astype(np.int64)
        lags = np.arange(30, 321, dtype=np.int64)
        a = pure.nccf(x, starts, lags, 640)
        b = compiled.nccf(x, starts, lags, 640)
        np.testing.assert_allclose(a, b, atol=1e-13)

    def test_nccf_silence(self):
        x = np.zeros(3000)
        starts = np.array([0, 160], dtype=np.int64)
        lags = np.arange(30, 320, dtype=np.int64)
        np.testing.assert_array_equal(
            pure.nccf(x, starts, lags, 640), compiled.nccf(x, starts, lags, 640)
        )

    @pytest.mark.parametrize("dtype", [np.float64, np.float32])
    def test_ola_and_adjoint(self, dtype):
        rng = np.random.default_rng(1)
        frames = rng.normal(size=(9, 128)).astype(dtype)
        window = (0.5 - 0.5 * np.cos(2 * np.pi * np.arange(128) / 128)).astype(dtype)
        for out_len in (9 * 32 + 128, 9 * 32, 100):
            a = pure.ola(frames, window, 32, out_len)
            b = compiled.ola(frames, window, 32, out_len)
            np.testing.assert_allclose(a, b, atol=1e-5 if dtype == np.float32 else 1e-14)
            g = rng.normal(size=out_len).astype(dtype)
            ga = pure.ola_adjoint(g, window, 32, 9, 128)
            gb = compiled.ola_adjoint(g, window, 32, 9, 128)
            np.testing.assert_array_equal(ga, gb)

    @pytest.mark.parametrize("dtype", [np.float64, np.float32])
    def test_interp_gather_scatter(self, dtype):
        rng = np.random.default_rng(2)
        vals = rng.normal(size=(7, 5)).astype(dtype)
        idx0 = rng.integers(0, 6, 50).astype(np.int64)
        idx1 = idx0 + 1
        w = rng.uniform(0, 1, 50).astype(dtype)
        a = pure.interp_gather(vals, idx0, idx1, w)
        b = compiled.interp_gather(vals, idx0, idx1, w)
        np.testing.assert_allclose(a, b, atol=1e-6 if dtype == np.float32 else 0.0)
        g = rng.normal(size=(50, 5)).astype(dtype)
        ga = pure.interp_scatter(g, idx0, idx1, w, 7)
        gb = compiled.interp_scatter(g, idx0, idx1, w, 7)
        np.testing.assert_allclose(ga, gb, atol=1e-5 if dtype == np.float32 else 1e-14)

    def test_nccf_matches_brute_force_definition(self):
        # both backends against the direct formula at a handful of points
        rng = np.random.default_rng(3)
        x = rng.normal(size=3000)
        starts = np.array([100, 420], dtype=np.int64)
        lags = np.array([40, 81, 200], dtype=np.int64)
        win = 400
        expected = np.zeros((2, 3))
        for i, s in enumerate(starts):
            a = x[s : s + win]
            for j, lag in enumerate(lags):
                c = x[s + lag : s + lag + win]
                expected[i, j] = (a @ c) / np.sqrt((a @ a) * (c @ c))
        np.testing.assert_allclose(pure.nccf(x, starts, lags, win), expected, atol=1e-13)
        np.testing.assert_allclose(compiled.nccf(x, starts, lags, win), expected, atol=1e-13)
