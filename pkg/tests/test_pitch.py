import numpy as np
import pytest

from ddsp_voxkit.audio_io import AudioBuffer
from ddsp_voxkit.features import frame_count
from ddsp_voxkit.pitch import (
    F0Contour,
    extract_f0,
    interpolate_f0_to_samples,
    lf0,
)

from helpers import noise_buffer, sawtooth_buffer, sine_buffer


def oracle_nccf(x: np.ndarray, start: int, lag: int, win: int) -> float:
    """Brute-force NCCF at one (frame, lag), independent of the kernels."""
    a = x[start : start + win]
    b = x[start + lag : start + lag + win]
    ea = np.dot(a, a)
    eb = np.dot(b, b)
    if ea <= 0 or eb <= 0:
        return 0.0
    return float(np.dot(a, b) / np.sqrt(ea * eb))


class TestExtractF0:
    def test_pure_sine_tracked_tightly(self):
        buf = sine_buffer(200.0, seconds=1.0)
        contour = extract_f0(buf)
        interior = contour.f0_hz[2:-2]
        assert np.all(contour.voiced[2:-2])
        med = np.median(interior)
        assert 198.0 <= med <= 202.0
        # oracle: the NCCF at the nominal lag is ~1 at an interior frame
        pad = np.concatenate([np.zeros(240), buf.samples, np.zeros(1000)])
        assert oracle_nccf(pad, 30 * 160, 80, 640) > 0.99

    def test_white_noise_mostly_unvoiced(self):
        contour = extract_f0(noise_buffer(seconds=1.0, seed=4))
        assert (~contour.voiced).mean() >= 0.90

    def test_digital_silence_unvoiced(self):
        contour = extract_f0(AudioBuffer(np.zeros(16000), 16000))
        assert not contour.voiced.any()
        assert np.all(contour.f0_hz == 0.0)

    def test_frame_count_matches_log_mel(self):
        for n in (16000, 12345, 8000, 700):
            buf = AudioBuffer(np.zeros(n), 16000)
            assert extract_f0(buf).frames == frame_count(n)

    def test_short_input_single_unvoiced_frame(self):
        contour = extract_f0(AudioBuffer(np.zeros(300), 16000))
        assert contour.frames == 1
        assert not contour.voiced[0]

    def test_sawtooth_octave_sanity(self):
        for freq in (110.0, 220.0, 440.0):
            contour = extract_f0(sawtooth_buffer(freq, seconds=1.0))
            voiced = contour.f0_hz[contour.voiced]
            assert len(voiced) > 50
            med = np.median(voiced)
            assert abs(med - freq) / freq < 0.01, f"{freq}: median {med}"
            octave = (np.abs(voiced - freq / 2) / (freq / 2) < 0.05) | (
                np.abs(voiced - freq * 2) / (freq * 2) < 0.05
            )
            assert octave.mean() < 0.05

    def test_period_shift_robustness(self):
        base = sine_buffer(200.0, seconds=1.0)
        shifted = AudioBuffer(np.roll(base.samples, 80), 16000)
        m1 = np.median(extract_f0(base).f0_hz[extract_f0(base).voiced])
        c2 = extract_f0(shifted)
        m2 = np.median(c2.f0_hz[c2.voiced])
        assert abs(m1 - m2) / m1 < 0.01

    def test_requires_16k(self):
        with pytest.raises(ValueError):
            extract_f0(AudioBuffer(np.zeros(8000), 8000))


class TestContourType:
    def test_zero_iff_unvoiced_enforced(self):
        with pytest.raises(ValueError):
            F0Contour(np.array([100.0, 0.0]), np.array([True, True]))
        with pytest.raises(ValueError):
            F0Contour(np.array([100.0]), np.array([False]))

    def test_lf0_is_log_on_voiced(self):
        contour = F0Contour(np.array([100.0, 0.0]), np.array([True, False]))
        out = lf0(contour)
        np.testing.assert_allclose(out, [np.log(100.0), 0.0])


class TestInterpolateF0:
    def test_constant_voiced(self):
        contour = F0Contour(np.full(5, 100.0), np.ones(5, dtype=bool))
        out = interpolate_f0_to_samples(contour, hop=160)
        assert out.shape == (800,)
        np.testing.assert_allclose(out, 100.0)

    def test_linear_ramp_between_centers(self):
        contour = F0Contour(np.array([100.0, 200.0]), np.ones(2, dtype=bool))
        out = interpolate_f0_to_samples(contour, hop=4)
        # centers at samples 2 and 6; clamped outside, linear between
        np.testing.assert_allclose(
            out, [100, 100, 100, 125, 150, 175, 200, 200]
        )

    def test_no_bridge_into_unvoiced(self):
        contour = F0Contour(np.array([100.0, 0.0]), np.array([True, False]))
        out = interpolate_f0_to_samples(contour, hop=4)
        np.testing.assert_allclose(out, [100, 100, 100, 100, 0, 0, 0, 0])

    def test_separate_voiced_runs_do_not_interact(self):
        contour = F0Contour(
            np.array([100.0, 0.0, 300.0]), np.array([True, False, True])
        )
        out = interpolate_f0_to_samples(contour, hop=4)
        np.testing.assert_allclose(out[:4], 100.0)
        np.testing.assert_allclose(out[4:8], 0.0)
        np.testing.assert_allclose(out[8:], 300.0)

    def test_empty_contour_rejected(self):
        with pytest.raises(ValueError):
            interpolate_f0_to_samples(
                F0Contour(np.zeros(0), np.zeros(0, dtype=bool)), hop=4
            )
