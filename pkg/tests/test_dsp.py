import numpy as np
import pytest

from pulsecam import dsp


FS = 30.0


def bandpass(x, fs=FS, low=0.5, high=5.0, order=2):
    return dsp.bandpass_zero_phase(x, dsp.BandpassSpec(fs=fs, low=low, high=high, order=order))


def test_dc_rejected():
    out = bandpass(np.full(600, 100.0))
    assert np.max(np.abs(out)) < 1e-6


def test_inband_tone_gain_and_phase():
    t = np.arange(1200) / FS
    x = np.sin(2 * np.pi * 1.5 * t)
    out = bandpass(x)
    mid = slice(300, 900)
    amp = np.max(np.abs(out[mid]))
    assert 0.95 <= amp <= 1.0
    # phase: zero crossing positions agree mid-sequence
    analytic = x[mid]
    lag = np.argmax(np.correlate(out[mid], analytic, mode="full")) - (len(analytic) - 1)
    assert lag == 0
    # pointwise phase error bound away from edges
    phase_err = np.max(np.abs(out[mid] - amp * analytic))
    assert phase_err < 1.5e-3  # < 1e-3 rad phase shift at unit amplitude


def test_stopband_tone_suppressed():
    t = np.arange(1200) / FS
    x = np.sin(2 * np.pi * 10.0 * t)
    out = bandpass(x)
    assert np.max(np.abs(out[300:900])) < 0.05


def test_too_short_input():
    with pytest.raises(ValueError, match="short"):
        bandpass(np.zeros(10))


def test_linearity():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(400)
    y = rng.standard_normal(400)
    a, b = 2.3, -0.7
    lhs = bandpass(a * x + b * y)
    rhs = a * bandpass(x) + b * bandpass(y)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_time_reversal_symmetry():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(500)
    assert np.max(np.abs(bandpass(x[::-1]) - bandpass(x)[::-1])) < 1e-9


def test_nonfinite_rejected():
    x = np.zeros(100)
    x[3] = np.nan
    with pytest.raises(ValueError):
        bandpass(x)


def test_psd_single_tone_argmax():
    t = np.arange(int(10 * FS)) / FS
    x = np.sin(2 * np.pi * 1.2 * t)
    p = dsp.psd(x, FS)
    peak = dsp.band_argmax(p, 0.5, 5.0)
    assert abs(peak - 1.2) <= p.resolution / 2


def test_psd_zero_signal():
    p = dsp.psd(np.zeros(300), FS)
    assert np.all(p.power == 0.0)
    assert dsp.band_argmax(p, 0.5, 5.0) is None


def test_psd_nan_rejected():
    x = np.zeros(300)
    x[0] = np.nan
    with pytest.raises(ValueError):
        dsp.psd(x, FS)


def test_psd_white_noise_band_power():
    # band-integrated power proportional to bandwidth, 100-trial average
    rng = np.random.default_rng(2)
    ratios = []
    for _ in range(100):
        x = rng.standard_normal(512)
        p = dsp.psd(x, FS, window="boxcar")
        p1 = dsp.band_power(p, 1.0, 3.0)  # 2 Hz band
        p2 = dsp.band_power(p, 4.0, 12.0)  # 8 Hz band
        ratios.append(p2 / p1)
    assert abs(np.mean(ratios) - 4.0) / 4.0 < 0.2


def test_psd_parseval_rectangular():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(1024)
    p = dsp.psd(x, FS, window="boxcar")
    total = np.sum(p.power) * p.resolution
    assert abs(total - np.mean(x**2)) / np.mean(x**2) < 1e-6


def test_psd_nonnegative():
    rng = np.random.default_rng(4)
    p = dsp.psd(rng.standard_normal(256), FS)
    assert np.all(p.power >= 0.0)


def test_spline_linear_ramp_exact():
    x = np.linspace(0.0, 5.0, 40)
    out = dsp.spline_resample(x, FS, 100.0)
    t_out = np.arange(len(out)) / 100.0
    expected = x[0] + (x[-1] - x[0]) * t_out / ((len(x) - 1) / FS)
    assert np.max(np.abs(out - expected)) < 1e-9


def test_spline_identity_at_same_rate():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(50)
    out = dsp.spline_resample(x, FS, FS)
    assert len(out) == len(x)
    assert np.max(np.abs(out - x)) < 1e-12


def test_spline_tone_error():
    # 2 Hz tone upsampled 30 -> 500 Hz; integer cycle count keeps natural
    # boundary conditions exact
    t = np.arange(0, 10 * FS + 1) / FS
    x = np.sin(2 * np.pi * 2.0 * t)
    out = dsp.spline_resample(x, FS, 500.0)
    t_out = np.arange(len(out)) / 500.0
    assert np.max(np.abs(out - np.sin(2 * np.pi * 2.0 * t_out))) < 0.01


def test_spline_too_short():
    with pytest.raises(ValueError):
        dsp.spline_resample(np.zeros(3), FS, 500.0)


def test_spline_downsample_rejected():
    with pytest.raises(ValueError):
        dsp.spline_resample(np.zeros(10), FS, 10.0)


def test_bandpass_spec_validation():
    with pytest.raises(ValueError):
        dsp.BandpassSpec(fs=30.0, low=5.0, high=0.5)
    with pytest.raises(ValueError):
        dsp.BandpassSpec(fs=8.0, low=0.5, high=5.0)
