"""Whole-face averaging baseline with global 2D shift compensation.

The prior-art comparison method: one trace from the mean intensity of the
whole face area (union of the region polygons at frame 0), motion handled
only by an integer-pixel global shift from the cross-correlation argmax of
consecutive decimated frames.  Sub-pixel refinement and rotation handling
are deliberately absent; the trace then goes through the same per-epoch
bandpass and unit-RMS normalization as the main estimator.
"""

import numpy as np

from . import dsp
from .pipeline import MIN_EPOCH_SAMPLES, EpochResult, RunResult
from .roi import points_in_polygon

DECIMATE = 2
MAX_SHIFT = 8  # decimated px per frame pair


def _decimate(frame):
    h2 = frame.shape[0] // DECIMATE * DECIMATE
    w2 = frame.shape[1] // DECIMATE * DECIMATE
    c = frame[:h2, :w2]
    return 0.25 * (c[0::2, 0::2] + c[1::2, 0::2] + c[0::2, 1::2] + c[1::2, 1::2])


def _shift_between(a, b, max_shift=MAX_SHIFT):
    """Integer displacement of b relative to a via FFT cross-correlation."""
    a = a - a.mean()
    b = b - b.mean()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0, 0
    corr = np.fft.irfft2(np.fft.rfft2(b / nb) * np.conj(np.fft.rfft2(a / na)), s=a.shape)
    lags = list(range(-max_shift, max_shift + 1))
    best = (-np.inf, 0, 0)
    for dy in lags:
        for dx in lags:
            v = corr[dy % a.shape[0], dx % a.shape[1]]
            if v > best[0]:
                best = (v, dx, dy)
    return best[1], best[2]


def run_face_average(seq, region_file, config=None):
    """Baseline estimator; output shape matches :func:`pipeline.run_estimator`."""
    cfg = dict(config or {})
    fps = seq.fps
    n_total = len(seq)
    h, w = seq.pixels.shape[1:]
    polys = region_file.regions_at(0)
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.column_stack([xs.ravel() + 0.5, ys.ravel() + 0.5])
    mask = np.zeros(h * w, dtype=bool)
    for poly in polys.values():
        mask |= points_in_polygon(pts, poly)
    mask = mask.reshape(h, w)
    if not mask.any():
        raise ValueError("face region covers no pixels")
    my, mx = np.nonzero(mask)

    trace = np.empty(n_total)
    shift_x = 0
    shift_y = 0
    prev_dec = _decimate(np.asarray(seq.pixels[0], dtype=np.float64))
    for k in range(n_total):
        frame = np.asarray(seq.pixels[k], dtype=np.float64)
        if k > 0:
            dec = _decimate(frame)
            dx, dy = _shift_between(prev_dec, dec)
            shift_x += dx * DECIMATE
            shift_y += dy * DECIMATE
            prev_dec = dec
        yy = my + shift_y
        xx = mx + shift_x
        ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        trace[k] = frame[yy[ok], xx[ok]].mean() if ok.any() else 0.0

    epoch_len = max(int(round(cfg.get("epoch_seconds", 10.0) * fps)), 1)
    band = cfg.get("band", (dsp.BAND_LOW, dsp.BAND_HIGH))
    spec = dsp.BandpassSpec(fs=fps, low=band[0], high=band[1], order=cfg.get("bp_order", 2))
    out = np.zeros(n_total)
    epochs = []
    start = 0
    epoch_idx = 0
    while start < n_total:
        n_frames = min(epoch_len, n_total - start)
        samples = np.zeros(n_frames)
        if n_frames >= MIN_EPOCH_SAMPLES:
            filt = dsp.bandpass_zero_phase(trace[start : start + n_frames], spec)
            rms = float(np.sqrt(np.mean(filt**2)))
            if rms > 0:
                samples = filt / rms
        epochs.append(
            EpochResult(
                epoch=epoch_idx,
                start_frame=start,
                n_frames=n_frames,
                samples=samples,
                coarse_pr=None,
                contributing=1,
                n_rois=1,
                weights={"face": 1.0},
                gate_reasons={},
                channels={},
                cum_affines={},
            )
        )
        out[start : start + n_frames] = samples
        start += n_frames
        epoch_idx += 1
    return RunResult(fps=fps, samples=out, epochs=epochs)
