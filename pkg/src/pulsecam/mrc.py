"""Weighted combining of per-block traces into one pulse waveform per epoch.

Per epoch: bandpassed traces are amplitude-gated, a coarse pulse rate is
bootstrapped from the unit-weight sum (with a history-median correction),
each surviving channel gets a spectral goodness weight, weights below the
floor are zeroed, and the weighted sum is rescaled to unit RMS.
"""

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from . import dsp

AMPLITUDE_THRESHOLD = 8.0
GOODNESS_FLOOR = 0.25
PR_BAND_HALFWIDTH_HZ = 0.2
PR_JUMP_BPM = 24.0
GOODNESS_CAP = 1e6
PR_HISTORY = 4


@dataclass
class RoiChannel:
    roi_id: str
    filtered: np.ndarray  # bandpass output, camera-intensity units
    amp_range: float = 0.0
    gated: bool = False
    gate_reason: str | None = None


@dataclass
class GoodnessWeights:
    weights: dict  # roi_id -> nonnegative weight; exactly 0 for gated blocks
    pr_used: float | None  # bpm
    band_halfwidth: float


@dataclass
class PpgEstimate:
    epoch: int
    samples: np.ndarray
    contributing_roi_count: int
    coarse_pr: float | None


class PrHistory:
    """Ring of the last few accepted epoch pulse-rate values (bpm)."""

    def __init__(self, maxlen=PR_HISTORY):
        self._values = deque(maxlen=maxlen)

    def push(self, value):
        self._values.append(float(value))

    def median(self):
        if not self._values:
            return None
        return float(np.median(list(self._values)))

    def __len__(self):
        return len(self._values)


def make_channel(roi_id, trace, fs, band=(dsp.BAND_LOW, dsp.BAND_HIGH), order=2):
    spec = dsp.BandpassSpec(fs=fs, low=band[0], high=band[1], order=order)
    return RoiChannel(roi_id=roi_id, filtered=dsp.bandpass_zero_phase(trace, spec))


def amplitude_gate(channel, a_th=AMPLITUDE_THRESHOLD):
    """Gate a channel whose peak-to-peak range reaches the threshold.

    The genuine pulse component stays within a couple of intensity counts,
    so a large swing means illumination change or motion artifact; the
    channel passes only when (max - min) < a_th, boundary gated.
    """
    rng = float(channel.filtered.max() - channel.filtered.min())
    gated = rng >= a_th
    return replace(channel, amp_range=rng, gated=gated, gate_reason="amplitude" if gated else None)


def coarse_pr(channels, fs, history, band=(dsp.BAND_LOW, dsp.BAND_HIGH), jump_bpm=PR_JUMP_BPM):
    """Bootstrap pulse rate from the unit-weight sum of ungated channels.

    The spectral peak inside the passband gives the estimate; if it jumps
    more than ``jump_bpm`` from the median of recent epochs, the median is
    returned instead.  The accepted value is pushed into the history.
    Returns None when no ungated channel is available.
    """
    alive = [c for c in channels if not c.gated]
    if not alive:
        return None
    total = np.sum([c.filtered for c in alive], axis=0)
    p = dsp.psd(total, fs)
    peak = dsp.band_argmax(p, band[0], band[1])
    if peak is None:
        return None
    pr = peak * 60.0
    med = history.median()
    if med is not None and abs(pr - med) > jump_bpm:
        pr = med
    history.push(pr)
    return pr


def goodness_from_psd(p, pr_hz, b=PR_BAND_HALFWIDTH_HZ, band=(dsp.BAND_LOW, dsp.BAND_HIGH), cap=GOODNESS_CAP):
    """Ratio of power near the pulse rate to the remaining passband power.

    Integration bands are clipped to the filter passband; the denominator is
    floored at 1e-12 of the total band power so noiseless channels return
    the cap instead of blowing up.  Pulse-rate harmonics land in the
    denominator (counted as noise).
    """
    lo = max(pr_hz - b, band[0])
    hi = min(pr_hz + b, band[1])
    total = dsp.band_power(p, band[0], band[1])
    if total <= 0.0:
        return 0.0
    signal = dsp.band_power(p, lo, hi)
    denom = max(total - signal, 1e-12 * total)
    return float(min(signal / denom, cap))


def goodness(channel, pr_bpm, fs, b=PR_BAND_HALFWIDTH_HZ, band=(dsp.BAND_LOW, dsp.BAND_HIGH), cap=GOODNESS_CAP):
    """Goodness weight of one ungated channel at the given pulse rate."""
    p = dsp.psd(channel.filtered, fs)
    return goodness_from_psd(p, pr_bpm / 60.0, b=b, band=band, cap=cap)


def floor_gate(weights, floor=GOODNESS_FLOOR):
    """Zero out weights strictly below the floor (boundary kept)."""
    flat = {k: (0.0 if v < floor else v) for k, v in weights.weights.items()}
    return replace(weights, weights=flat)


def combine(channels, weights, epoch=0, coarse_pr_bpm=None):
    """Weighted sum of ungated channels, rescaled to unit RMS.

    Camera amplitude is arbitrary, so the normalization makes epochs
    comparable.  All weights zero yields None (empty-estimate epoch).
    """
    total = None
    count = 0
    for ch in channels:
        w = weights.weights.get(ch.roi_id, 0.0)
        if ch.gated or w <= 0.0:
            continue
        term = w * ch.filtered
        total = term if total is None else total + term
        count += 1
    if total is None:
        return None
    rms = float(np.sqrt(np.mean(total**2)))
    if rms <= 0.0:
        return None
    return PpgEstimate(epoch=epoch, samples=total / rms, contributing_roi_count=count, coarse_pr=coarse_pr_bpm)


def epoch_weights(channels, fs, history, config=None):
    """Full per-epoch weighting pass over bandpassed channels.

    Returns (gated_channels, GoodnessWeights).  When the coarse pulse rate
    is unavailable the weights fall back to the previous epoch's weights
    where block ids match, else uniform, keeping the pipeline total.
    ``config`` keys: a_th, pr_band_halfwidth_hz, pr_jump_bpm, goodness_floor,
    goodness_cap, band, prev_weights.
    """
    cfg = dict(config or {})
    band = cfg.get("band", (dsp.BAND_LOW, dsp.BAND_HIGH))
    gated = [amplitude_gate(c, a_th=cfg.get("a_th", AMPLITUDE_THRESHOLD)) for c in channels]
    pr = coarse_pr(gated, fs, history, band=band, jump_bpm=cfg.get("pr_jump_bpm", PR_JUMP_BPM))
    b = cfg.get("pr_band_halfwidth_hz", PR_BAND_HALFWIDTH_HZ)
    if pr is None:
        prev = cfg.get("prev_weights")
        values = {}
        for c in gated:
            if c.gated:
                values[c.roi_id] = 0.0
            elif prev is not None and c.roi_id in prev.weights:
                values[c.roi_id] = prev.weights[c.roi_id]
            else:
                values[c.roi_id] = 1.0
        return gated, GoodnessWeights(weights=values, pr_used=None, band_halfwidth=b)
    values = {}
    for c in gated:
        if c.gated:
            values[c.roi_id] = 0.0
        else:
            values[c.roi_id] = goodness(
                c, pr, fs, b=b, band=band, cap=cfg.get("goodness_cap", GOODNESS_CAP)
            )
    weights = GoodnessWeights(weights=values, pr_used=pr, band_halfwidth=b)
    return gated, floor_gate(weights, floor=cfg.get("goodness_floor", GOODNESS_FLOOR))
