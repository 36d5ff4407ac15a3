"""Vital-sign metrics: windowed pulse rate, beat trains, SNR, agreement stats."""

from dataclasses import dataclass

import numpy as np

from . import dsp

PR_WINDOW_S = 10.0
PR_STEP_S = 5.0
BEAT_RATE_HZ = 500.0
MINIMA_PERCENTILE = 40.0
SNR_CAP_DB = 60.0
OUTLIER_BPM = 30.0


@dataclass
class PrSeries:
    centers: np.ndarray  # window centers, seconds
    pr: np.ndarray  # bpm; NaN where no dominant peak


@dataclass
class BeatTrain:
    beat_times: np.ndarray  # trough instants, seconds

    @property
    def ibis_ms(self):
        return np.diff(self.beat_times) * 1000.0

    def __len__(self):
        return len(self.beat_times)


@dataclass
class SnrReport:
    snr_db: float
    scale_ratio: float


@dataclass
class AgreementStats:
    mean_bias: float
    loa_low: float
    loa_high: float
    n: int


@dataclass
class MatchResult:
    rmse_ms: float
    missing_pct: float
    pairs: list  # (ref_time, est_time)


def pulse_rate(ppg, fs, window_s=PR_WINDOW_S, step_s=PR_STEP_S, band=(dsp.BAND_LOW, dsp.BAND_HIGH)):
    """Pulse rate per overlapped window from the spectral peak in the passband.

    Windows of ``window_s`` seconds every ``step_s`` seconds (hamming),
    PR = 60 * argmax frequency.  Windows without a dominant peak get NaN.
    """
    ppg = np.asarray(ppg, dtype=np.float64)
    n_win = int(round(window_s * fs))
    step = int(round(step_s * fs))
    if len(ppg) < n_win:
        raise ValueError("waveform shorter than one window")
    centers = []
    rates = []
    start = 0
    while start + n_win <= len(ppg):
        seg = ppg[start : start + n_win]
        p = dsp.psd(seg, fs)
        peak = dsp.band_argmax(p, band[0], band[1])
        centers.append((start + n_win / 2.0) / fs)
        rates.append(np.nan if peak is None else peak * 60.0)
        start += step
    return PrSeries(centers=np.array(centers), pr=np.array(rates))


def detect_beats(ppg, fs, pr, resample_hz=BEAT_RATE_HZ, depth_percentile=MINIMA_PERCENTILE):
    """Beat instants as waveform troughs after spline upsampling.

    The signal is resampled to ``resample_hz``, local minima below the given
    percentile of sample values are candidates, and minima closer than half
    a beat period (0.5 * 60/pr seconds) are resolved by keeping the deeper
    one.  Returns an empty train when nothing qualifies.
    """
    ppg = np.asarray(ppg, dtype=np.float64)
    if pr <= 0:
        raise ValueError("pulse rate must be positive")
    x = dsp.spline_resample(ppg, fs, resample_hz) if resample_hz > fs else ppg.copy()
    rate = resample_hz if resample_hz > fs else fs
    depth = np.percentile(x, depth_percentile)
    interior = np.flatnonzero((x[1:-1] < x[:-2]) & (x[1:-1] <= x[2:])) + 1
    candidates = interior[x[interior] < depth]
    refractory = 0.5 * 60.0 / pr
    kept_idx = []
    for i in candidates:
        t = i / rate
        if kept_idx and t - kept_idx[-1] / rate < refractory:
            if x[i] < x[kept_idx[-1]]:
                kept_idx[-1] = i
        else:
            kept_idx.append(i)
    return BeatTrain(beat_times=np.array(kept_idx, dtype=np.float64) / rate)


def match_beats(est, ref):
    """Greedy nearest-neighbor beat matching within half a reference period.

    Unmatched reference beats count as missing; the RMSE is taken over
    inter-beat intervals between adjacent matched reference beats.
    """
    if len(ref) == 0:
        raise ValueError("empty reference beat train")
    ref_t = ref.beat_times
    est_t = est.beat_times
    if len(ref) > 1:
        window = 0.5 * float(np.mean(np.diff(ref_t)))
    else:
        window = 0.5
    pairs_all = []
    for i, rt in enumerate(ref_t):
        for j, et in enumerate(est_t):
            dt = abs(et - rt)
            if dt <= window:
                pairs_all.append((dt, i, j))
    pairs_all.sort(key=lambda p: (p[0], p[1], p[2]))
    ref_match = {}
    est_used = set()
    for _, i, j in pairs_all:
        if i in ref_match or j in est_used:
            continue
        ref_match[i] = j
        est_used.add(j)
    missing_pct = 100.0 * (len(ref_t) - len(ref_match)) / len(ref_t)
    errors = []
    pairs = [(ref_t[i], est_t[j]) for i, j in sorted(ref_match.items())]
    for i in range(len(ref_t) - 1):
        if i in ref_match and i + 1 in ref_match:
            ibi_ref = ref_t[i + 1] - ref_t[i]
            ibi_est = est_t[ref_match[i + 1]] - est_t[ref_match[i]]
            errors.append((ibi_est - ibi_ref) * 1000.0)
    rmse = float(np.sqrt(np.mean(np.square(errors)))) if errors else float("nan")
    return MatchResult(rmse_ms=rmse, missing_pct=missing_pct, pairs=pairs)


def snr(k, z, fs_k, fs_z, align=True, max_lag_s=1.0, cap_db=SNR_CAP_DB):
    """Similarity of an estimate to a reference as a projection SNR.

    Both inputs must already be bandpassed to the passband of interest.  The
    reference is spline-evaluated on the estimate's grid and, when ``align``
    is set, shifted by the lag (within +-``max_lag_s``) maximizing their
    cross-correlation.  The reference-collinear part of the estimate counts
    as signal, the residual as noise; the dB ratio is capped at +-``cap_db``.
    """
    k = np.asarray(k, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if not np.any(z):
        raise ValueError("zero reference")
    if fs_z != fs_k:
        n_out = int(np.floor((len(z) - 1) / fs_z * fs_k)) + 1
        z = dsp.spline_eval(z, fs_z, np.arange(n_out) / fs_k)
    n = min(len(k), len(z))
    k = k[:n]
    z = z[:n]
    if align:
        max_lag = int(round(max_lag_s * fs_k))
        best = None
        for lag in range(-max_lag, max_lag + 1):
            if lag >= 0:
                a, b = k[lag:], z[: n - lag]
            else:
                a, b = k[: n + lag], z[-lag:]
            if len(a) < 2:
                continue
            denom = np.linalg.norm(a) * np.linalg.norm(b)
            c = float(np.dot(a, b) / denom) if denom > 0 else 0.0
            if best is None or c > best[0]:
                best = (c, lag)
        lag = best[1] if best else 0
        if lag >= 0:
            k, z = k[lag:], z[: n - lag]
        else:
            k, z = k[: n + lag], z[-lag:]
    zz = float(np.dot(z, z))
    scale = float(np.dot(k, z) / zz)
    s = scale * z
    noise = k - s
    p_s = float(np.dot(s, s))
    p_n = float(np.dot(noise, noise))
    if p_n <= 1e-12 * max(p_s, 1e-300):
        db = cap_db
    elif p_s <= 1e-12 * p_n:
        db = -cap_db
    else:
        db = float(np.clip(10.0 * np.log10(p_s / p_n), -cap_db, cap_db))
    return SnrReport(snr_db=db, scale_ratio=scale)


def bland_altman(est, ref):
    """Mean bias and 1.96-SD limits of agreement between two PR series."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError("series must be aligned")
    d = est - ref
    d = d[np.isfinite(d)]
    if len(d) < 2:
        raise ValueError("need at least 2 paired windows")
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    return AgreementStats(mean_bias=mean, loa_low=mean - 1.96 * sd, loa_high=mean + 1.96 * sd, n=len(d))


def agreement_report(est, ref, outlier_bpm=OUTLIER_BPM):
    """Bland-Altman stats with and without extreme outliers (|error| >= threshold).

    Returns (all_stats, filtered_stats_or_None, n_outliers).
    """
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    stats_all = bland_altman(est, ref)
    d = est - ref
    keep = np.isfinite(d) & (np.abs(d) < outlier_bpm)
    n_out = int(np.isfinite(d).sum() - keep.sum())
    filtered = None
    if keep.sum() >= 2:
        filtered = bland_altman(est[keep], ref[keep])
    return stats_all, filtered, n_out
