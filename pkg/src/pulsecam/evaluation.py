"""Report generation: estimate vs reference waveform into metric tables.

All metric math lives in :mod:`pulsecam.vitals`; this module handles span
alignment, grid matching, and deterministic CSV emission.  The reference is
spline-evaluated onto the estimate's time grid first so both pulse-rate
series share one window/frequency grid.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import dsp, vitals


@dataclass
class EvalReport:
    snr: vitals.SnrReport
    pr_centers: np.ndarray
    pr_est: np.ndarray
    pr_ref: np.ndarray
    est_beats: vitals.BeatTrain
    ref_beats: vitals.BeatTrain
    match: vitals.MatchResult
    agreement_all: vitals.AgreementStats
    agreement_filtered: vitals.AgreementStats | None
    n_outliers: int

    def pr_abs_error(self):
        d = np.abs(self.pr_est - self.pr_ref)
        return d[np.isfinite(d)]


def _overlap(t0_a, dur_a, t0_b, dur_b):
    start = max(t0_a, t0_b)
    end = min(t0_a + dur_a, t0_b + dur_b)
    return start, end


def evaluate_waveforms(est, fs_est, ref, fs_ref, t0_est=0.0, t0_ref=0.0, ref_beat_times=None):
    """Compare an estimated waveform against a reference; raises on span mismatch."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    dur_est = len(est) / fs_est
    dur_ref = len(ref) / fs_ref
    start, end = _overlap(t0_est, dur_est, t0_ref, dur_ref)
    if end <= start:
        raise ValueError("waveform time spans do not overlap")
    if (max(dur_est, dur_ref) - (end - start)) / max(dur_est, dur_ref) > 0.10:
        raise ValueError("waveform time spans mismatch by more than 10%")

    i0 = int(np.ceil((start - t0_est) * fs_est - 1e-9))
    i1 = int(np.floor((end - t0_est) * fs_est + 1e-9))
    i1 = min(i1, len(est) - 1)
    est_seg = est[i0 : i1 + 1]
    t_grid = t0_est + np.arange(i0, i1 + 1) / fs_est
    ref_on_grid = dsp.spline_eval(ref, fs_ref, t_grid - t0_ref)

    snr = vitals.snr(est_seg, ref_on_grid, fs_est, fs_est, align=True)

    pr_est = vitals.pulse_rate(est_seg, fs_est)
    pr_ref = vitals.pulse_rate(ref_on_grid, fs_est)
    centers = pr_est.centers + t_grid[0]

    med_est = np.nanmedian(pr_est.pr) if np.any(np.isfinite(pr_est.pr)) else 60.0
    med_ref = np.nanmedian(pr_ref.pr) if np.any(np.isfinite(pr_ref.pr)) else 60.0
    est_train = vitals.detect_beats(est_seg, fs_est, med_est)
    est_train = vitals.BeatTrain(beat_times=est_train.beat_times + t_grid[0])
    if ref_beat_times is not None:
        bt = np.asarray(ref_beat_times, dtype=np.float64)
        ref_train = vitals.BeatTrain(beat_times=bt[(bt >= start) & (bt <= end)])
    else:
        ref_native = ref[int((start - t0_ref) * fs_ref) : int((end - t0_ref) * fs_ref)]
        ref_train = vitals.detect_beats(ref_native, fs_ref, med_ref)
        ref_train = vitals.BeatTrain(beat_times=ref_train.beat_times + start)
    match = vitals.match_beats(est_train, ref_train)

    agree_all, agree_filt, n_out = vitals.agreement_report(pr_est.pr, pr_ref.pr)
    return EvalReport(
        snr=snr,
        pr_centers=centers,
        pr_est=pr_est.pr,
        pr_ref=pr_ref.pr,
        est_beats=est_train,
        ref_beats=ref_train,
        match=match,
        agreement_all=agree_all,
        agreement_filtered=agree_filt,
        n_outliers=n_out,
    )


def goodness_snr_scatter(epochs, fs, truth_wave, fs_truth, band=(dsp.BAND_LOW, dsp.BAND_HIGH), bp_order=2):
    """Scatter rows (roi_id, goodness_db, true_snr_db, n_epochs) per scored block.

    ``epochs`` is an iterable with .epoch, .start_frame, .weights and
    .channels attributes (see pipeline.EpochResult).  Per block, the weight
    is averaged over the epochs where it was scored and the true SNR is the
    projection metric of the concatenated bandpassed block trace against the
    ground-truth waveform, no lag search (simulator output is synchronized).
    """
    n_frames_total = max(e.start_frame + e.n_frames for e in epochs)
    t_grid = np.arange(n_frames_total) / fs
    truth_fps = dsp.spline_eval(truth_wave, fs_truth, t_grid)
    spec = dsp.BandpassSpec(fs=fs, low=band[0], high=band[1], order=bp_order)
    truth_filt = dsp.bandpass_zero_phase(truth_fps, spec)
    weights = {}
    segments = {}
    for e in epochs:
        for roi_id, trace in e.channels.items():
            w = e.weights.get(roi_id, 0.0)
            if w <= 0.0:
                continue
            weights.setdefault(roi_id, []).append(w)
            segments.setdefault(roi_id, []).append((e.start_frame, trace))
    rows = []
    for roi_id in sorted(weights):
        g_mean = float(np.mean(weights[roi_id]))
        k = np.concatenate([tr for _, tr in segments[roi_id]])
        z = np.concatenate([truth_filt[s : s + len(tr)] for s, tr in segments[roi_id]])
        rep = vitals.snr(k, z, fs, fs, align=False)
        rows.append((roi_id, 10.0 * np.log10(g_mean), rep.snr_db, len(weights[roi_id])))
    return rows


# --- CSV emission ------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_report(report, outdir):
    """Emit snr.csv, pr_series.csv, ibi.csv, agreement.csv, metrics.csv."""
    os.makedirs(outdir, exist_ok=True)
    _write_csv(
        os.path.join(outdir, "snr.csv"),
        ["snr_db", "scale_ratio"],
        [(report.snr.snr_db, report.snr.scale_ratio)],
    )
    _write_csv(
        os.path.join(outdir, "pr_series.csv"),
        ["window_center_s", "pr_est_bpm", "pr_ref_bpm", "error_bpm"],
        [
            (c, e, r, e - r)
            for c, e, r in zip(report.pr_centers, report.pr_est, report.pr_ref)
        ],
    )
    ibi_rows = []
    pairs = report.match.pairs
    for k in range(1, len(pairs)):
        ref_ibi = (pairs[k][0] - pairs[k - 1][0]) * 1000.0
        est_ibi = (pairs[k][1] - pairs[k - 1][1]) * 1000.0
        ibi_rows.append((pairs[k][0], pairs[k][1], ref_ibi, est_ibi, est_ibi - ref_ibi))
    _write_csv(
        os.path.join(outdir, "ibi.csv"),
        ["ref_beat_s", "est_beat_s", "ref_ibi_ms", "est_ibi_ms", "error_ms"],
        ibi_rows,
    )
    agree_rows = [
        (
            "all",
            report.agreement_all.mean_bias,
            report.agreement_all.loa_low,
            report.agreement_all.loa_high,
            report.agreement_all.n,
        )
    ]
    if report.agreement_filtered is not None:
        a = report.agreement_filtered
        agree_rows.append(("without_outliers", a.mean_bias, a.loa_low, a.loa_high, a.n))
    _write_csv(
        os.path.join(outdir, "agreement.csv"),
        ["subset", "mean_bias_bpm", "loa_low_bpm", "loa_high_bpm", "n_windows"],
        agree_rows,
    )
    err = report.pr_abs_error()
    metrics = [
        ("snr_db", report.snr.snr_db),
        ("pr_mae_bpm", float(np.mean(err)) if len(err) else float("nan")),
        ("pr_max_abs_error_bpm", float(np.max(err)) if len(err) else float("nan")),
        ("ibi_rmse_ms", report.match.rmse_ms),
        ("missing_pct", report.match.missing_pct),
        ("n_outlier_windows", float(report.n_outliers)),
    ]
    _write_csv(os.path.join(outdir, "metrics.csv"), ["metric", "value"], metrics)


def write_scatter(rows, path):
    _write_csv(path, ["roi_id", "goodness_db", "true_snr_db", "n_epochs"], rows)
