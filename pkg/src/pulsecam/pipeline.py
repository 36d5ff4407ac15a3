"""End-to-end estimation: frames + regions -> combined pulse waveform.

Processing runs in epochs of ``epoch_seconds``.  Each epoch re-reads the
region polygons valid at its first frame, re-detects features, tracks every
region frame to frame, collects per-block traces, and hands them to the
weighting/combining stage.  Per-epoch waveforms (unit RMS each) are
concatenated at the frame rate, so the output row count equals the frame
count; epochs where everything is rejected emit zeros.
"""

from dataclasses import dataclass, field

import numpy as np

from . import mrc, tracking
from .roi import average_quads, grid_regions


@dataclass
class EpochResult:
    epoch: int
    start_frame: int
    n_frames: int
    samples: np.ndarray
    coarse_pr: float | None
    contributing: int
    n_rois: int  # blocks defined for this epoch
    weights: dict  # roi_id -> weight (0 for gated/rejected)
    gate_reasons: dict  # roi_id -> reason for zero weight
    channels: dict  # roi_id -> bandpassed trace (only blocks valid all epoch)
    cum_affines: dict  # region label -> recovered affine over the epoch, or None


@dataclass
class RunResult:
    fps: float
    samples: np.ndarray  # concatenated estimate, one value per frame
    epochs: list = field(default_factory=list)

    def gate_fraction(self):
        total = sum(e.n_rois for e in self.epochs)
        if total == 0:
            return 1.0
        zero = sum(sum(1 for w in e.weights.values() if w <= 0.0) + (e.n_rois - len(e.weights)) for e in self.epochs)
        return zero / total


MIN_EPOCH_SAMPLES = 64


def run_estimator(seq, region_file, config=None):
    """Run the region-weighted estimator over a frame sequence.

    ``config`` keys (all optional): epoch_seconds, block, band, bp_order,
    a_th, goodness_floor, pr_band_halfwidth_hz, pr_jump_bpm, goodness_cap,
    ransac_seed, klt_window, klt_pyramid_levels, fb_error_px, min_features,
    ransac_eps_px, ransac_inlier_frac, ransac_iters.
    """
    cfg = dict(config or {})
    fps = seq.fps
    n_total = len(seq)
    epoch_len = int(round(cfg.get("epoch_seconds", 10.0) * fps))
    epoch_len = max(epoch_len, 1)
    rng = np.random.default_rng(cfg.get("ransac_seed", 12345))
    history = mrc.PrHistory()
    out = np.zeros(n_total)
    epochs = []
    prev_weights = None
    epoch_idx = 0
    start = 0
    while start < n_total:
        n_frames = min(epoch_len, n_total - start)
        result = _process_epoch(seq, region_file, start, n_frames, epoch_idx, cfg, rng, history, prev_weights)
        out[start : start + n_frames] = result.samples
        if result.weights:
            prev_weights = mrc.GoodnessWeights(
                weights=result.weights, pr_used=result.coarse_pr, band_halfwidth=cfg.get("pr_band_halfwidth_hz", mrc.PR_BAND_HALFWIDTH_HZ)
            )
        epochs.append(result)
        start += n_frames
        epoch_idx += 1
    return RunResult(fps=fps, samples=out, epochs=epochs)


def _process_epoch(seq, region_file, start, n_frames, epoch_idx, cfg, rng, history, prev_weights):
    fps = seq.fps
    polys = region_file.regions_at(start)
    grid = grid_regions(polys, cfg.get("block", 20))
    empty = EpochResult(
        epoch=epoch_idx,
        start_frame=start,
        n_frames=n_frames,
        samples=np.zeros(n_frames),
        coarse_pr=None,
        contributing=0,
        n_rois=len(grid),
        weights={},
        gate_reasons={},
        channels={},
        cum_affines={},
    )
    if len(grid) == 0 or n_frames < MIN_EPOCH_SAMPLES:
        return empty

    state = tracking.init_epoch(
        seq.pixels[start],
        polys,
        grid.quads(),
        [r.region_label for r in grid.rois],
        frame_index=start,
        config=cfg,
        rng=rng,
    )
    ids = grid.ids()
    n_rois = len(ids)
    traces = np.zeros((n_rois, n_frames))
    valid = np.zeros((n_rois, n_frames), dtype=bool)
    region_ok = {label: state.regions[label].status == "tracked" for label in state.regions}
    roi_region = [r.region_label for r in grid.rois]

    def sample(frame_offset):
        frame = np.asarray(seq.pixels[start + frame_offset], dtype=np.float64)
        means, ok = average_quads(frame, state.roi_quads)
        for i in range(n_rois):
            if region_ok.get(roi_region[i], False) and ok[i]:
                traces[i, frame_offset] = means[i]
                valid[i, frame_offset] = True

    sample(0)
    for k in range(1, n_frames):
        tracking.step_epoch(state, seq.pixels[start + k - 1], seq.pixels[start + k])
        for label, track in state.regions.items():
            region_ok[label] = track.status == "tracked"
        sample(k)

    cum_affines = {
        label: (track.cum_affine if track.status == "tracked" else None)
        for label, track in state.regions.items()
    }

    gate_reasons = {}
    channels = []
    for i in range(n_rois):
        if not valid[i].all():
            gate_reasons[ids[i]] = "tracking"
            continue
        try:
            channels.append(
                mrc.make_channel(
                    ids[i],
                    traces[i],
                    fps,
                    band=cfg.get("band", (0.5, 5.0)),
                    order=cfg.get("bp_order", 2),
                )
            )
        except ValueError:
            gate_reasons[ids[i]] = "tracking"
    if not channels:
        empty.gate_reasons = gate_reasons
        empty.cum_affines = cum_affines
        return empty

    wcfg = {
        "a_th": cfg.get("a_th", mrc.AMPLITUDE_THRESHOLD),
        "pr_band_halfwidth_hz": cfg.get("pr_band_halfwidth_hz", mrc.PR_BAND_HALFWIDTH_HZ),
        "pr_jump_bpm": cfg.get("pr_jump_bpm", mrc.PR_JUMP_BPM),
        "goodness_floor": cfg.get("goodness_floor", mrc.GOODNESS_FLOOR),
        "goodness_cap": cfg.get("goodness_cap", mrc.GOODNESS_CAP),
        "band": cfg.get("band", (0.5, 5.0)),
        "prev_weights": prev_weights,
    }
    gated, weights = mrc.epoch_weights(channels, fps, history, config=wcfg)
    for c in gated:
        if c.gated:
            gate_reasons[c.roi_id] = c.gate_reason
        elif weights.weights.get(c.roi_id, 0.0) <= 0.0:
            gate_reasons[c.roi_id] = "goodness_floor"
    estimate = mrc.combine(gated, weights, epoch=epoch_idx, coarse_pr_bpm=weights.pr_used)
    samples = estimate.samples if estimate is not None else np.zeros(n_frames)
    return EpochResult(
        epoch=epoch_idx,
        start_frame=start,
        n_frames=n_frames,
        samples=samples,
        coarse_pr=weights.pr_used,
        contributing=estimate.contributing_roi_count if estimate else 0,
        n_rois=n_rois,
        weights=dict(weights.weights),
        gate_reasons=gate_reasons,
        channels={c.roi_id: c.filtered for c in gated},
        cum_affines=cum_affines,
    )
