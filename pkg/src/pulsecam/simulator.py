"""Synthetic scene renderer with exact ground truth.

Frames follow the acquisition model: per block, intensity is
illumination * (perfusion * pulse(t) + surface reflectance) plus camera
quantization noise.  Static fields (illumination, perfusion, reflectance,
corner texture) are warped by scripted per-frame affines, optionally per
region, then surface disturbance noise, sensor noise, bursts and occluders
are applied, and frames are rounded to 8 bits when quantization is on.

The corner texture is DC-only so it feeds the feature tracker without
contaminating the pulse band.  The surface disturbance field is spatially
smooth and temporally lowpassed below the passband; in-band "burst" events
exist specifically to exercise the amplitude gate.
"""

import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import affine_transform, gaussian_filter, zoom
from scipy.signal import butter, sosfreqz

from .frameio import FrameSequence, RegionFile, store_regions, store_waveform
from .roi import grid_regions, points_in_polygon, average_quads
from .tracking import apply_affine, compose_affine, identity_affine, invert_affine

REF_RATE_HZ = 500.0


class SceneError(ValueError):
    """Invalid scene specification or overflow while rendering."""


@dataclass
class MotionSegment:
    t_start: float
    t_end: float
    vx: float = 0.0  # px/frame
    vy: float = 0.0
    rot: float = 0.0  # rad/frame, about the frame center
    scale: float = 0.0  # relative growth per frame
    region: str | None = None  # None = global script


@dataclass
class Burst:
    """In-band additive disturbance over one region (trips the amplitude gate)."""

    t_start: float
    t_end: float
    region: str
    amplitude: float
    freq_hz: float


@dataclass
class Occluder:
    """Flat foreground rectangle sweeping across the frame in camera space."""

    t_start: float
    t_end: float
    x_from: float
    y_from: float
    x_to: float
    y_to: float
    width: float
    height: float
    value: float = 12.0


@dataclass
class PpgModel:
    pr_bpm: float | list = 72.0  # scalar or [(t, bpm), ...] breakpoints
    harmonics: tuple = (1.0, 0.35, 0.15)
    jitter_ms: float = 0.0


@dataclass
class SceneSpec:
    width: int = 320
    height: int = 240
    fps: float = 30.0
    duration: float = 40.0
    regions: dict = field(default_factory=dict)  # label -> (n, 2) polygon
    illumination: tuple = ("constant", 200.0)
    perfusion: tuple = ("uniform", 0.004)
    baseline: tuple = ("smooth", 0.48, 0.06, 0.02)  # mean, smooth amp, dither amp
    texture: tuple = ("dots", 8, 18.0)  # spacing px, amplitude
    surface_noise: tuple = (0.35, 0.3)  # per-pixel std, lowpass cutoff Hz
    sensor_noise_std: float = 0.35
    motion: list = field(default_factory=list)
    bursts: list = field(default_factory=list)
    occluders: list = field(default_factory=list)
    ppg: PpgModel = field(default_factory=PpgModel)
    quantize: bool = True
    seed: int = 0
    block: int = 20

    @property
    def n_frames(self):
        return int(round(self.duration * self.fps))


@dataclass
class SceneTruth:
    fps: float
    duration: float
    p_frame: np.ndarray  # pulse waveform at the frame rate
    p_ref: np.ndarray  # same waveform at REF_RATE_HZ
    ref_rate: float
    beat_times: np.ndarray
    roi_ids: list
    roi_strength: np.ndarray  # per-block signal amplitude I*alpha
    region_affines: dict  # label -> (n_frames, 2, 3) cumulative scene->camera
    regions0: dict

    def region_polys_at(self, frame_index):
        out = {}
        for label, poly in self.regions0.items():
            out[label] = apply_affine(self.region_affines[label][frame_index], poly)
        return out

    def declared_polys_at(self, frame_index):
        """Region polygons as a face fitter would re-declare them: the
        axis-aligned rectangle inscribed in the tracked quad (quads only;
        other polygons pass through warped)."""
        out = {}
        for label, poly in self.region_polys_at(frame_index).items():
            if len(poly) == 4:
                x0 = max(poly[0, 0], poly[3, 0])
                x1 = min(poly[1, 0], poly[2, 0])
                y0 = max(poly[0, 1], poly[1, 1])
                y1 = min(poly[2, 1], poly[3, 1])
                if x1 > x0 and y1 > y0:
                    out[label] = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
                    continue
            out[label] = poly
        return out

    def write(self, outdir):
        import os

        os.makedirs(outdir, exist_ok=True)
        store_waveform(os.path.join(outdir, "truth_ppg.csv"), self.p_ref, self.ref_rate)
        with open(os.path.join(outdir, "truth_beats.csv"), "w") as f:
            f.write("time_s\n")
            for t in self.beat_times:
                f.write(f"{t:.6f}\n")
        with open(os.path.join(outdir, "roi_strength.csv"), "w") as f:
            f.write("roi_id,a_i\n")
            for rid, a in zip(self.roi_ids, self.roi_strength):
                f.write(f"{rid},{a:.10g}\n")
        n_frames = len(self.p_frame)
        entries = []
        step = int(round(self.fps))  # one entry per second; epochs start on whole seconds
        ident = identity_affine()
        moving = any(
            not np.allclose(affs, np.broadcast_to(ident, affs.shape))
            for affs in self.region_affines.values()
        )
        frames = range(0, n_frames, step) if moving else [0]
        for f_idx in frames:
            polys = self.declared_polys_at(f_idx)
            for label, poly in polys.items():
                entries.append((label, f_idx, poly))
        store_regions(RegionFile(entries=entries), os.path.join(outdir, "regions.txt"))
        with open(os.path.join(outdir, "truth_affines.csv"), "w") as f:
            f.write("frame,region,a,b,tx,c,d,ty\n")
            for label, affs in self.region_affines.items():
                for i in range(n_frames):
                    m = affs[i]
                    f.write(
                        f"{i},{label},{m[0,0]:.10g},{m[0,1]:.10g},{m[0,2]:.10g},"
                        f"{m[1,0]:.10g},{m[1,1]:.10g},{m[1,2]:.10g}\n"
                    )


def synth_ppg(model, fps, duration, rng):
    """Generate the pulse waveform and its beat (trough) times.

    Harmonic sum with per-beat period jitter; zero mean, unit fundamental
    amplitude; each beat time coincides with a waveform trough.
    Returns (p_frame, p_ref, beat_times).
    """
    if isinstance(model.pr_bpm, (int, float)):
        breakpoints = [(0.0, float(model.pr_bpm))]
    else:
        breakpoints = [(float(t), float(v)) for t, v in model.pr_bpm]
    times_bp = np.array([t for t, _ in breakpoints])
    rates_bp = np.array([v for _, v in breakpoints])
    if np.any(rates_bp < 40) or np.any(rates_bp > 180):
        raise SceneError("pulse rate outside [40, 180] bpm")
    jitter_s = model.jitter_ms / 1000.0

    # first trough lands mid-cycle after t=0 so every beat is an interior trough
    first_period = 60.0 / float(np.interp(0.0, times_bp, rates_bp))
    beats = [-0.5 * first_period]
    while beats[-1] < duration + 2.0:
        rate = float(np.interp(max(beats[-1], 0.0), times_bp, rates_bp))
        period = 60.0 / rate + (rng.normal(0.0, jitter_s) if jitter_s > 0 else 0.0)
        if period <= 0.1:
            raise SceneError("beat period collapsed under jitter")
        beats.append(beats[-1] + period)
    beats = np.array(beats)

    harmonics = np.asarray(model.harmonics, dtype=np.float64)
    harmonics = harmonics / harmonics[0]

    def waveform(t):
        phase = np.interp(t, beats, np.arange(len(beats), dtype=np.float64))
        out = np.zeros_like(t)
        for h, amp in enumerate(harmonics, start=1):
            out -= amp * np.cos(2.0 * np.pi * h * phase)
        return out

    n_frames = int(round(duration * fps))
    t_frame = np.arange(n_frames) / fps
    n_ref = int(round(duration * REF_RATE_HZ))
    t_ref = np.arange(n_ref) / REF_RATE_HZ
    p_ref = waveform(t_ref)
    mean = float(p_ref.mean())
    p_frame = waveform(t_frame) - mean
    p_ref = p_ref - mean
    beat_times = beats[(beats >= 0.0) & (beats < duration)]
    return p_frame, p_ref, beat_times


def _smooth_unit_field(shape, sigma_px, rng):
    g = gaussian_filter(rng.standard_normal(shape), sigma_px, mode="reflect")
    return g / max(g.std(), 1e-12)


def _face_mask(spec):
    h, w = spec.height, spec.width
    xs, ys = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    mask = np.zeros(h * w, dtype=bool)
    for poly in spec.regions.values():
        mask |= points_in_polygon(pts, poly)
    return mask.reshape(h, w)


def build_fields(spec):
    """Compile the field descriptors into arrays (illumination, alpha, base, texture)."""
    h, w = spec.height, spec.width
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(3)[0])
    xs, ys = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)

    kind = spec.illumination[0]
    if kind == "constant":
        illum = np.full((h, w), float(spec.illumination[1]))
    elif kind == "gradient":
        _, lo, hi = spec.illumination
        illum = lo + (hi - lo) * xs / w
    elif kind == "spotlight":
        _, base, peak, cx, cy, sx, sy = spec.illumination
        illum = base + peak * np.exp(-(((xs - cx) / sx) ** 2 + ((ys - cy) / sy) ** 2) / 2.0)
    else:
        raise SceneError(f"unknown illumination kind {kind!r}")

    kind = spec.perfusion[0]
    if kind == "uniform":
        alpha = np.full((h, w), float(spec.perfusion[1]))
    elif kind == "patchy":
        _, alpha_max, zero_frac, smooth_px = spec.perfusion
        g = _smooth_unit_field((h, w), smooth_px, rng)
        face = _face_mask(spec)
        thr = np.percentile(g[face], 100.0 * zero_frac) if face.any() else np.percentile(g, 100.0 * zero_frac)
        top = g[face].max() if face.any() else g.max()
        alpha = alpha_max * np.clip((g - thr) / max(top - thr, 1e-9), 0.0, 1.0)
    else:
        raise SceneError(f"unknown perfusion kind {kind!r}")

    _, base_mean, base_amp, dither = spec.baseline
    base = base_mean + base_amp * _smooth_unit_field((h, w), 25, rng)
    if dither > 0:
        base = base + rng.uniform(-dither, dither, size=(h, w))
    base = np.clip(base, 0.0, 1.0)

    texture = np.zeros((h, w))
    if spec.texture and spec.texture[0] == "dots":
        _, spacing, amp = spec.texture
        spacing = int(spacing)
        for gy in range(spacing // 2, h - 2, spacing):
            for gx in range(spacing // 2, w - 2, spacing):
                jx = int(rng.integers(-spacing // 4, spacing // 4 + 1))
                jy = int(rng.integers(-spacing // 4, spacing // 4 + 1))
                px = min(max(gx + jx, 0), w - 2)
                py = min(max(gy + jy, 0), h - 2)
                sign = 1.0 if rng.random() < 0.5 else -1.0
                texture[py : py + 2, px : px + 2] += sign * amp * rng.uniform(0.75, 1.25)

    return illum, alpha, base, texture


def _delta_affine(seg, center):
    ang = seg.rot
    s = 1.0 + seg.scale
    lin = s * np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    trans = np.asarray(center) - lin @ np.asarray(center) + np.array([seg.vx, seg.vy])
    return np.column_stack([lin, trans])


def _cumulative_affines(spec, target):
    """Per-frame cumulative scene->camera affines for a motion target."""
    n = spec.n_frames
    center = (spec.width / 2.0, spec.height / 2.0)
    out = np.empty((n, 2, 3))
    cur = identity_affine()
    out[0] = cur
    for k in range(1, n):
        t_prev = (k - 1) / spec.fps
        for seg in spec.motion:
            if seg.region == target and seg.t_start <= t_prev < seg.t_end:
                cur = compose_affine(_delta_affine(seg, center), cur)
        out[k] = cur
    return out


def warp_field(fld, m):
    """Sample a scene-space field under a scene->camera affine (bilinear)."""
    inv = invert_affine(m)
    a, b, tx = inv[0]
    c, d, ty = inv[1]
    matrix = np.array([[d, c], [b, a]])
    offset = np.array([0.5 * (c + d) + ty - 0.5, 0.5 * (a + b) + tx - 0.5])
    return affine_transform(fld, matrix, offset=offset, order=1, mode="nearest")


def _is_identity(m):
    return np.allclose(m, identity_affine(), atol=1e-15)


def _polygon_mask(poly, width, height):
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return points_in_polygon(pts, poly).reshape(height, width)


def _surface_noise_stream(spec, warmup_seed, frame_seeds):
    """Generator of spatially smooth, temporally lowpassed noise frames."""
    std, cutoff = spec.surface_noise
    h, w = spec.height, spec.width
    if std <= 0:
        while True:
            yield 0.0
    sos = butter(3, cutoff, btype="low", fs=spec.fps, output="sos")
    freqs, resp = sosfreqz(sos, worN=2048, fs=spec.fps)
    gain = float(np.mean(np.abs(resp) ** 2))
    in_std = std / np.sqrt(max(gain, 1e-12))
    # the field is smooth (sigma 25 px), so draw it on a 4x coarser grid and
    # upsample bilinearly; saves an order of magnitude per frame
    factor = 4
    smooth_coarse = 25.0 / factor
    hc = -(-h // factor) + 1
    wc = -(-w // factor) + 1
    spatial_norm = 2.0 * smooth_coarse * np.sqrt(np.pi)
    state = np.zeros((sos.shape[0], 2, h, w))
    warmup = int(5 * spec.fps)
    rng_warm = np.random.default_rng(warmup_seed)

    def step(rng):
        coarse = gaussian_filter(rng.standard_normal((hc, wc)), smooth_coarse, mode="reflect")
        x = zoom(coarse, factor, order=1, mode="nearest", grid_mode=True)[:h, :w]
        x = x * (spatial_norm * in_std)
        for s in range(sos.shape[0]):
            b0, b1, b2, _, a1, a2 = sos[s]
            y = b0 * x + state[s, 0]
            state[s, 0] = b1 * x - a1 * y + state[s, 1]
            state[s, 1] = b2 * x - a2 * y
            x = y
        return x

    for _ in range(warmup):
        step(rng_warm)
    frame_idx = 0
    while True:
        yield step(np.random.default_rng(frame_seeds[frame_idx]))
        frame_idx += 1


def render(spec):
    """Render a scene to frames plus its ground truth.

    Raises SceneError when the noise-free intensity leaves [0, 255]; noise
    itself saturates at the 8-bit limits like a real sensor.
    """
    if not spec.regions:
        raise SceneError("scene has no regions")
    n = spec.n_frames
    h, w = spec.height, spec.width
    seq_seeds = np.random.SeedSequence(spec.seed).spawn(3 + 2 * n)
    rng_ppg = np.random.default_rng(seq_seeds[1])
    sensor_seeds = seq_seeds[3 : 3 + n]
    surface_seeds = seq_seeds[3 + n :]

    illum, alpha, base, texture = build_fields(spec)
    f_dc = illum * base + texture
    f_ac = illum * alpha

    p_frame, p_ref, beat_times = synth_ppg(spec.ppg, spec.fps, spec.duration, rng_ppg)

    custom = sorted({seg.region for seg in spec.motion if seg.region is not None})
    for label in custom:
        if label not in spec.regions:
            raise SceneError(f"motion script targets unknown region {label!r}")
    w_global = _cumulative_affines(spec, None)
    region_affines = {}
    for label in spec.regions:
        region_affines[label] = _cumulative_affines(spec, label) if label in custom else w_global

    grid = grid_regions(spec.regions, spec.block)
    strength, _ = average_quads(f_ac, grid.quads())

    burst_fields = {}
    for b in spec.bursts:
        if b.region not in spec.regions:
            raise SceneError(f"burst targets unknown region {b.region!r}")
        if b.region not in burst_fields:
            mask = _polygon_mask(spec.regions[b.region], w, h).astype(np.float64)
            burst_fields[b.region] = gaussian_filter(mask, 3.0)

    surface = _surface_noise_stream(spec, seq_seeds[2], surface_seeds)
    any_motion = bool(spec.motion)
    pixels = np.empty((n, h, w), dtype=np.uint8 if spec.quantize else np.float64)

    for k in range(n):
        t = k / spec.fps
        wg = w_global[k]
        if any_motion and not _is_identity(wg):
            dc = warp_field(f_dc, wg)
            ac = warp_field(f_ac, wg)
        else:
            dc = f_dc.copy() if (custom or spec.bursts) else f_dc
            ac = f_ac
        for label in custom:
            wr = region_affines[label][k]
            poly_cam = apply_affine(wr, spec.regions[label])
            mask = _polygon_mask(poly_cam, w, h)
            if _is_identity(wr):
                dc[mask] = f_dc[mask]
                ac = np.where(mask, f_ac, ac)
            else:
                dc[mask] = warp_field(f_dc, wr)[mask]
                ac = np.where(mask, warp_field(f_ac, wr), ac)
        frame = dc + ac * p_frame[k]
        for b in spec.bursts:
            if b.t_start <= t < b.t_end:
                phase = (t - b.t_start) / (b.t_end - b.t_start)
                env = np.sin(np.pi * phase) ** 2
                osc = np.sin(2.0 * np.pi * b.freq_hz * (t - b.t_start))
                fld = burst_fields[b.region]
                m = region_affines[b.region][k]
                if not _is_identity(m):
                    fld = warp_field(fld, m)
                frame = frame + b.amplitude * env * osc * fld
        if frame.min() < 0.0 or frame.max() > 255.0:
            raise SceneError(f"noise-free intensity out of [0,255] at frame {k}")
        rng_sensor = np.random.default_rng(sensor_seeds[k])
        noisy = frame + next(surface)
        if spec.sensor_noise_std > 0:
            noisy = noisy + rng_sensor.normal(0.0, spec.sensor_noise_std, size=(h, w))
        for occ in spec.occluders:
            if occ.t_start <= t < occ.t_end:
                frac = (t - occ.t_start) / (occ.t_end - occ.t_start)
                cx = occ.x_from + (occ.x_to - occ.x_from) * frac
                cy = occ.y_from + (occ.y_to - occ.y_from) * frac
                x0 = max(0, int(cx - occ.width / 2))
                x1 = min(w, int(cx + occ.width / 2))
                y0 = max(0, int(cy - occ.height / 2))
                y1 = min(h, int(cy + occ.height / 2))
                if x1 > x0 and y1 > y0:
                    noisy[y0:y1, x0:x1] = occ.value
        if spec.quantize:
            pixels[k] = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
        else:
            pixels[k] = np.clip(noisy, 0.0, 255.0)

    seq = FrameSequence(pixels=pixels, fps=spec.fps)
    truth = SceneTruth(
        fps=spec.fps,
        duration=spec.duration,
        p_frame=p_frame,
        p_ref=p_ref,
        ref_rate=REF_RATE_HZ,
        beat_times=beat_times,
        roi_ids=grid.ids(),
        roi_strength=strength,
        region_affines=region_affines,
        regions0={k: np.array(v) for k, v in spec.regions.items()},
    )
    return seq, truth


def face_regions():
    """Synthetic face layout: three forehead parts, two cheeks, two chin parts.

    Spans carry 2 px of slack over block multiples so mild rotation does not
    cost a block row when regions are re-declared at epoch boundaries.
    """

    def rect(x0, y0, x1, y1):
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)

    return {
        "forehead_left": rect(63, 31, 125, 93),
        "forehead_mid": rect(129, 31, 191, 93),
        "forehead_right": rect(195, 31, 257, 93),
        "cheek_left": rect(63, 103, 125, 185),
        "cheek_right": rect(195, 103, 257, 185),
        "chin_left": rect(109, 189, 151, 231),
        "chin_right": rect(169, 189, 211, 231),
    }


def _square_wave(t_end, period, **deltas):
    """Alternating-sign velocity segments; first half-segment centers the swing."""
    segs = []
    t = 0.0
    sign = 1.0
    seg_len = period / 2.0
    first = True
    while t < t_end:
        end = min(t + (seg_len / 2.0 if first else seg_len), t_end)
        segs.append(MotionSegment(t, end, **{k: sign * v for k, v in deltas.items()}))
        t = end
        sign = -sign
        first = False
    return segs


ALPHA_MAX_FAIR = 0.0075


def preset_scenes():
    """Named scene presets mirroring the evaluation axes (perfusion, light, motion)."""
    regions = face_regions()
    common = dict(
        width=320,
        height=240,
        fps=30.0,
        duration=40.0,
        regions=regions,
        baseline=("smooth", 0.48, 0.06, 0.02),
        texture=("dots", 8, 18.0),
        surface_noise=(0.35, 0.3),
        sensor_noise_std=0.35,
        quantize=True,
        seed=0,
    )
    spotlight = ("spotlight", 60.0, 170.0, 160.0, 120.0, 95.0, 80.0)
    patchy_fair = ("patchy", ALPHA_MAX_FAIR, 0.4, 18)
    patchy_dark = ("patchy", ALPHA_MAX_FAIR * 0.25, 0.4, 18)

    scenes = {}
    scenes["static_fair"] = SceneSpec(
        illumination=spotlight,
        perfusion=patchy_fair,
        ppg=PpgModel(pr_bpm=72.0, harmonics=(1.0, 0.35, 0.15), jitter_ms=30.0),
        **common,
    )
    scenes["static_dark"] = replace(scenes["static_fair"], perfusion=patchy_dark)
    scenes["lux_sweep"] = replace(
        scenes["static_fair"], illumination=("gradient", 45.0, 235.0)
    )
    reading_motion = (
        _square_wave(40.0, 1.6, vx=1.8)
        + _square_wave(40.0, 2.3, vy=0.3)
        + _square_wave(40.0, 1.9, rot=0.0036)
    )
    scenes["reading"] = SceneSpec(
        illumination=spotlight,
        perfusion=("patchy", ALPHA_MAX_FAIR * 0.5, 0.4, 18),
        motion=reading_motion,
        ppg=PpgModel(pr_bpm=66.0, harmonics=(1.0, 0.35, 0.15), jitter_ms=30.0),
        **common,
    )
    talking_motion = (
        _square_wave(40.0, 1.3, vx=0.9)
        + [replace(s, region="cheek_left") for s in _square_wave(40.0, 0.7, vx=2.2)]
        + [replace(s, region="cheek_right") for s in _square_wave(40.0, 0.7, vx=-2.2)]
        + [replace(s, region="chin_left") for s in _square_wave(40.0, 0.55, vy=1.8)]
        + [replace(s, region="chin_right") for s in _square_wave(40.0, 0.55, vy=-1.8)]
    )
    scenes["talking_hard"] = SceneSpec(
        illumination=spotlight,
        perfusion=patchy_fair,
        motion=talking_motion,
        bursts=[
            Burst(5.0, 15.0, "forehead_mid", 10.0, 1.1),
            Burst(12.0, 26.0, "forehead_right", 11.0, 0.8),
            Burst(18.0, 30.0, "forehead_left", 9.0, 1.4),
            Burst(22.0, 32.0, "cheek_left", 12.0, 0.9),
            Burst(24.0, 36.0, "cheek_right", 12.0, 1.2),
        ],
        occluders=[
            Occluder(8.0, 20.0, 40.0, 140.0, 280.0, 140.0, 50.0, 90.0),
            Occluder(24.0, 36.0, 280.0, 90.0, 40.0, 210.0, 50.0, 80.0),
        ],
        ppg=PpgModel(pr_bpm=75.0, harmonics=(1.0, 0.35, 0.15), jitter_ms=30.0),
        **common,
    )
    return scenes


# --- plain-text scene files -------------------------------------------------

def write_scene(spec, path):
    with open(path, "w") as f:
        f.write(f"width={spec.width}\nheight={spec.height}\n")
        f.write(f"fps={spec.fps:.10g}\nduration={spec.duration:.10g}\n")
        f.write(f"seed={spec.seed}\nquantize={int(spec.quantize)}\nblock={spec.block}\n")
        f.write("illumination=" + ":".join(str(v) for v in spec.illumination) + "\n")
        f.write("perfusion=" + ":".join(str(v) for v in spec.perfusion) + "\n")
        f.write("baseline=" + ":".join(str(v) for v in spec.baseline) + "\n")
        f.write("texture=" + ":".join(str(v) for v in spec.texture) + "\n")
        f.write(f"surface_noise={spec.surface_noise[0]}:{spec.surface_noise[1]}\n")
        f.write(f"sensor_noise={spec.sensor_noise_std}\n")
        if isinstance(spec.ppg.pr_bpm, (int, float)):
            f.write(f"pr_bpm={spec.ppg.pr_bpm}\n")
        else:
            f.write("pr_bpm=" + ";".join(f"{t}:{v}" for t, v in spec.ppg.pr_bpm) + "\n")
        f.write("harmonics=" + ",".join(str(v) for v in spec.ppg.harmonics) + "\n")
        f.write(f"jitter_ms={spec.ppg.jitter_ms}\n")
        for label, poly in spec.regions.items():
            coords = " ".join(f"{x:.6g},{y:.6g}" for x, y in poly)
            f.write(f"region {label}: {coords}\n")
        for s in spec.motion:
            f.write(
                f"motion {s.t_start} {s.t_end} {s.region or 'global'} "
                f"{s.vx} {s.vy} {s.rot} {s.scale}\n"
            )
        for b in spec.bursts:
            f.write(f"burst {b.t_start} {b.t_end} {b.region} {b.amplitude} {b.freq_hz}\n")
        for o in spec.occluders:
            f.write(
                f"occluder {o.t_start} {o.t_end} {o.x_from} {o.y_from} "
                f"{o.x_to} {o.y_to} {o.width} {o.height} {o.value}\n"
            )


def _parse_tuple(text):
    parts = text.split(":")
    out = [parts[0]]
    for p in parts[1:]:
        out.append(float(p))
    return tuple(out)


def load_scene(path):
    spec = SceneSpec(regions={})
    keys = {}
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("region "):
                head, _, rest = line[len("region ") :].partition(":")
                pts = []
                for tok in rest.split():
                    x, _, y = tok.partition(",")
                    pts.append((float(x), float(y)))
                spec.regions[head.strip()] = np.array(pts, dtype=np.float64)
            elif line.startswith("motion "):
                parts = line.split()
                spec.motion.append(
                    MotionSegment(
                        float(parts[1]),
                        float(parts[2]),
                        vx=float(parts[4]),
                        vy=float(parts[5]),
                        rot=float(parts[6]),
                        scale=float(parts[7]),
                        region=None if parts[3] == "global" else parts[3],
                    )
                )
            elif line.startswith("burst "):
                parts = line.split()
                spec.bursts.append(Burst(float(parts[1]), float(parts[2]), parts[3], float(parts[4]), float(parts[5])))
            elif line.startswith("occluder "):
                parts = line.split()
                spec.occluders.append(
                    Occluder(*(float(p) for p in parts[1:9]), value=float(parts[9]) if len(parts) > 9 else 12.0)
                )
            else:
                key, _, value = line.partition("=")
                keys[key.strip()] = value.strip()
    if "width" in keys:
        spec.width = int(keys["width"])
    if "height" in keys:
        spec.height = int(keys["height"])
    if "fps" in keys:
        spec.fps = float(keys["fps"])
    if "duration" in keys:
        spec.duration = float(keys["duration"])
    if "seed" in keys:
        spec.seed = int(keys["seed"])
    if "quantize" in keys:
        spec.quantize = bool(int(keys["quantize"]))
    if "block" in keys:
        spec.block = int(keys["block"])
    if "illumination" in keys:
        spec.illumination = _parse_tuple(keys["illumination"])
    if "perfusion" in keys:
        spec.perfusion = _parse_tuple(keys["perfusion"])
    if "baseline" in keys:
        spec.baseline = _parse_tuple(keys["baseline"])
    if "texture" in keys:
        t = _parse_tuple(keys["texture"])
        spec.texture = (t[0], int(t[1]), t[2])
    if "surface_noise" in keys:
        a, _, b = keys["surface_noise"].partition(":")
        spec.surface_noise = (float(a), float(b))
    if "sensor_noise" in keys:
        spec.sensor_noise_std = float(keys["sensor_noise"])
    pr = keys.get("pr_bpm", "72")
    if ";" in pr or (":" in pr):
        bps = []
        for part in pr.split(";"):
            t, _, v = part.partition(":")
            bps.append((float(t), float(v)))
        pr_val = bps
    else:
        pr_val = float(pr)
    harmonics = tuple(float(v) for v in keys.get("harmonics", "1,0.35,0.15").split(","))
    spec.ppg = PpgModel(pr_bpm=pr_val, harmonics=harmonics, jitter_ms=float(keys.get("jitter_ms", "0")))
    return spec
