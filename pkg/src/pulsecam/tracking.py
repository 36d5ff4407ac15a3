"""Region tracking: corner selection, pyramidal Lucas-Kanade with
forward-backward validation, robust per-region affine fits, epoch resets.

Each planar region is tracked independently between consecutive frames; its
fitted affine propagates the region polygon and every attached block quad.
Trackers restart at epoch boundaries, where features are re-detected from
the region polygons valid at that frame.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import correlate1d

from . import _kernels
from .roi import points_in_polygon

KLT_WINDOW = 15
KLT_LEVELS = 3
KLT_MAX_ITERS = 30
KLT_EPS = 0.01
FEATURES_PER_REGION = 50
FEATURE_SPACING = 5.0
FB_ERROR_PX = 2.0
MIN_FEATURES = 10
RANSAC_EPS_PX = 2.0
RANSAC_INLIER_FRAC = 0.7
RANSAC_ITERS = 20


@dataclass
class FeatureSet:
    region_label: str
    points: np.ndarray  # (n, 2) current positions
    alive: np.ndarray  # (n,) bool
    origin: np.ndarray | None = None  # positions before the last track step

    def alive_count(self):
        return int(self.alive.sum())


def _gradients(img):
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, 1:-1] = (img[:, 2:] - img[:, :-2]) * 0.5
    gy[1:-1, :] = (img[2:, :] - img[:-2, :]) * 0.5
    return gx, gy


def build_pyramid(img, levels):
    """Image pyramid by 2x2 block averaging; level 0 is full resolution."""
    pyr = [np.ascontiguousarray(img, dtype=np.float64)]
    for _ in range(1, levels):
        prev = pyr[-1]
        h2, w2 = prev.shape[0] // 2, prev.shape[1] // 2
        cropped = prev[: 2 * h2, : 2 * w2]
        pyr.append(
            np.ascontiguousarray(
                0.25 * (cropped[0::2, 0::2] + cropped[1::2, 0::2] + cropped[0::2, 1::2] + cropped[1::2, 1::2])
            )
        )
    return pyr


def good_features(frame, polygon, m=FEATURES_PER_REGION, window=7, min_spacing=FEATURE_SPACING, quality=0.01):
    """Corners inside a polygon ranked by the minimum eigenvalue of the
    gradient structure tensor over a ``window`` x ``window`` patch.

    The window is tent-weighted (peak at the center) so the score has a
    unique maximum on the corner instead of a plateau.  Returns up to ``m``
    points with pairwise spacing >= ``min_spacing`` px; textureless areas
    simply yield fewer (possibly zero) points.
    """
    img = np.asarray(frame, dtype=np.float64)
    h, w = img.shape
    gx, gy = _gradients(img)
    half = window // 2
    tent = (half + 1.0) - np.abs(np.arange(window) - half)

    def tensor_sum(field):
        out = correlate1d(field, tent, axis=0, mode="constant")
        return correlate1d(out, tent, axis=1, mode="constant")

    sxx = tensor_sum(gx * gx)
    sxy = tensor_sum(gx * gy)
    syy = tensor_sum(gy * gy)
    tmp = np.sqrt((sxx - syy) ** 2 + 4.0 * sxy**2)
    min_eig = 0.5 * ((sxx + syy) - tmp)
    # candidates must be 3x3 local maxima of the score
    min_eig = np.where(min_eig == maximum_filter(min_eig, size=3), min_eig, 0.0)

    poly = np.asarray(polygon, dtype=np.float64)
    margin = window // 2 + 1
    ix0 = max(margin, int(np.floor(poly[:, 0].min())))
    ix1 = min(w - 1 - margin, int(np.ceil(poly[:, 0].max())))
    iy0 = max(margin, int(np.floor(poly[:, 1].min())))
    iy1 = min(h - 1 - margin, int(np.ceil(poly[:, 1].max())))
    if ix1 < ix0 or iy1 < iy0:
        return FeatureSet(region_label="", points=np.zeros((0, 2)), alive=np.zeros(0, dtype=bool))
    xs = np.arange(ix0, ix1 + 1)
    ys = np.arange(iy0, iy1 + 1)
    gxx, gyy_ = np.meshgrid(xs, ys)
    centers = np.column_stack([gxx.ravel() + 0.5, gyy_.ravel() + 0.5])
    inside = points_in_polygon(centers, poly)
    lam = min_eig[iy0 : iy1 + 1, ix0 : ix1 + 1].ravel()
    lam = np.where(inside, lam, -np.inf)
    lam_max = lam.max() if len(lam) else -np.inf
    if not np.isfinite(lam_max) or lam_max <= 1e-9:
        return FeatureSet(region_label="", points=np.zeros((0, 2)), alive=np.zeros(0, dtype=bool))
    threshold = max(quality * lam_max, 1e-9)
    cand = np.flatnonzero(lam >= threshold)
    cand = cand[np.argsort(lam[cand])[::-1]]
    picked = []
    for c in cand:
        p = centers[c]
        ok = True
        for q in picked:
            if (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 < min_spacing**2:
                ok = False
                break
        if ok:
            picked.append(p)
            if len(picked) >= m:
                break
    pts = np.array(picked) if picked else np.zeros((0, 2))
    return FeatureSet(region_label="", points=pts, alive=np.ones(len(pts), dtype=bool))


class FramePyramid:
    """Precomputed pyramid and per-level gradients for one frame.

    Template gradients depend only on the template frame, so sharing this
    across regions and across the forward/backward passes is what makes
    per-frame tracking cheap.
    """

    def __init__(self, img, levels=KLT_LEVELS):
        self.levels = build_pyramid(np.asarray(img, dtype=np.float64), levels)
        self.grads = []
        for lvl in self.levels:
            gx, gy = _gradients(lvl)
            self.grads.append((np.ascontiguousarray(gx), np.ascontiguousarray(gy)))
        self.shape = self.levels[0].shape


def _track_points(pyr_prev, pyr_next, pts, alive, window, max_iters, eps):
    levels = len(pyr_prev.levels)
    half = window // 2
    pts = np.asarray(pts, dtype=np.float64)
    alive = np.ascontiguousarray(alive, dtype=np.uint8)
    if len(pts) == 0:
        return pts.copy(), alive.astype(bool)
    guess = np.ascontiguousarray(pts / (2.0 ** (levels - 1)))
    for level in range(levels - 1, -1, -1):
        pts_level = np.ascontiguousarray(pts / (2.0**level))
        gx, gy = pyr_prev.grads[level]
        _kernels.lk_level(
            pyr_prev.levels[level],
            pyr_next.levels[level],
            gx,
            gy,
            pts_level,
            guess,
            alive,
            half,
            max_iters,
            eps,
            level == 0,
        )
        if level > 0:
            guess *= 2.0
    return guess, alive.astype(bool)


def klt_track(prev, nxt, fset, window=KLT_WINDOW, levels=KLT_LEVELS, max_iters=KLT_MAX_ITERS, eps=KLT_EPS):
    """Pyramidal iterative Lucas-Kanade; non-converged or out-of-frame points die.

    The returned FeatureSet keeps the input positions in ``origin`` so a
    backward pass can measure round-trip error.  ``prev`` and ``nxt`` may be
    arrays or prebuilt FramePyramid objects.
    """
    pyr_prev = prev if isinstance(prev, FramePyramid) else FramePyramid(prev, levels)
    pyr_next = nxt if isinstance(nxt, FramePyramid) else FramePyramid(nxt, levels)
    if pyr_prev.shape != pyr_next.shape:
        raise ValueError("frames must share dimensions")
    pts = np.asarray(fset.points, dtype=np.float64)
    new_pts, alive = _track_points(pyr_prev, pyr_next, pts, fset.alive, window, max_iters, eps)
    return replace(fset, points=new_pts, alive=alive, origin=pts.copy())


def forward_backward_gate(prev, nxt, fset, fb_error_px=FB_ERROR_PX, **klt_kwargs):
    """Re-track survivors backward; kill points with round-trip error > gate.

    ``fset`` must come from :func:`klt_track` (its ``origin`` holds the
    positions in ``prev``).  Dead-on-input points stay dead.
    """
    if fset.origin is None:
        raise ValueError("feature set was not produced by klt_track")
    back = klt_track(nxt, prev, replace(fset, origin=None), **klt_kwargs)
    err = np.linalg.norm(back.points - fset.origin, axis=1)
    alive = fset.alive & back.alive & (err <= fb_error_px)
    return replace(fset, alive=alive)


def _fit_affine_lsq(src, dst):
    m = np.column_stack([src, np.ones(len(src))])
    coeffs, _, rank, _ = np.linalg.lstsq(m, dst, rcond=None)
    if rank < 3:
        return None
    return coeffs.T  # (2, 3): [a, b, tx; c, d, ty]


def apply_affine(model, pts):
    pts = np.asarray(pts, dtype=np.float64)
    return pts @ model[:, :2].T + model[:, 2]


def compose_affine(outer, inner):
    """Affine equal to applying ``inner`` first, then ``outer``."""
    lin = outer[:, :2] @ inner[:, :2]
    trans = outer[:, :2] @ inner[:, 2] + outer[:, 2]
    return np.column_stack([lin, trans])


def invert_affine(m):
    lin = np.linalg.inv(m[:, :2])
    return np.column_stack([lin, -lin @ m[:, 2]])


def identity_affine():
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def ransac_affine(
    src,
    dst,
    eps_px=RANSAC_EPS_PX,
    inlier_frac=RANSAC_INLIER_FRAC,
    iters=RANSAC_ITERS,
    rng=None,
):
    """Robust affine fit from point correspondences, or None when no rigid
    model reaches the required consensus.

    Minimal 3-point samples for up to ``iters`` iterations; consensus is the
    set of pairs with residual <= ``eps_px``.  Accepted when the best
    consensus covers at least ``inlier_frac`` of the pairs, then refit by
    least squares on the inliers.  Equal consensus sizes keep the first
    model found under the given generator.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    n = len(src)
    if n < 3 or len(dst) != n:
        raise ValueError("need at least 3 correspondence pairs")
    if rng is None:
        rng = np.random.default_rng(0)
    # all minimal samples drawn up front (one stream read), solved batched
    keys = rng.random((iters, n))
    samples = np.argpartition(keys, 2, axis=1)[:, :3]
    m = np.concatenate([src[samples], np.ones((iters, 3, 1))], axis=2)
    dets = np.abs(np.linalg.det(m))
    usable = np.flatnonzero(dets > 1e-9)
    if len(usable) == 0:
        return None
    coeffs = np.linalg.solve(m[usable], dst[samples[usable]])  # (k, 3, 2)
    models = np.transpose(coeffs, (0, 2, 1))  # (k, 2, 3)
    pred = np.einsum("kij,nj->kni", models[:, :, :2], src) + models[:, None, :, 2]
    residuals = np.linalg.norm(pred - dst[None], axis=2)
    counts = (residuals <= eps_px).sum(axis=1)
    best = int(np.argmax(counts))  # first max = first-found tie-break
    best_count = int(counts[best])
    if best_count < inlier_frac * n:
        return None
    best_inliers = residuals[best] <= eps_px
    model = _fit_affine_lsq(src[best_inliers], dst[best_inliers])
    if model is None or abs(np.linalg.det(model[:, :2])) <= 1e-6:
        return None
    if not np.all(np.isfinite(model)):
        return None
    return model


@dataclass
class RegionTrack:
    label: str
    polygon: np.ndarray
    features: FeatureSet
    status: str = "tracked"  # or "rejected", sticky within the epoch
    cum_affine: np.ndarray = field(default_factory=identity_affine)


@dataclass
class EpochState:
    """Per-epoch tracking state: region trackers plus the live block quads."""

    regions: dict  # label -> RegionTrack
    roi_quads: np.ndarray  # (n, 4, 2), warped in place as frames advance
    roi_region: list  # region label per quad
    frame_index: int
    config: dict = field(default_factory=dict)
    rng: np.random.Generator | None = None
    _pyr_cache: tuple | None = None  # (frame_index, FramePyramid) of the last frame seen


def init_epoch(frame, region_polys, roi_quads, roi_region, frame_index=0, config=None, rng=None):
    """Start an epoch: detect features per region on the given frame.

    Regions starting with fewer than ``min_features`` trackable corners are
    rejected outright; downstream stages see no blocks from them.
    """
    config = dict(config or {})
    min_features = config.get("min_features", MIN_FEATURES)
    m = config.get("klt_features", FEATURES_PER_REGION)
    regions = {}
    for label, poly in region_polys.items():
        feats = good_features(np.asarray(frame, dtype=np.float64), poly, m=m)
        feats = replace(feats, region_label=label)
        status = "tracked" if feats.alive_count() >= min_features else "rejected"
        regions[label] = RegionTrack(label=label, polygon=np.array(poly, dtype=np.float64), features=feats, status=status)
    return EpochState(
        regions=regions,
        roi_quads=np.array(roi_quads, dtype=np.float64),
        roi_region=list(roi_region),
        frame_index=frame_index,
        config=config,
        rng=rng,
    )


def step_epoch(state, prev, nxt):
    """Advance the epoch one frame: track, gate, fit, and warp quads.

    Regions falling under ``min_features`` live points or without a rigid
    affine consensus are rejected for the rest of the epoch.  Features of
    all live regions go through the tracker in one batch; pyramids are
    cached frame to frame.
    """
    cfg = state.config
    window = cfg.get("klt_window", KLT_WINDOW)
    levels = cfg.get("klt_pyramid_levels", KLT_LEVELS)
    max_iters = cfg.get("klt_max_iters", KLT_MAX_ITERS)
    eps = cfg.get("klt_eps", KLT_EPS)
    fb_px = cfg.get("fb_error_px", FB_ERROR_PX)
    min_features = cfg.get("min_features", MIN_FEATURES)
    rng = state.rng if state.rng is not None else np.random.default_rng(cfg.get("ransac_seed", 0))

    if state._pyr_cache is not None and state._pyr_cache[0] == state.frame_index:
        pyr_prev = state._pyr_cache[1]
    else:
        pyr_prev = FramePyramid(prev, levels)
    pyr_next = FramePyramid(nxt, levels)
    state._pyr_cache = (state.frame_index + 1, pyr_next)

    live = [t for t in state.regions.values() if t.status == "tracked"]
    if live:
        pts = np.concatenate([t.features.points for t in live])
        alive = np.concatenate([t.features.alive for t in live])
        fwd_pts, fwd_alive = _track_points(pyr_prev, pyr_next, pts, alive, window, max_iters, eps)
        back_pts, back_alive = _track_points(pyr_next, pyr_prev, fwd_pts, fwd_alive, window, max_iters, eps)
        err = np.linalg.norm(back_pts - pts, axis=1)
        alive_out = fwd_alive & back_alive & (err <= fb_px)
        offset = 0
        for track in live:
            n = len(track.features.points)
            sl = slice(offset, offset + n)
            offset += n
            origin = pts[sl]
            new_pts = fwd_pts[sl]
            ok = alive_out[sl]
            if int(ok.sum()) < min_features:
                track.status = "rejected"
                continue
            model = ransac_affine(
                origin[ok],
                new_pts[ok],
                eps_px=cfg.get("ransac_eps_px", RANSAC_EPS_PX),
                inlier_frac=cfg.get("ransac_inlier_frac", RANSAC_INLIER_FRAC),
                iters=cfg.get("ransac_iters", RANSAC_ITERS),
                rng=rng,
            )
            if model is None:
                track.status = "rejected"
                continue
            track.polygon = apply_affine(model, track.polygon)
            track.cum_affine = compose_affine(model, track.cum_affine)
            idx = np.flatnonzero([r == track.label for r in state.roi_region])
            if len(idx):
                flat = state.roi_quads[idx].reshape(-1, 2)
                state.roi_quads[idx] = apply_affine(model, flat).reshape(-1, 4, 2)
            track.features = FeatureSet(region_label=track.label, points=new_pts, alive=ok)
    state.frame_index += 1
    return state
