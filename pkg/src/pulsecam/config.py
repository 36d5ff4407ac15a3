"""Run configuration: defaults, key=value config files, CLI overrides."""

DEFAULTS = {
    "epoch_seconds": 10.0,  # use 5 for motion scenes
    "block": 20,
    "band_low": 0.5,
    "band_high": 5.0,
    "bp_order": 2,
    "a_th": 8.0,
    "goodness_floor": 0.25,
    "pr_band_halfwidth_hz": 0.2,
    "pr_jump_bpm": 24.0,
    "goodness_cap": 1e6,
    "ransac_seed": 12345,
    "klt_window": 15,
    "klt_pyramid_levels": 3,
    "klt_features": 50,
    "fb_error_px": 2.0,
    "min_features": 10,
    "ransac_eps_px": 2.0,
    "ransac_inlier_frac": 0.7,
    "ransac_iters": 20,
}

_INT_KEYS = {
    "block",
    "bp_order",
    "ransac_seed",
    "klt_window",
    "klt_pyramid_levels",
    "klt_features",
    "min_features",
    "ransac_iters",
}


def load_config_file(path):
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in DEFAULTS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = int(value) if key in _INT_KEYS else float(value)
    return out


def build_config(config_file=None, overrides=None):
    """Defaults, then config file, then explicit overrides."""
    cfg = dict(DEFAULTS)
    if config_file:
        cfg.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    cfg["band"] = (cfg["band_low"], cfg["band_high"])
    return cfg
