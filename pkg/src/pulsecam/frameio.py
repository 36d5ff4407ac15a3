"""File formats: PGM frame sequences, region polygons, reference waveforms.

Frames are stored as binary PGM (P5, maxval 255) files named
``frame_%06d.pgm`` next to a plain-text ``manifest.txt`` with
``fps=<float>``, ``frames=<int>``, ``width=<int>``, ``height=<int>``.
Lossless storage matters here: the waveform of interest lives within about
one count of the 8-bit intensity scale, so any lossy codec would destroy it.

Region files hold one polygon per line, ``label: x0,y0 x1,y1 ...``; a line
may carry an optional ``@frame`` suffix on the label (``label@300: ...``)
giving the first frame index from which that polygon is valid.

Reference waveforms are two-column CSV ``time_s,value`` at a fixed rate.
"""

import os
import re
from dataclasses import dataclass, field

import numpy as np

MANIFEST_NAME = "manifest.txt"
FRAME_PATTERN = "frame_%06d.pgm"


class FormatError(ValueError):
    """Malformed or inconsistent input file."""


@dataclass
class FrameSequence:
    """Ordered single-channel frames with a frame rate.

    ``pixels`` has shape (frames, height, width); uint8 for camera data,
    float64 for unquantized simulator output.
    """

    pixels: np.ndarray
    fps: float

    def __post_init__(self):
        if self.pixels.ndim != 3:
            raise FormatError("pixels must be a (frames, height, width) array")
        if self.fps <= 0:
            raise FormatError("fps must be positive")
        if len(self.pixels) == 0:
            raise FormatError("empty frame sequence")
        if self.pixels.min() < 0 or self.pixels.max() > 255:
            raise FormatError("pixel values outside [0, 255]")

    @property
    def width(self):
        return self.pixels.shape[2]

    @property
    def height(self):
        return self.pixels.shape[1]

    def __len__(self):
        return self.pixels.shape[0]


@dataclass
class RegionFile:
    """Trackable planar regions, possibly re-declared at later frames.

    ``entries`` is a list of (label, valid_from_frame, polygon) with polygons
    as (n, 2) float arrays, n >= 3.  Regions around eyes/mouth must not be
    present; that is the caller's responsibility.
    """

    entries: list = field(default_factory=list)

    def labels(self):
        seen = []
        for label, _, _ in self.entries:
            if label not in seen:
                seen.append(label)
        return seen

    def regions_at(self, frame_index):
        """Polygons valid at a frame: per label, the newest entry not after it."""
        out = {}
        best = {}
        for label, start, poly in self.entries:
            if start <= frame_index and (label not in best or start >= best[label]):
                best[label] = start
                out[label] = poly
        return out


@dataclass
class GroundTruth:
    """Fixed-rate reference waveform, optionally with beat instants."""

    sample_rate: float
    samples: np.ndarray
    beat_times: np.ndarray | None = None
    t0: float = 0.0


def _read_pgm(path):
    with open(path, "rb") as f:
        data = f.read()
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed
    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(data):
        ch = data[pos : pos + 1]
        if ch == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                break
            pos += 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    if len(tokens) < 4:
        raise FormatError(f"{path}: truncated PGM header")
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary P5 PGM")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} != 255")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise FormatError(f"{path}: raster size mismatch")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _write_pgm(path, frame):
    height, width = frame.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode())
        f.write(frame.tobytes())


def load_sequence(path):
    """Load a PGM frame sequence directory into a FrameSequence."""
    manifest = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest):
        raise FormatError(f"missing {MANIFEST_NAME} in {path}")
    keys = {}
    with open(manifest) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            keys[key.strip()] = value.strip()
    try:
        fps = float(keys["fps"])
        count = int(keys["frames"])
        width = int(keys["width"])
        height = int(keys["height"])
    except KeyError as exc:
        raise FormatError(f"manifest missing key {exc}") from exc
    names = sorted(n for n in os.listdir(path) if re.fullmatch(r"frame_\d{6}\.pgm", n))
    if len(names) != count:
        raise FormatError(f"manifest declares {count} frames, found {len(names)} files")
    pixels = np.empty((count, height, width), dtype=np.uint8)
    for i, name in enumerate(names):
        frame = _read_pgm(os.path.join(path, name))
        if frame.shape != (height, width):
            raise FormatError(f"{name}: size {frame.shape[::-1]} != {(width, height)}")
        pixels[i] = frame
    return FrameSequence(pixels=pixels, fps=fps)


def store_sequence(seq, path):
    """Write a FrameSequence as PGM files plus manifest; exact round-trip."""
    if len(seq) == 0:
        raise FormatError("refusing to store an empty sequence")
    if seq.pixels.dtype != np.uint8:
        raise FormatError("only 8-bit sequences can be stored (quantize first)")
    os.makedirs(path, exist_ok=True)
    for i in range(len(seq)):
        _write_pgm(os.path.join(path, FRAME_PATTERN % i), seq.pixels[i])
    with open(os.path.join(path, MANIFEST_NAME), "w") as f:
        f.write(f"fps={seq.fps:.10g}\n")
        f.write(f"frames={len(seq)}\n")
        f.write(f"width={seq.width}\n")
        f.write(f"height={seq.height}\n")


_LABEL_RE = re.compile(r"^([^@:]+?)(?:@(\d+))?$")


def load_regions(path):
    """Parse a region polygon file into a RegionFile."""
    entries = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, _, rest = line.partition(":")
            m = _LABEL_RE.match(head.strip())
            if not m:
                raise FormatError(f"{path}:{lineno}: bad region label {head!r}")
            label = m.group(1).strip()
            start = int(m.group(2)) if m.group(2) else 0
            pts = []
            for tok in rest.split():
                x, _, y = tok.partition(",")
                pts.append((float(x), float(y)))
            if len(pts) < 3:
                raise FormatError(f"{path}:{lineno}: polygon needs >= 3 vertices")
            entries.append((label, start, np.array(pts, dtype=np.float64)))
    return RegionFile(entries=entries)


def store_regions(region_file, path):
    with open(path, "w") as f:
        for label, start, poly in region_file.entries:
            head = label if start == 0 else f"{label}@{start}"
            coords = " ".join(f"{x:.6g},{y:.6g}" for x, y in poly)
            f.write(f"{head}: {coords}\n")


def load_ground_truth(path):
    """Load a fixed-rate ``time_s,value`` CSV; rate from the median timestep.

    Rejects fewer than 2 samples, non-monotone timestamps, and more than 1%
    timestep jitter.
    """
    times = []
    values = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            a, _, b = line.partition(",")
            try:
                t = float(a)
                v = float(b)
            except ValueError:
                continue  # header row
            times.append(t)
            values.append(v)
    if len(times) < 2:
        raise FormatError(f"{path}: need at least 2 samples")
    times = np.array(times)
    values = np.array(values)
    dt = np.diff(times)
    if np.any(dt <= 0):
        raise FormatError(f"{path}: timestamps not strictly increasing")
    med = float(np.median(dt))
    if np.max(np.abs(dt - med)) > 0.01 * med:
        raise FormatError(f"{path}: timestep jitter exceeds 1%")
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite samples")
    return GroundTruth(sample_rate=1.0 / med, samples=values, t0=float(times[0]))


def store_waveform(path, values, rate, t0=0.0):
    """Write a fixed-rate waveform as ``time_s,value`` CSV."""
    with open(path, "w") as f:
        f.write("time_s,value\n")
        for i, v in enumerate(values):
            f.write(f"{t0 + i / rate:.6f},{v:.10g}\n")
