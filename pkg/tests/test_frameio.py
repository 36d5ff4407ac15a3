import numpy as np
import pytest

from pulsecam import frameio


def _seq(n=3, w=4, h=4, fps=30.0, seed=0):
    rng = np.random.default_rng(seed)
    return frameio.FrameSequence(pixels=rng.integers(0, 256, size=(n, h, w), dtype=np.uint8), fps=fps)


def test_round_trip(tmp_path):
    seq = _seq()
    frameio.store_sequence(seq, tmp_path / "frames")
    back = frameio.load_sequence(tmp_path / "frames")
    assert back.fps == seq.fps
    assert back.width == 4 and back.height == 4 and len(back) == 3
    assert np.array_equal(back.pixels, seq.pixels)


def test_round_trip_random_sequences(tmp_path):
    for seed in range(5):
        seq = _seq(n=7, w=9, h=5, fps=29.97, seed=seed)
        d = tmp_path / f"s{seed}"
        frameio.store_sequence(seq, d)
        back = frameio.load_sequence(d)
        assert np.array_equal(back.pixels, seq.pixels)
        assert back.fps == seq.fps


def test_dimension_mismatch_rejected(tmp_path):
    seq = _seq()
    frameio.store_sequence(seq, tmp_path / "frames")
    odd = np.zeros((4, 5), dtype=np.uint8)
    frameio._write_pgm(tmp_path / "frames" / (frameio.FRAME_PATTERN % 2), odd)
    with pytest.raises(frameio.FormatError, match="size"):
        frameio.load_sequence(tmp_path / "frames")


def test_missing_manifest(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(frameio.FormatError, match="manifest"):
        frameio.load_sequence(tmp_path / "empty")


def test_non_p5_rejected(tmp_path):
    seq = _seq(n=1)
    frameio.store_sequence(seq, tmp_path / "frames")
    path = tmp_path / "frames" / (frameio.FRAME_PATTERN % 0)
    path.write_bytes(b"P2\n4 4\n255\n" + b"0 " * 16)
    with pytest.raises(frameio.FormatError, match="P5"):
        frameio.load_sequence(tmp_path / "frames")


def test_maxval_rejected(tmp_path):
    seq = _seq(n=1)
    frameio.store_sequence(seq, tmp_path / "frames")
    path = tmp_path / "frames" / (frameio.FRAME_PATTERN % 0)
    path.write_bytes(b"P5\n4 4\n65535\n" + bytes(32))
    with pytest.raises(frameio.FormatError, match="maxval"):
        frameio.load_sequence(tmp_path / "frames")


def test_frame_count_mismatch(tmp_path):
    seq = _seq(n=3)
    frameio.store_sequence(seq, tmp_path / "frames")
    (tmp_path / "frames" / (frameio.FRAME_PATTERN % 2)).unlink()
    with pytest.raises(frameio.FormatError, match="declares"):
        frameio.load_sequence(tmp_path / "frames")


def test_store_empty_rejected(tmp_path):
    with pytest.raises(frameio.FormatError):
        frameio.FrameSequence(pixels=np.zeros((0, 4, 4), dtype=np.uint8), fps=30.0)


def test_store_float_rejected(tmp_path):
    seq = frameio.FrameSequence(pixels=np.zeros((2, 4, 4)), fps=30.0)
    with pytest.raises(frameio.FormatError, match="8-bit"):
        frameio.store_sequence(seq, tmp_path / "frames")


def test_frame_file_count_arithmetic(tmp_path):
    # 40 s at 30 fps -> 1200 files
    seq = _seq(n=1200, w=4, h=4)
    frameio.store_sequence(seq, tmp_path / "frames")
    files = [p for p in (tmp_path / "frames").iterdir() if p.suffix == ".pgm"]
    assert len(files) == 1200


def test_region_round_trip(tmp_path):
    rf = frameio.RegionFile(
        entries=[
            ("forehead", 0, np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 8.0], [0.0, 8.0]])),
            ("forehead", 300, np.array([[1.0, 1.0], [11.0, 1.0], [11.0, 9.0], [1.0, 9.0]])),
            ("cheek", 0, np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]])),
        ]
    )
    frameio.store_regions(rf, tmp_path / "regions.txt")
    back = frameio.load_regions(tmp_path / "regions.txt")
    assert back.labels() == ["forehead", "cheek"]
    at0 = back.regions_at(0)
    at400 = back.regions_at(400)
    assert np.allclose(at0["forehead"][0], [0.0, 0.0])
    assert np.allclose(at400["forehead"][0], [1.0, 1.0])
    assert len(at0["cheek"]) == 3


def test_region_too_few_vertices(tmp_path):
    (tmp_path / "bad.txt").write_text("lbl: 0,0 1,1\n")
    with pytest.raises(frameio.FormatError, match="3 vertices"):
        frameio.load_regions(tmp_path / "bad.txt")


def test_ground_truth_500hz(tmp_path):
    rate = 500.0
    values = np.sin(np.arange(20000) / rate)
    frameio.store_waveform(tmp_path / "gt.csv", values, rate)
    gt = frameio.load_ground_truth(tmp_path / "gt.csv")
    assert gt.sample_rate == pytest.approx(500.0, rel=1e-6)
    assert len(gt.samples) == 20000
    assert np.allclose(gt.samples, values, atol=1e-9)


def test_ground_truth_single_row(tmp_path):
    (tmp_path / "gt.csv").write_text("time_s,value\n0.0,1.0\n")
    with pytest.raises(frameio.FormatError, match="2 samples"):
        frameio.load_ground_truth(tmp_path / "gt.csv")


def test_ground_truth_jitter_rejected(tmp_path):
    rng = np.random.default_rng(1)
    t = np.arange(100) / 100.0
    t = t + rng.uniform(-0.05, 0.05, size=100) / 100.0 * 5  # 5% jitter
    t = np.sort(t)
    lines = ["time_s,value"] + [f"{ti:.9f},0.0" for ti in t]
    (tmp_path / "gt.csv").write_text("\n".join(lines))
    with pytest.raises(frameio.FormatError, match="jitter"):
        frameio.load_ground_truth(tmp_path / "gt.csv")


def test_ground_truth_non_monotone(tmp_path):
    (tmp_path / "gt.csv").write_text("time_s,value\n0.0,1\n0.002,1\n0.001,1\n0.004,1\n")
    with pytest.raises(frameio.FormatError, match="increasing"):
        frameio.load_ground_truth(tmp_path / "gt.csv")
