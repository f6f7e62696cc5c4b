import json

import numpy as np
import pytest

from vidconsist.frames import (
    frame_bytes,
    parse_frame,
    read_frame,
    read_video,
    write_frame,
    write_video,
)
from vidconsist.report import compute_consistency
from vidconsist.segmentation import MaskPair
from vidconsist.temporal import ClipPlan


def test_frame_round_trip(tmp_path, rng):
    f = rng.standard_normal((3, 5, 2))
    write_frame(f, tmp_path / "a.vcf")
    back = read_frame(tmp_path / "a.vcf")
    assert back.tobytes() == f.tobytes()
    pgm = (tmp_path / "a.pgm").read_bytes()
    assert pgm.startswith(b"P5\n5 3\n255\n") and len(pgm) == len(b"P5\n5 3\n255\n") + 15


def test_known_byte_layout():
    expected = bytes.fromhex("56434652" "01000000" "01000000" "01000000" "01000000" "000000000000e03f")
    assert frame_bytes(np.full((1, 1, 1), 0.5)) == expected
    assert parse_frame(expected)[0, 0, 0] == 0.5


def test_fuzz_round_trip():
    rng = np.random.default_rng(0)
    mismatches = 0
    for _ in range(1000):
        shape = tuple(int(s) for s in rng.integers(1, 6, size=3))
        f = rng.standard_normal(shape) * 10.0 ** rng.integers(-300, 300)
        mismatches += parse_frame(frame_bytes(f)).tobytes() != f.tobytes()
    assert mismatches == 0


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b[:10],
        lambda b: b"XCFR" + b[4:],
        lambda b: b[:4] + (2).to_bytes(4, "little") + b[8:],
        lambda b: b[:-1],
        lambda b: b + b"\x00" * 8,
    ],
)
def test_malformed_frames(mutate):
    good = frame_bytes(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError):
        parse_frame(mutate(good))


def test_frame_must_be_3d():
    with pytest.raises(ValueError):
        frame_bytes(np.zeros((2, 2)))


def test_video_container(tmp_path, rng):
    v = rng.standard_normal((6, 2, 3, 1))
    write_video(v, tmp_path / "vid", ClipPlan.for_video(6, 4, 2))
    back, manifest = read_video(tmp_path / "vid")
    assert back.tobytes() == v.tobytes()
    assert manifest == {"F": 6, "H": 2, "W": 3, "C": 1, "stride": 2, "length": 4, "count": 2}
    with pytest.raises(ValueError):
        read_video(tmp_path)


def test_video_manifest_shape_check(tmp_path, rng):
    write_video(rng.standard_normal((2, 2, 2, 1)), tmp_path / "v")
    m = json.loads((tmp_path / "v" / "manifest.json").read_text())
    m["H"] = 3
    (tmp_path / "v" / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(ValueError):
        read_video(tmp_path / "v")


def test_consistency_identical_frames():
    v = np.repeat(np.random.default_rng(1).standard_normal((1, 3, 3, 1)), 4, axis=0)
    r = compute_consistency(v)
    assert r.pair_diffs == [0.0, 0.0, 0.0] and r.mean == 0.0 and r.max == 0.0


def test_consistency_constant_frames():
    v = np.stack([np.zeros((2, 2, 1)), np.ones((2, 2, 1))])
    assert compute_consistency(v).pair_diffs == [1.0]


def test_consistency_against_loops(rng):
    v = rng.standard_normal((5, 3, 4, 2))
    masks = MaskPair.from_fg(rng.integers(0, 2, size=(3, 4)))
    r = compute_consistency(v, masks)
    F, H, W, C = v.shape
    for j in range(F - 1):
        tot = fg = bg = 0.0
        nfg = nbg = 0
        for y in range(H):
            for x in range(W):
                for c in range(C):
                    d = abs(v[j + 1, y, x, c] - v[j, y, x, c])
                    tot += d
                    if masks.fg[y, x]:
                        fg += d
                        nfg += 1
                    else:
                        bg += d
                        nbg += 1
        assert r.pair_diffs[j] == pytest.approx(tot / (H * W * C), rel=1e-12)
        assert r.fg_pair_diffs[j] == pytest.approx(fg / nfg, rel=1e-12)
        assert r.bg_pair_diffs[j] == pytest.approx(bg / nbg, rel=1e-12)
    assert len(r.pair_diffs) == F - 1
    assert r.max == max(r.pair_diffs) and min(r.pair_diffs) >= 0


def test_consistency_needs_two_frames():
    with pytest.raises(ValueError):
        compute_consistency(np.zeros((1, 2, 2, 1)))


def test_report_json(tmp_path):
    r = compute_consistency(np.stack([np.zeros((1, 1, 1)), np.ones((1, 1, 1))]))
    r.save(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["mean"] == 1.0
