import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vidconsist.segmentation import MaskPair, apply_mask, load_mask, save_mask, segment_threshold


def two_blob_frame(h=12, w=10):
    yy, xx = np.mgrid[0:h, 0:w]
    blob = np.exp(-((yy - 3) ** 2 + (xx - 2) ** 2) / 4.0) + 0.8 * np.exp(-((yy - 8) ** 2 + (xx - 7) ** 2) / 3.0)
    return np.stack([blob, 0.5 * blob], axis=-1)


def test_uniform_zero_frame_is_background():
    m = segment_threshold(np.zeros((4, 5, 1)), 0.5)
    assert not m.fg.any() and m.bg.all()


def test_half_frame():
    f = np.zeros((4, 6, 1))
    f[:, :3] = 1.0
    m = segment_threshold(f, 0.5)
    expected = np.zeros((4, 6), bool)
    expected[:, :3] = True
    assert np.array_equal(m.fg, expected)


def test_two_blob_count_matches_pixel_scan():
    frame = two_blob_frame()
    thr = 0.3
    count = 0
    for row in frame.tolist():
        for px in row:
            if sum(px) / len(px) > thr:
                count += 1
    m = segment_threshold(frame, thr)
    assert int(m.fg.sum()) == count
    assert 0 < count < frame.shape[0] * frame.shape[1]


def test_segment_rejects_nonfinite():
    f = np.zeros((2, 2, 1))
    f[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        segment_threshold(f)


def test_maskpair_validation():
    with pytest.raises(ValueError):
        MaskPair(np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        MaskPair(np.full((2, 2), 0.5), np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        MaskPair(np.ones((2, 2)), np.zeros((2, 3)))


def test_mask_round_trip(tmp_path, rng):
    m = MaskPair.from_fg(rng.integers(0, 2, size=(5, 7)))
    save_mask(m, tmp_path / "a.vmsk")
    save_mask(m, tmp_path / "b.vmsk", fg_only=True)
    for name in ("a.vmsk", "b.vmsk"):
        back = load_mask(tmp_path / name)
        assert np.array_equal(back.fg, m.fg) and np.array_equal(back.bg, m.bg)


def test_all_ones_fg_file(tmp_path):
    p = tmp_path / "ones.vmsk"
    p.write_bytes(b"VMSK" + (3).to_bytes(4, "little") + (2).to_bytes(4, "little") + b"\x01" + b"\x01" * 6)
    m = load_mask(p)
    assert m.fg.all() and not m.bg.any()


def test_hand_written_2x2(tmp_path):
    p = tmp_path / "hand.vmsk"
    p.write_bytes(b"VMSK" + (2).to_bytes(4, "little") + (2).to_bytes(4, "little") + b"\x01" + bytes([1, 0, 0, 1]))
    m = load_mask(p, expected_shape=(2, 2))
    assert m.fg.tolist() == [[True, False], [False, True]]
    assert m.bg.tolist() == [[False, True], [True, False]]


@pytest.mark.parametrize(
    "payload",
    [
        b"VMSK",
        b"XMSK" + (1).to_bytes(4, "little") * 2 + b"\x01\x01",
        b"VMSK" + (1).to_bytes(4, "little") * 2 + b"\x03\x01\x01\x01",
        b"VMSK" + (2).to_bytes(4, "little") * 2 + b"\x01\x01\x00",
        b"VMSK" + (1).to_bytes(4, "little") * 2 + b"\x01\x02",
        b"VMSK" + (1).to_bytes(4, "little") * 2 + b"\x02\x01\x01",
    ],
)
def test_malformed_mask_files(tmp_path, payload):
    p = tmp_path / "bad.vmsk"
    p.write_bytes(payload)
    with pytest.raises(ValueError):
        load_mask(p)


def test_dimension_mismatch(tmp_path):
    save_mask(MaskPair.from_fg(np.ones((2, 3))), tmp_path / "m.vmsk")
    with pytest.raises(ValueError):
        load_mask(tmp_path / "m.vmsk", expected_shape=(3, 2))


def test_apply_mask_trivial(rng):
    f = rng.standard_normal((3, 4, 2))
    np.testing.assert_array_equal(apply_mask(f, np.ones((3, 4))), f)
    np.testing.assert_array_equal(apply_mask(f, np.zeros((3, 4))), np.zeros_like(f))
    with pytest.raises(ValueError):
        apply_mask(f, np.ones((4, 3)))


def test_apply_mask_elementwise(rng):
    f = rng.standard_normal((3, 4, 2))
    m = rng.integers(0, 2, size=(3, 4))
    expected = np.empty_like(f)
    for i in range(3):
        for j in range(4):
            for c in range(2):
                expected[i, j, c] = f[i, j, c] * m[i, j]
    np.testing.assert_array_equal(apply_mask(f, m), expected)


frames = hnp.arrays(np.float64, (4, 3, 2), elements=st.floats(-1e6, 1e6, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(frames, st.floats(-1e3, 1e3))
def test_partition_and_idempotence(f, thr):
    m = segment_threshold(f, thr)
    assert np.array_equal(apply_mask(f, m.fg) + apply_mask(f, m.bg), f)
    for mask in (m.fg, m.bg):
        once = apply_mask(f, mask)
        assert np.array_equal(apply_mask(once, mask), once)
