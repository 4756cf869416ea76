import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from pastesynth.errors import DecodeError, ImageIOError, InvalidRleError
from pastesynth.imaging import (
    RleMask,
    load_image,
    load_mask,
    mask_bbox,
    mask_to_rle,
    rle_to_mask,
    save_image,
    save_mask,
    to_float,
    to_uint8,
)


def test_load_solid_rgb(tmp_path):
    p = tmp_path / "solid.png"
    PILImage.new("RGB", (2, 2), (10, 20, 30)).save(p)
    img = load_image(p)
    assert img.shape == (2, 2, 3)
    assert (img == [10, 20, 30]).all()


def test_load_gray_replicates(tmp_path):
    p = tmp_path / "g.png"
    PILImage.new("L", (3, 2), 77).save(p)
    img = load_image(p)
    assert img.shape == (2, 3, 3)
    assert (img == 77).all()


def test_alpha_is_dropped(tmp_path):
    p = tmp_path / "a.png"
    PILImage.new("RGBA", (2, 2), (5, 6, 7, 0)).save(p)
    assert (load_image(p) == [5, 6, 7]).all()


def test_jpeg_readable(tmp_path):
    p = tmp_path / "x.jpg"
    PILImage.new("RGB", (8, 8), (100, 100, 100)).save(p, quality=95)
    assert np.abs(load_image(p).astype(int) - 100).max() <= 2


def test_truncated_png(tmp_path):
    p = tmp_path / "t.png"
    PILImage.fromarray(np.random.default_rng(0).integers(0, 256, (32, 32, 3), dtype=np.uint8)).save(p)
    data = p.read_bytes()
    p.write_bytes(data[: len(data) // 2])
    with pytest.raises(DecodeError):
        load_image(p)


def test_missing_file(tmp_path):
    with pytest.raises(ImageIOError):
        load_image(tmp_path / "nope.png")


def test_unsupported_format(tmp_path):
    p = tmp_path / "x.bmp"
    PILImage.new("RGB", (2, 2)).save(p, format="BMP")
    with pytest.raises(DecodeError):
        load_image(p)


def test_png_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    save_image(img, tmp_path / "r.png")
    assert np.array_equal(load_image(tmp_path / "r.png"), img)


def test_one_pixel(tmp_path):
    img = np.array([[[1, 2, 3]]], dtype=np.uint8)
    save_image(img, tmp_path / "one.png")
    assert PILImage.open(tmp_path / "one.png").size == (1, 1)
    assert np.array_equal(load_image(tmp_path / "one.png"), img)


def test_save_into_missing_dir(tmp_path):
    with pytest.raises(ImageIOError):
        save_image(np.zeros((2, 2, 3), np.uint8), tmp_path / "nope" / "x.png")


def test_save_read_only_dir(tmp_path):
    import os

    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        if os.access(ro, os.W_OK):
            pytest.skip("running with privileges that ignore directory permissions")
        with pytest.raises(ImageIOError):
            save_image(np.zeros((2, 2, 3), np.uint8), ro / "x.png")
    finally:
        ro.chmod(0o700)


def test_mask_file_convention(tmp_path):
    arr = np.array([[0, 1], [200, 0]], dtype=np.uint8)
    PILImage.fromarray(arr, mode="L").save(tmp_path / "m.png")
    assert np.array_equal(load_mask(tmp_path / "m.png"), arr != 0)
    save_mask(arr != 0, tmp_path / "m2.png")
    assert set(np.unique(np.array(PILImage.open(tmp_path / "m2.png")))) == {0, 255}


def test_float_view_roundtrip():
    u = np.arange(256, dtype=np.uint8).reshape(16, 16)[..., None].repeat(3, 2)
    f = to_float(u)
    assert np.array_equal(to_uint8(f), u)
    assert np.array_equal(np.floor(f * 255 + 0.5).astype(np.uint8), u)


@pytest.mark.parametrize(
    "mask, counts",
    [
        (np.ones((2, 2), bool), (0, 4)),
        (np.zeros((2, 2), bool), (4,)),
        (np.array([[0, 0, 0], [1, 1, 1], [0, 0, 0]], bool), (3, 3, 3)),
    ],
)
def test_rle_examples(mask, counts):
    r = mask_to_rle(mask)
    assert r.counts == counts
    assert np.array_equal(rle_to_mask(r), mask)


def test_rle_bad_sum():
    with pytest.raises(InvalidRleError):
        rle_to_mask(RleMask(2, 2, (2, 1)))


def test_rle_json_roundtrip():
    r = mask_to_rle(np.eye(4, dtype=bool))
    assert RleMask.from_json(r.to_json()) == r


@settings(max_examples=200, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 20), st.integers(1, 20))))
def test_rle_roundtrip_property(m):
    r = mask_to_rle(m)
    assert sum(r.counts) == m.size
    assert all(c > 0 for c in r.counts[1:])
    assert np.array_equal(rle_to_mask(r), m)


def test_bbox():
    m = np.zeros((5, 6), bool)
    m[1:3, 2:5] = True
    assert mask_bbox(m) == (2, 1, 3, 2)
    assert mask_bbox(np.zeros((3, 3), bool)) is None


def test_write_permission_error_maps_to_ioerror(tmp_path, monkeypatch):
    def denied(self, fp, *a, **k):
        raise PermissionError(13, "Permission denied", str(fp))

    monkeypatch.setattr(PILImage.Image, "save", denied)
    with pytest.raises(ImageIOError):
        save_image(np.zeros((2, 2, 3), np.uint8), tmp_path / "x.png")
