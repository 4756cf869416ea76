import time

import numpy as np
import pytest

from pastesynth.compositor import GapConfig, NoBlend, ObjectCutout, Placement, compose_scene
from pastesynth.errors import (
    BadResponseError,
    CoverageUnsatisfiableError,
    NoValidTargetError,
    RemoteFailureError,
    ServiceTimeoutError,
)
from pastesynth.inpaint import (
    FreeformParams,
    PatchMatchParams,
    ServiceEndpoint,
    compute_nnf,
    fill_gap,
    generate_freeform_mask,
    inpaint_image,
    inpaint_patchmatch,
    inpaint_via_service,
)
from pastesynth.inpaint.patchmatch import default_levels, downsample, source_centers, valid_targets
from pastesynth.inpaint.service import decode_png, encode_png, inpaint_many
from pastesynth.inpaint.stub_server import StubServer, parse_multipart
from pastesynth.morphology import GapMode


def square_hole(h, w, y0, x0, size):
    hole = np.zeros((h, w), bool)
    hole[y0 : y0 + size, x0 : x0 + size] = True
    return hole


def stripes(h=64, w=64):
    row = np.where((np.arange(w) % 4) < 2, 255, 0).astype(np.uint8)
    return np.repeat(np.tile(row[None, :], (h, 1))[..., None], 3, axis=2)


# free-form masks

def test_freeform_no_strokes_is_empty():
    p = FreeformParams(num_strokes=(0, 0), coverage=(0.0, 0.25))
    assert not generate_freeform_mask(64, 64, p, 1).any()


def test_freeform_deterministic():
    assert np.array_equal(generate_freeform_mask(128, 96, rng=5), generate_freeform_mask(128, 96, rng=5))
    assert not np.array_equal(generate_freeform_mask(128, 96, rng=5), generate_freeform_mask(128, 96, rng=6))


def test_freeform_coverage_sweep():
    covs = np.array([generate_freeform_mask(256, 256, rng=s).mean() for s in range(1000)])
    assert covs.min() >= 0.02 and covs.max() <= 0.25


def test_freeform_unsatisfiable():
    p = FreeformParams(num_strokes=(0, 0), coverage=(0.1, 0.2))
    with pytest.raises(CoverageUnsatisfiableError):
        generate_freeform_mask(32, 32, p, 0)


def test_freeform_params_validation():
    with pytest.raises(ValueError):
        FreeformParams(coverage=(0.3, 0.2))
    with pytest.raises(ValueError):
        FreeformParams(coverage=(0.0, 1.0))


# nearest-neighbour field

def test_nnf_constant_image_zero():
    img = np.full((40, 40, 3), 77, np.uint8)
    nnf = compute_nnf(img, square_hole(40, 40, 15, 15, 6), rng=np.random.default_rng(0))
    assert nnf.energy == 0.0


def test_nnf_targets_valid_and_monotone(rng):
    img = rng.integers(0, 256, (48, 48, 3), dtype=np.uint8)
    hole = square_hole(48, 48, 10, 20, 9)
    p = PatchMatchParams(patch_size=5)
    nnf = compute_nnf(img, hole, p, np.random.default_rng(1), iterations=4)
    valid = valid_targets(hole, p.half)
    assert valid[nnf.target_y, nnf.target_x].all()
    assert np.array_equal(np.column_stack(np.nonzero(source_centers(hole, 2))), np.column_stack([nnf.centers_y, nnf.centers_x]))
    h = nnf.energy_history
    assert len(h) == 1 + 2 * 4
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert h[-1] == pytest.approx(nnf.energy)


def _exhaustive_energy(img, hole, half):
    """Best known-pixel patch distance per source centre by brute force."""
    f = img.astype(np.float64)
    h, w = hole.shape
    wgt = (~hole).astype(np.float64)
    ty, tx = np.nonzero(valid_targets(hole, half))
    total = 0.0
    for cy, cx in zip(*np.nonzero(source_centers(hole, half))):
        best = np.zeros(ty.size)
        for dy in range(-half, half + 1):
            for dx in range(-half, half + 1):
                sy, sx = cy + dy, cx + dx
                if 0 <= sy < h and 0 <= sx < w and wgt[sy, sx]:
                    best += ((f[sy, sx] - f[ty + dy, tx + dx]) ** 2).sum(axis=1)
        total += best.min()
    return total


def test_nnf_two_halves_reaches_exhaustive_optimum():
    rng = np.random.default_rng(8)
    half_img = rng.integers(0, 256, (64, 32, 3), dtype=np.uint8)
    img = np.concatenate([half_img, half_img], axis=1)
    hole = square_hole(64, 64, 28, 12, 8)
    optimum = _exhaustive_energy(img, hole, 3)
    assert optimum == 0.0  # the copy in the right half is exact
    nnf = compute_nnf(img, hole, rng=np.random.default_rng(0), iterations=10)
    assert nnf.energy <= optimum + 1e-9


def test_nnf_no_valid_target():
    img = np.zeros((6, 6, 3), np.uint8)
    with pytest.raises(NoValidTargetError):
        compute_nnf(img, square_hole(6, 6, 2, 2, 2))


def test_pyramid_helpers():
    assert default_levels(31, 100) == 1
    assert default_levels(64, 64) == 2
    assert default_levels(256, 300) == 4
    img = np.arange(5 * 5 * 1, dtype=float).reshape(5, 5, 1)
    hole = np.zeros((5, 5), bool)
    hole[4, 4] = True
    small, shole = downsample(img, hole)
    assert small.shape == (3, 3, 1)
    assert small[0, 0, 0] == (0 + 1 + 5 + 6) / 4
    assert small[2, 2, 0] == 24
    assert shole.tolist() == [[False] * 3, [False] * 3, [False, False, True]]


# PatchMatch inpainting

def test_inpaint_constant_color():
    img = np.full((48, 48, 3), (12, 200, 99), np.uint8)
    hole = square_hole(48, 48, 20, 5, 10)
    assert np.array_equal(inpaint_patchmatch(img, hole), img)


def test_inpaint_empty_hole_noop(rng):
    img = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
    out = inpaint_patchmatch(img, np.zeros((20, 20), bool))
    assert np.array_equal(out, img) and out is not img


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_inpaint_stripe_restoration(seed):
    pristine = stripes()
    hole = square_hole(64, 64, 28, 28, 8)
    damaged = pristine.copy()
    damaged[hole] = 0
    out = inpaint_patchmatch(damaged, hole, PatchMatchParams(seed=seed))
    mae = np.abs(out[hole].astype(float) - pristine[hole]).mean() / 255
    assert mae <= 10 / 255


def test_inpaint_hole_only_and_deterministic(rng):
    img = rng.integers(0, 256, (50, 60, 3), dtype=np.uint8)
    hole = generate_freeform_mask(60, 50, FreeformParams(brush_width=(4, 8)), 3)
    a = inpaint_patchmatch(img, hole, PatchMatchParams(seed=4))
    b = inpaint_patchmatch(img, hole, PatchMatchParams(seed=4))
    assert np.array_equal(a[~hole], img[~hole])
    assert np.array_equal(a, b)


def test_inpaint_trace_is_monotone(rng):
    img = rng.integers(0, 256, (72, 72, 3), dtype=np.uint8)
    trace = []
    inpaint_patchmatch(img, square_hole(72, 72, 30, 30, 12), PatchMatchParams(), trace)
    assert {lvl for lvl, _ in trace} == {0, 1}
    for _, nnf in trace:
        h = nnf.energy_history
        assert all(b <= a for a, b in zip(h, h[1:]))


def test_params_validation():
    with pytest.raises(ValueError):
        PatchMatchParams(patch_size=4)
    with pytest.raises(ValueError):
        PatchMatchParams(search_radius_decay=1.0)


# service backend

def test_png_roundtrip(rng):
    img = rng.integers(0, 256, (7, 9, 3), dtype=np.uint8)
    assert np.array_equal(decode_png(encode_png(img, "RGB")), img)
    with pytest.raises(BadResponseError):
        decode_png(b"not a png")


def test_multipart_parsing():
    body = (
        b"--xx\r\nContent-Disposition: form-data; name=\"image\"; filename=\"a.png\"\r\n"
        b"Content-Type: image/png\r\n\r\nABC\r\n--xx--\r\n"
    )
    assert parse_multipart("multipart/form-data; boundary=xx", body) == {"image": b"ABC"}


def test_service_gray(gray_server, rng):
    img = rng.integers(0, 256, (32, 40, 3), dtype=np.uint8)
    hole = square_hole(32, 40, 4, 6, 10)
    out = inpaint_via_service(ServiceEndpoint(gray_server.url), img, hole)
    assert (out[hole] == 128).all()
    assert np.array_equal(out[~hole], img[~hole])


def test_service_retries_then_fails(rng):
    with StubServer(fail_first=100) as srv:
        ep = ServiceEndpoint(srv.url, retries=2, backoff_ms=10)
        with pytest.raises(RemoteFailureError):
            inpaint_via_service(ep, np.zeros((8, 8, 3), np.uint8), square_hole(8, 8, 2, 2, 2))
        assert srv.request_count == 3


def test_service_recovers_after_transient_failure():
    with StubServer(fail_first=1) as srv:
        ep = ServiceEndpoint(srv.url, retries=2, backoff_ms=10)
        out = inpaint_via_service(ep, np.zeros((8, 8, 3), np.uint8), square_hole(8, 8, 2, 2, 2))
        assert out[3, 3, 0] == 128 and srv.request_count == 2


def test_service_wrong_size():
    with StubServer(reply_size=(10, 10)) as srv:
        with pytest.raises(BadResponseError):
            inpaint_via_service(ServiceEndpoint(srv.url), np.zeros((64, 64, 3), np.uint8), square_hole(64, 64, 0, 0, 4))


def test_service_timeout():
    with StubServer(delay_s=3.0) as srv:
        ep = ServiceEndpoint(srv.url, timeout_ms=500)
        t0 = time.monotonic()
        with pytest.raises(ServiceTimeoutError):
            inpaint_via_service(ep, np.zeros((8, 8, 3), np.uint8), square_hole(8, 8, 2, 2, 2))
        assert time.monotonic() - t0 < 0.5 + 1.0


def test_service_unreachable():
    ep = ServiceEndpoint("http://127.0.0.1:9", retries=1, backoff_ms=1, timeout_ms=1000)
    with pytest.raises(RemoteFailureError):
        inpaint_via_service(ep, np.zeros((8, 8, 3), np.uint8), square_hole(8, 8, 2, 2, 2))


def test_inpaint_many_order():
    with StubServer(fill="echo") as srv:
        jobs = [(np.full((6, 6, 3), k, np.uint8), square_hole(6, 6, 1, 1, 2)) for k in range(10)]
        outs = inpaint_many(ServiceEndpoint(srv.url, max_in_flight=3), jobs)
        assert [int(o[0, 0, 0]) for o in outs] == list(range(10))


# gap filling

def _scene(rng):
    bg = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
    mask = np.zeros((16, 16), bool)
    mask[2:14, 3:13] = True
    c = ObjectCutout(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8), mask, "o")
    return compose_scene(bg, [(c, Placement(24, 20), NoBlend())], GapConfig(GapMode.INSTANCE))


def test_fill_gap_empty(rng):
    bg = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    res = compose_scene(bg, [], GapConfig(GapMode.FOREGROUND))
    assert np.array_equal(fill_gap(res), bg)


def test_fill_gap_patchmatch(rng):
    res = _scene(rng)
    out = fill_gap(res, PatchMatchParams(seed=1))
    assert res.gap.any()
    assert np.array_equal(out[~res.gap], res.image[~res.gap])


def test_fill_gap_service_gray(rng, gray_server):
    res = _scene(rng)
    out = fill_gap(res, ServiceEndpoint(gray_server.url))
    assert (out[res.gap] == 128).all()
    assert np.array_equal(out[~res.gap], res.image[~res.gap])


def test_inpaint_image_callable_and_bad_backend(rng):
    img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    hole = square_hole(8, 8, 1, 1, 3)
    assert np.array_equal(inpaint_image(img, hole, lambda i, h: np.zeros_like(i)), np.zeros_like(img))
    with pytest.raises(TypeError):
        inpaint_image(img, hole, 42)
