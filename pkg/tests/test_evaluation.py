import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import box_iou_pixels, reference_ap
from pastesynth.errors import DimensionMismatchError
from pastesynth.evaluation import (
    Detection,
    GroundTruth,
    SegCounts,
    ap_from_curve,
    average_precision,
    bbox_iou,
    f_measure,
    parse_detections,
    parse_ground_truth,
    seg_counts,
)

GT_BOXES = [(0, 0, 10, 10), (20, 0, 10, 10), (40, 0, 10, 10)]
DET_ROWS = [  # (bbox, score)
    ((0, 0, 10, 10), 0.9),
    ((70, 70, 5, 5), 0.8),
    ((21, 0, 10, 10), 0.7),
    ((1, 1, 10, 10), 0.6),
    ((40, 1, 10, 10), 0.5),
]


def fixture_dets(rows=DET_ROWS, cat="a"):
    return [Detection("img", cat, b, s) for b, s in rows]


def fixture_gts(cat="a"):
    return [GroundTruth("img", cat, b) for b in GT_BOXES]


@pytest.mark.parametrize(
    "a, b",
    [((0, 0, 2, 2), (1, 1, 2, 2)), ((0, 0, 4, 4), (0, 0, 4, 4)), ((0, 0, 3, 3), (5, 5, 2, 2)), ((2, 3, 5, 4), (4, 1, 3, 7))],
)
def test_iou_integer_boxes_match_pixel_count(a, b):
    assert bbox_iou(a, b) == box_iou_pixels(a, b)
    assert bbox_iou(a, b) == bbox_iou(b, a)


def test_iou_analytic():
    assert bbox_iou((0, 0, 2, 2), (1, 1, 2, 2)) == pytest.approx(1 / 7, abs=0)
    assert bbox_iou((0, 0, 2, 2), (2, 0, 2, 2)) == 0.0
    assert bbox_iou((0.5, 0.5, 1, 1), (0.5, 0.5, 1, 1)) == 1.0


def test_single_match_and_all_miss():
    gt = [GroundTruth("i", "c", (0, 0, 10, 10))]
    assert average_precision([Detection("i", "c", (0, 0, 10, 9), 0.3)], gt).ap["c"] == 1.0
    misses = [Detection("i", "c", (6, 6, 10, 10), s) for s in (0.9, 0.8)]
    assert average_precision(misses, gt).ap["c"] == 0.0


def test_five_detection_fixture():
    report = average_precision(fixture_dets(), fixture_gts())
    ref = reference_ap([("img", b, s) for b, s in DET_ROWS], [("img", b) for b in GT_BOXES])
    assert ref == pytest.approx(34 / 45, abs=1e-12)
    assert report.ap["a"] == pytest.approx(ref, abs=1e-9)
    assert report.mean_ap == report.ap["a"]
    recall, precision = report.curves["a"]
    assert recall.tolist() == pytest.approx([1 / 3, 1 / 3, 2 / 3, 2 / 3, 1.0])
    assert precision.tolist() == pytest.approx([1.0, 0.5, 2 / 3, 0.5, 0.6])


def eleven_point_oracle(recall, precision):
    total = 0.0
    for k in range(11):
        t = k / 10
        ps = [p for r, p in zip(recall, precision) if r >= t - 1e-12]
        total += max(ps) if ps else 0.0
    return total / 11


def test_eleven_point_mode():
    report = average_precision(fixture_dets(), fixture_gts(), mode="11-point")
    r, p = average_precision(fixture_dets(), fixture_gts()).curves["a"]
    assert report.ap["a"] == pytest.approx(eleven_point_oracle(r, p), abs=1e-12)
    # thresholds 0, .1, .2, .3 → 1.0; .4 .. .6 → 2/3; .7 .. 1.0 → 0.6
    assert report.ap["a"] == pytest.approx((4 * 1 + 3 * 2 / 3 + 4 * 0.6) / 11)
    with pytest.raises(ValueError):
        ap_from_curve(r, p, "voc")


def test_tie_break_by_input_order():
    gt = [GroundTruth("i", "c", (0, 0, 10, 10))]
    dets = [Detection("i", "c", (50, 50, 5, 5), 0.5), Detection("i", "c", (0, 0, 10, 10), 0.5)]
    # the miss comes first among the tied scores
    assert average_precision(dets, gt).ap["c"] == pytest.approx(0.5)


def test_mean_over_gt_categories_and_unknown():
    gts = fixture_gts("a") + [GroundTruth("img", "b", (0, 0, 5, 5))]
    dets = fixture_dets(cat="a") + [Detection("img", "zzz", (0, 0, 5, 5), 0.9)]
    report = average_precision(dets, gts)
    assert set(report.ap) == {"a", "b"}
    assert report.ap["b"] == 0.0
    assert report.mean_ap == pytest.approx((34 / 45) / 2)
    assert report.unknown_categories == ["zzz"]


def test_duplicate_gt_per_image_separation():
    gts = [GroundTruth("x", "c", (0, 0, 10, 10)), GroundTruth("y", "c", (0, 0, 10, 10))]
    dets = [Detection("x", "c", (0, 0, 10, 10), 0.9), Detection("x", "c", (0, 0, 10, 10), 0.8)]
    # the second detection can not match the other image's box
    assert average_precision(dets, gts).ap["c"] == pytest.approx(0.5)


def random_scenario(rng):
    n_img = int(rng.integers(1, 4))
    gts = []
    for i in range(n_img):
        for _ in range(int(rng.integers(1, 5))):
            gts.append((f"im{i}", (int(rng.integers(0, 80)), int(rng.integers(0, 80)), int(rng.integers(5, 20)), int(rng.integers(5, 20)))))
    dets = []
    for _ in range(int(rng.integers(0, 21))):
        img, (x, y, w, h) = gts[int(rng.integers(len(gts)))]
        jitter = rng.integers(-6, 7, 4)
        box = (x + int(jitter[0]), y + int(jitter[1]), max(1, w + int(jitter[2])), max(1, h + int(jitter[3])))
        dets.append((img, box, float(rng.choice([rng.random(), 0.5]))))
    return dets, gts


def run_impl(dets, gts, thresh=0.5):
    return average_precision(
        [Detection(i, "c", b, s) for i, b, s in dets], [GroundTruth(i, "c", b) for i, b in gts], thresh
    ).ap["c"]


def test_randomized_against_reference():
    rng = np.random.default_rng(77)
    for _ in range(50):
        dets, gts = random_scenario(rng)
        for thresh in (0.3, 0.5, 0.7):
            assert abs(run_impl(dets, gts, thresh) - reference_ap(dets, gts, thresh)) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ap_properties(seed):
    rng = np.random.default_rng(seed)
    dets, gts = random_scenario(rng)
    base = run_impl(dets, gts)
    # strictly monotone rescaling
    assert run_impl([(i, b, 0.1 + s ** 3 / 2) for i, b, s in dets], gts) == pytest.approx(base, abs=1e-12)
    # a lowest-score false positive never helps
    low = min([s for *_, s in dets], default=1.0) - 0.01
    assert run_impl(dets + [("nowhere", (0, 0, 1, 1), low)], gts) <= base + 1e-12
    # a top-score exact hit on a ground truth nobody could match never hurts
    free = [(i, b) for i, b in gts if all(di != i or bbox_iou(db, b) < 0.5 for di, db, _ in dets)]
    for img, box in free[:1]:
        assert run_impl([(img, box, 2.0)] + dets, gts) >= base - 1e-12


def test_seg_counts_arithmetic():
    c = SegCounts(6, 2, 2)
    assert (c.precision, c.recall, c.f_measure) == (0.75, 0.75, 0.75)
    assert SegCounts(0, 0, 0).f_measure == 1.0
    assert SegCounts(0, 3, 0).f_measure == 0.0
    assert SegCounts(1, 2, 3) + SegCounts(1, 1, 1) == SegCounts(2, 3, 4)


def test_f_measure_examples(rng):
    gt = rng.random((10, 10)) < 0.4
    assert f_measure(gt, gt)[2] == 1.0
    p, r, f = f_measure(np.zeros_like(gt), gt)
    assert r == 0.0 and f == 0.0
    pred = np.zeros((4, 4), bool)
    g = np.zeros((4, 4), bool)
    pred.flat[:8] = True
    g.flat[:6] = True
    g.flat[8:10] = True
    assert seg_counts(pred, g) == SegCounts(6, 2, 2)
    with pytest.raises(DimensionMismatchError):
        f_measure(pred, g, np.zeros((3, 3), bool))


def test_ignore_exhaustive_flips(rng):
    for _ in range(3):
        pred = rng.random((16, 16)) < 0.5
        gt = rng.random((16, 16)) < 0.5
        ignore = rng.random((16, 16)) < 0.3
        base = f_measure(pred, gt, ignore)
        for y, x in zip(*np.nonzero(ignore)):
            for arr in (pred, gt):
                arr[y, x] = ~arr[y, x]
                assert f_measure(pred, gt, ignore) == base
                arr[y, x] = ~arr[y, x]


def test_parsers():
    dets = parse_detections({"detections": [{"image_id": 3, "category": "a", "bbox": [0, 0, 1, 1], "score": 0.5}]})
    assert dets == [Detection("3", "a", (0.0, 0.0, 1.0, 1.0), 0.5)]
    gts = parse_ground_truth({"annotations": [{"image_id": "3", "category": "a", "bbox": [0, 0, 1, 1], "extra": 1}]})
    assert gts == [GroundTruth("3", "a", (0.0, 0.0, 1.0, 1.0))]
    with pytest.raises(ValueError):
        Detection("i", "c", (0, 0, 0, 1), 0.1)
