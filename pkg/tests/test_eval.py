"""Evaluation metric tests.

IoU and matching are verified against brute-force oracles: pixelwise set
counting for the IoU matrix and exhaustive assignment enumeration for the
optimal matching, so the vectorized and Hungarian paths cannot certify
themselves.
"""

import itertools
import json
import logging
import math
import os

import numpy as np
import pytest

from causalcorrupt.errors import (
    EmptySampleError,
    PredictionLayoutError,
    ShapeMismatchError,
)
from causalcorrupt.evaluate import (
    BinStat,
    BootstrapCI,
    Match,
    bootstrap_ci,
    curves_from_report,
    evaluate_predictions,
    iou_matrix,
    load_report,
    match_masks,
    mean_iou,
    mse,
    report_csv_lines,
    severity_curve,
    write_curves_csv,
    write_report,
)
from causalcorrupt.predictors import (
    write_ground_truth_predictions,
    write_reference_predictions,
)


def _brute_iou(gt: np.ndarray, pred: np.ndarray, g: int, p: int) -> float:
    a = gt == g
    b = pred == p
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def _brute_best_mean_iou(gt: np.ndarray, pred: np.ndarray) -> float | None:
    """Exhaustive search over one-to-one assignments."""
    g_ids = [int(v) for v in np.unique(gt) if v != 0]
    p_ids = [int(v) for v in np.unique(pred) if v != 0]
    if not g_ids:
        return None
    if not p_ids:
        return 0.0
    matrix = [[_brute_iou(gt, pred, g, p) for p in p_ids] for g in g_ids]
    k = min(len(g_ids), len(p_ids))
    best = 0.0
    if len(p_ids) >= len(g_ids):
        for perm in itertools.permutations(range(len(p_ids)), k):
            best = max(best, sum(matrix[i][perm[i]] for i in range(k)))
    else:
        for perm in itertools.permutations(range(len(g_ids)), k):
            best = max(best, sum(matrix[perm[j]][j] for j in range(k)))
    return best / len(g_ids)


# ---------------------------------------------------------------------------
# IoU and matching


def test_iou_matrix_against_pixel_counting():
    rng = np.random.Generator(np.random.PCG64(8))
    for _ in range(20):
        gt = rng.integers(0, 4, size=(12, 12)).astype(np.int32)
        pred = rng.integers(0, 5, size=(12, 12)).astype(np.int32)
        g_ids, p_ids, matrix = iou_matrix(gt, pred)
        assert 0 not in g_ids and 0 not in p_ids
        for i, g in enumerate(g_ids):
            for j, p in enumerate(p_ids):
                assert matrix[i, j] == pytest.approx(_brute_iou(gt, pred, g, p), abs=1e-12)


def test_iou_matrix_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        iou_matrix(np.zeros((4, 4), dtype=np.int32), np.zeros((4, 5), dtype=np.int32))


def test_match_masks_simple_overlap():
    gt = np.zeros((6, 6), dtype=np.int32)
    gt[0:3, 0:3] = 1
    pred = np.zeros((6, 6), dtype=np.int32)
    pred[1:4, 1:4] = 7
    # Intersection 4, union 14.
    matches = match_masks(pred, gt)
    assert matches == [Match(gt_label=1, pred_label=7, iou=pytest.approx(4 / 14))]


def test_match_masks_zero_overlap_stays_unmatched():
    gt = np.zeros((6, 6), dtype=np.int32)
    gt[0:2, 0:2] = 1
    pred = np.zeros((6, 6), dtype=np.int32)
    pred[4:6, 4:6] = 1
    matches = match_masks(pred, gt)
    assert matches == [Match(gt_label=1, pred_label=None, iou=0.0)]


def test_matching_equals_exhaustive_search():
    rng = np.random.Generator(np.random.PCG64(99))
    for trial in range(200):
        gt = rng.integers(0, 6, size=(10, 10)).astype(np.int32)
        pred = rng.integers(0, 6, size=(10, 10)).astype(np.int32)
        expected = _brute_best_mean_iou(gt, pred)
        got = mean_iou(pred, gt)
        if expected is None:
            assert got is None
        else:
            assert got == pytest.approx(expected, abs=1e-12), f"trial {trial}"


def test_mean_iou_perfect_under_label_permutation(test_scenes):
    rng = np.random.Generator(np.random.PCG64(3))
    for scene in test_scenes:
        gt = scene.masks
        assert mean_iou(gt, gt) == 1.0
        labels = [int(v) for v in np.unique(gt) if v != 0]
        perm = dict(zip(labels, rng.permutation(labels).tolist()))
        perm[0] = 0
        remapped = np.vectorize(perm.get)(gt).astype(np.int32)
        assert mean_iou(remapped, gt) == 1.0


def test_mean_iou_empty_prediction_is_zero(test_scenes):
    gt = test_scenes[0].masks
    assert mean_iou(np.zeros_like(gt), gt) == 0.0


def test_mean_iou_empty_gt_is_none(caplog):
    empty = np.zeros((8, 8), dtype=np.int32)
    pred = np.ones((8, 8), dtype=np.int32)
    with caplog.at_level(logging.WARNING, logger="causalcorrupt.evaluate"):
        assert mean_iou(pred, empty) is None
    assert any("no ground-truth objects" in rec.message for rec in caplog.records)


# ---------------------------------------------------------------------------
# reconstruction error


def test_mse_analytic_values():
    zeros = np.zeros((4, 4, 3), dtype=np.uint8)
    full = np.full((4, 4, 3), 255, dtype=np.uint8)
    ten = np.full((4, 4, 3), 10, dtype=np.uint8)
    assert mse(zeros, zeros) == 0.0
    assert mse(full, zeros) == pytest.approx(65025.0, abs=1e-6)
    assert mse(ten, zeros) == pytest.approx(100.0, abs=1e-6)


def test_mse_unit_scale_flag():
    a = np.zeros((2, 2, 3))
    b = np.full((2, 2, 3), 0.5)
    assert mse(a, b, pixel_scale=False) == pytest.approx(0.25, abs=1e-12)
    assert mse(a, b) == pytest.approx(0.25 * 255.0**2, abs=1e-9)


def test_mse_mixes_uint8_and_float():
    u8 = np.full((2, 2, 3), 51, dtype=np.uint8)
    f = np.full((2, 2, 3), 0.2)
    assert mse(u8, f) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ShapeMismatchError):
        mse(u8, np.zeros((2, 3, 3)))


# ---------------------------------------------------------------------------
# bootstrap


def test_bootstrap_constant_sample_has_zero_width():
    # 0.75 is exactly representable, so resampled means are bit-identical.
    ci = bootstrap_ci([0.75] * 50, n_boot=200, seed=1)
    assert ci == BootstrapCI(mean=0.75, lo=0.75, hi=0.75, half_width=0.0, n=50, n_boot=200)


def test_bootstrap_single_value_collapses(caplog):
    with caplog.at_level(logging.WARNING, logger="causalcorrupt.evaluate"):
        ci = bootstrap_ci([0.4], n_boot=100, seed=0)
    assert ci.half_width == 0.0 and ci.n == 1 and ci.mean == 0.4
    assert any("single value" in rec.message for rec in caplog.records)


def test_bootstrap_empty_sample_raises():
    with pytest.raises(EmptySampleError):
        bootstrap_ci([], n_boot=10, seed=0)


def test_bootstrap_matches_normal_theory():
    n = 10_000
    rng = np.random.Generator(np.random.PCG64(42))
    values = rng.normal(0.0, 1.0, size=n)
    ci = bootstrap_ci(values, n_boot=2000, seed=7)
    expected_hw = 1.96 * values.std(ddof=1) / math.sqrt(n)
    assert abs(ci.half_width - expected_hw) / expected_hw < 0.2
    assert ci.lo < ci.mean < ci.hi


def test_bootstrap_is_seed_deterministic():
    values = [0.1, 0.5, 0.9, 0.3, 0.7, 0.2]
    a = bootstrap_ci(values, n_boot=500, seed=5)
    b = bootstrap_ci(values, n_boot=500, seed=5)
    c = bootstrap_ci(values, n_boot=500, seed=6)
    assert a == b
    assert (a.lo, a.hi) != (c.lo, c.hi)


# ---------------------------------------------------------------------------
# severity curves


def test_severity_curve_hand_example():
    pairs = [(0.05, 1.0), (0.55, 0.4), (0.95, 0.2), (1.0, 0.0)]
    bins = severity_curve(pairs, 2)
    assert bins[0] == BinStat(index=0, lo=0.0, hi=0.5, center=0.25, count=1, mean=1.0)
    assert bins[1].count == 3
    assert bins[1].mean == pytest.approx(0.2)


def test_severity_curve_last_bin_right_inclusive():
    bins = severity_curve([(1.0, 0.5)], 4)
    assert bins[3].count == 1
    assert bins[3].mean == 0.5


def test_severity_curve_empty_bins_have_none_mean():
    bins = severity_curve([(0.1, 1.0)], 5)
    assert bins[0].count == 1
    for b in bins[1:]:
        assert b.count == 0 and b.mean is None


def test_severity_curve_counts_match_histogram():
    rng = np.random.Generator(np.random.PCG64(17))
    sev = rng.random(500)
    pairs = [(float(s), 0.0) for s in sev]
    for n_bins in (1, 3, 10):
        bins = severity_curve(pairs, n_bins)
        assert sum(b.count for b in bins) == 500
        # Independent count: right-open bins except the last.
        edges = np.linspace(0.0, 1.0, n_bins + 1)
        expected, _ = np.histogram(sev, bins=edges)
        assert [b.count for b in bins] == expected.tolist()


def test_severity_curve_recovers_decreasing_signal():
    sev = np.linspace(0.0, 1.0, 200)
    pairs = [(float(s), float(1.0 - s)) for s in sev]
    bins = severity_curve(pairs, 8)
    means = [b.mean for b in bins]
    assert all(m is not None for m in means)
    assert all(means[i] > means[i + 1] for i in range(7))


def test_severity_curve_rejects_bad_bins():
    with pytest.raises(ValueError):
        severity_curve([], 0)


# ---------------------------------------------------------------------------
# end-to-end report


@pytest.fixture(scope="module")
def gt_report(tmp_path_factory, tiny_dataset):
    pred_root = str(tmp_path_factory.mktemp("preds") / "oracle")
    write_ground_truth_predictions(tiny_dataset.root, pred_root)
    report = evaluate_predictions(tiny_dataset.root, [pred_root], seed=11, n_boot=200, n_bins=4)
    return report


def test_report_structure(gt_report, tiny_dataset):
    assert gt_report["format"] == 1
    assert gt_report["regime"] == "ood_iid"
    assert gt_report["n_scenes"] == 6
    assert gt_report["mse_scale"] == "pixel"
    assert gt_report["node_order"] == tiny_dataset.node_order
    assert gt_report["selected_prediction_set"] == "oracle"
    assert set(gt_report["per_variant"]) == {"clean", *tiny_dataset.node_order}
    assert len(gt_report["records"]) == 6 * 9


def test_ground_truth_predictions_are_perfect(gt_report):
    for variant, entry in gt_report["per_variant"].items():
        assert entry["miou_mean"] == 1.0
        assert entry["miou_ci_half_width"] == 0.0
        assert entry["mse_mean"] == 0.0
        assert entry["n_miou"] == 6


def test_report_curves_embedded(gt_report):
    assert "curve_miou" not in gt_report["per_variant"]["clean"]
    for variant in gt_report["node_order"]:
        curve = gt_report["per_variant"][variant]["curve_miou"]
        assert len(curve) == 4
        assert sum(b["count"] for b in curve) == 6


def test_report_severities_are_unit_range(gt_report):
    for r in gt_report["records"]:
        if r["variant"] == "clean":
            assert r["severity"] is None
        else:
            assert 0.0 <= r["severity"] <= 1.0


def test_report_is_seed_deterministic(tiny_dataset, tmp_path):
    pred_root = str(tmp_path / "oracle")
    write_ground_truth_predictions(tiny_dataset.root, pred_root)
    a = evaluate_predictions(tiny_dataset.root, [pred_root], seed=11, n_boot=100)
    b = evaluate_predictions(tiny_dataset.root, [pred_root], seed=11, n_boot=100)
    assert a == b


def test_multi_set_selection_prefers_best_clean_miou(tiny_dataset, tmp_path):
    oracle = str(tmp_path / "oracle")
    fragile = str(tmp_path / "fragile")
    write_ground_truth_predictions(tiny_dataset.root, oracle)
    write_reference_predictions(tiny_dataset.root, fragile)
    report = evaluate_predictions(tiny_dataset.root, [fragile, oracle], seed=1, n_boot=50)
    assert report["selected_prediction_set"] == "oracle"
    by_name = {s["name"]: s for s in report["prediction_sets"]}
    assert by_name["oracle"]["clean_miou"] == 1.0
    assert by_name["fragile"]["clean_miou"] <= 1.0


def test_reference_predictor_scores_yield_records(tiny_dataset, tmp_path):
    fragile = str(tmp_path / "fragile")
    write_reference_predictions(tiny_dataset.root, fragile)
    report = evaluate_predictions(tiny_dataset.root, [fragile], seed=2, n_boot=50)
    clean = report["per_variant"]["clean"]
    assert clean["miou_mean"] is not None and clean["miou_mean"] > 0.8
    # The fragile predictor writes no reconstructions.
    assert clean["mse_mean"] is None and clean["n_mse"] == 0


def test_prediction_layout_errors(tiny_dataset, tmp_path):
    with pytest.raises(PredictionLayoutError):
        evaluate_predictions(tiny_dataset.root, [])
    with pytest.raises(PredictionLayoutError):
        evaluate_predictions(tiny_dataset.root, [str(tmp_path / "nope")])


def test_csv_lines_shape(gt_report):
    lines = report_csv_lines(gt_report)
    assert lines[0] == "scene_id,variant,op,severity,miou,mse"
    assert len(lines) == 1 + len(gt_report["records"])
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "clean"
    assert first[3] == ""  # clean severity is empty


def test_write_and_load_report(gt_report, tmp_path):
    json_path, csv_path = write_report(gt_report, str(tmp_path / "out" / "report"))
    assert load_report(json_path) == gt_report
    with open(csv_path) as fh:
        assert fh.read().splitlines() == report_csv_lines(gt_report)


def test_curves_from_report_and_csv(gt_report, tmp_path):
    curves = curves_from_report(gt_report, n_bins=3)
    assert set(curves) == set(gt_report["node_order"])
    for stats in curves.values():
        assert len(stats) == 3
        assert sum(b.count for b in stats) == 6
    path = write_curves_csv(curves, str(tmp_path / "curves.csv"))
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "corruption,bin_index,bin_lo,bin_hi,bin_center,count,mean"
    assert len(lines) == 1 + 3 * len(curves)

    with pytest.raises(ValueError):
        curves_from_report(gt_report, metric="accuracy")
    mse_curves = curves_from_report(gt_report, n_bins=2, metric="mse")
    assert all(
        b.mean in (None, 0.0) for stats in mse_curves.values() for b in stats
    )
