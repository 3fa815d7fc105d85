import os

import numpy as np
import pytest

from causalcorrupt.evaluate import mean_iou
from causalcorrupt.imgio import MAX_LABELS, read_mask_png, to_uint8
from causalcorrupt.ops import apply
from causalcorrupt.predictors import (
    segment_by_palette,
    write_ground_truth_predictions,
    write_reference_predictions,
)
from causalcorrupt.scene import DEFAULT_BACKGROUND, DEFAULT_PALETTE


def _paint(regions) -> np.ndarray:
    img = np.empty((32, 32, 3), dtype=np.float64)
    img[:, :] = DEFAULT_BACKGROUND
    for region, color in regions:
        img[region] = color
    return img


def test_segments_clean_scenes_well(test_scenes):
    for scene in test_scenes:
        pred = segment_by_palette(to_uint8(scene.image))
        score = mean_iou(pred, scene.masks)
        assert score is not None and score > 0.85


def test_segmentation_degrades_under_blur(test_scenes):
    scene = test_scenes[0]
    clean_score = mean_iou(segment_by_palette(to_uint8(scene.image)), scene.masks)
    blurred = apply("blur", scene.image, {"sigma": 6.0})
    blur_score = mean_iou(segment_by_palette(to_uint8(blurred)), scene.masks)
    assert blur_score < clean_score


def test_two_blobs_same_color_become_two_instances():
    img = _paint(
        [
            ((slice(2, 8), slice(2, 8)), DEFAULT_PALETTE[0]),
            ((slice(20, 28), slice(20, 28)), DEFAULT_PALETTE[0]),
        ]
    )
    pred = segment_by_palette(img)
    labels = sorted(int(v) for v in np.unique(pred) if v != 0)
    assert labels == [1, 2]


def test_diagonal_touching_blobs_are_separate():
    # 4-connectivity: corner contact does not merge components.
    img = np.empty((16, 16, 3), dtype=np.float64)
    img[:, :] = DEFAULT_BACKGROUND
    img[2:6, 2:6] = DEFAULT_PALETTE[1]
    img[6:10, 6:10] = DEFAULT_PALETTE[1]
    pred = segment_by_palette(img)
    assert len([v for v in np.unique(pred) if v != 0]) == 2


def test_small_components_are_dropped():
    img = _paint([((slice(4, 5), slice(4, 7)), DEFAULT_PALETTE[2])])  # 3 pixels
    assert not segment_by_palette(img, min_pixels=4).any()
    assert segment_by_palette(img, min_pixels=3).any()


def test_far_colors_become_background():
    # Mid-gray is far from every palette color but near the background.
    img = _paint([((slice(4, 12), slice(4, 12)), (0.5, 0.5, 0.5))])
    assert not segment_by_palette(img).any()
    # A color within tau of a palette entry still segments.
    close = tuple(c + 0.05 for c in DEFAULT_PALETTE[0])
    img2 = _paint([((slice(4, 12), slice(4, 12)), close)])
    assert segment_by_palette(img2).max() == 1


def test_label_cap(monkeypatch):
    # A dense grid of tiny blobs exceeds the mask label budget.
    img = np.empty((128, 128, 3), dtype=np.float64)
    img[:, :] = DEFAULT_BACKGROUND
    count = 0
    for y in range(0, 128, 4):
        for x in range(0, 128, 4):
            img[y : y + 2, x : x + 2] = DEFAULT_PALETTE[count % len(DEFAULT_PALETTE)]
            count += 1
    pred = segment_by_palette(img, min_pixels=1)
    labels = [int(v) for v in np.unique(pred) if v != 0]
    assert count > MAX_LABELS
    assert len(labels) == MAX_LABELS
    assert max(labels) == MAX_LABELS  # relabeled contiguously


def test_segmentation_is_deterministic(test_scenes):
    img = to_uint8(test_scenes[1].image)
    assert np.array_equal(segment_by_palette(img), segment_by_palette(img))


def test_write_reference_predictions_layout(tiny_dataset, tmp_path):
    out = str(tmp_path / "preds")
    n = write_reference_predictions(tiny_dataset.root, out)
    assert n == 6
    for sid in range(6):
        for variant in ["clean"] + tiny_dataset.node_order:
            path = os.path.join(out, "scenes", f"{sid:05d}", variant, "pred_masks.png")
            assert os.path.isfile(path)
            mask = read_mask_png(path)
            assert mask.shape == (64, 64)


def test_write_ground_truth_predictions_copies_bytes(tiny_dataset, tmp_path):
    out = str(tmp_path / "oracle")
    write_ground_truth_predictions(tiny_dataset.root, out)
    record = tiny_dataset.scenes[2]
    with open(tiny_dataset.path(record["files"]["masks"]), "rb") as fh:
        gt_bytes = fh.read()
    variant = tiny_dataset.node_order[3]
    pred_path = os.path.join(out, "scenes", "00002", variant, "pred_masks.png")
    with open(pred_path, "rb") as fh:
        assert fh.read() == gt_bytes
    assert os.path.isfile(os.path.join(out, "scenes", "00002", variant, "recon.png"))


def test_ground_truth_predictions_without_recon(tiny_dataset, tmp_path):
    out = str(tmp_path / "masks_only")
    write_ground_truth_predictions(tiny_dataset.root, out, include_recon=False)
    assert not os.path.isfile(os.path.join(out, "scenes", "00000", "clean", "recon.png"))
    assert os.path.isfile(os.path.join(out, "scenes", "00000", "clean", "pred_masks.png"))
