"""Built-in prediction writers.

Two sources of predictions in the external layout expected by evaluation:
a ground-truth copier (upper bound; masks are exact and reconstructions
are the clean image itself) and a deliberately fragile color-threshold
segmenter whose quality decays as corruption severity rises.
"""

from __future__ import annotations

import os

import numpy as np
from scipy import ndimage

from . import imgio
from .dataset import DatasetManifest
from .imgio import MAX_LABELS
from .scene import DEFAULT_BACKGROUND, DEFAULT_PALETTE


def segment_by_palette(
    image: np.ndarray,
    palette=DEFAULT_PALETTE,
    background=DEFAULT_BACKGROUND,
    tau: float = 0.25,
    min_pixels: int = 4,
) -> np.ndarray:
    """Nearest-palette-color segmentation into connected instances.

    Pixels nearer the background color than any palette color, or farther
    than tau (RGB Euclidean distance in [0,1] units) from their nearest
    palette color, become background. Each palette color's foreground is
    split into 4-connected components; components smaller than min_pixels
    are dropped. Labels follow (color order, component order), so output
    is deterministic. At most MAX_LABELS instances are kept (largest
    first) to fit the mask encoding.
    """
    img = imgio.to_float(image) if image.dtype == np.uint8 else np.asarray(image, dtype=np.float64)
    colors = np.asarray(list(palette) + [background], dtype=np.float64)
    diffs = img[:, :, None, :] - colors[None, None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=-1))
    nearest = np.argmin(dists, axis=-1)
    min_dist = np.min(dists, axis=-1)
    n_colors = len(palette)
    foreground = (nearest < n_colors) & (min_dist <= tau)

    temp = np.zeros(img.shape[:2], dtype=np.int64)
    offset = 0
    for k in range(n_colors):
        labeled, n = ndimage.label(foreground & (nearest == k))
        if n:
            temp[labeled > 0] = labeled[labeled > 0] + offset
            offset += n
    if offset == 0:
        return np.zeros(img.shape[:2], dtype=np.int32)

    sizes = np.bincount(temp.ravel(), minlength=offset + 1)
    kept = [t for t in range(1, offset + 1) if sizes[t] >= min_pixels]
    if len(kept) > MAX_LABELS:
        kept = sorted(sorted(kept, key=lambda t: (-sizes[t], t))[:MAX_LABELS])
    lookup = np.zeros(offset + 1, dtype=np.int32)
    for new_label, t in enumerate(kept, start=1):
        lookup[t] = new_label
    return lookup[temp]


def _pred_dir(out_root: str, scene_id: int, variant: str) -> str:
    path = os.path.join(out_root, "scenes", f"{scene_id:05d}", variant)
    os.makedirs(path, exist_ok=True)
    return path


def write_reference_predictions(
    dataset_root: str,
    out_root: str,
    palette=DEFAULT_PALETTE,
    background=DEFAULT_BACKGROUND,
    tau: float = 0.25,
    min_pixels: int = 4,
) -> int:
    """Run the color-threshold segmenter over every variant of every scene."""
    manifest = DatasetManifest.load(dataset_root)
    for record in manifest.scenes:
        sid = record["scene_id"]
        sources = {"clean": record["files"]["clean"]}
        sources.update(record["files"]["corrupt"])
        for variant, rel in sources.items():
            image = imgio.read_image_png(manifest.path(rel))
            mask = segment_by_palette(image, palette, background, tau, min_pixels)
            imgio.write_mask_png(os.path.join(_pred_dir(out_root, sid, variant), "pred_masks.png"), mask)
    return len(manifest.scenes)


def write_ground_truth_predictions(
    dataset_root: str, out_root: str, include_recon: bool = True
) -> int:
    """Copy ground truth as predictions for every variant of every scene.

    pred_masks.png is the gt mask byte for byte; recon.png is the clean
    image, so reconstruction error against clean is exactly zero.
    """
    manifest = DatasetManifest.load(dataset_root)
    for record in manifest.scenes:
        sid = record["scene_id"]
        with open(manifest.path(record["files"]["masks"]), "rb") as fh:
            mask_bytes = fh.read()
        with open(manifest.path(record["files"]["clean"]), "rb") as fh:
            clean_bytes = fh.read()
        for variant in ["clean"] + manifest.node_order:
            vdir = _pred_dir(out_root, sid, variant)
            with open(os.path.join(vdir, "pred_masks.png"), "wb") as fh:
                fh.write(mask_bytes)
            if include_recon:
                with open(os.path.join(vdir, "recon.png"), "wb") as fh:
                    fh.write(clean_bytes)
    return len(manifest.scenes)
