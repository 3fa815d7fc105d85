"""Scoring of external predictions against dataset ground truth.

Predictions live outside the dataset in a parallel layout:

    pred/
      scenes/<id>/<variant>/pred_masks.png   instance masks (label image)
      scenes/<id>/<variant>/recon.png        reconstruction of the clean RGB

where <variant> is a corruption node name or "clean". Either file may be
absent; each contributes only the metrics it supports. Mask quality is
mean IoU under an optimal one-to-one matching between ground-truth and
predicted instances, so mIoU is invariant to label renumbering.
Reconstruction error is mean squared error against the clean image on the
0..255 pixel scale.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import imgio
from .dataset import DatasetManifest
from .errors import EmptySampleError, PredictionLayoutError, ShapeMismatchError
from .ops import normalize_severity, param_ranges
from .rng import STREAM_BOOTSTRAP, generator_for

logger = logging.getLogger(__name__)

REPORT_FORMAT = 1
CSV_HEADER = "scene_id,variant,op,severity,miou,mse"


def iou_matrix(gt: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairwise IoU between every gt and predicted instance.

    Returns (gt_labels, pred_labels, matrix). Label 0 is background and is
    excluded from both sides.
    """
    if gt.shape != pred.shape:
        raise ShapeMismatchError(f"mask shapes differ: {gt.shape} vs {pred.shape}")
    g_ids, g_inv = np.unique(gt, return_inverse=True)
    p_ids, p_inv = np.unique(pred, return_inverse=True)
    counts = np.bincount(
        g_inv.ravel() * len(p_ids) + p_inv.ravel(),
        minlength=len(g_ids) * len(p_ids),
    ).reshape(len(g_ids), len(p_ids))
    g_keep = g_ids != 0
    p_keep = p_ids != 0
    inter = counts[np.ix_(g_keep, p_keep)].astype(np.float64)
    g_area = counts.sum(axis=1)[g_keep].astype(np.float64)
    p_area = counts.sum(axis=0)[p_keep].astype(np.float64)
    union = g_area[:, None] + p_area[None, :] - inter
    with np.errstate(invalid="ignore"):
        iou = np.where(union > 0, inter / np.maximum(union, 1.0), 0.0)
    return g_ids[g_keep], p_ids[p_keep], iou


@dataclass(frozen=True)
class Match:
    gt_label: int
    pred_label: int | None
    iou: float


def match_masks(pred: np.ndarray, gt: np.ndarray) -> list[Match]:
    """Optimal one-to-one assignment of predicted to gt instances.

    Maximizes total IoU; pairs with zero overlap stay unmatched. Every gt
    instance appears exactly once, with iou 0.0 when unmatched.
    """
    g_ids, p_ids, matrix = iou_matrix(gt, pred)
    assigned: dict[int, tuple[int, float]] = {}
    if matrix.size:
        rows, cols = linear_sum_assignment(matrix, maximize=True)
        for r, c in zip(rows, cols):
            if matrix[r, c] > 0.0:
                assigned[r] = (int(p_ids[c]), float(matrix[r, c]))
    out = []
    for i, g in enumerate(g_ids):
        pred_label, iou = assigned.get(i, (None, 0.0))
        out.append(Match(gt_label=int(g), pred_label=pred_label, iou=iou))
    return out


def mean_iou(pred: np.ndarray, gt: np.ndarray) -> float | None:
    """Mean matched IoU over gt instances; None when the scene has no objects."""
    matches = match_masks(pred, gt)
    if not matches:
        logger.warning("scene has no ground-truth objects; mIoU undefined")
        return None
    return float(sum(m.iou for m in matches) / len(matches))


def _as_unit_float(image: np.ndarray) -> np.ndarray:
    if image.dtype == np.uint8:
        return image.astype(np.float64) / 255.0
    return np.asarray(image, dtype=np.float64)


def mse(recon: np.ndarray, clean: np.ndarray, pixel_scale: bool = True) -> float:
    """Mean squared reconstruction error against the clean image.

    By default values are scaled to 0..255 before squaring; pass
    pixel_scale=False for unit-range MSE. uint8 and unit-range float
    inputs may be mixed freely.
    """
    a = _as_unit_float(recon)
    b = _as_unit_float(clean)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    if pixel_scale:
        diff = diff * 255.0
    return float(np.mean(diff * diff))


@dataclass(frozen=True)
class BootstrapCI:
    mean: float
    lo: float
    hi: float
    half_width: float
    n: int
    n_boot: int


def bootstrap_ci(values, n_boot: int = 1000, seed: int = 0) -> BootstrapCI:
    """Percentile bootstrap 95% CI of the mean, deterministic in seed."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise EmptySampleError("cannot bootstrap an empty sample")
    mean = float(arr.mean())
    if arr.size == 1:
        logger.warning("bootstrap over a single value; interval collapses to a point")
        return BootstrapCI(mean=mean, lo=mean, hi=mean, half_width=0.0, n=1, n_boot=n_boot)
    rng = generator_for(seed, 0, "bootstrap", STREAM_BOOTSTRAP)
    idx = rng.integers(0, arr.size, size=(n_boot, arr.size))
    means = arr[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return BootstrapCI(
        mean=mean,
        lo=float(lo),
        hi=float(hi),
        half_width=float((hi - lo) / 2.0),
        n=int(arr.size),
        n_boot=n_boot,
    )


@dataclass(frozen=True)
class BinStat:
    index: int
    lo: float
    hi: float
    center: float
    count: int
    mean: float | None


def severity_curve(pairs, n_bins: int) -> list[BinStat]:
    """Bin (severity, value) pairs into n_bins equal-width bins over [0, 1].

    The last bin is closed on the right so severity 1.0 lands inside it.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    sums = [0.0] * n_bins
    counts = [0] * n_bins
    for sev, val in pairs:
        i = min(int(sev * n_bins), n_bins - 1)
        sums[i] += val
        counts[i] += 1
    out = []
    for i in range(n_bins):
        lo = i / n_bins
        hi = (i + 1) / n_bins
        mean = sums[i] / counts[i] if counts[i] else None
        out.append(BinStat(index=i, lo=lo, hi=hi, center=(lo + hi) / 2.0, count=counts[i], mean=mean))
    return out


def _scene_pred_dir(pred_root: str, scene_id: int, variant: str) -> str:
    return os.path.join(pred_root, "scenes", f"{scene_id:05d}", variant)


def _load_traces(manifest: DatasetManifest) -> dict[int, dict]:
    traces = {}
    for record in manifest.scenes:
        with open(manifest.path(record["files"]["trace"]), "r", encoding="utf-8") as fh:
            traces[record["scene_id"]] = json.load(fh)
    return traces


def _severity_table(manifest: DatasetManifest, traces: dict[int, dict]) -> dict[str, dict[int, float]]:
    """Normalized severity per (node, scene), min-max over the dataset."""
    table: dict[str, dict[int, float]] = {}
    for name in manifest.node_order:
        op = manifest.node_info(name)["op"]
        samples = [traces[sid]["nodes"][name]["params"] for sid in sorted(traces)]
        ranges = param_ranges(op, samples)
        table[name] = {
            sid: normalize_severity(op, traces[sid]["nodes"][name]["params"], ranges)
            for sid in sorted(traces)
        }
    return table


def _clean_miou_for_root(manifest: DatasetManifest, pred_root: str) -> float | None:
    scores = []
    for record in manifest.scenes:
        pred_path = os.path.join(_scene_pred_dir(pred_root, record["scene_id"], "clean"), "pred_masks.png")
        if not os.path.isfile(pred_path):
            continue
        gt = imgio.read_mask_png(manifest.path(record["files"]["masks"]))
        score = mean_iou(imgio.read_mask_png(pred_path), gt)
        if score is not None:
            scores.append(score)
    if not scores:
        return None
    return float(np.mean(scores))


def evaluate_predictions(
    dataset_root: str,
    pred_roots: list[str] | str,
    seed: int = 0,
    n_boot: int = 1000,
    n_bins: int = 10,
) -> dict:
    """Score one or more prediction sets against a dataset.

    With several prediction sets, the one with the best mean IoU on the
    clean variant is selected and scored in full; the others are only
    ranked. Returns the report as a JSON-serializable dict.
    """
    if isinstance(pred_roots, str):
        pred_roots = [pred_roots]
    if not pred_roots:
        raise PredictionLayoutError("at least one prediction directory is required")
    for root in pred_roots:
        if not os.path.isdir(os.path.join(root, "scenes")):
            raise PredictionLayoutError(f"{root!r} has no scenes/ directory")
    manifest = DatasetManifest.load(dataset_root)
    traces = _load_traces(manifest)
    severity = _severity_table(manifest, traces)

    sets = []
    for root in pred_roots:
        sets.append({"path": root, "name": os.path.basename(os.path.normpath(root)), "clean_miou": _clean_miou_for_root(manifest, root)})
    scored = [(i, s["clean_miou"]) for i, s in enumerate(sets) if s["clean_miou"] is not None]
    if scored:
        selected = max(scored, key=lambda item: item[1])[0]
    else:
        logger.warning("no prediction set provides clean masks; selecting the first")
        selected = 0
    pred_root = sets[selected]["path"]

    variants = ["clean"] + manifest.node_order
    ops_by_variant = {"clean": "clean"}
    for name in manifest.node_order:
        ops_by_variant[name] = manifest.node_info(name)["op"]

    records = []
    for record in manifest.scenes:
        sid = record["scene_id"]
        gt = imgio.read_mask_png(manifest.path(record["files"]["masks"]))
        clean_u8 = imgio.read_image_png(manifest.path(record["files"]["clean"]))
        for variant in variants:
            vdir = _scene_pred_dir(pred_root, sid, variant)
            mask_path = os.path.join(vdir, "pred_masks.png")
            recon_path = os.path.join(vdir, "recon.png")
            has_mask = os.path.isfile(mask_path)
            has_recon = os.path.isfile(recon_path)
            if not (has_mask or has_recon):
                continue
            miou = mean_iou(imgio.read_mask_png(mask_path), gt) if has_mask else None
            mse_val = mse(imgio.read_image_png(recon_path), clean_u8) if has_recon else None
            records.append(
                {
                    "scene_id": sid,
                    "variant": variant,
                    "op": ops_by_variant[variant],
                    "severity": None if variant == "clean" else severity[variant][sid],
                    "miou": miou,
                    "mse": mse_val,
                }
            )

    per_variant = {}
    for variant in variants:
        rows = [r for r in records if r["variant"] == variant]
        entry = {"op": ops_by_variant[variant], "n_scenes": len(rows)}
        for metric in ("miou", "mse"):
            values = [r[metric] for r in rows if r[metric] is not None]
            if values:
                ci = bootstrap_ci(values, n_boot=n_boot, seed=_metric_seed(seed, variant, metric))
                entry[f"{metric}_mean"] = ci.mean
                entry[f"{metric}_ci_lo"] = ci.lo
                entry[f"{metric}_ci_hi"] = ci.hi
                entry[f"{metric}_ci_half_width"] = ci.half_width
                entry[f"n_{metric}"] = ci.n
            else:
                entry[f"{metric}_mean"] = None
                entry[f"{metric}_ci_lo"] = None
                entry[f"{metric}_ci_hi"] = None
                entry[f"{metric}_ci_half_width"] = None
                entry[f"n_{metric}"] = 0
        if variant != "clean":
            pairs = [
                (r["severity"], r["miou"])
                for r in rows
                if r["severity"] is not None and r["miou"] is not None
            ]
            entry["curve_miou"] = [
                {"center": b.center, "mean": b.mean, "count": b.count}
                for b in severity_curve(pairs, n_bins)
            ]
        per_variant[variant] = entry

    return {
        "format": REPORT_FORMAT,
        "dataset_fingerprint": manifest.data["scm_fingerprint"],
        "regime": manifest.data["regime"],
        "n_scenes": manifest.data["n_scenes"],
        "seed": seed,
        "n_boot": n_boot,
        "n_bins": n_bins,
        "mse_scale": "pixel",
        "prediction_sets": [{"name": s["name"], "clean_miou": s["clean_miou"]} for s in sets],
        "selected_prediction_set": sets[selected]["name"],
        "node_order": manifest.node_order,
        "per_variant": per_variant,
        "records": records,
    }


def _metric_seed(seed: int, variant: str, metric: str) -> int:
    # Stable per-aggregate seed: independent of variant iteration order.
    from .rng import mix_seed

    return mix_seed(seed, 0, f"{variant}:{metric}", STREAM_BOOTSTRAP)


def report_csv_lines(report: dict) -> list[str]:
    def cell(value) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    lines = [CSV_HEADER]
    for r in report["records"]:
        lines.append(
            ",".join(
                cell(r[key]) for key in ("scene_id", "variant", "op", "severity", "miou", "mse")
            )
        )
    return lines


def write_report(report: dict, out_prefix: str) -> tuple[str, str]:
    """Write <prefix>.json and <prefix>.csv; returns the two paths."""
    json_path = out_prefix + ".json"
    csv_path = out_prefix + ".csv"
    parent = os.path.dirname(os.path.abspath(json_path))
    os.makedirs(parent, exist_ok=True)
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(report_csv_lines(report)) + "\n")
    return json_path, csv_path


def load_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def curves_from_report(report: dict, n_bins: int = 5, metric: str = "miou") -> dict[str, list[BinStat]]:
    """Severity-binned metric means per corruption, from report records."""
    if metric not in ("miou", "mse"):
        raise ValueError(f"metric must be 'miou' or 'mse', got {metric!r}")
    curves: dict[str, list[BinStat]] = {}
    for variant in report["node_order"]:
        pairs = [
            (r["severity"], r[metric])
            for r in report["records"]
            if r["variant"] == variant and r["severity"] is not None and r[metric] is not None
        ]
        curves[variant] = severity_curve(pairs, n_bins)
    return curves


def write_curves_csv(curves: dict[str, list[BinStat]], path: str) -> str:
    lines = ["corruption,bin_index,bin_lo,bin_hi,bin_center,count,mean"]
    for name, stats in curves.items():
        for b in stats:
            mean = "" if b.mean is None else repr(b.mean)
            lines.append(f"{name},{b.index},{b.lo!r},{b.hi!r},{b.center!r},{b.count},{mean}")
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
