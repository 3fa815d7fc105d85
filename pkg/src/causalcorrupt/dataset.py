"""End-to-end dataset generation, verification, and long-tail mixing.

A dataset directory is fully described by its manifest:

    out/
      manifest.json          written last (atomic completion marker)
      spec.scm.txt           canonical model text (fingerprinted)
      longtail.csv           (longtail regime only) scene -> chosen variant
      scenes/<id>/clean.png
      scenes/<id>/masks.png
      scenes/<id>/trace.json
      scenes/<id>/corrupt/<node>.png

Every node image is computed from the stored bytes of its declared input
(the parent render or the clean scene), so re-deriving any node image from
the manifest reproduces the stored file byte for byte. Scene jobs are pure
functions of (spec, source, scene_id, global_seed); worker count never
changes any output byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import imgio
from .dsl import SpecDocument, serialize_spec
from .errors import (
    ConfigError,
    DatasetLayoutError,
    ProbabilityError,
    SceneSourceError,
    UnknownNodeError,
)
from .ops import apply
from .rng import STREAM_LONGTAIL, STREAM_OP_NOISE, mix_seed, mix_seed_array
from .scene import SceneConfig, generate_scene, scene_metadata
from .scm import RENDER_FROM_PARENT, sample_trace, topological_order

MANIFEST_NAME = "manifest.json"
SPEC_FILE_NAME = "spec.scm.txt"
LONGTAIL_FILE_NAME = "longtail.csv"
MANIFEST_FORMAT = 1
WORKERS_ENV_VAR = "CAUSALCORRUPT_WORKERS"

REGIME_OOD_IID = "ood_iid"
REGIME_OOD_CHAIN = "ood_chain"
REGIME_LONGTAIL = "longtail"
REGIMES = (REGIME_OOD_IID, REGIME_OOD_CHAIN, REGIME_LONGTAIL)


@dataclass(frozen=True)
class RegimeConfig:
    """Dataset regime tag plus long-tail inclusion probabilities."""

    regime: str
    p_corr: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.regime == REGIME_LONGTAIL:
            if not self.p_corr:
                raise ConfigError("longtail regime requires p_corr probabilities")
            if any(p < 0 for p in self.p_corr.values()):
                raise ProbabilityError("p_corr probabilities must be nonnegative")
            if sum(self.p_corr.values()) > 1.0 + 1e-12:
                raise ProbabilityError("p_corr probabilities must sum to at most 1")
        elif self.p_corr:
            raise ConfigError(f"regime {self.regime!r} does not take p_corr")


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1, got {workers}")
    return workers


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def scene_dir_name(scene_id: int) -> str:
    return f"{scene_id:05d}"


def trace_to_dict(trace) -> dict:
    return {
        "scene_id": trace.scene_id,
        "seed": trace.seed,
        "nodes": {
            name: {"params": trace.values[name], "eps": trace.exogenous[name]}
            for name in trace.values
        },
    }


def trace_to_json(trace) -> str:
    return json.dumps(trace_to_dict(trace), indent=2) + "\n"


def _list_external_scenes(source_dir: str) -> list[tuple[int, str]]:
    if not os.path.isdir(source_dir):
        raise SceneSourceError(f"scene directory {source_dir!r} does not exist")
    found = []
    for entry in sorted(os.listdir(source_dir)):
        path = os.path.join(source_dir, entry)
        if not os.path.isdir(path):
            continue
        try:
            scene_id = int(entry)
        except ValueError:
            raise SceneSourceError(
                f"scene directory name {entry!r} is not an integer id"
            ) from None
        for required in ("clean.png", "masks.png"):
            if not os.path.isfile(os.path.join(path, required)):
                raise SceneSourceError(f"scene {entry!r} is missing {required}")
        found.append((scene_id, path))
    if not found:
        raise SceneSourceError(f"no scene subdirectories found under {source_dir!r}")
    found.sort(key=lambda item: item[0])
    ids = [sid for sid, _ in found]
    if len(set(ids)) != len(ids):
        raise SceneSourceError("duplicate scene ids in source directory")
    return found


def _scene_job(args: tuple) -> dict:
    """Render one scene's images and traces; returns its manifest record."""
    (doc, source_kind, source_payload, scene_id, global_seed, out_dir, regime_tag) = args
    graph = doc.graph
    order = topological_order(graph)
    scene_rel = os.path.join("scenes", scene_dir_name(scene_id))
    scene_abs = os.path.join(out_dir, scene_rel)
    os.makedirs(os.path.join(scene_abs, "corrupt"), exist_ok=True)

    if source_kind == "synth":
        scene = generate_scene(source_payload, scene_id, global_seed)
        clean_u8 = imgio.to_uint8(scene.image)
        clean_bytes = imgio.encode_image_png(clean_u8)
        mask_bytes = imgio.encode_mask_png(scene.masks)
    else:
        with open(os.path.join(source_payload, "clean.png"), "rb") as fh:
            clean_bytes = fh.read()
        with open(os.path.join(source_payload, "masks.png"), "rb") as fh:
            mask_bytes = fh.read()
        clean_u8 = imgio.decode_image_png(clean_bytes)
        imgio.decode_mask_png(mask_bytes)  # layout sanity check

    hashes: dict[str, str] = {}
    files: dict = {}

    def _write(rel: str, data: bytes) -> None:
        with open(os.path.join(out_dir, rel), "wb") as fh:
            fh.write(data)
        hashes[rel] = _sha256(data)

    clean_rel = os.path.join(scene_rel, "clean.png")
    masks_rel = os.path.join(scene_rel, "masks.png")
    _write(clean_rel, clean_bytes)
    _write(masks_rel, mask_bytes)
    files["clean"] = clean_rel
    files["masks"] = masks_rel

    trace = sample_trace(graph, scene_id, global_seed)
    trace_rel = os.path.join(scene_rel, "trace.json")
    _write(trace_rel, trace_to_json(trace).encode("utf-8"))
    files["trace"] = trace_rel

    renders: dict[str, np.ndarray] = {}
    corrupt_files: dict[str, str] = {}
    for name in order:
        source = graph.render_source(name)
        if source == RENDER_FROM_PARENT:
            input_u8 = renders[graph.parents(name)[0]]
        else:
            input_u8 = clean_u8
        out = apply(
            graph.node(name).operator_id,
            imgio.to_float(input_u8),
            trace.values[name],
            noise_seed=mix_seed(global_seed, scene_id, name, STREAM_OP_NOISE),
        )
        out_u8 = imgio.to_uint8(out)
        renders[name] = out_u8
        rel = os.path.join(scene_rel, "corrupt", f"{name}.png")
        _write(rel, imgio.encode_image_png(out_u8))
        corrupt_files[name] = rel
    files["corrupt"] = corrupt_files

    return {
        "scene_id": scene_id,
        "regime_tag": regime_tag,
        "files": files,
        "hashes": hashes,
    }


def _mix_longtail_ids(
    scene_ids: list[int], node_order: list[str], p_corr: dict[str, float], seed: int
) -> list[tuple[int, str]]:
    """Pick one variant (a corruption node or "clean") per scene.

    Per-scene uniforms come from the avalanche mix of (seed, scene_id) on the
    long-tail stream, so picks are independent of ordering and worker count.
    """
    unknown = set(p_corr) - set(node_order)
    if unknown:
        raise UnknownNodeError(f"p_corr references unknown nodes: {sorted(unknown)}")
    probs = [(name, float(p_corr.get(name, 0.0))) for name in node_order]
    if any(p < 0 for _, p in probs):
        raise ProbabilityError("p_corr probabilities must be nonnegative")
    total = sum(p for _, p in probs)
    if total > 1.0 + 1e-12:
        raise ProbabilityError(f"p_corr probabilities sum to {total}, which exceeds 1")
    bounds = []
    acc = 0.0
    for name, p in probs:
        acc += p
        bounds.append((name, acc))
    if bounds and abs(total - 1.0) <= 1e-12:
        # Probabilities that sum to one leave no clean mass; make the final
        # bound exact so float accumulation cannot leak a clean pick.
        name, _ = bounds[-1]
        bounds[-1] = (name, 1.0)
    ids = np.asarray(scene_ids, dtype=np.uint64)
    seeds = mix_seed_array(seed, ids, STREAM_LONGTAIL)
    u = (seeds >> np.uint64(11)).astype(np.float64) * 2.0**-53
    picks: list[tuple[int, str]] = []
    for sid, uval in zip(scene_ids, u):
        choice = "clean"
        for name, bound in bounds:
            if uval < bound:
                choice = name
                break
        picks.append((int(sid), choice))
    return picks


def mix_longtail(
    manifest: "DatasetManifest", p_corr: dict[str, float], seed: int
) -> list[tuple[int, str]]:
    """Long-tail training listing for an existing dataset.

    Each scene is assigned corruption i with probability p_corr[i] and
    "clean" with the remaining mass. Returns (scene_id, variant) pairs in
    scene order.
    """
    scene_ids = [record["scene_id"] for record in manifest.scenes]
    return _mix_longtail_ids(scene_ids, manifest.node_order, p_corr, seed)


def generate_dataset(
    doc: SpecDocument,
    source: SceneConfig | str,
    out_dir: str,
    n_scenes: int | None = None,
    global_seed: int = 0,
    regime: RegimeConfig | str = REGIME_OOD_IID,
    workers: int | None = None,
) -> "DatasetManifest":
    """Generate a complete corruption dataset under out_dir.

    source is either a SceneConfig (scenes are synthesized) or a directory
    of <id>/clean.png + <id>/masks.png pairs. The manifest is written last;
    on failure a directory this call created is removed, so a dataset
    without a manifest never survives.
    """
    workers = resolve_workers(workers)
    regime_cfg = RegimeConfig(regime) if isinstance(regime, str) else regime
    graph = doc.graph
    order = topological_order(graph)

    if isinstance(source, SceneConfig):
        if n_scenes is None or n_scenes < 1:
            raise ConfigError("n_scenes must be a positive count for synthesized scenes")
        jobs_src = [("synth", source, sid) for sid in range(n_scenes)]
    else:
        available = _list_external_scenes(str(source))
        if n_scenes is not None:
            if n_scenes > len(available):
                raise SceneSourceError(
                    f"requested {n_scenes} scenes but only {len(available)} available"
                )
            available = available[:n_scenes]
        jobs_src = [("external", path, sid) for sid, path in available]

    scene_ids = [sid for _, _, sid in jobs_src]
    picks: dict[int, str] = {}
    if regime_cfg.regime == REGIME_LONGTAIL:
        picks = dict(_mix_longtail_ids(scene_ids, order, regime_cfg.p_corr, global_seed))

    created_root = not os.path.exists(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    try:
        spec_text = serialize_spec(doc)
        spec_bytes = spec_text.encode("utf-8")
        with open(os.path.join(out_dir, SPEC_FILE_NAME), "wb") as fh:
            fh.write(spec_bytes)

        jobs = [
            (
                doc,
                kind,
                payload,
                sid,
                global_seed,
                out_dir,
                picks.get(sid, regime_cfg.regime) if picks else regime_cfg.regime,
            )
            for kind, payload, sid in jobs_src
        ]
        if workers == 1:
            records = [_scene_job(job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(_scene_job, jobs, chunksize=4))
        records.sort(key=lambda r: r["scene_id"])

        if regime_cfg.regime == REGIME_LONGTAIL:
            lines = ["scene_id,variant"]
            lines += [f"{sid},{picks[sid]}" for sid in scene_ids]
            with open(os.path.join(out_dir, LONGTAIL_FILE_NAME), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(lines) + "\n")

        first_clean = imgio.read_image_png(os.path.join(out_dir, records[0]["files"]["clean"]))
        manifest_data = {
            "format": MANIFEST_FORMAT,
            "generator": "causalcorrupt",
            "scm_fingerprint": _sha256(spec_bytes),
            "spec_file": SPEC_FILE_NAME,
            "global_seed": global_seed,
            "n_scenes": len(records),
            "regime": regime_cfg.regime,
            "p_corr": regime_cfg.p_corr,
            "image_size": [int(first_clean.shape[0]), int(first_clean.shape[1])],
            "node_order": order,
            "nodes": [
                {
                    "name": name,
                    "op": graph.node(name).operator_id,
                    "render_from": graph.render_source(name),
                    "parent": (graph.parents(name) or [None])[0]
                    if graph.render_source(name) == RENDER_FROM_PARENT
                    else None,
                    "params": list(graph.node(name).params),
                }
                for name in order
            ],
            "scenes": records,
        }
        _write_manifest(out_dir, manifest_data)
    except Exception:
        if created_root:
            shutil.rmtree(out_dir, ignore_errors=True)
        raise
    return DatasetManifest(root=out_dir, data=manifest_data)


def _write_manifest(out_dir: str, data: dict) -> None:
    tmp = os.path.join(out_dir, MANIFEST_NAME + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, MANIFEST_NAME))


@dataclass
class DatasetManifest:
    root: str
    data: dict

    @classmethod
    def load(cls, root: str) -> "DatasetManifest":
        path = os.path.join(root, MANIFEST_NAME)
        if not os.path.isfile(path):
            raise DatasetLayoutError(f"{root!r} has no {MANIFEST_NAME}; not a completed dataset")
        with open(path, "r", encoding="utf-8") as fh:
            return cls(root=root, data=json.load(fh))

    @property
    def node_order(self) -> list[str]:
        return list(self.data["node_order"])

    @property
    def scenes(self) -> list[dict]:
        return list(self.data["scenes"])

    def path(self, rel: str) -> str:
        return os.path.join(self.root, rel)

    def node_info(self, name: str) -> dict:
        for entry in self.data["nodes"]:
            if entry["name"] == name:
                return entry
        raise UnknownNodeError(f"manifest has no node {name!r}")


@dataclass(frozen=True)
class VerifyReport:
    files_checked: int
    renders_checked: int
    hash_mismatches: tuple[str, ...]
    render_mismatches: tuple[str, ...]
    missing: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not (self.hash_mismatches or self.render_mismatches or self.missing)


def verify_dataset(root: str, re_render: bool = True) -> VerifyReport:
    """Check manifest hashes and, optionally, re-derive every node render.

    The re-render path recomputes each node image from the stored bytes of
    its declared input plus the stored trace parameters and compares the
    resulting PNG bytes with the stored file.
    """
    manifest = DatasetManifest.load(root)
    hash_bad: list[str] = []
    render_bad: list[str] = []
    missing: list[str] = []
    files_checked = 0
    renders_checked = 0
    for record in manifest.scenes:
        for rel, expected in record["hashes"].items():
            path = manifest.path(rel)
            if not os.path.isfile(path):
                missing.append(rel)
                continue
            with open(path, "rb") as fh:
                data = fh.read()
            files_checked += 1
            if _sha256(data) != expected:
                hash_bad.append(rel)
        if not re_render:
            continue
        with open(manifest.path(record["files"]["trace"]), "r", encoding="utf-8") as fh:
            trace = json.load(fh)
        clean_u8 = imgio.read_image_png(manifest.path(record["files"]["clean"]))
        seed = manifest.data["global_seed"]
        scene_id = record["scene_id"]
        for name in manifest.node_order:
            info = manifest.node_info(name)
            rel = record["files"]["corrupt"][name]
            if info["render_from"] == RENDER_FROM_PARENT:
                parent_rel = record["files"]["corrupt"][info["parent"]]
                input_u8 = imgio.read_image_png(manifest.path(parent_rel))
            else:
                input_u8 = clean_u8
            out = apply(
                info["op"],
                imgio.to_float(input_u8),
                trace["nodes"][name]["params"],
                noise_seed=mix_seed(seed, scene_id, name, STREAM_OP_NOISE),
            )
            renders_checked += 1
            expected_bytes = imgio.encode_image_png(imgio.to_uint8(out))
            with open(manifest.path(rel), "rb") as fh:
                if fh.read() != expected_bytes:
                    render_bad.append(rel)
    return VerifyReport(
        files_checked=files_checked,
        renders_checked=renders_checked,
        hash_mismatches=tuple(hash_bad),
        render_mismatches=tuple(render_bad),
        missing=tuple(missing),
    )


def write_scenes(config: SceneConfig, n_scenes: int, global_seed: int, out_dir: str) -> list[int]:
    """Write synthesized scenes in the external-ingestion layout.

    Each scene gets <id>/clean.png, <id>/masks.png, and <id>/meta.json.
    """
    if n_scenes < 1:
        raise ConfigError("n_scenes must be positive")
    created_root = not os.path.exists(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    try:
        for scene_id in range(n_scenes):
            scene = generate_scene(config, scene_id, global_seed)
            scene_dir = os.path.join(out_dir, scene_dir_name(scene_id))
            os.makedirs(scene_dir, exist_ok=True)
            imgio.write_image_png(os.path.join(scene_dir, "clean.png"), imgio.to_uint8(scene.image))
            imgio.write_mask_png(os.path.join(scene_dir, "masks.png"), scene.masks)
            with open(os.path.join(scene_dir, "meta.json"), "w", encoding="utf-8", newline="\n") as fh:
                json.dump(scene_metadata(scene), fh, indent=2)
                fh.write("\n")
    except Exception:
        if created_root:
            shutil.rmtree(out_dir, ignore_errors=True)
        raise
    return list(range(n_scenes))
