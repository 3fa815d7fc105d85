"""Command-line interface.

Six subcommands cover the full workflow: validate, sample, synth, corrupt,
eval, curves. Exit codes: 0 success, 1 runtime or input error, 2 usage
error. Every randomized subcommand prints the effective seed it used.
All heavy lifting stays in the library; this layer parses flags, resolves
paths, and prints summaries.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from .dataset import (
    REGIME_OOD_IID,
    REGIMES,
    RegimeConfig,
    generate_dataset,
    trace_to_dict,
    verify_dataset,
    write_scenes,
)
from .dsl import SHIPPED_SPECS, SpecDocument, load_spec, parse_spec, shipped_spec_text, validate_spec
from .errors import CausalCorruptError, ConfigError
from .evaluate import (
    curves_from_report,
    evaluate_predictions,
    load_report,
    write_curves_csv,
    write_report,
)
from .scene import SceneConfig
from .scm import sample_trace, topological_order
from .svgplot import render_line_chart, write_svg


@dataclass(frozen=True)
class CliInvocation:
    """One parsed invocation: subcommand name plus its flag values."""

    subcommand: str
    flags: dict


def _load_scm(ref: str) -> SpecDocument:
    """Resolve --scm as a file path or a shipped model name."""
    if os.path.isfile(ref):
        return load_spec(ref)
    if ref in SHIPPED_SPECS:
        return parse_spec(shipped_spec_text(ref))
    raise ConfigError(
        f"--scm {ref!r} is neither a file nor a shipped model "
        f"(shipped: {', '.join(SHIPPED_SPECS)})"
    )


def _parse_p_corr(items: list[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in items:
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ConfigError(f"--p-corr entries must be node=prob, got {part!r}")
            name, _, value = part.partition("=")
            try:
                out[name.strip()] = float(value)
            except ValueError:
                raise ConfigError(f"--p-corr probability {value!r} is not a number") from None
    return out


def _scene_config(path: str | None) -> SceneConfig:
    if path is None:
        return SceneConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return SceneConfig.from_json(fh.read())


def _cmd_validate(flags: dict) -> int:
    doc = _load_scm(flags["scm"])
    diags = validate_spec(doc)
    print("topological order: " + " ".join(topological_order(doc.graph)))
    for diag in diags:
        print(str(diag))
    print(f"OK: {len(doc.graph.nodes)} nodes, {len(diags)} warnings")
    return 0


def _cmd_sample(flags: dict) -> int:
    doc = _load_scm(flags["scm"])
    seed = flags["seed"]
    print(f"effective seed: {seed}")
    offset = flags["scene_offset"]
    lines = []
    for scene_id in range(offset, offset + flags["n"]):
        trace = sample_trace(doc.graph, scene_id, seed)
        lines.append(json.dumps(trace_to_dict(trace), separators=(",", ":")))
    text = "\n".join(lines) + "\n"
    if flags["out"] == "-":
        sys.stdout.write(text)
    else:
        with open(flags["out"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {flags['n']} traces to {flags['out']}")
    return 0


def _cmd_synth(flags: dict) -> int:
    seed = flags["seed"]
    print(f"effective seed: {seed}")
    config = _scene_config(flags["config"])
    write_scenes(config, flags["n"], seed, flags["out"])
    print(f"wrote {flags['n']} scenes to {flags['out']}")
    return 0


def _cmd_corrupt(flags: dict) -> int:
    doc = _load_scm(flags["scm"])
    seed = flags["seed"]
    print(f"effective seed: {seed}")
    if flags["scenes"] is not None:
        source = flags["scenes"]
    else:
        if flags["n"] is None:
            raise ConfigError("corrupt needs --scenes DIR or --n N to synthesize scenes")
        source = _scene_config(flags["config"])
    regime = RegimeConfig(
        regime=flags["regime"],
        p_corr=_parse_p_corr(flags["p_corr"]) if flags["p_corr"] else None,
    )
    manifest = generate_dataset(
        doc,
        source,
        out_dir=flags["out"],
        n_scenes=flags["n"],
        global_seed=seed,
        regime=regime,
        workers=flags["workers"],
    )
    print(f"wrote {manifest.data['n_scenes']} scenes to {flags['out']}")
    if flags["verify"]:
        report = verify_dataset(flags["out"], re_render=True)
        status = "ok" if report.ok else "FAILED"
        print(
            f"verify: {status} ({report.files_checked} files, "
            f"{report.renders_checked} renders checked)"
        )
        if not report.ok:
            return 1
    return 0


def _cmd_eval(flags: dict) -> int:
    seed = flags["seed"]
    print(f"effective seed: {seed}")
    report = evaluate_predictions(
        flags["dataset"],
        flags["pred"],
        seed=seed,
        n_boot=flags["n_boot"],
        n_bins=flags["bins"],
    )
    json_path, csv_path = write_report(report, flags["out"])
    print(f"selected prediction set: {report['selected_prediction_set']}")
    for variant, entry in report["per_variant"].items():
        bits = []
        if entry["miou_mean"] is not None:
            bits.append(
                f"mIoU {entry['miou_mean']:.4f} ± {entry['miou_ci_half_width']:.4f} "
                f"(n={entry['n_miou']})"
            )
        if entry["mse_mean"] is not None:
            bits.append(
                f"MSE {entry['mse_mean']:.3f} ± {entry['mse_ci_half_width']:.3f} "
                f"(n={entry['n_mse']})"
            )
        if not bits:
            bits.append("no predictions")
        print(f"  {variant}: " + ", ".join(bits))
    print(f"wrote {json_path} and {csv_path}")
    return 0


def _cmd_curves(flags: dict) -> int:
    report = load_report(flags["report"])
    metric = flags["metric"]
    curves = curves_from_report(report, n_bins=flags["bins"], metric=metric)
    csv_path = write_curves_csv(curves, flags["out"] + ".csv")
    series = {
        name: [(b.center, b.mean) for b in stats] for name, stats in curves.items()
    }
    svg = render_line_chart(
        series,
        title=f"{metric} vs normalized severity",
        x_label="normalized severity",
        y_label=metric,
    )
    svg_path = write_svg(svg, flags["out"] + ".svg")
    print(f"wrote {csv_path} and {svg_path}")
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "sample": _cmd_sample,
    "synth": _cmd_synth,
    "corrupt": _cmd_corrupt,
    "eval": _cmd_eval,
    "curves": _cmd_curves,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalcorrupt",
        description="Corruption-model datasets: validate, sample, synth, corrupt, eval, curves.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", help="parse a model file and report diagnostics")
    p.add_argument("--scm", required=True, help="model file or shipped model name")

    p = sub.add_parser("sample", help="sample parameter traces to JSONL")
    p.add_argument("--scm", required=True)
    p.add_argument("--n", type=int, required=True, help="number of traces")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene-offset", type=int, default=0, help="first scene id")
    p.add_argument("--out", required=True, help="output path, or - for stdout")

    p = sub.add_parser("synth", help="synthesize clean scenes with masks")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="scene config JSON file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("corrupt", help="generate a corruption dataset")
    p.add_argument("--scm", required=True)
    p.add_argument("--scenes", default=None, help="directory of <id>/clean.png + masks.png")
    p.add_argument("--n", type=int, default=None, help="scene count (synthesizes when no --scenes)")
    p.add_argument("--config", default=None, help="scene config JSON (with --n)")
    p.add_argument("--regime", choices=REGIMES, default=REGIME_OOD_IID)
    p.add_argument("--p-corr", action="append", default=None, help="node=prob[,node=prob...] (longtail)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--verify", action="store_true", help="verify hashes and re-renders after writing")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score predictions against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pred", action="append", required=True, help="prediction directory (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--bins", type=int, default=10, help="severity bins embedded in the report")
    p.add_argument("--out", required=True, help="report path prefix (.json and .csv)")

    p = sub.add_parser("curves", help="severity curves from a report")
    p.add_argument("--report", required=True, help="report JSON from eval")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--metric", choices=("miou", "mse"), default="miou")
    p.add_argument("--out", required=True, help="output path prefix (.csv and .svg)")

    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse argv and execute one subcommand; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = vars(args).copy()
    invocation = CliInvocation(subcommand=flags.pop("subcommand"), flags=flags)
    try:
        return _HANDLERS[invocation.subcommand](invocation.flags)
    except (CausalCorruptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
