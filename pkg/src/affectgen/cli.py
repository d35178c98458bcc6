"""Command-line entry point.

Subcommands:

* ``generate``  optimize one prompt, write PNG + JSON sidecar (+ loss plot)
* ``dataset``   run the full 32-prompt grid, write a manifest
* ``palette``   color-quantization profiles, aggregates and correlations
* ``survey``    confusion matrix, per-affect/per-genre tables, axis stats

Reports are CSV plus aligned plain-text tables, with matplotlib figures
rendered alongside unless ``--no-figures`` is given. Exit codes are a
stable contract: 0 success, 1 runtime failure, 2 usage or validation
error. Defaults can come from a ``key = value`` config file (see
``--config``); explicit flags win. The ``AFFECTGEN_OUT`` environment
variable sets the default output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import figures, palette, survey
from .codebook import ImageBuffer, load_codebook, toy_codebook
from .optimizer import (
    AdamWConfig,
    BatchGenerationError,
    GenerationError,
    batch_generate,
    run_generation,
)
from .prompts import (
    PromptSpec,
    affect_by_name,
    enumerate_dataset,
    genre_by_name,
)
from .scorer import get_backend
from .survey import SurveyFormatError

__all__ = ["main"]

MODE_ALIASES = {"soft": "soft", "st": "straight_through", "straight_through": "straight_through"}


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _parse_grid(value: str):
    m = re.fullmatch(r"(\d+)(?:x(\d+))?", value.strip().lower())
    if not m:
        raise argparse.ArgumentTypeError(f"grid must look like '16x16', got {value!r}")
    rows = int(m.group(1))
    cols = int(m.group(2)) if m.group(2) else rows
    return rows, cols


def load_config_file(path) -> dict:
    """Parse the 'key = value' config format ('#' starts a comment)."""
    opts = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            k, v = line.split("=", 1)
            opts[k.strip().replace("-", "_")] = v.strip()
    return opts


def _add_generation_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p.add_argument("--steps", type=int, default=300, help="optimizer steps")
    p.add_argument("--lr", type=float, default=0.05, help="AdamW learning rate")
    p.add_argument("--wd", type=float, default=0.0, help="AdamW weight decay")
    p.add_argument("--grid", type=_parse_grid, default=(16, 16), metavar="RxC",
                   help="logit grid size, e.g. 16x16")
    p.add_argument("--codes", type=int, default=1024, help="toy codebook size")
    p.add_argument("--code-dim", type=int, default=16, help="toy code dimensionality")
    p.add_argument("--patch", type=int, default=16, help="patch size in pixels")
    p.add_argument("--std", type=float, default=1.0, help="logit init std")
    p.add_argument("--mode", choices=sorted(MODE_ALIASES), default="soft")
    p.add_argument("--backend", default="toy", help="scorer backend name")
    p.add_argument("--codebook", default=None, metavar="PATH",
                   help="load a serialized codebook instead of the toy spec")
    p.add_argument("--codebook-seed", type=int, default=0, help="toy codebook seed")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, metavar="DIR",
                   help="output directory (default: $AFFECTGEN_OUT or ./out)")
    p.add_argument("--config", default=None, metavar="FILE",
                   help="key = value config file supplying flag defaults")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib output")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="affectgen",
        description="Affect-driven image generation and its analysis reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}

    g = sub.add_parser("generate", help="optimize a single prompt")
    g.add_argument("--prompt", required=True, help="text prompt to optimize against")
    _add_generation_options(g)
    _add_common(g)
    g.set_defaults(func=cmd_generate)
    commands["generate"] = g

    d = sub.add_parser("dataset", help="generate the full 32-prompt grid")
    _add_generation_options(d)
    _add_common(d)
    d.add_argument("--workers", type=int, default=1, help="parallel runs")
    d.set_defaults(func=cmd_dataset)
    commands["dataset"] = d

    p = sub.add_parser("palette", help="palette profiles and correlations")
    p.add_argument("--images", nargs="*", default=None, metavar="PNG")
    p.add_argument("--manifest", default=None, metavar="JSON")
    p.add_argument("--ratings", default=None, metavar="CSV",
                   help="survey CSV; adds feature-rating correlations")
    _add_common(p)
    p.set_defaults(func=cmd_palette)
    commands["palette"] = p

    s = sub.add_parser("survey", help="survey tables and statistics")
    s.add_argument("--csv", required=True, help="responses CSV")
    s.add_argument("--manifest", default=None, metavar="JSON")
    s.add_argument("--include-other-as-incorrect", action="store_true",
                   help="count freeform answers as misses in the axis stats")
    s.add_argument("--ci-basis", choices=("ratings", "image_means"), default="ratings")
    _add_common(s)
    s.set_defaults(func=cmd_survey)
    commands["survey"] = s

    return parser, commands


def _outdir(args) -> Path:
    out = args.out or os.environ.get("AFFECTGEN_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _build_codebook(args):
    if args.codebook:
        return load_codebook(args.codebook)
    return toy_codebook(
        num_codes=args.codes,
        code_dim=args.code_dim,
        patch_size=args.patch,
        seed=args.codebook_seed,
    )


def _opt_config(args) -> AdamWConfig:
    return AdamWConfig(learning_rate=args.lr, weight_decay=args.wd, steps=args.steps)


def _write_result(result, outdir: Path, stem: str) -> tuple[Path, Path]:
    png = outdir / f"{stem}.png"
    sidecar = outdir / f"{stem}.json"
    result.final_image.save_png(png)
    sidecar.write_text(result.sidecar_json() + "\n", encoding="utf-8")
    return png, sidecar


def cmd_generate(args) -> int:
    cb = _build_codebook(args)
    backend = get_backend(args.backend)
    rows, cols = args.grid
    result = run_generation(
        args.prompt, cb, backend, _opt_config(args),
        grid_rows=rows, grid_cols=cols, seed=args.seed,
        mode=MODE_ALIASES[args.mode], init_std=args.std,
    )
    outdir = _outdir(args)
    stem = _slug(args.prompt) or "image"
    png, sidecar = _write_result(result, outdir, stem)
    if not args.no_figures:
        figures.plot_loss_trajectory(
            result.loss_trajectory, outdir / f"{stem}_loss.png", title=args.prompt
        )
    print(f"wrote {png} and {sidecar}")
    print(
        f"loss: initial {result.loss_trajectory[0]:.6f} -> "
        f"final soft {result.loss_trajectory[-1]:.6f}, "
        f"final hard {result.final_hard_loss:.6f}"
    )
    return 0


def cmd_dataset(args) -> int:
    cb = _build_codebook(args)
    backend = get_backend(args.backend)
    rows, cols = args.grid
    specs = enumerate_dataset()
    outdir = _outdir(args)
    failures = {}
    try:
        results = batch_generate(
            specs, cb, backend, _opt_config(args),
            grid_rows=rows, grid_cols=cols, base_seed=args.seed,
            mode=MODE_ALIASES[args.mode], workers=args.workers,
        )
        by_index = {s.index: r for s, r in zip(specs, results)}
    except BatchGenerationError as exc:
        by_index = exc.results
        failures = {i: str(e) for i, _, e in exc.failures}

    entries = []
    for spec in specs:
        stem = f"{spec.index:02d}_{spec.affect.name}_{_slug(spec.genre.name)}"
        entry = {
            "index": spec.index,
            "affect": spec.affect.name,
            "genre": spec.genre.name,
            "prompt": spec.text,
        }
        if spec.index in by_index:
            png, sidecar = _write_result(by_index[spec.index], outdir, stem)
            entry.update(
                status="ok", png=png.name, sidecar=sidecar.name, sha256_png=_sha256(png)
            )
        else:
            entry.update(status="error", error=failures.get(spec.index, "unknown"))
        entries.append(entry)
    manifest = {
        "base_seed": args.seed,
        "mode": MODE_ALIASES[args.mode],
        "grid": list(args.grid),
        "steps": args.steps,
        "learning_rate": args.lr,
        "weight_decay": args.wd,
        "init_std": args.std,
        "backend": args.backend,
        "codebook": {
            "num_codes": cb.num_codes,
            "code_dim": cb.code_dim,
            "patch_size": cb.patch_size,
            "decode_seed": cb.decode_seed,
        },
        "images": entries,
    }
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    n_ok = sum(1 for e in entries if e["status"] == "ok")
    print(f"wrote {n_ok}/{len(entries)} images and {manifest_path}")
    if failures:
        for i, msg in sorted(failures.items()):
            print(f"affectgen: run {i} failed: {msg}", file=sys.stderr)
        return 1
    return 0


def _prompts_from_manifest(path) -> tuple[list[PromptSpec], dict]:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    specs = []
    for e in manifest["images"]:
        specs.append(
            PromptSpec(
                affect=affect_by_name(e["affect"]),
                genre=genre_by_name(e["genre"]),
                text=e["prompt"],
                index=int(e["index"]),
            )
        )
    return specs, manifest


def cmd_palette(args) -> int:
    outdir = _outdir(args)
    profiles = []
    specs_by_id = {}
    if args.manifest:
        specs, manifest = _prompts_from_manifest(args.manifest)
        spec_of = {s.index: s for s in specs}
        base = Path(args.manifest).parent
        for e in manifest["images"]:
            if e.get("status") != "ok":
                continue
            img_path = base / e["png"]
            try:
                img = ImageBuffer.from_png(img_path)
            except OSError as exc:
                raise GenerationError(f"unreadable image {img_path}: {exc}") from exc
            image_id = str(e["index"])
            profiles.append(palette.palette_profile(img, image_id=image_id))
            specs_by_id[image_id] = spec_of[int(e["index"])]
    elif args.images:
        for name in args.images:
            try:
                img = ImageBuffer.from_png(name)
            except OSError as exc:
                raise GenerationError(f"unreadable image {name}: {exc}") from exc
            profiles.append(palette.palette_profile(img, image_id=Path(name).stem))
    else:
        raise ValueError("palette needs --images or --manifest")
    if not profiles:
        raise ValueError("no readable images given")

    (outdir / "palette_profiles.csv").write_text(
        palette.profiles_to_csv(profiles), encoding="utf-8"
    )
    written = [outdir / "palette_profiles.csv"]

    if specs_by_id:
        for grouping, key in (("affect", lambda s: s.affect.name), ("genre", lambda s: s.genre.name)):
            group_of = {i: key(s) for i, s in specs_by_id.items()}
            aggs = palette.aggregate_profiles(profiles, group_of)
            path = outdir / f"palette_by_{grouping}.csv"
            path.write_text(palette.aggregates_to_csv(aggs), encoding="utf-8")
            written.append(path)
            if not args.no_figures:
                figures.plot_palette_aggregates(aggs, outdir / f"palette_by_{grouping}.png", grouping)

    if args.ratings:
        if not specs_by_id:
            raise ValueError("--ratings needs --manifest to map images to indices")
        ds = survey.load_survey(args.ratings, prompts=list(specs_by_id.values()))
        by_image = ds.by_image()
        rows = []
        ids = [p.image_id for p in profiles if int(p.image_id) in by_image]
        feats = {p.image_id: palette.derived_features(p.ratios) for p in profiles}
        for feature in ("monochrome", "warm", "blue", "green"):
            xs = [feats[i][feature] for i in ids]
            for metric in ("quality", "novelty"):
                ys = [float(np.mean([getattr(r, metric) for r in by_image[int(i)]])) for i in ids]
                label = f"{feature}_vs_{metric}"
                try:
                    rows.append(palette.correlate_feature_ratings(xs, ys, feature=label))
                except palette.UndefinedCorrelationError:
                    # Zero variance on one side (e.g. a hue absent from
                    # every image): report the pair as undefined.
                    rows.append(palette.CorrelationReport(label, float("nan"), len(xs), float("nan")))
        lines = ["feature,r,n,p_value,significant_at_0.05"]
        for rep in rows:
            significant = bool(rep.p_value < 0.05) if np.isfinite(rep.p_value) else False
            lines.append(f"{rep.feature},{rep.r:.6f},{rep.n},{rep.p_value:.6g},{significant}")
        path = outdir / "palette_correlations.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def cmd_survey(args) -> int:
    if args.manifest:
        specs, _ = _prompts_from_manifest(args.manifest)
    else:
        specs = enumerate_dataset()
    ds = survey.load_survey(args.csv, prompts=specs)
    outdir = _outdir(args)

    cm = survey.confusion_matrix(ds)
    by_affect = survey.per_group_summary(ds, "affect", ci_basis=args.ci_basis)
    by_genre = survey.per_group_summary(ds, "genre", ci_basis=args.ci_basis)
    va = survey.valence_arousal_summary(
        ds, include_other_as_incorrect=args.include_other_as_incorrect
    )
    majority = survey.images_majority_matched(ds)

    (outdir / "confusion.csv").write_text(survey.confusion_to_csv(cm), encoding="utf-8")
    (outdir / "per_affect.csv").write_text(survey.summaries_to_csv(by_affect), encoding="utf-8")
    (outdir / "per_genre.csv").write_text(survey.summaries_to_csv(by_genre), encoding="utf-8")
    stats = {
        "overall_accuracy_pct": survey.overall_accuracy(ds),
        "valence_accuracy_pct": va.valence,
        "arousal_accuracy_pct": va.arousal,
        "include_other_as_incorrect": va.include_other_as_incorrect,
        "images_majority_matched_pct": majority,
        "n_responses": len(ds.responses),
        "n_participants": len({r.participant_id for r in ds.responses}),
    }
    (outdir / "survey_stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    text = []
    text.append("Confusion matrix (intended affect vs labelled affect, % of responses)")
    text.append(survey.format_confusion_text(cm))
    text.append("Per affective prompt")
    text.append(survey.format_summaries_text(by_affect, "Affective prompt"))
    text.append("Per painting type")
    text.append(survey.format_summaries_text(by_genre, "Genre prompt"))
    text.append(
        f"valence accuracy: negative {va.valence['negative']:.1f}%, "
        f"positive {va.valence['positive']:.1f}%, overall {va.valence['overall']:.1f}%"
    )
    text.append(
        f"arousal accuracy: low {va.arousal['low']:.1f}%, "
        f"high {va.arousal['high']:.1f}%, overall {va.arousal['overall']:.1f}%"
    )
    text.append(f"images majority-matched: {majority:.1f}%")
    report = "\n".join(text) + "\n"
    (outdir / "survey_tables.txt").write_text(report, encoding="utf-8")
    print(report, end="")

    if not args.no_figures:
        figures.plot_confusion_matrix(cm, outdir / "confusion.png")
        figures.plot_group_ratings(by_affect, outdir / "ratings_by_affect.png", "affect")
        figures.plot_group_ratings(by_genre, outdir / "ratings_by_genre.png", "genre")
    return 0


def main(argv=None) -> int:
    parser, commands = build_parser()
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        try:
            overrides = load_config_file(args.config)
        except (OSError, ValueError) as exc:
            print(f"affectgen: error: {exc}", file=sys.stderr)
            return 2
        known = {a.dest for a in commands[args.command]._actions}
        unknown = set(overrides) - known
        if unknown:
            print(
                f"affectgen: error: unknown config keys: {', '.join(sorted(unknown))}",
                file=sys.stderr,
            )
            return 2
        commands[args.command].set_defaults(**overrides)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SurveyFormatError, ValueError, KeyError) as exc:
        print(f"affectgen: error: {exc}", file=sys.stderr)
        return 2
    except (GenerationError, BatchGenerationError, OSError) as exc:
        print(f"affectgen: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
