"""Command-line entry point.

Subcommands: synth, prepare, crossval, train, predict. Every command that
writes outputs also writes a config echo JSON capturing the exact settings,
so any reported number can be reproduced. Exit codes: 0 success, 2 usage,
3 invalid data, 4 I/O failure.
"""

from __future__ import annotations

import functools
import json
import sys
from collections import defaultdict
from pathlib import Path

import click

from . import __version__
from .data import Label, load_clip, load_manifest, save_clip, save_manifest, DatasetManifest, ManifestEntry
from .errors import ParseError, ValidationError
from .evaluation import cross_validate, emit_report
from .features import effective_dim
from .model import load_model, param_count, predict as predict_op, resolve_config, save_model, train as train_op
from .segmentation import cut_clip, load_annotations, plan_spans
from .synth import synth_generate

EXIT_VALIDATION = 3
EXIT_IO = 4


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ParseError, ValidationError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _write_echo(path: Path, payload: dict) -> None:
    payload = {"flapnet_version": __version__, **payload}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


seed_option = click.option(
    "--seed", type=int, default=0, envvar="FLAP_SEED", show_default=True,
    help="Master seed (FLAP_SEED env var is the fallback).",
)


@click.group()
@click.version_option(version=__version__, prog_name="flapnet")
def main() -> None:
    """Hand-flapping detection from hand-landmark time series."""


@main.command()
@click.option("--n-per-class", "n_per_class", type=int, required=True, help="Clips per class.")
@seed_option
@click.option("--frames", type=int, default=90, show_default=True)
@click.option("--fps", type=float, default=30.0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@_guarded
def synth(n_per_class: int, seed: int, frames: int, fps: float, out_dir: Path) -> None:
    """Generate a balanced synthetic dataset with a manifest."""
    if n_per_class < 5:
        raise ValidationError(f"--n-per-class must be >= 5 (k-fold minimum), got {n_per_class}")
    clips_dir = out_dir / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for label_i, label in enumerate((Label.FLAP, Label.CONTROL)):
        for i in range(n_per_class):
            clip = synth_generate(label, frames, fps, seed + 2 * i + label_i * 2 * n_per_class)
            path = clips_dir / f"{clip.clip_id}.jsonl"
            save_clip(clip, path)
            entries.append(ManifestEntry(clip.clip_id, label, path))
    manifest = DatasetManifest(tuple(entries))
    save_manifest(manifest, out_dir / "manifest.csv")
    _write_echo(
        out_dir / "config.json",
        {"command": "synth", "n_per_class": n_per_class, "seed": seed, "frames": frames, "fps": fps},
    )
    counts = manifest.counts()
    click.echo(f"wrote {len(manifest)} clips: flap={counts[Label.FLAP]} control={counts[Label.CONTROL]}")


@main.command()
@click.option("--annotations", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--landmarks", "landmarks_dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
@click.option("--exclude", "exclude_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@_guarded
def prepare(annotations: Path, landmarks_dir: Path, exclude_file: Path | None, out_dir: Path) -> None:
    """Cut positive and control clips from annotated landmark sequences.

    Every <video_id>.jsonl in the landmarks directory is processed; videos
    without annotations contribute control clips only.
    """
    notes = load_annotations(annotations)
    by_video = defaultdict(list)
    for a in notes:
        by_video[a.video_id].append(a)
    excluded = set()
    if exclude_file is not None:
        excluded = {line.strip() for line in exclude_file.read_text().splitlines() if line.strip()}

    landmark_files = {p.stem: p for p in sorted(landmarks_dir.glob("*.jsonl"))}
    video_ids = sorted((set(landmark_files) | set(by_video)) - excluded)

    clips_dir = out_dir / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    skipped = []
    processed = 0
    for video_id in video_ids:
        if video_id not in landmark_files:
            skipped.append((video_id, "no landmark file"))
            continue
        source = load_clip(landmark_files[video_id], clip_id=video_id, source_video_id=video_id)
        try:
            plan = plan_spans(by_video.get(video_id, []), source.end_s)
        except ValidationError as exc:
            skipped.append((video_id, str(exc)))
            continue
        for span, label in [(s, Label.FLAP) for s in plan.positives] + [
            (s, Label.CONTROL) for s in plan.controls
        ]:
            clip = cut_clip(source, span, label)
            path = clips_dir / f"{clip.clip_id}.jsonl"
            save_clip(clip, path)
            entries.append(ManifestEntry(clip.clip_id, label, path))
        processed += 1

    if processed == 0:
        for video_id, reason in skipped:
            click.echo(f"skipped {video_id}: {reason}", err=True)
        raise ValidationError("no videos could be processed")

    manifest = DatasetManifest(tuple(entries))
    save_manifest(manifest, out_dir / "manifest.csv")
    if skipped:
        lines = ["video_id,reason"] + [f"{v},{r}" for v, r in skipped]
        (out_dir / "skipped.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_echo(
        out_dir / "config.json",
        {
            "command": "prepare",
            "annotations": str(annotations),
            "landmarks": str(landmarks_dir),
            "excluded": sorted(excluded),
        },
    )
    counts = manifest.counts()
    click.echo(
        f"videos={processed} skipped={len(skipped)} "
        f"clips: flap={counts[Label.FLAP]} control={counts[Label.CONTROL]}"
    )


def _model_options(fn):
    for deco in reversed(
        [
            click.option("--features", type=click.Choice(["all21", "six", "one", "mean"]), default="all21", show_default=True),
            click.option("--augment", is_flag=True, default=False),
            click.option("--interpolate", is_flag=True, default=False),
            click.option("--lr", "learning_rate", type=float, default=None, help="Override the per-representation default."),
            click.option("--hidden", "hidden_units", type=int, default=None, help="Override the per-representation default."),
            click.option("--epochs", "max_epochs", type=int, default=None),
            click.option("--batch", "batch_size", type=int, default=None),
            click.option("--z-slack", "z_slack", type=float, default=0.1, show_default=True),
            seed_option,
        ]
    ):
        fn = deco(fn)
    return fn


def _echo_payload(command: str, config, selection, **extra) -> dict:
    return {
        "command": command,
        "features": selection.kind,
        "landmark": selection.landmark,
        "input_dim": config.input_dim,
        "hidden_units": config.hidden_units,
        "learning_rate": config.learning_rate,
        "dropout_rate": config.dropout_rate,
        "max_epochs": config.max_epochs,
        "patience": config.patience,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "param_count": param_count(config),
        **extra,
    }


@main.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@_model_options
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--runs", type=int, default=10, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True, help="Concurrent fold-training processes.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@_guarded
def crossval(
    manifest: Path,
    features: str,
    augment: bool,
    interpolate: bool,
    learning_rate: float | None,
    hidden_units: int | None,
    max_epochs: int | None,
    batch_size: int | None,
    z_slack: float,
    seed: int,
    folds: int,
    runs: int,
    jobs: int,
    out_dir: Path,
) -> None:
    """Repeated stratified k-fold evaluation; writes summary/runs/ROC CSVs."""
    config, selection = resolve_config(
        features,
        learning_rate=learning_rate,
        hidden_units=hidden_units,
        max_epochs=max_epochs,
        batch_size=batch_size,
        seed=seed,
    )
    dataset = load_manifest(manifest)
    echo = _echo_payload(
        "crossval",
        config,
        selection,
        manifest=str(manifest),
        folds=folds,
        runs=runs,
        jobs=jobs,
        augment=augment,
        interpolate=interpolate,
        z_slack=z_slack,
    )
    report = cross_validate(
        config,
        selection,
        augment,
        dataset,
        k=folds,
        runs=runs,
        seed=seed,
        interpolate=interpolate,
        z_slack=z_slack,
        jobs=jobs,
        config_echo=echo,
    )
    emit_report(report, out_dir)
    for name, (mean, std) in report.summary().items():
        click.echo(f"{name} mean={mean:.4f} std={std:.4f}")


@main.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@_model_options
@click.option("--val-fraction", type=float, default=0.2, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_guarded
def train(
    manifest: Path,
    features: str,
    augment: bool,
    interpolate: bool,
    learning_rate: float | None,
    hidden_units: int | None,
    max_epochs: int | None,
    batch_size: int | None,
    z_slack: float,
    seed: int,
    val_fraction: float,
    out_path: Path,
) -> None:
    """Train one model on a manifest (with a stratified validation split)."""
    from .data import load_dataset
    from .evaluation import _val_split

    config, selection = resolve_config(
        features,
        learning_rate=learning_rate,
        hidden_units=hidden_units,
        max_epochs=max_epochs,
        batch_size=batch_size,
        seed=seed,
    )
    items = load_dataset(load_manifest(manifest))
    train_items, val_items = _val_split(items, seed=seed, val_fraction=val_fraction)
    params, history = train_op(
        config,
        train_items,
        val_items,
        augment,
        selection=selection,
        interpolate=interpolate,
        z_slack=z_slack,
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(out_path, params, config, selection=selection, interpolate=interpolate)
    _write_echo(
        Path(str(out_path) + ".config.json"),
        _echo_payload(
            "train",
            config,
            selection,
            manifest=str(manifest),
            augment=augment,
            interpolate=interpolate,
            z_slack=z_slack,
            best_epoch=history.best_epoch,
            epochs_run=history.epochs_run,
        ),
    )
    best_acc = history.val_accuracy[history.best_epoch - 1] if history.best_epoch else 0.0
    click.echo(
        f"trained {history.epochs_run} epochs, best epoch {history.best_epoch}, "
        f"val accuracy {best_acc:.4f}, model -> {out_path}"
    )


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--clip", "clip_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@_guarded
def predict(model_path: Path, clip_path: Path) -> None:
    """Print the flapping probability and label for one clip."""
    params, _, meta = load_model(model_path)
    selection = meta["selection"]
    if selection is None:
        raise ValidationError(f"{model_path} does not record its feature selection")
    if effective_dim(selection) != params.input_dim:
        raise ValidationError(
            f"model dim {params.input_dim} does not match selection {selection.kind}"
        )
    clip = load_clip(clip_path)
    p = predict_op(params, clip, selection, meta["interpolate"])
    label = Label.FLAP if p > 0.5 else Label.CONTROL
    click.echo(f"p={p!r} label={label.value}")


if __name__ == "__main__":
    main()
