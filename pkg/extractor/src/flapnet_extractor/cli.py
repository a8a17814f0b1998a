"""extract-landmarks: videos in, landmark JSON-lines out."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .extract import ExtractionError, ExtractionJob, batch_extract, extract


@click.command()
@click.argument("source", type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--out", "out_path", type=click.Path(path_type=Path), required=True,
              help="Output file (single video) or directory (--batch).")
@click.option("--batch", is_flag=True, default=False, help="Treat SOURCE as a directory of videos.")
@click.option("--engine", type=click.Choice(["mediapipe", "blob"]), default="mediapipe",
              show_default=True)
@click.option("--fps", "target_fps", type=float, default=None,
              help="Resample to this frame rate (default: native).")
@click.option("--min-detection-confidence", type=float, default=0.5, show_default=True)
@click.option("--min-tracking-confidence", type=float, default=0.5, show_default=True)
def main(
    source: Path,
    out_path: Path,
    batch: bool,
    engine: str,
    target_fps: float | None,
    min_detection_confidence: float,
    min_tracking_confidence: float,
) -> None:
    """Extract hand landmarks from SOURCE into the flapnet JSON-lines format."""
    try:
        if batch:
            if not source.is_dir():
                raise click.UsageError("--batch requires SOURCE to be a directory")
            summaries = batch_extract(
                source, out_path, engine, target_fps,
                min_detection_confidence, min_tracking_confidence,
            )
            failures = [s for s in summaries if s.status != "ok"]
            for s in summaries:
                click.echo(
                    f"{s.video_id}: {s.frames} frames, detection rate {s.detection_rate:.2f}"
                    + ("" if s.status == "ok" else f" [{s.status}]")
                )
            click.echo(f"{len(summaries) - len(failures)}/{len(summaries)} videos extracted "
                       f"-> {out_path / 'summary.csv'}")
        else:
            if source.is_dir():
                raise click.UsageError("SOURCE is a directory; use --batch")
            job = ExtractionJob(
                video_path=source,
                output_path=out_path,
                engine=engine,
                target_fps=target_fps,
                min_detection_confidence=min_detection_confidence,
                min_tracking_confidence=min_tracking_confidence,
            )
            s = extract(job)
            click.echo(
                f"{s.video_id}: {s.frames} frames at {s.fps:g} fps, "
                f"detection rate {s.detection_rate:.2f}, clamped {s.clamped} "
                f"({s.engine} {s.engine_version})"
            )
    except (ExtractionError, RuntimeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
