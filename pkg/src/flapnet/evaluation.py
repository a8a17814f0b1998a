"""Metrics, ROC/AUROC, stratified k-fold cross-validation and reporting.

cross_validate repeats the whole protocol ``runs`` times with run seed
``seed + r``: a fresh stratified fold split, training on k-1 folds (with a
20% stratified validation carve-out for early stopping), evaluation on the
held-out fold. Per-run metrics are fold averages; the report aggregates the
mean and population standard deviation across runs and keeps each run's
pooled ROC curve for plotting.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .augmentation import DEFAULT_Z_SLACK
from .data import Clip, DatasetManifest, Label, load_dataset
from .errors import ValidationError
from .features import FeatureSelection
from .model import ModelConfig, predict, train

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "auroc")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float | None = None
    roc_points: tuple[tuple[float, float], ...] | None = None

    def as_dict(self) -> dict[str, float]:
        out = {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.auroc is not None:
            out["auroc"] = self.auroc
        return out


def confusion_metrics(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> Metrics:
    """Accuracy/precision/recall/F1 at a decision threshold; ratios with a
    zero denominator are defined as 0."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.size == 0:
        raise ValidationError("scores and labels must be equal-length and non-empty")
    pred = scores > threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    accuracy = (tp + tn) / labels.size
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(accuracy, precision, recall, f1)


def roc_auroc(
    scores: Sequence[float], labels: Sequence[int]
) -> tuple[tuple[tuple[float, float], ...], float]:
    """ROC points (threshold sweep over unique scores, ties grouped) and the
    trapezoidal AUROC, which equals P(score+ > score-) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.size == 0:
        raise ValidationError("scores and labels must be equal-length and non-empty")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC needs at least one positive and one negative label")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    points = [(0.0, 0.0)]
    area = 0.0
    tp = fp = 0
    i = 0
    while i < s.size:
        j = i
        while j < s.size and s[j] == s[i]:
            j += 1
        group_tp = int(np.sum(y[i:j] == 1))
        group_fp = (j - i) - group_tp
        prev_tpr, prev_fpr = tp / n_pos, fp / n_neg
        tp += group_tp
        fp += group_fp
        tpr, fpr = tp / n_pos, fp / n_neg
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        points.append((fpr, tpr))
        i = j
    return tuple(points), area


def stratified_kfold(
    labels: DatasetManifest | Sequence[int], k: int = 5, seed: int = 0
) -> list[np.ndarray]:
    """Partition indices into k folds preserving class proportions within
    one item per class per fold. Deterministic given the seed. Accepts a
    manifest or a 0/1 label sequence."""
    if isinstance(labels, DatasetManifest):
        labels = [1 if e.label is Label.FLAP else 0 for e in labels.entries]
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(np.random.PCG64(seed))
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise ValidationError(f"class {cls} has {idx.size} members, fewer than k={k}")
        rng.shuffle(idx)
        for fold_i, chunk in enumerate(np.array_split(idx, k)):
            folds[fold_i].extend(chunk.tolist())
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


@dataclass
class RunResult:
    run: int
    fold_metrics: list[Metrics]
    roc_points: tuple[tuple[float, float], ...]
    pooled_auroc: float

    def means(self) -> dict[str, float]:
        return {
            name: float(np.mean([getattr(m, name) for m in self.fold_metrics]))
            for name in METRIC_NAMES
        }


@dataclass
class AggregateReport:
    runs: list[RunResult]
    config_echo: dict

    def summary(self) -> dict[str, tuple[float, float]]:
        """Per metric: (mean, population std) across runs of fold-averaged values."""
        out = {}
        for name in METRIC_NAMES:
            values = np.array([r.means()[name] for r in self.runs])
            out[name] = (float(values.mean()), float(values.std()))
        return out


def _materialize(dataset: DatasetManifest | Sequence[tuple[Clip, int]]) -> list[tuple[Clip, int]]:
    if isinstance(dataset, DatasetManifest):
        return load_dataset(dataset)
    return list(dataset)


def _val_split(
    pool: list[tuple[Clip, int]], seed: int, val_fraction: float = 0.2
) -> tuple[list[tuple[Clip, int]], list[tuple[Clip, int]]]:
    labels = [y for _, y in pool]
    smallest_class = min(labels.count(0), labels.count(1))
    k = max(2, min(round(1.0 / val_fraction), smallest_class))
    folds = stratified_kfold(labels, k=k, seed=seed)
    val_idx = set(folds[0].tolist())
    train_items = [pool[i] for i in range(len(pool)) if i not in val_idx]
    val_items = [pool[i] for i in sorted(val_idx)]
    return train_items, val_items


def _run_fold(
    items: list[tuple[Clip, int]],
    test_idx: np.ndarray,
    config: ModelConfig,
    selection: FeatureSelection,
    augment: bool,
    interpolate: bool,
    z_slack: float,
    split_seed: int,
) -> tuple[list[float], list[int]]:
    test_set = [items[i] for i in test_idx.tolist()]
    pool = [items[i] for i in range(len(items)) if i not in set(test_idx.tolist())]
    train_items, val_items = _val_split(pool, seed=split_seed)
    params, _ = train(
        config,
        train_items,
        val_items,
        augment,
        selection=selection,
        interpolate=interpolate,
        z_slack=z_slack,
    )
    scores = [predict(params, clip, selection, interpolate) for clip, _ in test_set]
    labels = [y for _, y in test_set]
    return scores, labels


def cross_validate(
    config: ModelConfig,
    selection: FeatureSelection,
    augment: bool,
    dataset: DatasetManifest | Sequence[tuple[Clip, int]],
    k: int = 5,
    runs: int = 10,
    seed: int = 0,
    *,
    interpolate: bool = False,
    z_slack: float = DEFAULT_Z_SLACK,
    jobs: int = 1,
    config_echo: dict | None = None,
) -> AggregateReport:
    """Repeated stratified k-fold evaluation; deterministic given seed."""
    items = _materialize(dataset)
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    labels = [y for _, y in items]

    tasks = []
    for r in range(runs):
        run_seed = seed + r
        folds = stratified_kfold(labels, k=k, seed=run_seed)
        for fold_i, test_idx in enumerate(folds):
            fold_seed = int(np.random.SeedSequence([seed, r, fold_i]).generate_state(1)[0])
            fold_config = replace(config, seed=fold_seed)
            tasks.append((r, fold_i, test_idx, fold_config, fold_seed))

    def run_task(task):
        r, fold_i, test_idx, fold_config, fold_seed = task
        scores, fold_labels = _run_fold(
            items, test_idx, fold_config, selection, augment, interpolate, z_slack, fold_seed
        )
        return r, fold_i, scores, fold_labels

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fold_worker, [(t, items, selection, augment, interpolate, z_slack) for t in tasks]))
    else:
        results = [run_task(t) for t in tasks]

    per_run: dict[int, list[tuple[int, list[float], list[int]]]] = {r: [] for r in range(runs)}
    for r, fold_i, scores, fold_labels in results:
        per_run[r].append((fold_i, scores, fold_labels))

    run_results = []
    for r in range(runs):
        fold_metrics = []
        pooled_scores: list[float] = []
        pooled_labels: list[int] = []
        for fold_i, scores, fold_labels in sorted(per_run[r]):
            m = confusion_metrics(scores, fold_labels)
            points, auroc = roc_auroc(scores, fold_labels)
            fold_metrics.append(replace(m, auroc=auroc, roc_points=points))
            pooled_scores.extend(scores)
            pooled_labels.extend(fold_labels)
        pooled_points, pooled_auroc = roc_auroc(pooled_scores, pooled_labels)
        run_results.append(RunResult(r, fold_metrics, pooled_points, pooled_auroc))

    return AggregateReport(run_results, config_echo or {})


def _fold_worker(args):
    (r, fold_i, test_idx, fold_config, fold_seed), items, selection, augment, interpolate, z_slack = args
    scores, fold_labels = _run_fold(
        items, test_idx, fold_config, selection, augment, interpolate, z_slack, fold_seed
    )
    return r, fold_i, scores, fold_labels


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: AggregateReport, out_dir: str | Path) -> list[Path]:
    """Write summary.csv, runs.csv, roc_points.csv and roc.svg; byte-stable
    across invocations for the same report."""
    if not report.runs:
        raise ValidationError("report contains no runs")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary_path = out_dir / "summary.csv"
    lines = ["metric,mean,std"]
    for name, (mean, std) in report.summary().items():
        lines.append(f"{name},{_fmt(mean)},{_fmt(std)}")
    summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    runs_path = out_dir / "runs.csv"
    lines = ["run,fold," + ",".join(METRIC_NAMES)]
    for run in report.runs:
        for fold_i, m in enumerate(run.fold_metrics):
            values = ",".join(_fmt(getattr(m, name)) for name in METRIC_NAMES)
            lines.append(f"{run.run},{fold_i},{values}")
    runs_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    roc_path = out_dir / "roc_points.csv"
    lines = ["run,fpr,tpr"]
    for run in report.runs:
        for fpr, tpr in run.roc_points:
            lines.append(f"{run.run},{_fmt(fpr)},{_fmt(tpr)}")
    roc_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    svg_path = out_dir / "roc.svg"
    svg_path.write_text(_roc_svg(report), encoding="utf-8")

    if report.config_echo:
        echo_path = out_dir / "config.json"
        echo_path.write_text(json.dumps(report.config_echo, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return [summary_path, runs_path, roc_path, svg_path, echo_path]
    return [summary_path, runs_path, roc_path, svg_path]


def _roc_svg(report: AggregateReport, size: int = 360, margin: int = 40) -> str:
    """Minimal ROC plot: one grey polyline per run plus the diagonal."""
    span = size - 2 * margin

    def sx(v: float) -> float:
        return margin + v * span

    def sy(v: float) -> float:
        return size - margin - v * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="{margin}" y="{margin}" width="{span}" height="{span}" '
        'fill="white" stroke="black" stroke-width="1"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(1)}" '
        'stroke="#bbbbbb" stroke-dasharray="4 4"/>',
    ]
    for run in report.runs:
        pts = " ".join(f"{sx(fpr):.2f},{sy(tpr):.2f}" for fpr, tpr in run.roc_points)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#444444" stroke-width="1"/>')
    auroc_mean, auroc_std = report.summary()["auroc"]
    parts.append(
        f'<text x="{margin}" y="{margin - 12}" font-family="monospace" font-size="12">'
        f"ROC over {len(report.runs)} runs, AUROC {auroc_mean:.3f} +/- {auroc_std:.3f}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
