"""Dataset scanning, batch transform, evaluation, weight sweep and reports.

A dataset root holds one scene per immediate subdirectory; the PNG files
of a scene are taken in lexicographic filename order.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, NeuGenError, TooFewImages
from .features import count_matches
from .imagecore import ImageF, load_image, save_image, write_ngf1
from .metrics import SsimParams, psnr, ssim
from .transform import NeuGenConfig, fuse, neugen_map

__all__ = [
    "Scene",
    "SceneSet",
    "BatchSummary",
    "MetricRow",
    "PairRecord",
    "SweepRow",
    "EvalReport",
    "DEFAULT_SWEEP_WEIGHTS",
    "CSV_COLUMNS",
    "resolve_workers",
    "scan_dataset",
    "transform_batch",
    "evaluate_scene",
    "eval_effect",
    "validate_weights",
    "weight_sweep",
    "sweep_report",
    "emit_report",
    "load_report",
]

log = logging.getLogger(__name__)

DEFAULT_SWEEP_WEIGHTS = (0.5, 0.55, 0.72, 0.74, 1.2, 1.5, 2.9)
CSV_COLUMNS = ("scene", "metric", "variant", "weight", "value")
EMIT_CHOICES = ("gmap", "enhanced", "both")
WORKERS_ENV = "NEUGEN_WORKERS"


@dataclass(frozen=True)
class Scene:
    name: str
    paths: tuple[Path, ...]


@dataclass(frozen=True)
class SceneSet:
    root: Path
    scenes: tuple[Scene, ...]

    def __len__(self):
        return len(self.scenes)

    @property
    def n_images(self) -> int:
        return sum(len(s.paths) for s in self.scenes)


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: ``$NEUGEN_WORKERS`` wins, then ``workers``, then 1."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        workers = int(env)
    workers = workers or 1
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def _ordered_map(fn: Callable, items: Sequence, workers: int) -> list:
    # results follow input order, never completion order
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _is_png(p: Path) -> bool:
    return p.is_file() and p.suffix.lower() == ".png"


def scan_dataset(root) -> SceneSet:
    root = Path(root)
    if not root.exists():
        raise FileNotFoundError(root)
    if not root.is_dir():
        raise NotADirectoryError(root)
    scenes = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        paths = sorted((p for p in sub.iterdir() if _is_png(p)), key=lambda p: p.name)
        if paths:
            scenes.append(Scene(sub.name, tuple(paths)))
    if not scenes:
        raise EmptyDataset(f"no scene directories with PNG files under {root}")
    return SceneSet(root, tuple(scenes))


# -- batch transform ---------------------------------------------------------


@dataclass
class BatchSummary:
    total: int = 0
    processed: int = 0
    skipped: int = 0
    failed: int = 0
    degenerate: list[str] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def reconciles(self) -> bool:
        return self.processed + self.skipped + self.failed == self.total


def _transform_one(job):
    scene, path, cfg, out_dir, emit, depth = job
    key = f"{scene}/{path.name}"
    try:
        img = load_image(path)
        result = neugen_map(img, cfg)
        stem = path.stem
        written = []
        if emit in ("gmap", "both"):
            write_ngf1(result.image, out_dir / f"{stem}.gmap.ngf1")
            save_image(result.image, out_dir / f"{stem}.gmap.png", depth)
            written += [f"{scene}/{stem}.gmap.ngf1", f"{scene}/{stem}.gmap.png"]
        if emit in ("enhanced", "both"):
            enhanced = fuse(img, result.image, cfg.fusion_weight)
            save_image(enhanced, out_dir / f"{stem}.enhanced.png", depth)
            written.append(f"{scene}/{stem}.enhanced.png")
        return key, result.degenerate, written, None
    except (NeuGenError, OSError, ValueError) as exc:
        log.warning("failed %s: %s", key, exc)
        return key, False, [], f"{type(exc).__name__}: {exc}"


def transform_batch(scenes: SceneSet, cfg: NeuGenConfig, out_root, emit: str = "both",
                    workers: int | None = None, depth: int = 8) -> BatchSummary:
    """Write contrast maps and/or enhanced images into a mirrored tree.

    Per scene ``<out_root>/<scene>/`` receives ``<stem>.gmap.ngf1`` (lossless)
    and ``<stem>.gmap.png`` (preview) for ``emit in {gmap, both}`` and
    ``<stem>.enhanced.png`` for ``emit in {enhanced, both}``. A failing image
    is recorded in the summary; the batch carries on.
    """
    if emit not in EMIT_CHOICES:
        raise ValueError(f"emit must be one of {EMIT_CHOICES}, got {emit!r}")
    out_root = Path(out_root)
    jobs = []
    for scene in scenes.scenes:
        out_dir = out_root / scene.name
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs += [(scene.name, p, cfg, out_dir, emit, depth) for p in scene.paths]

    summary = BatchSummary(total=len(jobs))
    for key, degenerate, written, error in _ordered_map(_transform_one, jobs, resolve_workers(workers)):
        if error is not None:
            summary.failed += 1
            summary.failures[key] = error
            continue
        summary.processed += 1
        summary.outputs += written
        if degenerate:
            summary.degenerate.append(key)
    return summary


# -- evaluation --------------------------------------------------------------


@dataclass(frozen=True)
class MetricRow:
    """One aggregate value; the unit of the CSV report."""

    scene: str
    metric: str
    variant: str
    weight: float | None
    value: float


@dataclass(frozen=True)
class PairRecord:
    scene: str
    metric: str
    variant: str
    a: str
    b: str
    value: float


@dataclass
class EvalReport:
    kind: str
    rows: list[MetricRow]
    pairs: list[PairRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    skipped: dict[str, str] = field(default_factory=dict)
    failed: dict[str, str] = field(default_factory=dict)
    version: str = ""
    timestamp: str = ""

    @property
    def scenes(self) -> list[str]:
        seen = {}
        for r in self.rows:
            seen.setdefault(r.scene, None)
        return list(seen)

    def value(self, scene: str, metric: str, variant: str, weight=None) -> float:
        for r in self.rows:
            if (r.scene, r.metric, r.variant, r.weight) == (scene, metric, variant, weight):
                return r.value
        raise KeyError((scene, metric, variant, weight))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> EvalReport:
        d = dict(d)
        d["rows"] = [MetricRow(**r) for r in d.get("rows", [])]
        d["pairs"] = [PairRecord(**p) for p in d.get("pairs", [])]
        return cls(**d)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _version() -> str:
    from . import __version__
    return __version__


def _check_scene(images: Sequence[ImageF]) -> None:
    if len(images) < 2:
        raise TooFewImages(f"need at least 2 images, got {len(images)}")
    first = images[0]
    for other in images[1:]:
        if not first.same_size(other) or first.channels != other.channels:
            raise DimensionMismatch(f"{first!r} vs {other!r}")


def evaluate_scene(name: str, images: Sequence[ImageF], cfg: NeuGenConfig, params: SsimParams,
                   ratio: float = 0.8, names: Sequence[str] | None = None):
    """Score one scene on originals and on contrast maps.

    SSIM/PSNR compare the first image with each other one; feature matches
    are counted for every adjacent pair. Returns ``(rows, pairs)``.
    """
    _check_scene(images)
    names = list(names) if names is not None else [str(i) for i in range(len(images))]
    variants = {
        "original": list(images),
        "neugen": [neugen_map(img, cfg).image for img in images],
    }
    rows, pairs = [], []
    for variant, imgs in variants.items():
        ssims, psnrs, matches = [], [], []
        for k in range(1, len(imgs)):
            s = ssim(imgs[0], imgs[k], params)
            p = psnr(imgs[0], imgs[k])
            ssims.append(s)
            psnrs.append(p)
            pairs.append(PairRecord(name, "ssim", variant, names[0], names[k], s))
            pairs.append(PairRecord(name, "psnr", variant, names[0], names[k], p))
        for k in range(len(imgs) - 1):
            m = count_matches(imgs[k], imgs[k + 1], ratio).matches
            matches.append(m)
            pairs.append(PairRecord(name, "matches", variant, names[k], names[k + 1], float(m)))
        rows.append(MetricRow(name, "class_ssim", variant, None, float(np.mean(ssims))))
        rows.append(MetricRow(name, "mean_psnr", variant, None, float(np.mean(psnrs))))
        rows.append(MetricRow(name, "mean_matches", variant, None, float(np.mean(matches))))
    return rows, pairs


def _load_scene(scene: Scene) -> list[ImageF]:
    return [load_image(p) for p in scene.paths]


def eval_effect(scenes: SceneSet, cfg: NeuGenConfig | None = None,
                params: SsimParams | None = None, ratio: float = 0.8,
                workers: int | None = None) -> EvalReport:
    """Original-vs-contrast-map comparison over every scene of a dataset.

    Scenes with fewer than two images are skipped; scenes that fail to load
    or have mismatched sizes are recorded as failed. Row order follows the
    scene order of ``scenes``.
    """
    cfg = cfg or NeuGenConfig()
    params = params or SsimParams()

    def run(scene: Scene):
        try:
            images = _load_scene(scene)
            names = [p.name for p in scene.paths]
            return scene.name, evaluate_scene(scene.name, images, cfg, params, ratio, names), None
        except TooFewImages as exc:
            return scene.name, None, ("skipped", str(exc))
        except (NeuGenError, OSError, ValueError) as exc:
            log.warning("scene %s failed: %s", scene.name, exc)
            return scene.name, None, ("failed", f"{type(exc).__name__}: {exc}")

    report = EvalReport(kind="effect", rows=[],
                        config={"neugen": asdict(cfg), "ssim": asdict(params), "ratio": ratio},
                        version=_version(), timestamp=_now())
    for name, result, problem in _ordered_map(run, list(scenes.scenes), resolve_workers(workers)):
        if problem is not None:
            getattr(report, problem[0])[name] = problem[1]
            continue
        rows, pairs = result
        report.rows += rows
        report.pairs += pairs
    return report


# -- weight sweep ------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    """Results for one fusion weight.

    ``class_ssim`` maps scene to the mean SSIM between each original and
    its enhanced version (1.0 at weight 0). ``enhanced_class_ssim`` is the
    first-vs-rest score on the enhanced images alone. Match deltas are
    enhanced-pair minus original-pair counts over adjacent pairs.
    """

    weight: float
    class_ssim: dict[str, float]
    enhanced_class_ssim: dict[str, float]
    match_delta: dict[str, float]
    mean_match_delta: float


def validate_weights(weights: Iterable[float]) -> list[float]:
    weights = [float(w) for w in weights]
    if not weights:
        raise ValueError("at least one weight is required")
    if len(set(weights)) != len(weights):
        raise ValueError(f"weights must be distinct, got {weights}")
    if any(not w >= 0 for w in weights):
        raise ValueError(f"weights must be >= 0, got {weights}")
    return sorted(weights)


def weight_sweep(scenes: SceneSet, weights: Iterable[float] = DEFAULT_SWEEP_WEIGHTS,
                 cfg: NeuGenConfig | None = None, params: SsimParams | None = None,
                 ratio: float = 0.8, workers: int | None = None) -> list[SweepRow]:
    """Score enhanced images for each fusion weight, one row per weight.

    Scenes that cannot be loaded or hold fewer than two images are left out.
    """
    weights = validate_weights(weights)
    cfg = cfg or NeuGenConfig()
    params = params or SsimParams()

    def prepare(scene: Scene):
        try:
            images = _load_scene(scene)
            _check_scene(images)
        except (NeuGenError, OSError, ValueError) as exc:
            log.warning("sweep skips scene %s: %s", scene.name, exc)
            return None
        gmaps = [neugen_map(img, cfg).image for img in images]
        base = [count_matches(images[k], images[k + 1], ratio).matches
                for k in range(len(images) - 1)]
        return scene.name, images, gmaps, base

    prepared = [p for p in _ordered_map(prepare, list(scenes.scenes), resolve_workers(workers)) if p]
    return sweep_prepared(prepared, weights, params, ratio)


def sweep_prepared(prepared, weights: Sequence[float], params: SsimParams,
                   ratio: float = 0.8) -> list[SweepRow]:
    """Sweep over already-loaded ``(name, images, gmaps, base_matches)`` tuples."""
    rows = []
    for w in validate_weights(weights):
        fidelity, enh_class, deltas = {}, {}, {}
        all_deltas = []
        for name, images, gmaps, base in prepared:
            enhanced = [fuse(img, g, w) for img, g in zip(images, gmaps)]
            fidelity[name] = float(np.mean([ssim(o, e, params) for o, e in zip(images, enhanced)]))
            enh_class[name] = float(np.mean([ssim(enhanced[0], e, params) for e in enhanced[1:]]))
            d = [count_matches(enhanced[k], enhanced[k + 1], ratio).matches - base[k]
                 for k in range(len(enhanced) - 1)]
            deltas[name] = float(np.mean(d))
            all_deltas += d
        mean_delta = float(np.mean(all_deltas)) if all_deltas else 0.0
        rows.append(SweepRow(w, fidelity, enh_class, deltas, mean_delta))
    return rows


def sweep_report(rows: Sequence[SweepRow], config: dict | None = None) -> EvalReport:
    metric_rows = []
    for row in rows:
        for scene in row.class_ssim:
            metric_rows.append(MetricRow(scene, "class_ssim", "enhanced", row.weight, row.class_ssim[scene]))
            metric_rows.append(MetricRow(scene, "enhanced_class_ssim", "enhanced", row.weight,
                                         row.enhanced_class_ssim[scene]))
            metric_rows.append(MetricRow(scene, "match_delta", "enhanced", row.weight, row.match_delta[scene]))
    metric_rows.sort(key=lambda r: (r.scene, r.metric, r.weight))
    return EvalReport(kind="sweep", rows=metric_rows, config=dict(config or {}),
                      version=_version(), timestamp=_now())


# -- report files ------------------------------------------------------------


def _csv_cell(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def emit_report(report: EvalReport | Sequence[SweepRow], fmt: str, path) -> None:
    """Write ``report`` as canonical JSON or as CSV.

    JSON keys are sorted; infinite PSNR is written as ``Infinity``. CSV has
    the fixed columns ``scene, metric, variant, weight, value`` with one
    line per aggregate row and no timestamp.
    """
    if not isinstance(report, EvalReport):
        report = sweep_report(report)
    path = Path(path)
    if fmt == "json":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=2)
        path.write_text(text + "\n", encoding="utf-8")
    elif fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in report.rows:
                writer.writerow([r.scene, r.metric, r.variant, _csv_cell(r.weight), _csv_cell(r.value)])
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        return EvalReport.from_dict(json.load(fh))
