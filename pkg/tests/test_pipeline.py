import json
import threading

import numpy as np
import pytest

from neugen import pipeline
from neugen.errors import EmptyDataset
from neugen.imagecore import ImageF, read_ngf1, save_image
from neugen.metrics import SsimParams
from neugen.pipeline import (DEFAULT_SWEEP_WEIGHTS, EvalReport, emit_report, eval_effect,
                             evaluate_scene, load_report, resolve_workers, scan_dataset,
                             sweep_report, transform_batch, validate_weights, weight_sweep)
from neugen.synthetic import affine, textured_image, write_corpus
from neugen.transform import NeuGenConfig


def _write(path, img):
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(img, path, depth=16)


def _tiny(rng, size=24):
    return textured_image(rng, size, 1)


def test_scan_counts(tmp_path, rng):
    for i in range(3):
        _write(tmp_path / "lego" / f"r_{i}.png", _tiny(rng))
    for i in range(2):
        _write(tmp_path / "drums" / f"r_{i}.png", _tiny(rng))
    (tmp_path / "drums" / "notes.txt").write_text("x")
    (tmp_path / "stray.png").write_bytes(b"")
    ss = scan_dataset(tmp_path)
    assert [(s.name, len(s.paths)) for s in ss.scenes] == [("drums", 2), ("lego", 3)]


def test_scan_lexicographic(tmp_path, rng):
    for n in ("2", "10", "0"):
        _write(tmp_path / "s" / f"{n}.png", _tiny(rng))
    assert [p.name for p in scan_dataset(tmp_path).scenes[0].paths] == ["0.png", "10.png", "2.png"]


def test_scan_errors(tmp_path):
    (tmp_path / "empty_scene").mkdir()
    (tmp_path / "empty_scene" / "a.txt").write_text("x")
    with pytest.raises(EmptyDataset):
        scan_dataset(tmp_path)
    with pytest.raises(NotADirectoryError):
        scan_dataset(tmp_path / "empty_scene" / "a.txt")
    with pytest.raises(FileNotFoundError):
        scan_dataset(tmp_path / "missing")


def test_transform_both(corpus_dir, tmp_path):
    out = tmp_path / "out"
    summary = transform_batch(scan_dataset(corpus_dir), NeuGenConfig(), out, "both")
    assert summary.total == summary.processed == 6 and summary.failed == 0
    assert summary.reconciles()
    assert sorted(p.name for p in out.iterdir()) == ["scene00", "scene01"]
    for scene in out.iterdir():
        stems = {p.name.split(".")[0] for p in scene.iterdir()}
        for stem in stems:
            for suffix in (".gmap.ngf1", ".gmap.png", ".enhanced.png"):
                assert (scene / (stem + suffix)).is_file()
    g = read_ngf1(out / "scene00" / "000.gmap.ngf1")
    assert g.channels == 1 and abs(g.data.max() - 1.0) < 1e-6


@pytest.mark.parametrize("emit, suffixes", [("gmap", {".gmap.ngf1", ".gmap.png"}),
                                            ("enhanced", {".enhanced.png"})])
def test_transform_emit_subset(corpus_dir, tmp_path, emit, suffixes):
    out = tmp_path / "out"
    transform_batch(scan_dataset(corpus_dir), NeuGenConfig(), out, emit)
    found = {p.name[3:] for p in (out / "scene00").iterdir()}
    assert found == suffixes


def test_transform_degenerate_and_corrupt(tmp_path, rng):
    data = tmp_path / "data"
    _write(data / "s" / "a.png", _tiny(rng))
    _write(data / "s" / "flat.png", ImageF(np.full((24, 24), 0.5)))
    (data / "s" / "broken.png").write_bytes(b"\x89PNG\r\n\x1a\nnot really")
    summary = transform_batch(scan_dataset(data), NeuGenConfig(), tmp_path / "out")
    assert summary.total == 3 and summary.processed == 2 and summary.failed == 1
    assert summary.reconciles()
    assert summary.degenerate == ["s/flat.png"]
    assert list(summary.failures) == ["s/broken.png"]
    assert np.all(read_ngf1(tmp_path / "out" / "s" / "flat.gmap.ngf1").data == 0)


def test_transform_rerun_bit_identical(corpus_dir, tmp_path):
    ss = scan_dataset(corpus_dir)
    transform_batch(ss, NeuGenConfig(), tmp_path / "a", workers=1)
    transform_batch(ss, NeuGenConfig(), tmp_path / "b", workers=4)
    for f in sorted((tmp_path / "a").rglob("*.*")):
        twin = tmp_path / "b" / f.relative_to(tmp_path / "a")
        assert f.read_bytes() == twin.read_bytes()


def test_eval_affine_copies(tmp_path, rng):
    base = textured_image(rng, 64, 3)
    images = [base] + [affine(base, a, b) for a, b in ((0.5, 0.1), (0.8, 0.15), (0.6, 0.3), (0.9, 0.05))]
    write_corpus(tmp_path, {"copies": images})
    report = eval_effect(scan_dataset(tmp_path))
    assert abs(report.value("copies", "class_ssim", "neugen") - 1.0) < 1e-5
    assert report.value("copies", "class_ssim", "original") < 1.0


def test_evaluate_scene_in_memory(rng):
    base = textured_image(rng, 48, 1)
    rows, pairs = evaluate_scene("x", [base, affine(base, 0.5, 0.2)], NeuGenConfig(), SsimParams())
    metrics = {(r.metric, r.variant) for r in rows}
    assert metrics == {(m, v) for m in ("class_ssim", "mean_psnr", "mean_matches")
                       for v in ("original", "neugen")}
    assert all(r.weight is None for r in rows)
    assert {p.metric for p in pairs} == {"ssim", "psnr", "matches"}


def test_eval_identical_pair_and_roundtrip(tmp_path, rng):
    img = textured_image(rng, 48, 3)
    write_corpus(tmp_path / "d", {"same": [img, img]})
    report = eval_effect(scan_dataset(tmp_path / "d"))
    assert report.value("same", "class_ssim", "original") == pytest.approx(1.0, abs=1e-9)
    assert report.value("same", "class_ssim", "neugen") == pytest.approx(1.0, abs=1e-9)
    assert report.value("same", "mean_psnr", "original") == float("inf")
    emit_report(report, "json", tmp_path / "r.json")
    assert load_report(tmp_path / "r.json") == report
    assert EvalReport.from_dict(json.loads(json.dumps(report.to_dict()))) == report


def test_eval_skips_single_image_scene(tmp_path, rng):
    write_corpus(tmp_path, {"one": [_tiny(rng, 48)], "two": [_tiny(rng, 48), _tiny(rng, 48)]})
    report = eval_effect(scan_dataset(tmp_path))
    assert list(report.skipped) == ["one"]
    assert report.scenes == ["two"]


def test_eval_records_size_mismatch(tmp_path, rng):
    write_corpus(tmp_path, {"bad": [_tiny(rng, 48), _tiny(rng, 40)]})
    report = eval_effect(scan_dataset(tmp_path))
    assert "bad" in report.failed and not report.rows


def test_sweep_zero_weight_identity(corpus_dir):
    (row,) = weight_sweep(scan_dataset(corpus_dir), [0.0])
    assert row.weight == 0.0
    assert all(v == pytest.approx(1.0, abs=1e-12) for v in row.class_ssim.values())
    assert row.mean_match_delta == 0.0


def test_sweep_default_weights(corpus_dir):
    rows = weight_sweep(scan_dataset(corpus_dir))
    assert [r.weight for r in rows] == sorted(DEFAULT_SWEEP_WEIGHTS)
    assert len(rows) == 7
    rep = sweep_report(rows)
    assert {r.variant for r in rep.rows} == {"enhanced"}


@pytest.mark.parametrize("weights", [[], [0.5, 0.5], [-1.0], [float("nan")]])
def test_sweep_bad_weights_fail_before_work(weights, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("work started")
    monkeypatch.setattr(pipeline, "_load_scene", boom)
    with pytest.raises(ValueError):
        weight_sweep(pipeline.SceneSet("x", ()), weights)


def test_validate_weights_sorts():
    assert validate_weights([1.5, 0.5, 0.72]) == [0.5, 0.72, 1.5]


def test_csv_schema_and_row_count(corpus_dir, tmp_path):
    report = eval_effect(scan_dataset(corpus_dir))
    emit_report(report, "csv", tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "scene,metric,variant,weight,value"
    assert len(lines) == 1 + 2 * 3 * 2
    assert all(line.split(",")[3] == "" for line in lines[1:])


def test_emit_deterministic_apart_from_timestamp(corpus_dir, tmp_path):
    ss = scan_dataset(corpus_dir)
    r1, r2 = eval_effect(ss), eval_effect(ss)
    r2.timestamp = "1999-01-01T00:00:00+00:00"
    for fmt in ("json", "csv"):
        emit_report(r1, fmt, tmp_path / f"a.{fmt}")
        emit_report(r2, fmt, tmp_path / f"b.{fmt}")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert a.pop("timestamp") != b.pop("timestamp")
    assert a == b


def test_workers_env_override(monkeypatch):
    monkeypatch.setenv("NEUGEN_WORKERS", "3")
    assert resolve_workers(8) == 3
    monkeypatch.delenv("NEUGEN_WORKERS")
    assert resolve_workers(2) == 2
    assert resolve_workers() >= 1


def test_ordered_map_keeps_input_order(monkeypatch):
    monkeypatch.setenv("NEUGEN_WORKERS", "4")
    gate = threading.Event()

    def slow_first(x):
        if x == 0:
            gate.wait(2)
        elif x == 7:
            gate.set()
        return x * x

    assert pipeline._ordered_map(slow_first, list(range(8)), resolve_workers()) == [x * x for x in range(8)]


def test_eval_independent_of_worker_count(corpus_dir, monkeypatch):
    ss = scan_dataset(corpus_dir)
    monkeypatch.setenv("NEUGEN_WORKERS", "1")
    a = eval_effect(ss)
    monkeypatch.setenv("NEUGEN_WORKERS", "4")
    b = eval_effect(ss)
    assert a.rows == b.rows and a.pairs == b.pairs
