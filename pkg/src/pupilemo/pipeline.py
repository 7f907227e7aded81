"""File-to-file pipeline stages.

Each stage reads the previous stage's files and writes its own, so running
``run_pipeline`` and running the stages one by one produce identical bytes.

Work directory layout::

    raw/session_<label>.csv        synth
    clean/clean_<source>.csv       preprocess
    features.csv                   featurize
    selection.csv                  select
    model.json, grid.csv           train
    report.csv, report.txt         evaluate
    top_features.txt               report-features
    baseline_report.csv            pipeline only (mean-diameter baseline)
"""

from __future__ import annotations

import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from pupilemo import evaluation as ev
from pupilemo import features, gbm, ingest, mrmr, preprocess, synth
from pupilemo.config import RunConfig, derive_seed
from pupilemo.errors import MissingInput, WorkdirLocked

log = logging.getLogger(__name__)

BASELINE_FEATURES = ("le_time_mean", "re_time_mean")
LOCK_NAME = ".pupilemo.lock"


def _require(*paths) -> None:
    for p in paths:
        if not Path(p).exists():
            raise MissingInput(f"missing input: {p}")


def _csv_files(path) -> list[Path]:
    path = Path(path)
    _require(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise MissingInput(f"no .csv files in {path}")
        return files
    return [path]


@contextmanager
def workdir_lock(workdir):
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    lock = workdir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise WorkdirLocked(f"{workdir} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield workdir
    finally:
        lock.unlink(missing_ok=True)


def stage_synth(cfg: RunConfig, out_dir) -> list[Path]:
    return synth.write_dataset(synth.generate_dataset(cfg.synth_config()), out_dir)


def stage_preprocess(cfg: RunConfig, inputs, out_dir) -> list[str]:
    """Clean each raw file; returns ``source,kept,dropped`` report lines."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for path in _csv_files(inputs):
        rec = ingest.load_recording(path, cfg.sample_rate_hz)
        clean = preprocess.remove_artifacts(rec, cfg.artifact_margin_ms)
        preprocess.write_clean(clean, out_dir / f"clean_{path.name}")
        lines.append(preprocess.report_line(clean))
    return lines


def stage_featurize(cfg: RunConfig, inputs, out_path) -> features.FeatureMatrix:
    series = [preprocess.read_clean(p) for p in _csv_files(inputs)]
    series.sort(key=lambda s: (int(s.label), s.source_name))
    fm = features.extract(series, cfg.window_config())
    features.write_matrix(fm, out_path)
    return fm


def stage_select(cfg: RunConfig, features_path, out_path) -> mrmr.SelectionResult:
    _require(features_path)
    fm = features.read_matrix(features_path)
    k = min(cfg.mrmr_k, fm.X.shape[1])
    result = mrmr.mrmr_select(fm, k, cfg.mrmr_bins)
    Path(out_path).write_text(mrmr.format_report(result, fm.names), encoding="utf-8")
    return result


@dataclass
class TrainResult:
    model: gbm.GbmModel
    grid: ev.GridResult
    stage: int


def train_model(cfg: RunConfig, fm: features.FeatureMatrix) -> TrainResult:
    """Split, grid-search, fit on the training rows and cut to the chosen stage."""
    train, test = ev.shuffle_split(fm, cfg.split_config())
    width = fm.X.shape[1]
    base = cfg.hyperparams()
    result = ev.grid_search(train, cfg.grid(), base, seed=derive_seed(cfg.seed, "grid"),
                            test=test, paper_faithful=cfg.paper_faithful_selection,
                            stage_rule=cfg.stage_select_rule)
    model = gbm.fit(train.X, train.labels, result.best.for_width(width), train.names)
    if cfg.paper_faithful_selection:
        stage = gbm.select_stage(model, test.X, test.labels, cfg.stage_select_rule)
    else:
        stage = min(result.best_stage, model.n_stages)
    if model.n_stages:
        model = gbm.truncate(model, stage)
    return TrainResult(model, result, stage)


def format_grid(result: ev.GridResult) -> str:
    keys = list(result.table[0].params) if result.table else []
    lines = [",".join(keys + ["best_stage", "score"])]
    for row in result.table:
        lines.append(",".join([repr(row.params[k]) for k in keys] + [str(row.best_stage), repr(row.score)]))
    return "\n".join(lines) + "\n"


def stage_train(cfg: RunConfig, features_path, selection_path, model_path, grid_path=None) -> TrainResult:
    _require(features_path, selection_path)
    fm = features.read_matrix(features_path).columns_by_name(mrmr.read_report(selection_path))
    res = train_model(cfg, fm)
    gbm.save(res.model, model_path)
    if grid_path is not None:
        Path(grid_path).write_text(format_grid(res.grid), encoding="utf-8")
    return res


def evaluate_model(cfg: RunConfig, model: gbm.GbmModel, fm: features.FeatureMatrix) -> ev.EvaluationReport:
    fm = fm.columns_by_name(model.feature_names)
    model.check_features(fm.names)
    _, test = ev.shuffle_split(fm, cfg.split_config())
    return ev.evaluate(model, test)


def stage_evaluate(cfg: RunConfig, features_path, model_path, out_csv, out_txt=None) -> ev.EvaluationReport:
    _require(model_path, features_path)
    rep = evaluate_model(cfg, gbm.load(model_path), features.read_matrix(features_path))
    Path(out_csv).write_text(ev.format_csv(rep), encoding="utf-8")
    if out_txt is not None:
        Path(out_txt).write_text(ev.format_text(rep), encoding="utf-8")
    return rep


def top_feature_report(names: Sequence[str], cuts=(30, 51)) -> str:
    """Ranked features with eye/domain tags and per-eye counts in the top N."""
    descs = [features.descriptor_from_name(n) for n in names]
    lines = ["rank,feature,eye,domain,tier"]
    lines += [f"{i},{d.name},{d.eye},{d.domain},{d.tier}" for i, d in enumerate(descs, start=1)]
    lines.append("")
    for cut in cuts:
        top = descs[:cut]
        counts = {eye: sum(d.eye == eye for d in top) for eye in ("LE", "RE", "cross")}
        lines.append(f"top {len(top)}: LE={counts['LE']} RE={counts['RE']} cross={counts['cross']}")
    return "\n".join(lines) + "\n"


def stage_report_features(selection_path, out_path) -> str:
    _require(selection_path)
    text = top_feature_report(mrmr.read_report(selection_path))
    Path(out_path).write_text(text, encoding="utf-8")
    return text


def run_baseline(cfg: RunConfig, fm: features.FeatureMatrix) -> ev.EvaluationReport:
    """Same split and training procedure on the two per-window mean diameters."""
    raw = fm.columns_by_name(BASELINE_FEATURES)
    res = train_model(cfg, raw)
    return evaluate_model(cfg, res.model, raw)


def run_pipeline(cfg: RunConfig, workdir, with_baseline: bool = True) -> ev.EvaluationReport:
    w = Path(workdir)
    stage_synth(cfg, w / "raw")
    for line in stage_preprocess(cfg, w / "raw", w / "clean"):
        log.info("preprocess %s", line)
    stage_featurize(cfg, w / "clean", w / "features.csv")
    stage_select(cfg, w / "features.csv", w / "selection.csv")
    stage_train(cfg, w / "features.csv", w / "selection.csv", w / "model.json", w / "grid.csv")
    rep = stage_evaluate(cfg, w / "features.csv", w / "model.json", w / "report.csv", w / "report.txt")
    stage_report_features(w / "selection.csv", w / "top_features.txt")
    if with_baseline:
        base = run_baseline(cfg, features.read_matrix(w / "features.csv"))
        (w / "baseline_report.csv").write_text(ev.format_csv(base), encoding="utf-8")
    return rep
