"""Hold-out splitting, grid search and the six-metric report."""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from pupilemo import gbm
from pupilemo.errors import EmptyMatrix, LengthMismatch, TooFewRows
from pupilemo.features import FeatureMatrix
from pupilemo.labels import N_CLASSES, TOKENS

log = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "specificity_macro", "recall_macro", "precision_macro", "f_score", "mcc")


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.7
    seed: int = 42
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def _largest_remainder(sizes: Sequence[int], fraction: float) -> list[int]:
    """Apportion round(fraction * total) among groups by largest remainder.

    Remainder ties go to the lower group index.
    """
    total = int(round(fraction * sum(sizes)))
    quotas = [fraction * s for s in sizes]
    alloc = [int(math.floor(q)) for q in quotas]
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[: total - sum(alloc)]:
        alloc[i] += 1
    return alloc


def split_indices(labels, cfg: SplitConfig = SplitConfig()):
    """Seeded shuffle split of row indices into (train, test).

    Stratified mode permutes each class separately and gives each class
    its largest-remainder share of the training rows.
    """
    y = np.asarray(labels, dtype=np.int64)
    n = y.size
    if n < 2:
        raise TooFewRows("need at least two rows to split")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    if not cfg.stratified:
        perm = rng.permutation(n)
        n_train = int(round(cfg.train_fraction * n))
        return perm[:n_train], perm[n_train:]
    classes = [c for c in range(N_CLASSES) if (y == c).any()]
    members = [np.flatnonzero(y == c) for c in classes]
    small = [TOKENS[c] for c, m in zip(classes, members) if m.size < 2]
    if small:
        raise TooFewRows(f"stratified split needs two rows per present class ({', '.join(small)})")
    shares = _largest_remainder([m.size for m in members], cfg.train_fraction)
    train, test = [], []
    for m, k in zip(members, shares):
        m = m[rng.permutation(m.size)]
        train.append(m[:k])
        test.append(m[k:])
    train = np.concatenate(train)
    test = np.concatenate(test)
    return train[rng.permutation(train.size)], test[rng.permutation(test.size)]


def shuffle_split(fm: FeatureMatrix, cfg: SplitConfig = SplitConfig()):
    train, test = split_indices(fm.labels, cfg)
    return fm.rows(train), fm.rows(test)


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """4x4 counts, rows = true label, columns = predicted label."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise LengthMismatch("y_true and y_pred must be 1-D and of equal length")
    if t.size == 0:
        raise LengthMismatch("need at least one row")
    if min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= N_CLASSES:
        raise ValueError(f"label ids must lie in 0..{N_CLASSES - 1}")
    return np.bincount(t * N_CLASSES + p, minlength=N_CLASSES * N_CLASSES).reshape(N_CLASSES, N_CLASSES)


@dataclass(frozen=True)
class ClassRates:
    label: str
    tp: int
    fp: int
    fn: int
    tn: int
    recall: float
    precision: float
    specificity: float
    f_score: float


@dataclass(frozen=True)
class EvaluationReport:
    confusion: np.ndarray
    accuracy: float
    specificity_macro: float
    recall_macro: float
    precision_macro: float
    f_score: float
    mcc: float
    per_class: tuple[ClassRates, ...] = ()
    flags: tuple[str, ...] = ()

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _rate(num: int, den: int, what: str, flags: list) -> float:
    if den == 0:
        flags.append(what)
        return 0.0
    return num / den


def metrics(cm) -> EvaluationReport:
    """Accuracy, macro specificity/recall/precision, F and multiclass MCC.

    Per-class rates come from one-vs-rest counts; a rate with a zero
    denominator counts as 0 and is named in ``flags``. F combines the macro
    precision and recall. MCC is the R_K statistic

        (c s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))

    with c the trace, s the total, p_k column sums and t_k row sums; it is 0
    when the denominator vanishes.
    """
    cm = np.asarray(cm, dtype=np.int64)
    if cm.shape != (N_CLASSES, N_CLASSES):
        raise ValueError("confusion matrix must be 4x4")
    s = int(cm.sum())
    if s < 1:
        raise EmptyMatrix("confusion matrix is empty")
    c = int(np.trace(cm))
    t = cm.sum(axis=1)
    p = cm.sum(axis=0)
    flags: list[str] = []
    per_class = []
    for k in range(N_CLASSES):
        tp = int(cm[k, k])
        fn = int(t[k]) - tp
        fp = int(p[k]) - tp
        tn = s - tp - fn - fp
        rec = _rate(tp, tp + fn, f"recall[{TOKENS[k]}]", flags)
        prec = _rate(tp, tp + fp, f"precision[{TOKENS[k]}]", flags)
        spec = _rate(tn, tn + fp, f"specificity[{TOKENS[k]}]", flags)
        f_k = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        per_class.append(ClassRates(TOKENS[k], tp, fp, fn, tn, rec, prec, spec, f_k))
    recall = sum(r.recall for r in per_class) / N_CLASSES
    precision = sum(r.precision for r in per_class) / N_CLASSES
    specificity = sum(r.specificity for r in per_class) / N_CLASSES
    f_score = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    num = c * s - int((p * t).sum())
    den2 = (s * s - int((p * p).sum())) * (s * s - int((t * t).sum()))
    if den2 == 0:
        flags.append("mcc")
        mcc = 0.0
    else:
        mcc = num / math.sqrt(den2)
    return EvaluationReport(cm, c / s, specificity, recall, precision, f_score, mcc,
                            tuple(per_class), tuple(flags))


def evaluate(model: gbm.GbmModel, fm: FeatureMatrix) -> EvaluationReport:
    return metrics(confusion_matrix(fm.labels, gbm.predict(model, fm.X)))


# Grid search

@dataclass(frozen=True)
class GridRow:
    params: dict
    best_stage: int
    score: float


@dataclass
class GridResult:
    best: gbm.Hyperparams
    best_stage: int
    table: list[GridRow] = field(default_factory=list)


def grid_cells(grid: Mapping[str, Sequence], base: gbm.Hyperparams):
    keys = list(grid)
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        yield params, replace(base, **params)


def grid_search(train: FeatureMatrix, grid: Mapping[str, Sequence],
                base: gbm.Hyperparams = gbm.Hyperparams(), seed: int = 42,
                test: FeatureMatrix | None = None, paper_faithful: bool = False,
                stage_rule: str = "mse") -> GridResult:
    """Score every cell of a hyperparameter grid.

    By default the training rows are split again 80/20 (stratified, seeded)
    and each cell is scored by validation accuracy at the stage count the
    stage rule picks on that validation part. With ``paper_faithful`` the
    cells are fitted on all training rows and both stage choice and scoring
    use ``test``, which leaks the test set into model selection.
    Ties keep the earliest cell in iteration order.
    """
    if not grid:
        grid = {"learning_rate": [base.learning_rate]}
    if any(len(v) == 0 for v in grid.values()):
        raise ValueError("every grid entry needs at least one value")
    if paper_faithful:
        if test is None:
            raise ValueError("paper-faithful grid search needs the test rows")
        warnings.warn("paper-faithful selection tunes on the test set; reported scores are optimistic",
                      stacklevel=2)
        fit_part, val_part = train, test
    else:
        fit_part, val_part = shuffle_split(train, SplitConfig(0.8, seed, True))
    width = fit_part.X.shape[1]
    table = []
    best_row, best_hp = None, None
    for params, hp in grid_cells(grid, base):
        hp = hp.for_width(width)
        model = gbm.fit(fit_part.X, fit_part.labels, hp, fit_part.names)
        stage = gbm.select_stage(model, val_part.X, val_part.labels, stage_rule)
        pred = gbm.predict(gbm.truncate(model, stage), val_part.X)
        row = GridRow(params, stage, float((pred == val_part.labels).mean()))
        table.append(row)
        log.debug("grid %s -> stage %d, score %.4f", params, stage, row.score)
        if best_row is None or row.score > best_row.score:
            best_row, best_hp = row, hp
    return GridResult(best_hp, best_row.best_stage, table)


# Report output

def format_text(rep: EvaluationReport) -> str:
    lines = [
        f"accuracy          = {rep.accuracy!r}",
        f"specificity_macro = {rep.specificity_macro!r}",
        f"recall_macro      = {rep.recall_macro!r}",
        f"precision_macro   = {rep.precision_macro!r}",
        f"f_score           = {rep.f_score!r}",
        f"mcc               = {rep.mcc!r}",
        "",
        "confusion (rows = true, cols = predicted)",
        "        " + "".join(f"{t:>8}" for t in TOKENS),
    ]
    for tok, row in zip(TOKENS, rep.confusion):
        lines.append(f"{tok:>8}" + "".join(f"{int(v):>8}" for v in row))
    lines += ["", "per class: label,recall,precision,specificity,f_score"]
    lines += [f"{r.label},{r.recall!r},{r.precision!r},{r.specificity!r},{r.f_score!r}"
              for r in rep.per_class]
    if rep.flags:
        lines += ["", "zero-denominator rates set to 0: " + ", ".join(rep.flags)]
    return "\n".join(lines) + "\n"


def format_csv(rep: EvaluationReport) -> str:
    lines = ["metric,value"]
    lines += [f"{name},{value!r}" for name, value in rep.values().items()]
    lines += ["", "true\\predicted," + ",".join(TOKENS)]
    for tok, row in zip(TOKENS, rep.confusion):
        lines.append(tok + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_csv_metrics(path) -> dict[str, float]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            if not line.strip():
                break
            name, value = line.strip().split(",")
            out[name] = float(value)
    return out
