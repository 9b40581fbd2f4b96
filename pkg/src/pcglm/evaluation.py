"""Classification metrics, stratified k-fold cross-validation and comparisons."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, PcglmError, SchemaError, ShapeError
from .pipeline import fit_pipeline, predict_with_interval


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    # names of quantities whose 0/0 was defined as 0
    degenerate: tuple = ()

    def as_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "degenerate": list(self.degenerate)}


def confusion(y_true, y_pred, positive=1):
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if y_true.shape != y_pred.shape:
        raise ShapeError("y_true and y_pred differ in length", true=len(y_true), pred=len(y_pred))
    t = y_true == positive
    p = y_pred == positive
    return ConfusionCounts(
        tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)), tn=int(np.sum(~t & ~p)), fn=int(np.sum(t & ~p))
    )


def _ratio(num, den):
    return (num / den, False) if den else (0.0, True)


def precision_recall_f1(c):
    """Precision, recall and their harmonic mean; 0/0 counts as 0 and is flagged."""
    precision, dp = _ratio(c.tp, c.tp + c.fp)
    recall, dr = _ratio(c.tp, c.tp + c.fn)
    f1, df = _ratio(2.0 * precision * recall, precision + recall)
    flags = tuple(name for name, bad in (("precision", dp), ("recall", dr), ("f1", df)) if bad)
    return Metrics(precision, recall, f1, flags)


def f1_score(precision, recall):
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def both_classes(y_true, y_pred):
    """Metrics with each class treated as the positive one in turn."""
    return {
        cls: precision_recall_f1(confusion(y_true, y_pred, positive=cls)) for cls in (1, 0)
    }


def stratified_folds(y, k, seed):
    """Assign each row to one of ``k`` folds, preserving class proportions.

    Rows of each class are shuffled and dealt round-robin, continuing the
    deal across classes, so fold sizes differ by at most one overall and per
    class.
    """
    y = np.asarray(y).ravel()
    n = len(y)
    if k < 2:
        raise DataError("k must be >= 2", k=k)
    if n < k:
        raise DataError("fewer rows than folds", rows=n, k=k)
    rng = np.random.default_rng(seed)
    order = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        order.extend(rng.permutation(idx).tolist())
    fold = np.empty(n, dtype=int)
    fold[np.array(order, dtype=int)] = np.arange(n) % k
    return fold


@dataclass
class FoldResult:
    fold: int
    train_index: np.ndarray
    test_index: np.ndarray
    counts: dict = None  # class -> ConfusionCounts
    metrics: dict = None  # class -> Metrics
    error: dict = None


@dataclass
class CvReport:
    k: int
    seed: int
    folds: list = field(default_factory=list)
    pooled_counts: dict = None
    pooled: dict = None
    mean: dict = None

    def to_dict(self):
        def cls_block(d, conv):
            return None if d is None else {("dac" if c == 1 else "non_dac"): conv(v) for c, v in d.items()}

        counts = lambda c: {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn}  # noqa: E731
        return {
            "k": self.k,
            "seed": self.seed,
            "pooled": cls_block(self.pooled, Metrics.as_dict),
            "pooled_counts": cls_block(self.pooled_counts, counts),
            "fold_mean": cls_block(self.mean, lambda m: m),
            "folds": [
                {
                    "fold": f.fold,
                    "test_index": f.test_index.tolist(),
                    "metrics": cls_block(f.metrics, Metrics.as_dict),
                    "counts": cls_block(f.counts, counts),
                    "error": f.error,
                }
                for f in self.folds
            ],
        }


def kfold_cv(X, y, feature_names, k=5, partition=None, alpha=0.05, seed=0, threshold=0.5, **fit_kwargs):
    """Stratified k-fold cross-validation of the full pipeline.

    Each fold refits PCA, elimination and the GLM on the training rows and
    classifies the held-out rows at ``threshold``. Folds that fail to fit
    are recorded with their error; the rest still count.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    fold_of = stratified_folds(y, k, seed)
    report = CvReport(k=k, seed=seed)
    pooled = {1: ConfusionCounts(), 0: ConfusionCounts()}
    sums = {1: np.zeros(3), 0: np.zeros(3)}
    n_ok = 0
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        res = FoldResult(fold=f, train_index=train, test_index=test)
        try:
            if len(np.unique(y[train])) < 2:
                raise DataError("training folds contain a single class", fold=f)
            model = fit_pipeline(X[train], y[train], feature_names, partition=partition, alpha=alpha, **fit_kwargs)
            prob, _, _ = predict_with_interval(model, X[test])
        except PcglmError as exc:
            res.error = exc.payload()
            report.folds.append(res)
            continue
        pred = (prob > threshold).astype(float)
        res.counts = {cls: confusion(y[test], pred, positive=cls) for cls in (1, 0)}
        res.metrics = {cls: precision_recall_f1(c) for cls, c in res.counts.items()}
        for cls in (1, 0):
            pooled[cls] = pooled[cls] + res.counts[cls]
            m = res.metrics[cls]
            sums[cls] += (m.precision, m.recall, m.f1)
        n_ok += 1
        report.folds.append(res)
    report.pooled_counts = pooled
    report.pooled = {cls: precision_recall_f1(c) for cls, c in pooled.items()}
    if n_ok:
        report.mean = {
            cls: dict(zip(("precision", "recall", "f1"), (sums[cls] / n_ok).tolist())) for cls in (1, 0)
        }
    return report


def interval_width_by_class(lo, hi, labels):
    """Mean interval width per true class; an absent class maps to None."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if not (lo.shape == hi.shape == labels.shape):
        raise ShapeError("interval and label arrays differ in length")
    width = hi - lo
    out = {}
    for cls in (1, 0):
        mask = labels == cls
        out[cls] = float(width[mask].mean()) if mask.any() else None
    return out


def read_predictions_csv(path):
    """Read an external ``geoid,prediction`` file into a dict."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"geoid", "prediction"} <= set(reader.fieldnames):
            raise SchemaError("predictions file needs columns geoid,prediction", path=str(path))
        out = {}
        for line, row in enumerate(reader, start=2):
            try:
                out[row["geoid"].strip()] = float(row["prediction"])
            except ValueError as exc:
                raise SchemaError(f"bad prediction value on line {line}", path=str(path), line=line) from exc
    return out


@dataclass
class ComparisonRow:
    model: str
    metrics: dict
    coverage: float
    matched: int
    excluded: int
    unmatched_ids: list


def compare_external(predictions, y_true, threshold=0.5):
    """Score externally produced predictions against true labels.

    Args:
        predictions: model name -> {geoid: prediction}; predictions may be
            0/1 labels or probabilities (thresholded at ``threshold``).
        y_true: {geoid: 0/1}.
    """
    rows = []
    for name in predictions:
        preds = predictions[name]
        ids = [g for g in y_true if g in preds]
        unmatched = sorted(set(preds) - set(y_true))
        truth = np.array([y_true[g] for g in ids], dtype=float)
        pred = np.array([1.0 if preds[g] > threshold else 0.0 for g in ids])
        rows.append(
            ComparisonRow(
                model=name,
                metrics=both_classes(truth, pred),
                coverage=len(ids) / len(y_true) if y_true else math.nan,
                matched=len(ids),
                excluded=len(y_true) - len(ids),
                unmatched_ids=unmatched,
            )
        )
    return rows
