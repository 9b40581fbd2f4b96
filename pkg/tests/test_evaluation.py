import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcglm.errors import DataError, SchemaError, ShapeError
from pcglm.evaluation import (
    ConfusionCounts,
    both_classes,
    compare_external,
    confusion,
    f1_score,
    interval_width_by_class,
    kfold_cv,
    precision_recall_f1,
    read_predictions_csv,
    stratified_folds,
)
from pcglm.glm import expit
from pcglm.pipeline import FeaturePartition

binary = st.lists(st.integers(0, 1), min_size=0, max_size=60)


def test_confusion_examples():
    assert confusion([1, 0, 1], [1, 0, 1]) == ConfusionCounts(tp=2, fp=0, tn=1, fn=0)
    assert confusion([1, 0], [0, 1]) == ConfusionCounts(tp=0, fp=1, tn=0, fn=1)
    assert confusion([], []) == ConfusionCounts()


def test_confusion_negative_class():
    assert confusion([1, 0, 0], [1, 0, 1], positive=0) == ConfusionCounts(tp=1, fp=0, tn=1, fn=1)


def test_confusion_length_mismatch():
    with pytest.raises(ShapeError):
        confusion([1, 0], [1])


def test_reported_f1():
    assert abs(f1_score(0.878, 0.544) - 0.672) < 0.0005


def test_perfect_classifier():
    m = precision_recall_f1(confusion([1, 0, 1, 1], [1, 0, 1, 1]))
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0) and m.degenerate == ()


def test_degenerate_zero_over_zero():
    m = precision_recall_f1(ConfusionCounts(tp=0, fp=0, tn=3, fn=2))
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
    assert "precision" in m.degenerate and "f1" in m.degenerate


@settings(max_examples=200)
@given(st.integers(1, 100), st.integers(0, 100), st.integers(0, 100))
def test_harmonic_mean_bound(tp, fp, fn):
    m = precision_recall_f1(ConfusionCounts(tp=tp, fp=fp, tn=0, fn=fn))
    assert min(m.precision, m.recall) - 1e-15 <= m.f1 <= max(m.precision, m.recall) + 1e-15


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=50), st.randoms())
def test_permutation_invariance(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = both_classes([t for t, _ in pairs], [p for _, p in pairs])
    b = both_classes([t for t, _ in shuffled], [p for _, p in shuffled])
    assert a == b


def test_fold_sizes_103():
    y = np.array([1] * 23 + [0] * 80)
    fold = stratified_folds(y, 5, seed=3)
    assert sorted(np.bincount(fold, minlength=5).tolist(), reverse=True) == [21, 21, 21, 20, 20]


@settings(max_examples=60, deadline=None)
@given(n_pos=st.integers(1, 60), n_neg=st.integers(1, 60), k=st.integers(2, 7), seed=st.integers(0, 99))
def test_folds_stratified(n_pos, n_neg, k, seed):
    if n_pos + n_neg < k:
        return
    y = np.array([1] * n_pos + [0] * n_neg)
    fold = stratified_folds(y, k, seed)
    sizes = np.bincount(fold, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    pos = np.bincount(fold[y == 1], minlength=k)
    assert np.all(np.abs(pos - sizes * n_pos / len(y)) <= 1 + 1e-9)


def test_folds_deterministic():
    y = np.random.default_rng(0).integers(0, 2, 50)
    np.testing.assert_array_equal(stratified_folds(y, 5, 7), stratified_folds(y, 5, 7))


def test_folds_bad_k():
    with pytest.raises(DataError):
        stratified_folds([0, 1, 0], 1, 0)
    with pytest.raises(DataError):
        stratified_folds([0, 1], 3, 0)


def cv_data(seed=0, n=150):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4)) * [1, 2, 3, 4] + 10
    y = (rng.uniform(size=n) < expit(1.5 * (X[:, 0] - 10) - 0.5 * (X[:, 2] - 10) / 3)).astype(float)
    return X, y


NAMES = ("a", "b", "c", "d")
PART = FeaturePartition(NAMES, ())


def test_cv_pooled_counts_are_fold_sums():
    X, y = cv_data()
    rep = kfold_cv(X, y, NAMES, k=5, partition=PART, seed=1)
    for cls in (1, 0):
        total = ConfusionCounts()
        for f in rep.folds:
            total = total + f.counts[cls]
        assert total == rep.pooled_counts[cls]
    assert rep.pooled_counts[1].total == len(y)
    test_rows = np.sort(np.concatenate([f.test_index for f in rep.folds]))
    np.testing.assert_array_equal(test_rows, np.arange(len(y)))


def test_cv_deterministic():
    X, y = cv_data(2)
    a = kfold_cv(X, y, NAMES, k=5, partition=PART, seed=9).to_dict()
    b = kfold_cv(X, y, NAMES, k=5, partition=PART, seed=9).to_dict()
    assert a == b


def test_leave_one_out_separable():
    x = np.array([-3.0, -2.5, -2, -1.5, -1, 1, 1.5, 2, 2.5, 3])
    X = np.column_stack([x, np.random.default_rng(0).normal(size=10) * 0.01])
    y = (x > 0).astype(float)
    rep = kfold_cv(X, y, ("a", "b"), k=10, partition=FeaturePartition(("a", "b"), ()), ridge=0.1, eliminate=False)
    c = rep.pooled_counts[1]
    assert (c.tp + c.tn) / c.total == 1.0


def test_cv_single_class_fold_recorded():
    X, y = cv_data(3, n=30)
    y[:] = 0
    y[0] = 1
    rep = kfold_cv(X, y, NAMES, k=5, partition=PART, seed=0)
    assert len(rep.folds) == 5
    single = [f for f in rep.folds if f.error and "single class" in f.error["message"]]
    assert len(single) == 1 and single[0].error["code"] == "data_error"
    assert 0 in single[0].test_index


def test_interval_widths():
    assert interval_width_by_class([0.4, 0.4], [0.6, 0.6], [1, 0]) == pytest.approx({1: 0.2, 0: 0.2})
    assert interval_width_by_class([0.0, 0.0], [0.1, 0.3], [1, 0]) == pytest.approx({1: 0.1, 0: 0.3})
    assert interval_width_by_class([0.0], [0.1], [0])[1] is None
    with pytest.raises(ShapeError):
        interval_width_by_class([0.0], [0.1, 0.2], [0, 1])


@pytest.fixture
def truth():
    rng = np.random.default_rng(4)
    ids = [f"530330{i:05d}" for i in range(100)]
    return dict(zip(ids, rng.integers(0, 2, 100).tolist()))


def test_compare_duplicate_of_own_predictions(truth):
    prob = np.random.default_rng(5).uniform(size=len(truth))
    own = dict(zip(truth, prob))
    rows = compare_external({"pcglm": own, "copy": dict(own)}, truth)
    assert rows[0].metrics == rows[1].metrics
    yt = np.array(list(truth.values()))
    assert rows[0].metrics == both_classes(yt, (prob > 0.5).astype(float))


def test_compare_flipped(truth):
    preds = {g: 1 - v for g, v in truth.items()}
    (row,) = compare_external({"flip": preds}, truth)
    c = confusion(list(truth.values()), list(preds.values()))
    assert c.tp == 0 and c.tn == 0
    assert row.metrics[1].precision == 0.0 and row.metrics[1].recall == 0.0


def test_compare_missing_ids(truth):
    ids = list(truth)
    preds = {g: truth[g] for g in ids[10:]}
    preds["99999999999"] = 1
    (row,) = compare_external({"m": preds}, truth)
    assert row.coverage == 0.9 and row.matched == 90 and row.excluded == 10
    assert row.unmatched_ids == ["99999999999"]
    assert row.metrics[1].f1 == 1.0


def test_read_predictions(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("geoid,prediction\n53033000100,0.7\n53033000200,0\n")
    assert read_predictions_csv(p) == {"53033000100": 0.7, "53033000200": 0.0}
    p.write_text("id,prediction\n1,0\n")
    with pytest.raises(SchemaError):
        read_predictions_csv(p)
