from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from support import blobs

from footfall.classify import (KINDS, ClassifierModel, Hyperparams, Normalizer, cross_validate,
                               evaluate, hinge_objective, holdout_split, learning_curve,
                               load_model, logistic_loss_and_grad, metrics_from_labels,
                               model_from_dict, model_to_dict, predict, predict_arrays, save_model,
                               stratified_folds, train, train_arrays)
from footfall.errors import (DegenerateTrainingError, InvalidArgumentError, InvalidInputError,
                             ModelFormatError)
from footfall.features import AggregatedSample


def as_samples(X, y, f_count=1):
    return [AggregatedSample(x, f_count, int(label)) for x, label in zip(X, y)]


def blob_split(seed=0, **kw):
    X, y = blobs(seed=seed, **kw)
    tr, te = holdout_split(y, 0.3, seed, X)
    return X[tr], y[tr], X[te], y[te]


@pytest.mark.parametrize("kind", KINDS)
def test_separable_blobs(kind):
    Xtr, ytr, Xte, yte = blob_split()
    model = train_arrays(Xtr, ytr, kind)
    pred, conf = predict_arrays(model, Xte)
    assert np.mean(pred == yte) >= 0.95
    assert np.all((conf > 0) & (conf <= 1))


@pytest.mark.parametrize("kind", KINDS)
def test_single_class_is_degenerate(kind):
    X = np.random.default_rng(0).normal(size=(10, 3))
    with pytest.raises(DegenerateTrainingError):
        train_arrays(X, np.zeros(10, int), kind)


def test_too_few_samples_per_class():
    X = np.random.default_rng(0).normal(size=(5, 3))
    with pytest.raises(DegenerateTrainingError):
        train_arrays(X, np.array([0, 0, 0, 0, 1]))


def test_nan_features_rejected():
    X, y = blobs()
    X[3, 2] = np.nan
    with pytest.raises(InvalidInputError):
        train_arrays(X, y)
    model = train_arrays(*blobs())
    with pytest.raises(InvalidInputError):
        predict_arrays(model, np.full((1, 5), np.nan))


def test_unknown_kind():
    with pytest.raises(InvalidArgumentError):
        train_arrays(*blobs(), kind="lda")


@pytest.mark.parametrize("kind", KINDS)
def test_training_is_deterministic(kind):
    X, y = blobs()
    a = train_arrays(X, y, kind, rng_seed=4)
    b = train_arrays(X, y, kind, rng_seed=4)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.biases.tobytes() == b.biases.tobytes()


@pytest.mark.parametrize("kind", KINDS)
def test_class_centroid_predicts_its_class(kind):
    X, y = blobs()
    model = train_arrays(X, y, kind)
    for k in range(3):
        assert predict(model, X[y == k].mean(axis=0))[0] == k


def test_argmax_survives_positive_score_scaling():
    X, y = blobs()
    model = train_arrays(X, y)
    scaled = ClassifierModel(model.kind, model.classes, 7.5 * model.weights, 7.5 * model.biases,
                             model.normalizer, model.hyperparams, model.seed, model.f_count,
                             model.columns_hash)
    np.testing.assert_array_equal(predict_arrays(scaled, X)[0], predict_arrays(model, X)[0])


@pytest.mark.parametrize("kind", KINDS)
def test_identical_class_distributions_give_uninformed_confidence(kind):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(400, 4))
    y = np.tile(np.arange(4), 100)
    model = train_arrays(X, y, kind)
    _, conf = predict_arrays(model, rng.normal(size=(50, 4)))
    assert abs(conf.mean() - 0.25) <= 0.1


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(5, 4))
    Y = np.where(rng.random((5, 3)) < 0.5, 1.0, -1.0)
    W, b = rng.normal(size=(4, 3)), rng.normal(size=3)
    _, gW, gb = logistic_loss_and_grad(W, b, X, Y, 0.1)
    h = 1e-6
    numW = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        numW[idx] = (logistic_loss_and_grad(Wp, b, X, Y, 0.1)[0]
                     - logistic_loss_and_grad(Wm, b, X, Y, 0.1)[0]) / (2 * h)
        assert abs(numW[idx] - gW[idx]) <= 1e-4 * max(abs(numW[idx]), 1e-8)
    numb = np.array([(logistic_loss_and_grad(W, b + h * e, X, Y, 0.1)[0]
                      - logistic_loss_and_grad(W, b - h * e, X, Y, 0.1)[0]) / (2 * h)
                     for e in np.eye(3)])
    np.testing.assert_allclose(gb, numb, rtol=1e-4)


def test_linear_svm_reaches_zero_hinge_on_separable_data():
    X, y = blobs(sep=10.0)
    # with a weak hinge weight the regularized optimum itself trades a little
    # hinge for a smaller norm, so use one where the hard margin is optimal
    model = train_arrays(X, y, "linear-svm", Hyperparams(C=100.0))
    Z = model.features(X)
    Y = np.where(y[:, None] == model.classes[None, :], 1.0, -1.0)
    margins = Y * (Z @ model.weights + model.biases)
    assert np.all(margins >= 1.0)
    assert hinge_objective(model.weights, model.biases, Z, Y, 0.0) == 0.0


def test_vanishing_gamma_falls_back_to_class_prior():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(120, 3)) * 3.0
    y = np.array([0] * 80 + [1] * 20 + [2] * 20)
    rng.shuffle(y)
    model = train_arrays(X, y, "rbf-approx", Hyperparams(gamma=1e-9))
    pred, _ = predict_arrays(model, rng.normal(size=(40, 3)) * 3.0)
    assert np.mean(pred == 0) >= 0.9


def naive_metrics(y_true, y_pred, classes):
    pairs = Counter(zip(y_pred, y_true))
    acc = sum(pairs[(c, c)] for c in classes) / len(y_true)
    out = []
    for c in classes:
        tp = pairs[(c, c)]
        pred_c = sum(v for (p, _), v in pairs.items() if p == c)
        true_c = sum(v for (_, t), v in pairs.items() if t == c)
        prec = tp / pred_c if pred_c else 0.0
        rec = tp / true_c if true_c else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out.append((prec, rec, f1))
    conf = [[pairs[(p, t)] for t in classes] for p in classes]
    return acc, out, conf


@settings(max_examples=100)
@given(data=st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=80))
def test_metrics_match_naive_counter(data):
    y_true = np.array([t for t, _ in data])
    y_pred = np.array([p for _, p in data])
    classes = np.arange(6)
    m = metrics_from_labels(y_true, y_pred, classes)
    acc, per_class, conf = naive_metrics(y_true.tolist(), y_pred.tolist(), list(range(6)))
    assert m.accuracy == acc
    assert m.confusion.tolist() == conf
    for k, (p, r, f) in enumerate(per_class):
        assert (m.precision[k], m.recall[k], m.f1[k]) == (p, r, f)


def test_perfect_and_constant_predictors():
    y = np.repeat(np.arange(8), 5)
    m = metrics_from_labels(y, y)
    assert m.accuracy == 1.0
    np.testing.assert_array_equal(m.confusion, 5 * np.eye(8, dtype=int))
    assert metrics_from_labels(y, np.zeros_like(y)).accuracy == 0.125
    with pytest.raises(InvalidInputError):
        metrics_from_labels([], [])


def test_confusion_rows_are_predictions():
    m = metrics_from_labels([0, 0, 1], [1, 1, 1], [0, 1])
    assert m.confusion.tolist() == [[0, 0], [2, 1]]


def test_evaluate_on_samples():
    X, y = blobs()
    model = train(as_samples(X, y))
    m = evaluate(model, as_samples(X, y))
    assert m.accuracy >= 0.95
    assert m.confusion.sum() == len(y)


def test_normalizer_uses_training_statistics_only():
    Xtr, ytr, Xte, _ = blob_split()
    model = train_arrays(Xtr, ytr)
    probe = Xte[:1]
    before = predict_arrays(model, probe)
    # evaluating other data, however odd, must not change anything for the probe
    predict_arrays(model, np.vstack([Xte * 100.0, probe]))
    after = predict_arrays(model, probe)
    assert before[0] == after[0] and before[1] == after[1]
    np.testing.assert_array_equal(model.normalizer.mean, Xtr.mean(axis=0))


def test_normalizer_drops_constant_columns():
    X = np.column_stack([np.arange(6.0), np.full(6, 3.0), np.arange(6.0) ** 2])
    n = Normalizer.fit(X)
    assert n.dropped.tolist() == [1]
    assert n.transform(X).shape == (6, 2)
    with pytest.raises(InvalidInputError):
        n.transform(np.zeros((1, 2)))


def test_two_fold_cv_on_symmetric_data():
    X, y = blobs(n_per_class=40)
    cv = cross_validate(as_samples(X, y), "logistic", folds=2, seed=0)
    a, b = (m.accuracy for m in cv.fold_metrics)
    assert abs(a - b) <= 0.05


def test_leave_one_out_runs():
    X, y = blobs(n_per_class=4, n_classes=2)
    cv = cross_validate(as_samples(X, y), "logistic", folds=8, seed=0)
    assert len(cv.fold_metrics) == 8
    assert 0.0 <= cv.accuracy_mean <= 1.0


def test_cv_ignores_sample_order():
    X, y = blobs(n_per_class=20)
    perm = np.random.default_rng(9).permutation(len(y))
    a = cross_validate(as_samples(X, y), "linear-svm", folds=5, seed=3)
    b = cross_validate(as_samples(X[perm], y[perm]), "linear-svm", folds=5, seed=3)
    assert a.accuracy_mean == b.accuracy_mean and a.f1_mean == b.f1_mean


def test_folds_are_stratified_and_balanced():
    y = np.repeat(np.arange(3), [10, 7, 4])
    f = stratified_folds(y, 4, 0)
    sizes = np.bincount(f)
    assert sizes.max() - sizes.min() <= 1
    for c in range(3):
        per = np.bincount(f[y == c], minlength=4)
        assert per.max() - per.min() <= 1
    with pytest.raises(InvalidArgumentError):
        stratified_folds(y, 1, 0)


def test_learning_curve_trend_and_dedup():
    X, y = blobs(n_per_class=60)
    curve = learning_curve(as_samples(X, y), "logistic", train_sizes=[3, 40, 3, 10], seed=0)
    assert list(curve) == [3, 10, 40]
    assert curve[40] >= curve[3] - 0.02


def test_learning_curve_full_pool_matches_plain_training():
    X, y = blobs(n_per_class=30)
    samples = as_samples(X, y)
    tr, te = holdout_split(y, 0.3, 0, X)
    pool = int(np.bincount(y[tr]).min())
    curve = learning_curve(samples, "logistic", train_sizes=[pool], seed=0)
    model = train_arrays(X[tr], y[tr], "logistic", rng_seed=0)
    assert curve[pool] == np.mean(predict_arrays(model, X[te])[0] == y[te])


def test_learning_curve_size_too_large():
    X, y = blobs(n_per_class=10)
    with pytest.raises(InvalidArgumentError):
        learning_curve(as_samples(X, y), train_sizes=[50])


@pytest.mark.parametrize("kind", KINDS)
def test_model_persistence_round_trip(kind, tmp_path):
    X, y = blobs()
    # a full 134-column layout, as multi-footstep samples carry
    X134 = np.hstack([X, np.random.default_rng(0).normal(size=(X.shape[0], 128))])
    model = train(as_samples(X134, y, f_count=3), kind, rng_seed=3)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    a, b = predict_arrays(model, X134), predict_arrays(back, X134)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12)


def test_model_hash_and_version_checked(tmp_path):
    X, y = blobs()
    d = model_to_dict(train_arrays(X, y, f_count=1))
    model_from_dict(d)
    with pytest.raises(ModelFormatError):
        model_from_dict({**d, "columns_hash": "0" * 64})
    with pytest.raises(ModelFormatError):
        model_from_dict({**d, "format_version": 99})
    with pytest.raises(ModelFormatError):
        model_from_dict({k: v for k, v in d.items() if k != "weights"})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "bad.json")


def test_hyperparams_validation():
    with pytest.raises(InvalidArgumentError):
        Hyperparams(learning_rate=0.0)
    with pytest.raises(InvalidArgumentError):
        Hyperparams(gamma=-1.0)
