"""One-vs-rest person classifiers: logistic regression, linear SVM and an
RBF-kernel SVM approximated with random cosine features.

All three share the same shape: a standardizing :class:`Normalizer` fitted on
the training set, an optional fixed feature map, and a linear score
``X @ W + b`` with one column per class.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DegenerateTrainingError, InvalidArgumentError, InvalidInputError, ModelFormatError
from .features import AggregatedSample, columns_for, columns_hash, samples_matrix

KINDS = ("logistic", "linear-svm", "rbf-approx")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 1.0  # logistic step, relative to 1/Lipschitz of the data term
    svm_learning_rate: float = 30.0  # initial subgradient step, decays as 1/sqrt(t)
    rbf_learning_rate: float = 300.0  # same, for the SVM on random cosine features
    epochs: int = 500
    l2: float = 1e-4  # logistic ridge penalty
    C: float = 1.0  # SVM hinge weight; the penalty is 1 / (C * n)
    rbf_C: float = 100.0
    gamma: float = 0.001
    n_random_features: int = 512

    def __post_init__(self):
        if min(self.learning_rate, self.svm_learning_rate, self.rbf_learning_rate) <= 0 or self.epochs < 1:
            raise InvalidArgumentError("learning rates must be > 0 and epochs >= 1")
        if self.l2 < 0 or not self.C > 0 or not self.rbf_C > 0:
            raise InvalidArgumentError("need l2 >= 0, C > 0, rbf_C > 0")
        if not self.gamma > 0 or self.n_random_features < 1:
            raise InvalidArgumentError("need gamma > 0 and n_random_features >= 1")


@dataclass(frozen=True, eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray  # bool mask over input features; zero-variance ones are dropped

    @classmethod
    def fit(cls, X: np.ndarray) -> "Normalizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        keep = std > 1e-12 * np.maximum(np.abs(mean), 1.0)
        return cls(mean[keep], std[keep], keep)

    @property
    def dropped(self) -> np.ndarray:
        return np.flatnonzero(~self.keep)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.keep.shape[0]:
            raise InvalidInputError(f"expected {self.keep.shape[0]} features, got {X.shape[1]}")
        return (X[:, self.keep] - self.mean) / self.std


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    kind: str
    classes: np.ndarray
    weights: np.ndarray  # (dim, n_classes)
    biases: np.ndarray  # (n_classes,)
    normalizer: Normalizer
    hyperparams: Hyperparams
    seed: int
    f_count: int
    columns_hash: str
    _rff: tuple | None = field(default=None, repr=False)

    def features(self, X: np.ndarray) -> np.ndarray:
        Z = self.normalizer.transform(X)
        if self.kind == "rbf-approx":
            Z = random_cosine_features(Z, *self._rff)
        return Z

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.features(X) @ self.weights + self.biases


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    confusion: np.ndarray  # rows = predicted class, columns = actual class
    classes: np.ndarray

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.f1))


# -- feature maps and losses -------------------------------------------------

def rff_parameters(n_in: int, n_out: int, gamma: float, seed: int):
    """Frequencies ~ N(0, 2 gamma I) and phases ~ U[0, 2 pi) for exp(-gamma |a-b|^2)."""
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, np.sqrt(2.0 * gamma), size=(n_in, n_out))
    b = rng.uniform(0.0, 2.0 * np.pi, size=n_out)
    return W, b


def random_cosine_features(Z: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(2.0 / W.shape[1]) * np.cos(Z @ W + b)


def _one_vs_rest_targets(y: np.ndarray, classes: np.ndarray) -> np.ndarray:
    return np.where(y[:, None] == classes[None, :], 1.0, -1.0)


def logistic_loss_and_grad(W, b, X, Y, l2):
    """Mean one-vs-rest logistic loss plus ``l2/2 |W|^2`` and its gradient.

    ``Y`` holds +-1 targets, one column per class.
    """
    m = Y * (X @ W + b)
    loss = np.logaddexp(0.0, -m).mean(axis=0).sum() + 0.5 * l2 * np.sum(W * W)
    g = -Y * np.exp(-np.logaddexp(0.0, m)) / X.shape[0]  # d loss / d score
    return loss, X.T @ g + l2 * W, g.sum(axis=0)


def hinge_objective(W, b, X, Y, lam):
    margins = Y * (X @ W + b)
    return 0.5 * lam * np.sum(W * W) + np.maximum(0.0, 1.0 - margins).mean(axis=0).sum()


def _lipschitz(X: np.ndarray) -> float:
    # spectral norm of [X, 1] squared over n bounds the curvature of the data term
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    return float(np.linalg.norm(Xa, 2) ** 2 / X.shape[0])


def _fit_logistic(X, Y, hp: Hyperparams):
    W = np.zeros((X.shape[1], Y.shape[1]))
    b = np.zeros(Y.shape[1])
    step = hp.learning_rate / (0.25 * _lipschitz(X) + hp.l2)
    for _ in range(hp.epochs):
        _, gW, gb = logistic_loss_and_grad(W, b, X, Y, hp.l2)
        W -= step * gW
        b -= step * gb
    return W, b


def _fit_svm(X, Y, C: float, lr: float, epochs: int):
    """Full-batch subgradient descent on the primal, keeping the best iterate per class."""
    n = X.shape[0]
    lam = 1.0 / (C * n)
    W = np.zeros((X.shape[1], Y.shape[1]))
    b = np.zeros(Y.shape[1])
    base = lr / np.sqrt(_lipschitz(X))
    best = _hinge_per_class(W, b, X, Y, lam)
    best_W, best_b = W.copy(), b.copy()
    for t in range(1, epochs + 1):
        viol = (Y * (X @ W + b)) < 1.0
        G = -(Y * viol) / n
        gW = X.T @ G + lam * W
        gb = G.sum(axis=0)
        step = base / np.sqrt(t)
        W -= step * gW
        b -= step * gb
        hinge_col = _hinge_per_class(W, b, X, Y, lam)
        better = hinge_col < best
        best[better] = hinge_col[better]
        best_W[:, better] = W[:, better]
        best_b[better] = b[better]
    return best_W, best_b


def _hinge_per_class(W, b, X, Y, lam):
    margins = Y * (X @ W + b)
    return 0.5 * lam * np.sum(W * W, axis=0) + np.maximum(0.0, 1.0 - margins).mean(axis=0)


# -- public API --------------------------------------------------------------

def _check_training_set(X, y):
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("training features contain NaN or infinite values")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DegenerateTrainingError("need at least two classes to train")
    if counts.min() < 2:
        raise DegenerateTrainingError("every class needs at least two samples")
    return classes


def train_arrays(X, y, kind: str = "logistic", hyperparams: Hyperparams = Hyperparams(),
                 rng_seed: int = 0, f_count: int = 1) -> ClassifierModel:
    if kind not in KINDS:
        raise InvalidArgumentError(f"unknown classifier kind {kind!r}; pick one of {KINDS}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = _check_training_set(X, y)
    norm = Normalizer.fit(X)
    Z = norm.transform(X)
    Y = _one_vs_rest_targets(y, classes)
    rff = None
    if kind == "logistic":
        W, b = _fit_logistic(Z, Y, hyperparams)
    elif kind == "linear-svm":
        W, b = _fit_svm(Z, Y, hyperparams.C, hyperparams.svm_learning_rate, hyperparams.epochs)
    else:
        rff = rff_parameters(Z.shape[1], hyperparams.n_random_features, hyperparams.gamma, rng_seed)
        W, b = _fit_svm(random_cosine_features(Z, *rff), Y, hyperparams.rbf_C,
                        hyperparams.rbf_learning_rate, hyperparams.epochs)
    return ClassifierModel(kind, classes, W, b, norm, hyperparams, int(rng_seed), int(f_count),
                           columns_hash(columns_for(f_count)), rff)


def train(samples, kind: str = "logistic", hyperparams: Hyperparams = Hyperparams(),
          rng_seed: int = 0) -> ClassifierModel:
    samples = list(samples)
    X, y = samples_matrix(samples)
    if np.any(y < 0):
        raise InvalidInputError("training samples must be labelled")
    return train_arrays(X, y, kind, hyperparams, rng_seed, samples[0].f_count)


def softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def predict_arrays(model: ClassifierModel, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("features contain NaN or infinite values")
    s = model.scores(X)
    k = np.argmax(s, axis=1)
    return model.classes[k], softmax(s)[np.arange(s.shape[0]), k]


def predict(model: ClassifierModel, sample) -> tuple[int, float]:
    """Label and softmax confidence for one sample."""
    x = sample.features if isinstance(sample, AggregatedSample) else sample
    labels, conf = predict_arrays(model, x)
    return int(labels[0]), float(conf[0])


def metrics_from_labels(y_true, y_pred, classes=None) -> Metrics:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise InvalidInputError("cannot evaluate on an empty set")
    if classes is None:
        classes = np.unique(np.concatenate([y_true, y_pred]))
    classes = np.asarray(classes)
    pos = {c: i for i, c in enumerate(classes.tolist())}
    conf = np.zeros((classes.size, classes.size), dtype=np.int64)
    np.add.at(conf, ([pos[v] for v in y_pred.tolist()], [pos[v] for v in y_true.tolist()]), 1)
    tp = np.diag(conf).astype(float)
    predicted = conf.sum(axis=1)
    actual = conf.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(actual > 0, tp / actual, 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return Metrics(float(tp.sum() / y_true.size), precision, recall, f1, conf, classes)


def evaluate(model: ClassifierModel, samples) -> Metrics:
    X, y = samples_matrix(list(samples))
    pred, _ = predict_arrays(model, X)
    return metrics_from_labels(y, pred, np.union1d(model.classes, y))


# -- resampling --------------------------------------------------------------

def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """A row order that depends only on the data, not on how it was listed."""
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys + [y])


def stratified_folds(y: np.ndarray, folds: int, seed: int, X: np.ndarray | None = None) -> np.ndarray:
    """Fold id per sample.

    Samples are put in canonical order, shuffled within each class, and dealt
    round-robin; the dealing position carries over between classes so fold
    sizes stay balanced even when a class has fewer members than folds.
    """
    n = y.shape[0]
    if folds < 2 or folds > n:
        raise InvalidArgumentError(f"folds must be in [2, {n}], got {folds}")
    order = _canonical_order(X, y) if X is not None else np.argsort(y, kind="stable")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        members = order[y[order] == c]
        members = members[rng.permutation(members.size)]
        fold_of[members] = (offset + np.arange(members.size)) % folds
        offset += members.size
    return fold_of


@dataclass(frozen=True)
class CrossValidation:
    fold_metrics: list
    accuracy_mean: float
    accuracy_std: float
    precision_mean: float
    recall_mean: float
    f1_mean: float
    f1_std: float


def cross_validate(samples, kind: str = "logistic", hyperparams: Hyperparams = Hyperparams(),
                   folds: int = 10, seed: int = 0) -> CrossValidation:
    samples = list(samples)
    X, y = samples_matrix(samples)
    f_count = samples[0].f_count
    fold_of = stratified_folds(y, folds, seed, X)
    per_fold = []
    for k in range(folds):
        test = fold_of == k
        model = train_arrays(X[~test], y[~test], kind, hyperparams, seed + k, f_count)
        pred, _ = predict_arrays(model, X[test])
        per_fold.append(metrics_from_labels(y[test], pred, np.unique(y)))
    acc = np.array([m.accuracy for m in per_fold])
    f1 = np.array([m.macro_f1 for m in per_fold])
    return CrossValidation(per_fold, float(acc.mean()), float(acc.std()),
                           float(np.mean([m.precision.mean() for m in per_fold])),
                           float(np.mean([m.recall.mean() for m in per_fold])),
                           float(f1.mean()), float(f1.std()))


def holdout_split(y: np.ndarray, test_fraction: float, seed: int, X=None):
    """Stratified (train_idx, test_idx) with round(test_fraction * n_c) test rows per class."""
    if not 0 < test_fraction < 1:
        raise InvalidArgumentError("test_fraction must lie in (0, 1)")
    order = _canonical_order(X, y) if X is not None else np.argsort(y, kind="stable")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in np.unique(y):
        members = order[y[order] == c]
        members = members[rng.permutation(members.size)]
        n_test = min(max(int(round(test_fraction * members.size)), 1), members.size - 1)
        test_idx.append(members[:n_test])
        train_idx.append(members[n_test:])
    return np.concatenate(train_idx), np.concatenate(test_idx)


def learning_curve(samples, kind: str = "logistic", hyperparams: Hyperparams = Hyperparams(),
                   train_sizes=(5, 10, 20), seed: int = 0, test_fraction: float = 0.3,
                   repeats: int = 1) -> dict[int, float]:
    """Mean held-out accuracy for each per-class training-set size."""
    samples = list(samples)
    X, y = samples_matrix(samples)
    f_count = samples[0].f_count
    train_idx, test_idx = holdout_split(y, test_fraction, seed, X)
    pool_by_class = {c: train_idx[y[train_idx] == c] for c in np.unique(y)}
    smallest = min(v.size for v in pool_by_class.values())
    sizes = sorted({int(s) for s in train_sizes})
    if not sizes or sizes[0] < 2 or sizes[-1] > smallest:
        raise InvalidArgumentError(f"training sizes must lie in [2, {smallest}] per class")
    rng = np.random.default_rng(seed)
    out = {}
    for size in sizes:
        accs = []
        for r in range(repeats):
            pick = np.concatenate([v if size == v.size else rng.choice(v, size, replace=False)
                                   for v in pool_by_class.values()])
            model = train_arrays(X[pick], y[pick], kind, hyperparams, seed + r, f_count)
            pred, _ = predict_arrays(model, X[test_idx])
            accs.append(float(np.mean(pred == y[test_idx])))
        out[size] = float(np.mean(accs))
    return out


# -- persistence -------------------------------------------------------------

def model_to_dict(model: ClassifierModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "classes": model.classes.tolist(),
        "hyperparams": asdict(model.hyperparams),
        "seed": model.seed,
        "f_count": model.f_count,
        "columns_hash": model.columns_hash,
        "normalizer": {"mean": model.normalizer.mean.tolist(),
                       "std": model.normalizer.std.tolist(),
                       "keep": model.normalizer.keep.astype(int).tolist()},
        "weights": model.weights.tolist(),
        "biases": model.biases.tolist(),
    }


def model_from_dict(d: dict) -> ClassifierModel:
    try:
        if d["format_version"] != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {d['format_version']}")
        f_count = int(d["f_count"])
        if d["columns_hash"] != columns_hash(columns_for(f_count)):
            raise ModelFormatError("model was trained on a different feature column order")
        hp = replace(Hyperparams(), **d["hyperparams"])
        n = d["normalizer"]
        norm = Normalizer(np.array(n["mean"], float), np.array(n["std"], float),
                          np.array(n["keep"], bool))
        W = np.array(d["weights"], float).reshape(-1, len(d["classes"]))
        rff = None
        if d["kind"] == "rbf-approx":
            rff = rff_parameters(int(norm.keep.sum()), hp.n_random_features, hp.gamma, int(d["seed"]))
        elif d["kind"] not in KINDS:
            raise ModelFormatError(f"unknown classifier kind {d['kind']!r}")
        return ClassifierModel(d["kind"], np.array(d["classes"]), W, np.array(d["biases"], float),
                               norm, hp, int(d["seed"]), f_count, d["columns_hash"], rff)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def save_model(model: ClassifierModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> ClassifierModel:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(d)
