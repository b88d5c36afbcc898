"""Ensemble classifiers over the CART grower.

* multiclass gradient-boosted trees (softmax link, multinomial deviance,
  one-step Newton leaf values) -- the primary model;
* random forests and extra-trees (soft voting across trees);
* SAMME AdaBoost over shallow trees;
* an unweighted soft-voting combiner;
* a majority-class baseline for sanity checks.

Every model exposes ``classes``, ``predict_proba`` (rows sum to 1) and
``predict`` (argmax, lowest ordinal wins ties), and serializes through
``to_payload``/``from_payload``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, TrainingError
from .tree import DecisionTree, TreeParams, fit_tree


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shift-stabilized."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def multinomial_deviance(scores: np.ndarray, labels: np.ndarray) -> float:
    """Sum over rows of -log softmax(scores)[label]."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(labels)), labels]
    return float((log_norm - picked).sum())


def deviance_gradient(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Analytic gradient of multinomial_deviance: softmax(F) - onehot(y)."""
    grad = softmax(scores)
    grad[np.arange(len(labels)), labels] -= 1.0
    return grad


def _argmax_labels(probabilities: np.ndarray) -> np.ndarray:
    return np.argmax(probabilities, axis=1)  # first maximum: lowest ordinal


def _check_columns(matrix, n_features: int | None) -> np.ndarray:
    X = np.asarray(matrix, dtype=float)
    if n_features is not None and X.shape[1] != n_features:
        raise DomainError(
            f"matrix has {X.shape[1]} columns, model was trained on {n_features}"
        )
    return X


def balanced_class_weights(labels, n_classes: int = 4) -> np.ndarray:
    """Per-class weight n_total / (K * n_c); every class must be present."""
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels, minlength=n_classes)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise DomainError(f"class {missing} absent; balanced weights undefined")
    return len(labels) / (n_classes * counts.astype(float))


@dataclass
class GbdtParams:
    n_stages: int = 300
    learning_rate: float = 0.05
    max_depth: int = 6
    min_impurity_decrease: float = 1e-3
    min_samples_split: int = 2
    patience: int | None = None  # early stop on held-out deviance, off by default

    def tree_params(self) -> TreeParams:
        return TreeParams(
            max_depth=self.max_depth,
            min_impurity_decrease=self.min_impurity_decrease,
            min_samples_split=self.min_samples_split,
        )


class GbdtModel:
    """Additive stages of per-class regression trees over log-prior scores."""

    family = "gbdt"

    def __init__(self, n_classes, n_features, init_scores, stages, learning_rate,
                 params, loss_history):
        self.n_classes = n_classes
        self.n_features = n_features
        self.init_scores = init_scores
        self.stages = stages  # list of K-tuples of regression trees
        self.learning_rate = learning_rate
        self.params = params
        self.loss_history = loss_history  # mean train deviance, stage 0 first

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(range(self.n_classes))

    def decision_scores(self, matrix) -> np.ndarray:
        X = _check_columns(matrix, self.n_features)
        scores = np.tile(self.init_scores, (X.shape[0], 1))
        for stage in self.stages:
            for c, tree in enumerate(stage):
                scores[:, c] += self.learning_rate * tree.predict_value(X)
        return scores

    def predict_proba(self, matrix) -> np.ndarray:
        return softmax(self.decision_scores(matrix))

    def predict(self, matrix) -> np.ndarray:
        return _argmax_labels(self.predict_proba(matrix))

    def to_payload(self) -> dict:
        return {
            "family": self.family,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "init_scores": self.init_scores.tolist(),
            "learning_rate": self.learning_rate,
            "stages": [[t.to_preorder() for t in stage] for stage in self.stages],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "GbdtModel":
        stages = [
            tuple(DecisionTree.from_preorder(t, "regression") for t in stage)
            for stage in payload["stages"]
        ]
        return cls(
            n_classes=int(payload["n_classes"]),
            n_features=int(payload["n_features"]),
            init_scores=np.asarray(payload["init_scores"], dtype=float),
            stages=stages,
            learning_rate=float(payload["learning_rate"]),
            params=GbdtParams(),
            loss_history=[],
        )


def gbdt_fit(
    matrix,
    labels,
    params: GbdtParams | None = None,
    seed: int = 0,
    sample_weight=None,
    valid_matrix=None,
    valid_labels=None,
    n_classes: int | None = None,
) -> GbdtModel:
    """Fit multiclass softmax boosting.

    Per-class scores start at the log prior.  Each stage fits one
    regression tree per class to the pseudo-residuals onehot(y) - p and
    applies the one-step Newton leaf update for multinomial deviance,
    shrunk by the learning rate, so rows the current model gets wrong
    dominate the next stage's trees.
    """
    del seed  # fitting is deterministic; kept for a uniform interface
    X = np.ascontiguousarray(matrix, dtype=float)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise DomainError("matrix and labels must align and be non-empty")
    params = params or GbdtParams()
    if params.n_stages < 1:
        raise ConfigError("n_stages must be >= 1")
    if params.learning_rate < 0:
        raise ConfigError("learning rate must be >= 0")
    K = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if K < 2:
        raise ConfigError("need at least two classes")
    n = X.shape[0]
    w = np.full(n, 1.0 / n) if sample_weight is None else np.asarray(sample_weight, float)
    counts = np.bincount(y, weights=w, minlength=K)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ConfigError(f"class {missing} absent from training labels; prior undefined")
    priors = counts / counts.sum()
    init_scores = np.log(priors)

    onehot = np.zeros((n, K))
    onehot[np.arange(n), y] = 1.0
    scores = np.tile(init_scores, (n, 1))
    tree_params = params.tree_params()
    newton_scale = (K - 1) / K

    if params.patience is not None and valid_matrix is None:
        raise ConfigError("early stopping needs a validation split")
    valid_scores = None
    if valid_matrix is not None:
        valid_matrix = np.asarray(valid_matrix, dtype=float)
        valid_labels = np.asarray(valid_labels, dtype=int)
        valid_scores = np.tile(init_scores, (valid_matrix.shape[0], 1))
    best_valid = math.inf
    stalled = 0

    stages = []
    loss_history = [multinomial_deviance(scores, y) / n]
    for _ in range(params.n_stages):
        probabilities = softmax(scores)
        stage = []
        for c in range(K):
            residual = onehot[:, c] - probabilities[:, c]

            def newton_leaf(idx, residual=residual):
                # sorted sums keep leaf values independent of row order
                num = np.sort(w[idx] * residual[idx]).sum()
                mag = np.abs(residual[idx])
                den = np.sort(w[idx] * mag * (1.0 - mag)).sum()
                if den <= 1e-150:
                    return 0.0
                return float(newton_scale * num / den)

            tree = fit_tree(
                X,
                residual,
                sample_weight=w,
                params=tree_params,
                mode="regression",
                leaf_value_fn=newton_leaf,
            )
            scores[:, c] += params.learning_rate * tree.predict_value(X)
            if valid_scores is not None:
                valid_scores[:, c] += params.learning_rate * tree.predict_value(valid_matrix)
            stage.append(tree)
        stages.append(tuple(stage))
        loss_history.append(multinomial_deviance(scores, y) / n)
        if params.patience is not None:
            valid_loss = multinomial_deviance(valid_scores, valid_labels) / len(valid_labels)
            if valid_loss < best_valid - 1e-12:
                best_valid = valid_loss
                stalled = 0
            else:
                stalled += 1
                if stalled >= params.patience:
                    break
    return GbdtModel(
        n_classes=K,
        n_features=X.shape[1],
        init_scores=init_scores,
        stages=stages,
        learning_rate=params.learning_rate,
        params=params,
        loss_history=loss_history,
    )


@dataclass
class ForestParams:
    n_trees: int = 100
    variant: str = "random_forest"  # or "extra_trees"
    max_features: int | str | None = "sqrt"
    max_depth: int | None = None
    min_impurity_decrease: float = 0.0
    min_samples_split: int = 2
    bootstrap: bool | None = None  # default: on for rf, off for extra trees
    class_weights: str | dict | None = None  # None | "balanced" | {ordinal: w}


class ForestModel:
    """Bagged classification trees with soft voting across trees."""

    def __init__(self, trees, n_classes, variant, params, seed,
                 n_features=None):
        self.trees = trees
        self.n_classes = n_classes
        self.variant = variant
        self.params = params
        self.seed = seed
        self.n_features = n_features

    family = property(lambda self: self.variant)

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(range(self.n_classes))

    def predict_proba(self, matrix) -> np.ndarray:
        X = _check_columns(matrix, self.n_features)
        acc = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            acc += tree.predict_value(X)
        return acc / len(self.trees)

    def predict(self, matrix) -> np.ndarray:
        return _argmax_labels(self.predict_proba(matrix))

    def to_payload(self) -> dict:
        return {
            "family": self.variant,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "trees": [t.to_preorder() for t in self.trees],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ForestModel":
        n_classes = int(payload["n_classes"])
        trees = [
            DecisionTree.from_preorder(t, "classification", n_classes)
            for t in payload["trees"]
        ]
        return cls(trees, n_classes, payload["family"], ForestParams(), seed=0,
                   n_features=payload.get("n_features"))


def _resolve_max_features(spec, d):
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    return int(spec)


def forest_fit(
    matrix,
    labels,
    params: ForestParams | None = None,
    seed: int = 0,
    n_classes: int | None = None,
    threads: int = 1,
) -> ForestModel:
    """Fit a random forest or extra-trees ensemble.

    random_forest bootstraps rows and searches the best split on a random
    feature subset per node; extra_trees skips the bootstrap and draws one
    random threshold per candidate feature.  Class weights scale sample
    weights during fitting.  Trees may be fit in parallel; aggregation
    order is fixed, so results do not depend on the worker count.
    """
    X = np.ascontiguousarray(matrix, dtype=float)
    y = np.asarray(labels, dtype=int)
    params = params or ForestParams()
    if params.variant not in ("random_forest", "extra_trees"):
        raise ConfigError(f"unknown forest variant {params.variant!r}")
    if params.n_trees < 1:
        raise ConfigError("n_trees must be >= 1")
    K = int(n_classes) if n_classes is not None else int(y.max()) + 1
    n, d = X.shape
    bootstrap = params.bootstrap
    if bootstrap is None:
        bootstrap = params.variant == "random_forest"

    if params.class_weights == "balanced":
        class_w = balanced_class_weights(y, K)
    elif isinstance(params.class_weights, dict):
        class_w = np.ones(K)
        for ordinal, weight in params.class_weights.items():
            class_w[int(ordinal)] = float(weight)
        if (class_w <= 0).any():
            raise ConfigError("class weights must be positive")
    else:
        class_w = np.ones(K)

    tree_params = TreeParams(
        max_depth=params.max_depth,
        min_impurity_decrease=params.min_impurity_decrease,
        min_samples_split=params.min_samples_split,
        max_features=_resolve_max_features(params.max_features, d),
        random_thresholds=params.variant == "extra_trees",
    )
    children = np.random.SeedSequence(seed).spawn(params.n_trees)

    def fit_one(child):
        rng = np.random.default_rng(child)
        if bootstrap:
            rows = rng.integers(0, n, n)
        else:
            rows = np.arange(n)
        Xi, yi = X[rows], y[rows]
        wi = class_w[yi]
        wi = wi / wi.sum()
        return fit_tree(
            Xi, yi, sample_weight=wi, params=tree_params,
            mode="classification", n_classes=K, rng=rng,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(fit_one, children))
    else:
        trees = [fit_one(child) for child in children]
    return ForestModel(trees, K, params.variant, params, seed, n_features=d)


@dataclass
class AdaboostParams:
    n_rounds: int = 50
    base_depth: int = 1
    track_weights: bool = False


def samme_alpha(error: float, n_classes: int) -> float:
    """SAMME learner weight: ln((1-err)/err) + ln(K-1)."""
    return math.log((1.0 - error) / error) + math.log(n_classes - 1)


class AdaboostModel:
    """SAMME-weighted shallow trees."""

    family = "abc"
    PERFECT_ALPHA = 1e10  # finite surrogate for a zero-error learner

    def __init__(self, learners, alphas, errors, n_classes, params,
                 weight_history=None, n_features=None):
        self.learners = learners
        self.alphas = alphas
        self.errors = errors
        self.n_classes = n_classes
        self.params = params
        self.weight_history = weight_history or []
        self.n_features = n_features

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(range(self.n_classes))

    def decision_scores(self, matrix) -> np.ndarray:
        X = _check_columns(matrix, self.n_features)
        scores = np.zeros((X.shape[0], self.n_classes))
        for alpha, tree in zip(self.alphas, self.learners):
            predictions = tree.predict(X)
            scores[np.arange(X.shape[0]), predictions] += alpha
        return scores

    def predict_proba(self, matrix) -> np.ndarray:
        scores = self.decision_scores(matrix)
        return scores / scores.sum(axis=1, keepdims=True)

    def predict(self, matrix) -> np.ndarray:
        return _argmax_labels(self.decision_scores(matrix))

    def to_payload(self) -> dict:
        return {
            "family": self.family,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "alphas": list(self.alphas),
            "trees": [t.to_preorder() for t in self.learners],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AdaboostModel":
        n_classes = int(payload["n_classes"])
        learners = [
            DecisionTree.from_preorder(t, "classification", n_classes)
            for t in payload["trees"]
        ]
        return cls(learners, [float(a) for a in payload["alphas"]], [],
                   n_classes, AdaboostParams(),
                   n_features=payload.get("n_features"))


def adaboost_fit(
    matrix,
    labels,
    params: AdaboostParams | None = None,
    seed: int = 0,
    n_classes: int | None = None,
) -> AdaboostModel:
    """Fit SAMME boosting over depth-limited trees.

    Per round: fit a weighted tree, weigh it by samme_alpha, then scale up
    the weights of misclassified rows and renormalize.  Stops early on a
    perfect learner (kept, with a large finite alpha) or on a learner no
    better than random (dropped).
    """
    del seed  # deterministic given the data
    X = np.ascontiguousarray(matrix, dtype=float)
    y = np.asarray(labels, dtype=int)
    params = params or AdaboostParams()
    if params.n_rounds < 1:
        raise ConfigError("n_rounds must be >= 1")
    K = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if K < 2:
        raise ConfigError("need at least two classes")
    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    tree_params = TreeParams(max_depth=params.base_depth)

    learners, alphas, errors = [], [], []
    weight_history = [w.copy()] if params.track_weights else []
    for _ in range(params.n_rounds):
        tree = fit_tree(X, y, sample_weight=w, params=tree_params,
                        mode="classification", n_classes=K)
        miss = tree.predict(X) != y
        error = float(w[miss].sum())
        if error == 0.0:
            learners.append(tree)
            alphas.append(AdaboostModel.PERFECT_ALPHA)
            errors.append(error)
            break
        if error >= 1.0 - 1.0 / K:
            break
        alpha = samme_alpha(error, K)
        learners.append(tree)
        alphas.append(alpha)
        errors.append(error)
        w = w * np.exp(alpha * miss)
        w = w / w.sum()
        if params.track_weights:
            weight_history.append(w.copy())
    if not learners:
        raise TrainingError("no weak learner beat random guessing")
    return AdaboostModel(learners, alphas, errors, K, params, weight_history,
                         n_features=X.shape[1])


def voting_predict(models, matrix, mode: str = "soft"):
    """Unweighted mean of member probabilities; argmax labels.

    All members must share one class ordering.
    """
    if mode != "soft":
        raise ConfigError(f"unsupported voting mode {mode!r}")
    if not models:
        raise ConfigError("voting needs at least one member model")
    orderings = {tuple(m.classes) for m in models}
    if len(orderings) != 1:
        raise ConfigError(f"members disagree on class ordering: {sorted(orderings)}")
    stacked = np.stack([m.predict_proba(matrix) for m in models])
    averaged = stacked.mean(axis=0)
    return _argmax_labels(averaged), averaged


class VotingModel:
    """Container applying soft voting over fitted member models."""

    family = "voting"

    def __init__(self, members: list):
        if not members:
            raise ConfigError("voting needs at least one member model")
        self.members = members

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(self.members[0].classes)

    def predict_proba(self, matrix) -> np.ndarray:
        _, averaged = voting_predict(self.members, matrix)
        return averaged

    def predict(self, matrix) -> np.ndarray:
        labels, _ = voting_predict(self.members, matrix)
        return labels

    def to_payload(self) -> dict:
        return {
            "family": self.family,
            "members": [m.to_payload() for m in self.members],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "VotingModel":
        return cls([model_from_payload(p) for p in payload["members"]])


class MajorityModel:
    """Constant baseline: the training class distribution everywhere."""

    family = "majority"

    def __init__(self, distribution: np.ndarray):
        self.distribution = distribution

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(range(len(self.distribution)))

    def predict_proba(self, matrix) -> np.ndarray:
        n = np.asarray(matrix).shape[0]
        return np.tile(self.distribution, (n, 1))

    def predict(self, matrix) -> np.ndarray:
        return _argmax_labels(self.predict_proba(matrix))

    def to_payload(self) -> dict:
        return {"family": self.family, "distribution": self.distribution.tolist()}

    @classmethod
    def from_payload(cls, payload: dict) -> "MajorityModel":
        return cls(np.asarray(payload["distribution"], dtype=float))


def majority_fit(matrix, labels, n_classes: int = 4) -> MajorityModel:
    counts = np.bincount(np.asarray(labels, int), minlength=n_classes)
    return MajorityModel(counts / counts.sum())


@dataclass
class ModelSpec:
    """A buildable model description: family, keyword params, seed."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0


_PARAM_CLASSES = {
    "gbdt": GbdtParams,
    "rfc": ForestParams,
    "etc": ForestParams,
    "abc": AdaboostParams,
}


def fit_model(spec: ModelSpec, matrix, labels, n_classes: int = 4, threads: int = 1):
    """Fit the model a spec describes.  Unknown families are ConfigErrors."""
    family = spec.family
    if family == "gbdt":
        return gbdt_fit(matrix, labels, GbdtParams(**spec.params),
                        seed=spec.seed, n_classes=n_classes)
    if family in ("rfc", "etc"):
        params = dict(spec.params)
        params.setdefault("variant",
                          "random_forest" if family == "rfc" else "extra_trees")
        return forest_fit(matrix, labels, ForestParams(**params),
                          seed=spec.seed, n_classes=n_classes, threads=threads)
    if family == "abc":
        return adaboost_fit(matrix, labels, AdaboostParams(**spec.params),
                            seed=spec.seed, n_classes=n_classes)
    if family == "voting":
        members = spec.params.get("members")
        if not members:
            raise ConfigError("voting spec needs a non-empty members list")
        fitted = [
            fit_model(ModelSpec(m["family"], m.get("params", {}), spec.seed),
                      matrix, labels, n_classes, threads)
            for m in members
        ]
        return VotingModel(fitted)
    if family == "majority":
        return majority_fit(matrix, labels, n_classes)
    raise ConfigError(f"unknown model family {family!r}")


def model_from_payload(payload: dict):
    family = payload.get("family")
    if family == "gbdt":
        return GbdtModel.from_payload(payload)
    if family in ("random_forest", "extra_trees"):
        return ForestModel.from_payload(payload)
    if family == "abc":
        return AdaboostModel.from_payload(payload)
    if family == "voting":
        return VotingModel.from_payload(payload)
    if family == "majority":
        return MajorityModel.from_payload(payload)
    raise ConfigError(f"unknown model family in payload: {family!r}")
