"""Linear probes trained by deterministic full-batch gradient descent.

Three objectives are supported: binary logistic loss, the squared ("smoothed")
hinge loss, and multinomial softmax cross-entropy. All carry an L2 penalty
``l2_reg/2 * ||W||^2`` on the weights only; biases are unregularized.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._serial import pack_f32, unpack_f32
from ._validation import check_binary_labels, check_dim, check_labels, check_matrix
from .errors import ConfigError, DegenerateLabelError, FormatError

LOSS_KINDS = ("logistic", "hinge", "multinomial")

# Upper bounds on the second derivative of each loss w.r.t. the score.
_CURVATURE = {"logistic": 0.25, "hinge": 2.0, "multinomial": 0.5}


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings.

    The step at epoch ``t`` is ``learning_rate / sqrt(t) / L`` (or without the
    ``sqrt`` when ``lr_decay="none"``), where ``L`` bounds the curvature of the
    objective on the training data. ``learning_rate <= 2`` therefore makes
    every epoch a descent step.
    """

    loss_kind: str = "logistic"
    l2_reg: float = 1e-4
    learning_rate: float = 1.0
    lr_decay: str = "inv_sqrt"
    max_epochs: int = 500
    convergence_tol: float = 1e-6
    seed: int = 0
    class_weighting: str = "none"

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.l2_reg < 0:
            raise ConfigError("l2_reg must be non-negative")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.convergence_tol <= 0:
            raise ConfigError("convergence_tol must be positive")
        if self.lr_decay not in ("inv_sqrt", "none"):
            raise ConfigError("lr_decay must be 'inv_sqrt' or 'none'")
        if self.class_weighting not in ("none", "balanced"):
            raise ConfigError("class_weighting must be 'none' or 'balanced'")

    def to_dict(self):
        return {
            "loss_kind": self.loss_kind,
            "l2_reg": self.l2_reg,
            "learning_rate": self.learning_rate,
            "lr_decay": self.lr_decay,
            "max_epochs": self.max_epochs,
            "convergence_tol": self.convergence_tol,
            "seed": self.seed,
            "class_weighting": self.class_weighting,
        }

    @classmethod
    def from_dict(cls, data):
        known = cls.__dataclass_fields__.keys()
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown TrainConfig fields {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    weights: np.ndarray  # (d,) for binary, (d, C) for multinomial
    bias: object  # float or (C,) array
    loss_kind: str
    classes: tuple = (0, 1)
    trained_on: dict = field(default_factory=dict)
    converged: bool = False
    n_epochs: int = 0
    loss_history: tuple = ()

    @property
    def is_binary(self):
        return self.loss_kind != "multinomial"

    @property
    def dim(self):
        return self.weights.shape[0]

    @property
    def unit_direction(self):
        if not self.is_binary:
            raise ValueError("unit_direction is defined for binary classifiers only")
        norm = np.linalg.norm(self.weights)
        if norm <= 1e-12:
            raise ValueError("weight vector is (numerically) zero")
        return self.weights / norm

    def decision_function(self, X):
        X = check_matrix(X)
        check_dim(X.shape[1], self.dim, "X")
        return X @ self.weights + self.bias

    def predict(self, X):
        """Binary: class 1 iff score > 0 (ties go to class 0). Multinomial: argmax, lowest index on ties."""
        scores = self.decision_function(X)
        if self.is_binary:
            idx = (scores > 0).astype(np.int64)
        else:
            idx = np.argmax(scores, axis=1)
        return np.asarray(self.classes)[idx]

    def to_json(self):
        return json.dumps(
            {
                "loss_kind": self.loss_kind,
                "shape": list(self.weights.shape),
                "weights": pack_f32(self.weights),
                "bias": np.asarray(self.bias, dtype=np.float64).tolist(),
                "classes": [int(c) for c in self.classes],
                "metadata": {**self.trained_on, "converged": self.converged, "n_epochs": self.n_epochs},
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
            meta = dict(data.get("metadata", {}))
            bias = data["bias"]
            return cls(
                weights=unpack_f32(data["weights"], tuple(data["shape"])),
                bias=float(bias) if np.ndim(bias) == 0 else np.asarray(bias, dtype=np.float64),
                loss_kind=data["loss_kind"],
                classes=tuple(data["classes"]),
                converged=bool(meta.pop("converged", False)),
                n_epochs=int(meta.pop("n_epochs", 0)),
                trained_on=meta,
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"invalid classifier record: {exc}") from None


# ---------------------------------------------------------------------------
# Objectives


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def objective(loss_kind, W, b, X, y, sample_weight=None, l2_reg=0.0):
    """Mean loss plus L2 penalty, with its gradient.

    ``y`` holds 0/1 labels for the binary losses and class indices for
    ``multinomial``. Returns ``(value, grad_W, grad_b)``.
    """
    n = X.shape[0]
    sw = np.ones(n) if sample_weight is None else sample_weight
    if loss_kind == "multinomial":
        S = X @ W + b
        smax = S.max(axis=1, keepdims=True)
        expS = np.exp(S - smax)
        Z = expS.sum(axis=1, keepdims=True)
        lse = (smax + np.log(Z)).ravel()
        rows = np.arange(n)
        value = np.dot(sw, lse - S[rows, y]) / n
        G = expS / Z
        G[rows, y] -= 1.0
        G *= (sw / n)[:, None]
        grad_W = X.T @ G + l2_reg * W
        grad_b = G.sum(axis=0)
    else:
        sgn = 2.0 * y - 1.0
        margin = sgn * (X @ W + b)
        if loss_kind == "logistic":
            losses = np.logaddexp(0.0, -margin)
            dscore = -sgn * _sigmoid(-margin)
        elif loss_kind == "hinge":
            slack = np.maximum(0.0, 1.0 - margin)
            losses = slack**2
            dscore = -2.0 * sgn * slack
        else:
            raise ValueError(f"unknown loss_kind {loss_kind!r}")
        value = np.dot(sw, losses) / n
        r = sw * dscore / n
        grad_W = X.T @ r + l2_reg * W
        grad_b = r.sum()
    value += 0.5 * l2_reg * float(np.sum(W * W))
    return float(value), grad_W, grad_b


def _sample_weights(y_idx, n_classes, mode):
    if mode == "none":
        return np.ones(y_idx.shape[0])
    counts = np.bincount(y_idx, minlength=n_classes).astype(np.float64)
    per_class = np.where(counts > 0, y_idx.shape[0] / (n_classes * np.maximum(counts, 1)), 0.0)
    return per_class[y_idx]


def _smoothness(Xc, sw, loss_kind, l2_reg):
    n, d = Xc.shape
    Xt = np.hstack([Xc, np.ones((n, 1))])
    G = Xt.T @ (Xt * sw[:, None]) / n
    top = float(np.linalg.eigvalsh(0.5 * (G + G.T))[-1])
    return _CURVATURE[loss_kind] * top + l2_reg


def _descend(X, y_idx, n_classes, cfg):
    """Gradient descent in mean-centered coordinates; returns original-space (W, b)."""
    n, d = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean
    sw = _sample_weights(y_idx, n_classes, cfg.class_weighting)
    L = _smoothness(Xc, sw, cfg.loss_kind, cfg.l2_reg)
    if cfg.loss_kind == "multinomial":
        W = np.zeros((d, n_classes))
        c = np.zeros(n_classes)
    else:
        W = np.zeros(d)
        c = 0.0
    history = []
    converged = False
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        value, gW, gc = objective(cfg.loss_kind, W, c, Xc, y_idx, sw, cfg.l2_reg)
        history.append(value)
        if max(np.max(np.abs(gW)), np.max(np.abs(gc))) < cfg.convergence_tol:
            converged = True
            break
        rate = cfg.learning_rate / (np.sqrt(epoch) if cfg.lr_decay == "inv_sqrt" else 1.0) / L
        W = W - rate * gW
        c = c - rate * gc
    if not converged:
        history.append(objective(cfg.loss_kind, W, c, Xc, y_idx, sw, cfg.l2_reg)[0])
    b = c - mean @ W
    return W, b, converged, epoch, tuple(history)


def train_binary(X, y, cfg=None, domain=None):
    """Fit a binary probe on 0/1 labels.

    ``cfg.loss_kind`` selects logistic or squared-hinge loss. Initialization is
    all-zero, so the result depends only on ``(X, y, cfg)``.
    """
    cfg = cfg or TrainConfig()
    if cfg.loss_kind == "multinomial":
        raise ConfigError("train_binary needs loss_kind 'logistic' or 'hinge'")
    X = check_matrix(X)
    y = check_binary_labels(y, X.shape[0])
    if X.shape[0] < 2:
        raise DegenerateLabelError("need at least two rows")
    W, b, converged, epochs, history = _descend(X, y, 2, cfg)
    return LinearClassifier(
        weights=W,
        bias=float(b),
        loss_kind=cfg.loss_kind,
        classes=(0, 1),
        trained_on={"domain": domain, "rows": int(X.shape[0])},
        converged=converged,
        n_epochs=epochs,
        loss_history=history,
    )


def train_multiclass(X, y, cfg=None, domain=None):
    """Fit a multinomial probe; ``cfg.loss_kind`` is overridden to ``multinomial``."""
    cfg = cfg or TrainConfig()
    if cfg.loss_kind != "multinomial":
        cfg = TrainConfig(**{**cfg.to_dict(), "loss_kind": "multinomial"})
    X = check_matrix(X)
    y = check_labels(y, X.shape[0])
    classes, y_idx = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise DegenerateLabelError("multiclass training needs at least two classes")
    W, b, converged, epochs, history = _descend(X, y_idx, classes.size, cfg)
    return LinearClassifier(
        weights=W,
        bias=b,
        loss_kind="multinomial",
        classes=tuple(int(c) for c in classes),
        trained_on={"domain": domain, "rows": int(X.shape[0])},
        converged=converged,
        n_epochs=epochs,
        loss_history=history,
    )


def accuracy(clf, X, y):
    X = check_matrix(X)
    y = check_labels(y, X.shape[0])
    if y.size == 0:
        raise ValueError("accuracy of an empty evaluation set")
    return float(np.mean(clf.predict(X) == y))


def train_probe(X, y, task, cfg=None, domain=None):
    """Gender uses a binary probe, anything else a multinomial one."""
    if task == "gender":
        return train_binary(X, y, cfg, domain=domain)
    return train_multiclass(X, y, cfg, domain=domain)


class LinearProbe(ClassifierMixin, BaseEstimator):
    """scikit-learn wrapper around :func:`train_binary` / :func:`train_multiclass`.

    Binary losses accept any two label values; they are mapped to 0/1 in
    sorted order.
    """

    def __init__(
        self,
        loss="logistic",
        l2_reg=1e-4,
        learning_rate=1.0,
        lr_decay="inv_sqrt",
        max_epochs=500,
        tol=1e-6,
        class_weight="none",
        seed=0,
    ):
        self.loss = loss
        self.l2_reg = l2_reg
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.max_epochs = max_epochs
        self.tol = tol
        self.class_weight = class_weight
        self.seed = seed

    def _config(self):
        return TrainConfig(
            loss_kind=self.loss,
            l2_reg=self.l2_reg,
            learning_rate=self.learning_rate,
            lr_decay=self.lr_decay,
            max_epochs=self.max_epochs,
            convergence_tol=self.tol,
            seed=self.seed,
            class_weighting=self.class_weight,
        )

    def fit(self, X, y):
        cfg = self._config()
        X = check_matrix(X)
        y = check_labels(y, X.shape[0])
        self.classes_ = np.unique(y)
        if cfg.loss_kind == "multinomial":
            self.classifier_ = train_multiclass(X, y, cfg)
            self.coef_ = self.classifier_.weights.T
            self.intercept_ = np.asarray(self.classifier_.bias)
        else:
            if self.classes_.size != 2:
                raise DegenerateLabelError(f"binary loss needs exactly 2 classes, got {self.classes_.size}")
            self.classifier_ = train_binary(X, (y == self.classes_[1]).astype(np.int64), cfg)
            self.coef_ = self.classifier_.weights[None, :]
            self.intercept_ = np.array([self.classifier_.bias])
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = self.classifier_.n_epochs
        self.converged_ = self.classifier_.converged
        return self

    def decision_function(self, X):
        check_is_fitted(self, "classifier_")
        return self.classifier_.decision_function(X)

    def predict(self, X):
        check_is_fitted(self, "classifier_")
        idx = self.classifier_.predict(X)
        if self.classifier_.is_binary:
            return self.classes_[idx]
        return idx
