"""Iterative nullspace projection.

Each iteration trains a binary probe on data projected onto the nullspace of
every direction found so far, keeps the probe's unit weight vector, and grows
the removed subspace by one dimension.
"""
import json
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._serial import digest, pack_f32, unpack_f32
from ._validation import check_binary_labels, check_dim, check_labels, check_matrix
from .dataio import majority_accuracy
from .errors import FormatError
from .linclf import TrainConfig, train_binary
from .subspace import nullspace_projection, orthonormalize, rowspace_projection

ZERO_NORM = 1e-10
PLATEAU_EPS = 0.005
PLATEAU_PATIENCE = 5


@dataclass(frozen=True, eq=False)
class ConceptSubspace:
    """Ordered concept directions, most predictive first.

    ``biases[i]`` is the intercept of classifier ``i`` rescaled to its unit
    direction, so ``x @ directions[i] + biases[i] > 0`` reproduces that
    classifier's decisions on data projected by the first ``i`` directions'
    nullspace.
    """

    directions: np.ndarray  # (k, d)
    biases: np.ndarray
    iteration_accuracy: np.ndarray
    dim: int
    domain: str = None
    classifier_cfg: TrainConfig = field(default_factory=lambda: TrainConfig(loss_kind="hinge"))
    label: str = "gender"
    stop_reason: str = "iterations"

    def __len__(self):
        return self.directions.shape[0]

    def to_json(self, extra=None):
        cfg = self.classifier_cfg.to_dict()
        return json.dumps(
            {
                **(extra or {}),
                "domain": self.domain,
                "dim": self.dim,
                "n": len(self),
                "label": self.label,
                "cfg": cfg,
                "cfg_digest": digest(cfg),
                "accuracies": [float(a) for a in self.iteration_accuracy],
                "biases": [float(b) for b in self.biases],
                "stop_reason": self.stop_reason,
                "directions": [pack_f32(w) for w in self.directions],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text):
        """Load a subspace; float32 directions are re-orthonormalized."""
        try:
            data = json.loads(text)
            d = int(data["dim"])
            raw = np.array([unpack_f32(w, (d,)) for w in data["directions"]]).reshape(-1, d)
            if raw.shape[0] != int(data["n"]):
                raise ValueError("direction count does not match n")
            return cls(
                directions=orthonormalize(raw, d, tol=0.0) if raw.shape[0] else raw,
                biases=np.array(data["biases"], dtype=np.float64),
                iteration_accuracy=np.array(data["accuracies"], dtype=np.float64),
                dim=d,
                domain=data.get("domain"),
                classifier_cfg=TrainConfig.from_dict(data["cfg"]),
                label=data.get("label", "gender"),
                stop_reason=data.get("stop_reason", "iterations"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"invalid subspace record: {exc}") from None


def direction_accuracy(X, u, b, y):
    """Accuracy of the rule ``x @ u + b > 0`` (ties to class 0) on 0/1 labels."""
    return float(np.mean((X @ u + b > 0).astype(np.int64) == y))


def inlp_arrays(X, y, X_dev, y_dev, iterations, cfg=None, plateau_stop=False, domain=None):
    """Array-level INLP; see :func:`run_inlp`."""
    cfg = cfg or TrainConfig(loss_kind="hinge")
    X = check_matrix(X)
    y = check_binary_labels(y, X.shape[0])
    X_dev = check_matrix(X_dev)
    check_dim(X_dev.shape[1], X.shape[1], "dev data")
    y_dev = check_labels(y_dev, X_dev.shape[0], "y_dev")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    d = X.shape[1]
    majority = majority_accuracy(y_dev)
    directions, biases, accs = [], [], []
    stop_reason = "iterations"
    plateau = 0
    for _ in range(iterations):
        P = nullspace_projection(directions, d).matrix
        clf = train_binary(X @ P, y, cfg, domain=domain)
        w = clf.weights
        if directions:
            B = np.asarray(directions)
            for _ in range(2):
                w = w - B.T @ (B @ w)
        norm = np.linalg.norm(w)
        if norm < ZERO_NORM:
            stop_reason = "zero_direction"
            break
        u = w / norm
        b = clf.bias / norm
        acc = direction_accuracy(X_dev @ P, u, b, y_dev)
        directions.append(u)
        biases.append(b)
        accs.append(acc)
        if plateau_stop:
            plateau = plateau + 1 if abs(acc - majority) <= PLATEAU_EPS else 0
            if plateau >= PLATEAU_PATIENCE:
                stop_reason = "plateau"
                break
    return ConceptSubspace(
        directions=np.array(directions).reshape(-1, d),
        biases=np.array(biases),
        iteration_accuracy=np.array(accs),
        dim=d,
        domain=domain,
        classifier_cfg=cfg,
        stop_reason=stop_reason,
    )


def run_inlp(train, dev, label="gender", iterations=100, cfg=None, seed=0, plateau_stop=False):
    """Extract an ordered gender subspace from ``train``.

    ``iteration_accuracy[i]`` is the accuracy of classifier ``i`` on ``dev``
    projected by the nullspace of directions ``0..i-1``. ``seed`` overrides
    ``cfg.seed``. The loop stops early when a probe's weight vector vanishes
    after re-orthogonalization, or on a majority plateau if requested.
    """
    if label != "gender":
        raise ValueError("INLP runs on the binary gender label only")
    cfg = replace(cfg or TrainConfig(loss_kind="hinge"), seed=seed)
    check_dim(dev.dim, train.dim, "dev dataset")
    return inlp_arrays(
        train.vectors, train.gender, dev.vectors, dev.gender, iterations, cfg, plateau_stop, domain=train.domain
    )


def nullspace_of(s):
    return nullspace_projection(s.directions, s.dim)


def rowspace_of(s):
    return rowspace_projection(s.directions, s.dim)


def informative_prefix(s, majority, eps=PLATEAU_EPS):
    """Leading directions up to the last one whose accuracy beats ``majority`` by more than ``eps``.

    Returns ``s`` unchanged when it is empty or no direction qualifies.
    """
    above = np.flatnonzero(s.iteration_accuracy > majority + eps)
    if above.size == 0:
        return s
    return truncate(s, int(above[-1]) + 1)


def truncate(s, k):
    if not 1 <= k <= len(s):
        raise ValueError(f"k must lie in [1, {len(s)}], got {k}")
    return replace(
        s,
        directions=s.directions[:k].copy(),
        biases=s.biases[:k].copy(),
        iteration_accuracy=s.iteration_accuracy[:k].copy(),
        stop_reason="truncated" if k < len(s) else s.stop_reason,
    )


class INLP(TransformerMixin, BaseEstimator):
    """scikit-learn transformer that removes (or isolates) a binary concept.

    ``transform`` returns ``X`` projected on the concept's nullspace, or on its
    rowspace when ``output="rowspace"``.
    """

    def __init__(
        self,
        n_iterations=100,
        loss="hinge",
        l2_reg=1e-4,
        learning_rate=1.0,
        max_epochs=500,
        tol=1e-6,
        plateau_stop=False,
        output="nullspace",
        seed=0,
    ):
        self.n_iterations = n_iterations
        self.loss = loss
        self.l2_reg = l2_reg
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.tol = tol
        self.plateau_stop = plateau_stop
        self.output = output
        self.seed = seed

    def fit(self, X, y, X_dev=None, y_dev=None):
        if self.output not in ("nullspace", "rowspace"):
            raise ValueError("output must be 'nullspace' or 'rowspace'")
        cfg = TrainConfig(
            loss_kind=self.loss,
            l2_reg=self.l2_reg,
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            convergence_tol=self.tol,
            seed=self.seed,
        )
        if X_dev is None:
            X_dev, y_dev = X, y
        self.subspace_ = inlp_arrays(X, y, X_dev, y_dev, self.n_iterations, cfg, self.plateau_stop)
        self.components_ = self.subspace_.directions
        self.iteration_accuracy_ = self.subspace_.iteration_accuracy
        self.nullspace_ = nullspace_of(self.subspace_)
        self.rowspace_ = rowspace_of(self.subspace_)
        self.n_features_in_ = self.subspace_.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "subspace_")
        X = check_matrix(X)
        check_dim(X.shape[1], self.n_features_in_, "X")
        P = self.nullspace_ if self.output == "nullspace" else self.rowspace_
        return X @ P.matrix
