"""Cross-domain analyses of concept subspaces.

Probe transfer, cross-domain removal, PCA overlap curves with random
controls, direction similarity and per-iteration cross-domain accuracy.
All reports serialize to JSON and to plot-ready CSV.
"""
import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_dim, check_matrix
from .dataio import check_same_dim, majority_accuracy
from .inlp import direction_accuracy, nullspace_of, rowspace_of
from .linclf import TrainConfig, accuracy, train_probe
from .subspace import apply_projection, nullspace_projection, pca, random_projection_pair

VARIANTS = (
    "ORIG",
    "A_GENDER",
    "A_RAND",
    "A_GENDER_B_NEUTRAL",
    "A_GENDER_B_RAND",
    "A_GENDER_A_NEUTRAL",
)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _floats(values):
    return [float(v) for v in np.asarray(values).ravel()]


class _Report:
    def to_json(self, extra=None):
        data = self.to_dict()
        if extra:
            data.update(extra)
        return json.dumps(data, indent=2)


@dataclass(frozen=True, eq=False)
class TransferMatrix(_Report):
    """``values[e, t]``: probe trained on domain ``t``, evaluated on domain ``e``."""

    domains: tuple
    values: np.ndarray
    task: str = "gender"

    def to_dict(self):
        return {
            "task": self.task,
            "domains": list(self.domains),
            "rows": "evaluation domain",
            "columns": "training domain",
            "values": [_floats(r) for r in self.values],
        }

    def to_csv(self):
        header = ["eval\\train", *self.domains]
        return _csv_text(header, [[e, *_floats(r)] for e, r in zip(self.domains, self.values)])


@dataclass(frozen=True, eq=False)
class RemovalReport(_Report):
    """``after[e, s]``: fresh probe on domain ``e`` after removing domain ``s``'s subspace."""

    domains: tuple
    before: np.ndarray
    after: np.ndarray
    majority: np.ndarray
    task: str = "gender"

    def to_dict(self):
        return {
            "task": self.task,
            "domains": list(self.domains),
            "before": _floats(self.before),
            "after": [_floats(r) for r in self.after],
            "majority": _floats(self.majority),
        }

    def to_csv(self):
        header = ["domain", "before", *[f"after_{s}" for s in self.domains], "majority"]
        rows = [
            [e, float(self.before[i]), *_floats(self.after[i]), float(self.majority[i])]
            for i, e in enumerate(self.domains)
        ]
        return _csv_text(header, rows)


@dataclass(frozen=True, eq=False)
class OverlapReport(_Report):
    """Absolute cumulative PCA variance for 1..K components of each variant."""

    curves: dict
    total_variance: dict
    K: int
    domains: tuple
    seeds: tuple
    ranks: dict = field(default_factory=dict)

    def ratio(self, name):
        """Curve divided by the variant's own total variance (0 for a numerically empty variant)."""
        total = self.total_variance[name]
        scale = max(self.total_variance.values(), default=0.0)
        if total <= 1e-12 * scale or total <= 0:
            return np.zeros_like(self.curves[name])
        return self.curves[name] / total

    def to_dict(self):
        return {
            "domains": list(self.domains),
            "K": self.K,
            "seeds": list(self.seeds),
            "ranks": dict(self.ranks),
            "total_variance": {k: float(v) for k, v in self.total_variance.items()},
            "curves": {k: _floats(v) for k, v in self.curves.items()},
            "ratio_curves": {k: _floats(self.ratio(k)) for k in self.curves},
        }

    def to_csv(self):
        names = list(self.curves)
        header = ["n_components", *names, *[f"{n}_ratio" for n in names]]
        rows = []
        for i in range(self.K):
            rows.append(
                [i + 1, *[float(self.curves[n][i]) for n in names], *[float(self.ratio(n)[i]) for n in names]]
            )
        return _csv_text(header, rows)


@dataclass(frozen=True, eq=False)
class SimilarityReport(_Report):
    """|cosine| between directions of two subspaces.

    ``mean_abs_offdiag`` averages every entry of ``full_matrix`` (all index
    pairs, diagonal included).
    """

    per_index: np.ndarray
    full_matrix: np.ndarray
    mean_abs_offdiag: float
    in_domain_accuracy: tuple
    domains: tuple = (None, None)

    def to_dict(self):
        return {
            "domains": list(self.domains),
            "per_index": _floats(self.per_index),
            "mean_abs_offdiag": float(self.mean_abs_offdiag),
            "full_matrix": [_floats(r) for r in self.full_matrix],
            "in_domain_accuracy": [_floats(a) for a in self.in_domain_accuracy],
        }

    def to_csv(self):
        acc_a, acc_b = self.in_domain_accuracy
        a, b = (str(d) for d in self.domains)
        header = ["index", "abs_cosine", f"accuracy_{a}", f"accuracy_{b}"]
        n = max(len(self.per_index), len(acc_a), len(acc_b))

        def cell(arr, i):
            return float(arr[i]) if i < len(arr) else ""

        return _csv_text(header, [[i + 1, cell(self.per_index, i), cell(acc_a, i), cell(acc_b, i)] for i in range(n)])


# ---------------------------------------------------------------------------


def _default_eval_cfg():
    return TrainConfig(loss_kind="logistic")


def _splits(ds):
    if not ds.has_splits():
        raise ValueError(f"dataset {ds.domain!r} has no train/test split; run split_dataset first")
    return ds.part("train"), ds.part("test")


def probe_transfer_matrix(datasets, cfg=None, task="gender"):
    """Train one probe per domain on its train split and test it on every domain."""
    datasets = list(datasets)
    check_same_dim(datasets)
    cfg = cfg or _default_eval_cfg()
    parts = [_splits(ds) for ds in datasets]
    k = len(datasets)
    values = np.zeros((k, k))
    for t, (train, _) in enumerate(parts):
        clf = train_probe(train.vectors, train.labels(task), task, cfg, domain=train.domain)
        for e, (_, test) in enumerate(parts):
            values[e, t] = accuracy(clf, test.vectors, test.labels(task))
    return TransferMatrix(domains=tuple(ds.domain for ds in datasets), values=values, task=task)


def removal_transfer(datasets, subspaces, task="gender", cfg=None):
    """Decodability of ``task`` in each domain after removing each domain's subspace.

    A fresh probe is trained on the projected train split and scored on the
    projected test split; ``before`` uses unprojected data.
    """
    datasets = list(datasets)
    subspaces = list(subspaces)
    if len(subspaces) != len(datasets):
        raise ValueError("need one subspace per dataset")
    dim = check_same_dim(datasets)
    for s in subspaces:
        check_dim(s.dim, dim, f"subspace {s.domain!r}")
    cfg = cfg or _default_eval_cfg()
    parts = [_splits(ds) for ds in datasets]
    nulls = [nullspace_of(s) for s in subspaces]
    k = len(datasets)
    before = np.zeros(k)
    after = np.zeros((k, k))
    majority = np.zeros(k)
    for e, (train, test) in enumerate(parts):
        y_tr, y_te = train.labels(task), test.labels(task)
        majority[e] = majority_accuracy(y_te)
        clf = train_probe(train.vectors, y_tr, task, cfg, domain=train.domain)
        before[e] = accuracy(clf, test.vectors, y_te)
        for s, P in enumerate(nulls):
            Xtr = apply_projection(P, train.vectors)
            Xte = apply_projection(P, test.vectors)
            clf = train_probe(Xtr, y_tr, task, cfg, domain=train.domain)
            after[e, s] = accuracy(clf, Xte, y_te)
    return RemovalReport(
        domains=tuple(ds.domain for ds in datasets), before=before, after=after, majority=majority, task=task
    )


def overlap_curves(X_A, subspace_A, subspace_B, K=100, seed=0):
    """Explained-variance curves of six projections of domain A's data.

    ORIG is ``X_A``; A_GENDER keeps A's concept rowspace; A_RAND keeps a random
    subspace of the same rank; A_GENDER_B_NEUTRAL and A_GENDER_A_NEUTRAL then
    remove B's or A's concept subspace; A_GENDER_B_RAND removes a random
    subspace of B's rank. Each variant is mean-centered separately before PCA.
    """
    X = check_matrix(getattr(X_A, "vectors", X_A))
    d = X.shape[1]
    check_dim(subspace_A.dim, d, "subspace_A")
    check_dim(subspace_B.dim, d, "subspace_B")
    limit = min(X.shape[0], d)
    if K > limit:
        warnings.warn(f"K={K} clamped to {limit}", stacklevel=2)
        K = limit
    rank_a, rank_b = len(subspace_A), len(subspace_B)
    seeds = (seed, seed + 1)
    _, rand_row = random_projection_pair(d, rank_a, seeds[0])
    rand_null, _ = random_projection_pair(d, rank_b, seeds[1])
    a_gender = apply_projection(rowspace_of(subspace_A), X)
    variants = {
        "ORIG": X,
        "A_GENDER": a_gender,
        "A_RAND": apply_projection(rand_row, X),
        "A_GENDER_B_NEUTRAL": apply_projection(nullspace_of(subspace_B), a_gender),
        "A_GENDER_B_RAND": apply_projection(rand_null, a_gender),
        "A_GENDER_A_NEUTRAL": apply_projection(nullspace_of(subspace_A), a_gender),
    }
    curves, totals = {}, {}
    for name in VARIANTS:
        res = pca(variants[name], K)
        curves[name] = res.cumulative_variance
        totals[name] = res.total_variance
    return OverlapReport(
        curves=curves,
        total_variance=totals,
        K=K,
        domains=(subspace_A.domain, subspace_B.domain),
        seeds=seeds,
        ranks={"A": rank_a, "B": rank_b},
    )


def direction_similarity(subspace_A, subspace_B):
    check_dim(subspace_B.dim, subspace_A.dim, "subspace_B")
    full = np.clip(np.abs(subspace_A.directions @ subspace_B.directions.T), 0.0, 1.0)
    m = min(full.shape) if full.size else 0
    return SimilarityReport(
        per_index=full[np.arange(m), np.arange(m)].copy(),
        full_matrix=full,
        mean_abs_offdiag=float(full.mean()) if full.size else 0.0,
        in_domain_accuracy=(subspace_A.iteration_accuracy.copy(), subspace_B.iteration_accuracy.copy()),
        domains=(subspace_A.domain, subspace_B.domain),
    )


def per_iteration_accuracy(subspace_S, datasets, split="test", project=True):
    """Accuracy of each stored INLP classifier of ``subspace_S`` on every domain.

    Classifier ``i`` is applied to the chosen split projected by the nullspace
    of directions ``0..i-1`` of the source (or unprojected when
    ``project=False``). Returns ``{domain: accuracies}``.
    """
    datasets = list(datasets)
    d = subspace_S.dim
    for ds in datasets:
        check_dim(ds.dim, d, f"dataset {ds.domain!r}")
    parts = {ds.domain: ds.part(split) for ds in datasets}
    curves = {dom: np.zeros(len(subspace_S)) for dom in parts}
    for i in range(len(subspace_S)):
        P = nullspace_projection(list(subspace_S.directions[:i]), d).matrix
        u, b = subspace_S.directions[i], subspace_S.biases[i]
        for dom, part in parts.items():
            X = check_matrix(part.vectors)
            curves[dom][i] = direction_accuracy(X @ P if project else X, u, b, part.gender)
    return curves
