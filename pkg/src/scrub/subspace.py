"""Projection algebra, orthonormalization, PCA and principal angles.

Row-vector convention throughout: a projection acts as ``X @ M``.
"""
import json
import warnings
from dataclasses import dataclass

import numpy as np

from ._serial import pack_f32, unpack_f32
from ._validation import check_dim, check_matrix, check_vectors
from .errors import FormatError

KINDS = ("nullspace", "rowspace", "random_nullspace", "random_rowspace", "identity")


@dataclass(frozen=True, eq=False)
class Projection:
    matrix: np.ndarray
    rank: int
    kind: str

    @property
    def dim(self):
        return self.matrix.shape[0]

    def invariant_errors(self):
        """Symmetry, idempotence and trace-rank residuals."""
        M = self.matrix
        return {
            "symmetry": float(np.max(np.abs(M - M.T))) if M.size else 0.0,
            "idempotence": float(np.linalg.norm(M @ M - M)),
            "trace_rank": float(abs(np.trace(M) - self.rank)),
        }

    def check(self):
        """Raise AssertionError if any type invariant is violated."""
        err = self.invariant_errors()
        d = self.dim
        assert err["symmetry"] < 1e-9, err
        assert err["idempotence"] < 1e-7 * max(d, 1), err
        assert err["trace_rank"] < 1e-6 * max(d, 1), err
        return self

    def to_json(self):
        return json.dumps(
            {"dim": self.dim, "rank": self.rank, "kind": self.kind, "matrix": pack_f32(self.matrix)},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
            d = int(data["dim"])
            M = unpack_f32(data["matrix"], (d, d))
            return cls(matrix=M, rank=int(data["rank"]), kind=data["kind"])
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"invalid projection record: {exc}") from None


@dataclass(frozen=True, eq=False)
class PcaResult:
    component_directions: np.ndarray  # d x k, orthonormal columns
    eigenvalues: np.ndarray
    total_variance: float
    cumulative_variance: np.ndarray

    @property
    def explained_ratio(self):
        if self.total_variance <= 0:
            return np.zeros_like(self.cumulative_variance)
        return self.cumulative_variance / self.total_variance


def orthonormalize(directions, dim=None, tol=1e-10):
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Returns a ``(k, d)`` array whose rows are orthonormal, in input order.
    Each input is normalized first; it is dropped when its residual norm after
    projection against the accepted rows is below ``tol``.
    """
    W = check_vectors(directions, dim)
    k, d = W.shape
    basis = np.zeros((k, d))
    m = 0
    for v in W:
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        q = v / norm
        for _ in range(2):
            if m:
                q = q - basis[:m].T @ (basis[:m] @ q)
        r = np.linalg.norm(q)
        if r < tol:
            continue
        basis[m] = q / r
        m += 1
    return basis[:m].copy()


def _outer(basis, dim):
    R = basis.T @ basis if basis.shape[0] else np.zeros((dim, dim))
    return 0.5 * (R + R.T)


def nullspace_projection(directions, dim):
    B = orthonormalize(directions, dim)
    R = _outer(B, dim)
    kind = "identity" if B.shape[0] == 0 else "nullspace"
    return Projection(matrix=np.eye(dim) - R, rank=dim - B.shape[0], kind=kind)


def rowspace_projection(directions, dim):
    B = orthonormalize(directions, dim)
    return Projection(matrix=_outer(B, dim), rank=B.shape[0], kind="rowspace")


def projection_pair(directions, dim):
    """``(nullspace, rowspace)`` built from one orthonormalization, summing to I."""
    B = orthonormalize(directions, dim)
    R = _outer(B, dim)
    k = B.shape[0]
    return (
        Projection(matrix=np.eye(dim) - R, rank=dim - k, kind="identity" if k == 0 else "nullspace"),
        Projection(matrix=R, rank=k, kind="rowspace"),
    )


def random_projection_pair(dim, rank_removed, seed):
    """Random orthogonal nullspace/rowspace pair removing ``rank_removed`` dims."""
    if not 0 <= rank_removed <= dim:
        raise ValueError(f"rank_removed must lie in [0, {dim}], got {rank_removed}")
    rng = np.random.default_rng(seed)
    B = orthonormalize(rng.standard_normal((rank_removed, dim)), dim)
    R = _outer(B, dim)
    k = B.shape[0]
    return (
        Projection(matrix=np.eye(dim) - R, rank=dim - k, kind="random_nullspace"),
        Projection(matrix=R, rank=k, kind="random_rowspace"),
    )


def apply_projection(P, X):
    X = check_matrix(X)
    check_dim(X.shape[1], P.dim, "X")
    return X @ P.matrix


def pca(X, k):
    """Top-``k`` principal components of the mean-centered rows of ``X``.

    Eigenvalues are ``sigma_i**2 / (n - 1)`` from the SVD of the centered
    matrix; ``total_variance`` sums over every component, not just the top k.
    """
    X = check_matrix(X)
    n, d = X.shape
    if n < 2:
        raise ValueError("pca needs at least 2 rows")
    limit = min(n, d)
    if k > limit:
        warnings.warn(f"requested {k} components, clamped to {limit}", stacklevel=2)
        k = limit
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    eig = s**2 / (n - 1)
    comps = Vt[:k].copy()
    # deterministic sign: largest-magnitude entry positive
    pivots = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    top = eig[:k]
    return PcaResult(
        component_directions=comps.T,
        eigenvalues=top,
        total_variance=float(eig.sum()),
        cumulative_variance=np.cumsum(top),
    )


def principal_angles(U, V):
    """Ascending principal angles (radians) between column-orthonormal bases."""
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    if V.ndim == 1:
        V = V[:, None]
    check_dim(V.shape[0], U.shape[0], "V")
    if U.shape[1] == 0 or V.shape[1] == 0:
        return np.zeros(0)
    cosines = np.linalg.svd(U.T @ V, compute_uv=False)
    return np.sort(np.arccos(np.clip(cosines, 0.0, 1.0)))
