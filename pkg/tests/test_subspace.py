import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import subspace_angles
from scipy.stats import ortho_group

from scrub.errors import DimensionMismatchError, FormatError
from scrub.subspace import (
    Projection,
    apply_projection,
    nullspace_projection,
    orthonormalize,
    pca,
    principal_angles,
    projection_pair,
    random_projection_pair,
    rowspace_projection,
)


def test_orthonormalize_rows_and_order():
    W = np.array([[3.0, 0, 0], [1.0, 1.0, 0]])
    B = orthonormalize(W)
    np.testing.assert_allclose(B, [[1, 0, 0], [0, 1, 0]], atol=1e-15)


def test_orthonormalize_drops_dependent_vectors():
    r = np.random.default_rng(0)
    a, b = r.standard_normal((2, 6))
    B = orthonormalize([a, b, 2 * a - 3 * b, np.zeros(6)])
    assert B.shape == (2, 6)
    np.testing.assert_allclose(B @ B.T, np.eye(2), atol=1e-14)


def test_orthonormalize_is_scale_invariant():
    r = np.random.default_rng(1)
    W = r.standard_normal((3, 5))
    np.testing.assert_allclose(orthonormalize(W * 1e-9), orthonormalize(W), atol=1e-12)


def test_orthonormalize_ill_conditioned():
    r = np.random.default_rng(2)
    base = r.standard_normal(50)
    W = base + 1e-7 * r.standard_normal((10, 50))
    B = orthonormalize(W)
    np.testing.assert_allclose(B @ B.T, np.eye(B.shape[0]), atol=1e-12)


def test_empty_directions_give_identity():
    P = nullspace_projection([], 4)
    assert P.kind == "identity" and P.rank == 4
    np.testing.assert_array_equal(P.matrix, np.eye(4))
    assert rowspace_projection(np.zeros((0, 4)), 4).rank == 0


def test_projection_known_example():
    P = nullspace_projection([[1.0, 1.0]], 2)
    np.testing.assert_allclose(P.matrix, [[0.5, -0.5], [-0.5, 0.5]])
    assert P.rank == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24), st.data())
def test_projection_invariants_property(d, data):
    k = data.draw(st.integers(0, d))
    seed = data.draw(st.integers(0, 2**32 - 1))
    W = np.random.default_rng(seed).standard_normal((k, d)) * np.random.default_rng(seed + 1).uniform(1e-3, 1e3, (k, 1))
    N, R = projection_pair(list(W), d)
    N.check()
    R.check()
    np.testing.assert_allclose(N.matrix + R.matrix, np.eye(d), atol=1e-12)
    for w in W:
        assert np.linalg.norm(N.matrix @ w) <= 1e-8 * np.linalg.norm(w)
        np.testing.assert_allclose(R.matrix @ w, w, atol=1e-8 * np.linalg.norm(w))


def test_check_catches_broken_projection():
    bad = Projection(matrix=np.array([[1.0, 0.3], [0.0, 1.0]]), rank=2, kind="nullspace")
    with pytest.raises(AssertionError):
        bad.check()


def test_random_projection_pair_seeded():
    N1, R1 = random_projection_pair(10, 3, seed=4)
    N2, _ = random_projection_pair(10, 3, seed=4)
    N3, _ = random_projection_pair(10, 3, seed=5)
    assert R1.rank == 3 and N1.rank == 7
    np.testing.assert_array_equal(N1.matrix, N2.matrix)
    assert not np.allclose(N1.matrix, N3.matrix)
    with pytest.raises(ValueError):
        random_projection_pair(3, 4, 0)


def test_projection_json_roundtrip():
    P = nullspace_projection([[1.0, 2.0, 3.0]], 3)
    back = Projection.from_json(P.to_json())
    assert back.rank == 2 and back.kind == "nullspace"
    np.testing.assert_allclose(back.matrix, P.matrix, atol=1e-7)
    with pytest.raises(FormatError):
        Projection.from_json('{"dim": 3}')


def test_apply_projection_dim_check():
    P = nullspace_projection([[1.0, 0.0]], 2)
    with pytest.raises(DimensionMismatchError):
        apply_projection(P, np.ones((2, 3)))


# -- PCA ---------------------------------------------------------------------


def cov_eigs(X):
    C = np.cov(X, rowvar=False)
    return np.sort(np.linalg.eigvalsh(C))[::-1]


@pytest.mark.parametrize("seed", range(10))
def test_pca_matches_covariance_eigendecomposition(seed):
    r = np.random.default_rng(seed)
    n, d = r.integers(3, 200), r.integers(1, 64)
    X = r.standard_normal((n, d)) @ r.standard_normal((d, d))
    k = min(n, d)
    res = pca(X, k)
    ref = cov_eigs(X)[:k]
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-8, atol=1e-10 * ref[0])
    assert res.total_variance == pytest.approx(np.trace(np.cov(X, rowvar=False)), rel=1e-10)


def test_pca_rotation_invariance():
    r = np.random.default_rng(3)
    X = r.standard_normal((80, 12))
    Q = ortho_group.rvs(12, random_state=3)
    assert pca(X @ Q, 5).total_variance == pytest.approx(pca(X, 5).total_variance, rel=1e-10)


def test_pca_components_and_sign_convention():
    r = np.random.default_rng(4)
    X = r.standard_normal((100, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
    res = pca(X, 3)
    V = res.component_directions
    np.testing.assert_allclose(V.T @ V, np.eye(3), atol=1e-12)
    for col in V.T:
        assert col[np.argmax(np.abs(col))] > 0
    assert np.all(np.diff(res.cumulative_variance) >= 0)
    assert res.explained_ratio[-1] <= 1.0


def test_pca_clamps_k_with_warning():
    with pytest.warns(UserWarning):
        res = pca(np.random.default_rng(0).standard_normal((4, 10)), 10)
    assert res.eigenvalues.size == 4


def test_pca_zero_matrix():
    res = pca(np.zeros((5, 3)), 2)
    assert res.total_variance == 0.0
    np.testing.assert_array_equal(res.explained_ratio, 0.0)


# -- principal angles ----------------------------------------------------------


def test_principal_angles_known():
    U = np.eye(3)[:, :2]
    V = np.array([[1, 0], [0, 0], [0, 1.0]])
    np.testing.assert_allclose(principal_angles(U, V), [0.0, np.pi / 2], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(1, 4), st.integers(1, 4))
def test_principal_angles_match_scipy(seed, d, p, q):
    r = np.random.default_rng(seed)
    p, q = min(p, d), min(q, d)
    U, _ = np.linalg.qr(r.standard_normal((d, p)))
    V, _ = np.linalg.qr(r.standard_normal((d, q)))
    ours = principal_angles(U, V)
    ref = np.sort(subspace_angles(U, V))
    np.testing.assert_allclose(ours, ref, atol=1e-6)
