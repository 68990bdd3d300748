import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from sketchdfo.instrument import OpCounts
from sketchdfo.sketch import (
    SketchConfig,
    SketchOperator,
    apply_to_matrix_right,
    apply_to_vector,
    densify,
    make_sketch,
)


def test_hashing_single_entry_per_column():
    S = make_sketch(SketchConfig("hashing", m=3, hash_nnz=1, seed=4), 5)
    dense = densify(S)
    assert np.count_nonzero(dense, axis=0).tolist() == [1] * 5
    assert set(np.abs(dense[dense != 0])) == {1.0}


def test_sampling_single_row_scale():
    S = make_sketch(SketchConfig("sampling", m=1, seed=2), 4)
    assert S.scale == 2.0
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert apply_to_vector(S, x)[0] == 2.0 * x[S.indices[0]]


def test_identity_leaves_vector_and_matrix():
    S = make_sketch(SketchConfig("none"), 3)
    v = np.array([1.0, -2.0, 0.5])
    R = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(apply_to_vector(S, v), v)
    assert np.array_equal(apply_to_matrix_right(S, R), R)


def test_sampling_gather_arithmetic():
    S = SketchOperator("sampling", 1, 3, indices=np.array([2]), scale=2.0)
    assert apply_to_vector(S, np.array([0.0, 0.0, 3.0])).tolist() == [6.0]


def test_hand_built_hash():
    rows, values = np.array([[0], [1]]), np.array([[1.0], [-1.0]])
    mat = sp.csc_matrix((values.ravel(), rows.ravel(), np.arange(3)), shape=(2, 2))
    S = SketchOperator("hashing", 2, 2, rows=rows, values=values, _sparse=mat)
    assert apply_to_vector(S, np.array([5.0, 7.0])).tolist() == [5.0, -7.0]


def test_sampling_duplicate_index():
    n = 6
    S = SketchOperator("sampling", 2, n, indices=np.array([0, 0]), scale=np.sqrt(n / 2))
    R = np.random.default_rng(0).standard_normal((3, n))
    out = apply_to_matrix_right(S, R)
    assert np.array_equal(out[:, 0], out[:, 1])
    assert np.allclose(out[:, 0], np.sqrt(n / 2) * R[:, 0], rtol=0, atol=1e-15)


def test_hashing_matrix_right_matches_dense():
    S = make_sketch(SketchConfig("hashing", m=4, hash_nnz=2, seed=11), 6)
    R = np.random.default_rng(1).standard_normal((3, 6))
    assert np.allclose(apply_to_matrix_right(S, R), R @ densify(S).T, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize(
    "cfg",
    [
        SketchConfig("gaussian", m=100),
        SketchConfig("sampling", m=100),
        SketchConfig("hashing", m=100, hash_nnz=1),
        SketchConfig("hashing", m=100, hash_nnz=2),
    ],
    ids=lambda c: f"{c.kind}-s{c.hash_nnz}",
)
def test_embedding_unbiased_monte_carlo(cfg):
    n = 1000
    rng = np.random.default_rng(123)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    vals = [np.sum(apply_to_vector(make_sketch(cfg, n, rng), v) ** 2) for _ in range(2000)]
    assert 0.95 <= np.mean(vals) <= 1.05


def test_structure():
    n, m, s = 300, 20, 3
    S = make_sketch(SketchConfig("hashing", m=m, hash_nnz=s, seed=5), n)
    assert S.rows.shape == (n, s)
    assert all(len(set(col)) == s for col in S.rows.tolist())
    assert np.all((S.rows >= 0) & (S.rows < m))
    assert np.allclose(np.abs(S.values), 1 / np.sqrt(s), rtol=0, atol=0)

    S = make_sketch(SketchConfig("sampling", m=m, seed=5), n)
    assert S.indices.shape == (m,) and S.scale == np.sqrt(n / m)
    assert np.all((S.indices >= 0) & (S.indices < n))

    S = make_sketch(SketchConfig("gaussian", m=100, seed=5), 1000)
    assert S.matrix.size == 100 * 1000
    assert abs(S.matrix.var() * 100 - 1) < 0.1


def test_hash_rows_uniform_without_replacement():
    # each row of [0, m) should appear with frequency s/m per column
    n, m, s = 20000, 5, 3
    S = make_sketch(SketchConfig("hashing", m=m, hash_nnz=s, seed=9), n)
    freq = np.bincount(S.rows.ravel(), minlength=m) / n
    assert np.allclose(freq, s / m, atol=0.02)


@settings(max_examples=150, deadline=None)
@given(
    kind=st.sampled_from(["none", "gaussian", "sampling", "hashing"]),
    n=st.integers(1, 8),
    m=st.integers(1, 8),
    s=st.integers(1, 8),
    d=st.integers(1, 8),
    seed=st.integers(0, 2**32),
)
def test_apply_matches_densified(kind, n, m, s, d, seed):
    s = min(s, m)
    S = make_sketch(SketchConfig(kind, m=m, hash_nnz=s, seed=seed), n)
    D = densify(S)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    R = rng.standard_normal((d, n))
    sv, ref_v = apply_to_vector(S, v), D @ v
    sr, ref_r = apply_to_matrix_right(S, R), R @ D.T
    assert np.linalg.norm(sv - ref_v) <= 1e-12 * max(np.linalg.norm(ref_v), 1e-300) + 1e-300
    assert np.linalg.norm(sr - ref_r) <= 1e-12 * max(np.linalg.norm(ref_r), 1e-300) + 1e-300


def test_counters():
    n, d, m, s = 50, 4, 10, 2
    R = np.random.default_rng(0).standard_normal((d, n))
    counts = OpCounts()
    apply_to_matrix_right(make_sketch(SketchConfig("sampling", m=m), n), R, counts)
    assert counts["multiplies"] == 0
    assert counts["gathers"] == m * d

    counts = OpCounts()
    apply_to_matrix_right(make_sketch(SketchConfig("hashing", m=m, hash_nnz=s), n), R, counts)
    assert counts["additions"] <= s * n * d
    assert counts["multiplies"] == 0


@pytest.mark.parametrize("kind", ["gaussian", "sampling", "hashing"])
def test_deterministic(kind):
    cfg = SketchConfig(kind, m=7, hash_nnz=2, seed=2024)
    a, b = make_sketch(cfg, 40), make_sketch(cfg, 40)
    assert np.array_equal(densify(a), densify(b))


def test_stream_advances():
    rng = np.random.default_rng(0)
    cfg = SketchConfig("gaussian", m=3)
    assert not np.array_equal(make_sketch(cfg, 5, rng).matrix, make_sketch(cfg, 5, rng).matrix)


@pytest.mark.parametrize(
    "kwargs",
    [dict(kind="bogus"), dict(kind="gaussian", m=0), dict(kind="hashing", m=2, hash_nnz=3),
     dict(kind="hashing", m=2, hash_nnz=0), dict(kind="sampling", m=2, seed=-1)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SketchConfig(**kwargs)


def test_shape_errors():
    S = make_sketch(SketchConfig("sampling", m=2), 5)
    with pytest.raises(ValueError):
        apply_to_vector(S, np.ones(4))
    with pytest.raises(ValueError):
        apply_to_matrix_right(S, np.ones((2, 4)))
    with pytest.raises(ValueError):
        make_sketch(SketchConfig("sampling", m=2), 0)
