"""Empirical-measure containers, L2_mu geometry, and the transport metric."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsfn_lab import (
    ParticleEnsemble,
    TangentField,
    l2_inner,
    l2_norm,
    load_ensemble,
    push,
    save_ensemble,
    w2_1d,
    w2_exact,
)
from wsfn_lab.measure import W2_CAP


def test_ensemble_shape_and_uniform_weights():
    mu = ParticleEnsemble([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    assert mu.count == 3
    assert mu.dim == 2


def test_ensemble_rejects_non_matrix():
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((2, 2, 2)))


def test_l2_inner_hand_value():
    # v = (3, 4) on two 1-d particles: (1/2)(9 + 16) = 12.5
    v = TangentField([[3.0], [4.0]])
    assert l2_inner(v, v) == pytest.approx(12.5, abs=0)
    assert l2_norm(v) == pytest.approx(np.sqrt(12.5), rel=1e-15)


def test_l2_inner_mismatch_raises():
    with pytest.raises(ValueError):
        l2_inner(TangentField([[1.0]]), TangentField([[1.0], [2.0]]))


def test_push_is_translation_by_scaled_field():
    mu = ParticleEnsemble([[1.0, 0.0], [0.0, 2.0]])
    v = TangentField([[1.0, 1.0], [-1.0, 0.0]])
    out = push(mu, v, 0.5)
    np.testing.assert_allclose(out.positions, [[1.5, 0.5], [-0.5, 2.0]])
    # input untouched
    np.testing.assert_allclose(mu.positions, [[1.0, 0.0], [0.0, 2.0]])


def test_push_composes_additively():
    rng = np.random.default_rng(3)
    mu = ParticleEnsemble(rng.standard_normal((6, 3)))
    v = TangentField(rng.standard_normal((6, 3)))
    once = push(push(mu, v, 0.25), v, 0.75)
    direct = push(mu, v, 1.0)
    np.testing.assert_allclose(once.positions, direct.positions, atol=1e-15)


def test_w2_hand_value():
    a = ParticleEnsemble([[0.0], [2.0]])
    b = ParticleEnsemble([[1.0], [3.0]])
    assert w2_exact(a, b) == pytest.approx(1.0, abs=1e-14)


def test_w2_identity_and_symmetry():
    rng = np.random.default_rng(11)
    a = ParticleEnsemble(rng.standard_normal((8, 2)))
    b = ParticleEnsemble(rng.standard_normal((8, 2)))
    assert w2_exact(a, a) == pytest.approx(0.0, abs=1e-12)
    assert w2_exact(a, b) == pytest.approx(w2_exact(b, a), rel=1e-14)


def test_w2_unequal_counts_rejected():
    a = ParticleEnsemble(np.zeros((3, 2)))
    b = ParticleEnsemble(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        w2_exact(a, b)


def test_w2_cap_enforced():
    n = W2_CAP + 1
    a = ParticleEnsemble(np.zeros((n, 1)))
    with pytest.raises(ValueError):
        w2_exact(a, a)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40),
       st.lists(st.floats(-50, 50), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_w2_matches_sorted_oracle_in_1d(xs, ys):
    n = min(len(xs), len(ys))
    a = ParticleEnsemble(np.array(xs[:n]).reshape(-1, 1))
    b = ParticleEnsemble(np.array(ys[:n]).reshape(-1, 1))
    assert w2_exact(a, b) == pytest.approx(w2_1d(a, b), rel=1e-10, abs=1e-12)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_w2_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (ParticleEnsemble(rng.standard_normal((7, 2))) for _ in range(3))
    assert w2_exact(a, c) <= w2_exact(a, b) + w2_exact(b, c) + 1e-10


def test_ensemble_csv_roundtrip(tmp_path):
    mu = ParticleEnsemble([[1.25, -0.5], [0.0, 3.75]])
    path = tmp_path / "cloud.csv"
    save_ensemble(path, mu)
    text = path.read_text()
    assert text.startswith("# dim=2 count=2")
    back = load_ensemble(path)
    np.testing.assert_array_equal(back.positions, mu.positions)
