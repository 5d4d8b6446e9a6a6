"""Curvature operator: exact blocks, FD transport, dense oracle, kernel eigs."""

import numpy as np
import pytest

from wsfn_lab import (
    CapabilityError,
    CoulombMMDObjective,
    HessianOperator,
    InteractionObjective,
    MatrixDecompositionObjective,
    ParticleEnsemble,
    PotentialObjective,
    TangentField,
    assemble_dense,
    estimate_constants,
    flatten,
    kernel_matrix,
    l2_inner,
    min_eig_kernel,
    unflatten,
)


def _cloud(n, d, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return ParticleEnsemble(scale * rng.standard_normal((n, d)))


def _field(n, d, seed):
    rng = np.random.default_rng(seed)
    return TangentField(rng.standard_normal((n, d)))


def test_flatten_unflatten_roundtrip():
    v = _field(5, 3, 0)
    back = unflatten(flatten(v), 5, 3)
    np.testing.assert_array_equal(back.values, v.values)


def test_interaction_dense_matrix_hand_value():
    obj = InteractionObjective(dim=1)
    mu = ParticleEnsemble([[0.0], [2.0]])
    H = assemble_dense(HessianOperator(obj, mu))
    np.testing.assert_allclose(H, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    assert min_eig_kernel(obj, mu) == pytest.approx(-1.0, abs=1e-12)


def test_potential_operator_is_pointwise_hessian():
    A = np.diag([2.0, -1.0])
    obj = PotentialObjective(form="quadratic_form", matrix=A)
    mu = _cloud(4, 2, seed=1)
    v = _field(4, 2, seed=2)
    out = HessianOperator(obj, mu).apply(v)
    np.testing.assert_allclose(out.values, v.values @ A.T, atol=1e-14)


def test_apply_matches_dense_matvec():
    obj = CoulombMMDObjective(_cloud(6, 3, seed=3, scale=2.0).positions)
    mu = _cloud(5, 3, seed=4)
    op = HessianOperator(obj, mu)
    H = assemble_dense(op)
    for s in range(3):
        v = _field(5, 3, seed=10 + s)
        lhs = flatten(op.apply(v))
        rhs = H @ flatten(v)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.abs(rhs).max())


def test_apply_is_symmetric():
    obj = CoulombMMDObjective(_cloud(6, 3, seed=5, scale=2.0).positions)
    mu = _cloud(6, 3, seed=6)
    op = HessianOperator(obj, mu)
    for s in range(4):
        v, w = _field(6, 3, seed=20 + s), _field(6, 3, seed=40 + s)
        assert l2_inner(op.apply(v), w) == pytest.approx(
            l2_inner(v, op.apply(w)), rel=1e-10, abs=1e-12)


def test_fd_transport_matches_exact_blocks():
    obj = CoulombMMDObjective(_cloud(8, 3, seed=7, scale=2.0).positions)
    mu = _cloud(10, 3, seed=8)
    exact = HessianOperator(obj, mu, mode="exact_blocks")
    fd = HessianOperator(obj, mu, mode="fd_transport")
    v = _field(10, 3, seed=9)
    a, b = flatten(exact.apply(v)), flatten(fd.apply(v))
    assert np.max(np.abs(a - b)) / np.abs(a).max() <= 1e-4


def test_network_kind_defaults_to_fd_and_blocks_refuse():
    obj = MatrixDecompositionObjective(
        feature_dim=2, input_dim=3, n_samples=12, teacher_count=4, seed=1)
    mu = _cloud(5, 5, seed=11, scale=0.5)
    op = HessianOperator(obj, mu)
    assert op.mode == "fd_transport"
    with pytest.raises(CapabilityError):
        HessianOperator(obj, mu, mode="exact_blocks")
    with pytest.raises(CapabilityError):
        assemble_dense(op)


def test_fd_transport_is_second_order_accurate():
    """Remainder of F((I + t v)# mu) after subtracting the modeled terms
    shrinks by >= ~8x when t halves (third-order behavior)."""
    obj = CoulombMMDObjective(_cloud(7, 3, seed=12, scale=2.5).positions)
    mu = _cloud(6, 3, seed=13)
    op = HessianOperator(obj, mu)
    v = _field(6, 3, seed=14)
    f0 = obj.value(mu)
    g = obj.grad(mu)
    hv = op.apply(v)

    def remainder(t):
        moved = ParticleEnsemble(mu.positions + t * v.values)
        model = f0 + t * l2_inner(g, v) + 0.5 * t * t * l2_inner(v, hv)
        return abs(obj.value(moved) - model)

    r1, r2 = remainder(2e-2), remainder(1e-2)
    assert r1 / r2 >= 6.0


def test_kernel_matrix_and_min_eig_agree_with_dense():
    obj = InteractionObjective(form="quadratic_form",
                               matrix=np.diag([1.0, 3.0]))
    mu = _cloud(6, 2, seed=15)
    K = kernel_matrix(obj, mu)
    assert K.shape == (12, 12)
    lam_dense = float(np.linalg.eigvalsh(K).min())
    lam_iter = min_eig_kernel(obj, mu, cap=1)
    assert lam_iter == pytest.approx(lam_dense, abs=1e-7)


def test_estimate_constants_bounds_operator_norm():
    obj = CoulombMMDObjective(_cloud(5, 3, seed=16, scale=2.0).positions)
    mu = _cloud(5, 3, seed=17)
    consts = estimate_constants(obj, mu)
    H = assemble_dense(HessianOperator(obj, mu))
    op_norm = float(np.abs(np.linalg.eigvalsh(H)).max())
    assert consts["C_M"] >= 0 and consts["C_K"] >= 0
    assert consts["C_M"] + consts["C_K"] >= op_norm - 1e-9
