"""The five objective kinds: values, gradients, and curvature blocks."""

import numpy as np
import pytest

from wsfn_lab import (
    CapabilityError,
    CoulombMMDObjective,
    ICLObjective,
    InteractionObjective,
    KINDS,
    MatrixDecompositionObjective,
    ParticleEnsemble,
    PotentialObjective,
    gradient_fd_max_relerr,
    make_objective,
)


def _random_cloud(n, d, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return ParticleEnsemble(scale * rng.standard_normal((n, d)))


class TestPotential:
    def test_hand_value(self):
        # mean of |x|^2/2 over {(1,0),(0,2)} = (1/2)(1/2)(1+4) = 1.25
        obj = PotentialObjective(dim=2)
        mu = ParticleEnsemble([[1.0, 0.0], [0.0, 2.0]])
        assert obj.value(mu) == pytest.approx(1.25, abs=0)

    def test_grad_is_displacement_from_center(self):
        obj = PotentialObjective(center=[1.0, -1.0])
        mu = _random_cloud(5, 2, seed=4)
        np.testing.assert_allclose(
            obj.grad(mu).values, mu.positions - np.array([1.0, -1.0]))

    def test_blocks(self):
        obj = PotentialObjective(dim=3)
        mu = _random_cloud(4, 3, seed=5)
        np.testing.assert_array_equal(obj.m_block(mu, 2), np.eye(3))
        np.testing.assert_array_equal(obj.k_block(mu, 0, 3), np.zeros((3, 3)))

    def test_quadratic_form_saddle_curvature(self):
        A = np.diag([2.0, -1.0])
        obj = PotentialObjective(form="quadratic_form", matrix=A)
        mu = _random_cloud(3, 2, seed=6)
        np.testing.assert_allclose(obj.m_block(mu, 1), A)


class TestInteraction:
    def test_hand_value_and_grad(self):
        obj = InteractionObjective(dim=1)
        mu = ParticleEnsemble([[0.0], [2.0]])
        # (1/2) mean_{ij} |x_i - x_j|^2 / 2 = (1/8)(0+4+4+0)/2 = 0.5
        assert obj.value(mu) == pytest.approx(0.5, abs=0)
        np.testing.assert_allclose(obj.grad(mu).values, [[-1.0], [1.0]])

    def test_translation_invariance(self):
        obj = InteractionObjective(dim=3)
        mu = _random_cloud(9, 3, seed=7)
        shifted = ParticleEnsemble(mu.positions + np.array([5.0, -2.0, 0.5]))
        assert obj.value(shifted) == pytest.approx(obj.value(mu), abs=1e-12)
        assert np.max(np.abs(obj.grad(mu).values.mean(axis=0))) <= 1e-12

    def test_kernel_blocks_are_negated_pair_hessian(self):
        A = np.diag([1.5, 0.75])
        obj = InteractionObjective(form="quadratic_form", matrix=A)
        mu = _random_cloud(4, 2, seed=8)
        np.testing.assert_allclose(obj.k_block(mu, 0, 2), -A)


class TestCoulomb:
    def _instance(self, n=6, m=5, seed=9):
        rng = np.random.default_rng(seed)
        target = 2.0 + rng.standard_normal((m, 3))
        obj = CoulombMMDObjective(target)
        mu = ParticleEnsemble(-2.0 + rng.standard_normal((n, 3)))
        return obj, mu

    def test_value_matches_direct_summation(self):
        """Three-sum estimator recomputed with plain double loops."""
        obj, mu = self._instance()
        x, y, eps = mu.positions, obj.target, obj.eps_ker
        n, m = len(x), len(y)

        def k(a, b):
            r2 = max(float(np.sum((a - b) ** 2)), eps * eps)
            return r2 ** -0.5

        self_mu = sum(k(x[i], x[j]) for i in range(n) for j in range(n) if i != j)
        self_t = sum(k(y[i], y[j]) for i in range(m) for j in range(m) if i != j)
        cross = sum(k(x[i], y[j]) for i in range(n) for j in range(m))
        expected = (self_mu / (n * (n - 1)) + self_t / (m * (m - 1))
                    - 2.0 * cross / (n * m))
        assert obj.value(mu) == pytest.approx(expected, rel=1e-12)

    def test_value_approaches_population_value(self):
        # fixed smooth target/source pair; growing N has to drift toward the
        # value computed from a large independent sample, within 3 sigma
        rng = np.random.default_rng(10)
        target = rng.standard_normal((40, 3)) + np.array([2.0, 0, 0])
        obj = CoulombMMDObjective(target, eps_ker=0.5)

        def draw(n, seed):
            r = np.random.default_rng(seed)
            return ParticleEnsemble(r.standard_normal((n, 3)))

        big = np.mean([obj.value(draw(160, 1000 + i)) for i in range(8)])
        vals = [obj.value(draw(160, 2000 + i)) for i in range(8)]
        se = np.std(vals, ddof=1) / np.sqrt(len(vals))
        assert abs(np.mean(vals) - big) <= 3 * se + 1e-3

    def test_clamped_pairs_drop_out(self):
        # two particles inside the clamp radius: the pair kernel is locally
        # constant there, so the value change from nudging one of them comes
        # entirely from the cross term, and the gradient still matches FD
        target = np.array([[5.0, 0, 0], [0, 5.0, 0], [0, 0, 5.0]])
        obj = CoulombMMDObjective(target, eps_ker=0.5)
        mu = ParticleEnsemble([[0.0, 0, 0], [0.1, 0, 0]])
        nudged = ParticleEnsemble([[0.0, 0, 0], [0.2, 0, 0]])

        def cross_mean(e):
            return np.mean([
                max(float(np.sum((p - t) ** 2)), obj.eps_ker ** 2) ** -0.5
                for p in e.positions for t in target])

        lhs = obj.value(nudged) - obj.value(mu)
        rhs = -2.0 * (cross_mean(nudged) - cross_mean(mu))
        assert lhs == pytest.approx(rhs, rel=1e-12)
        assert gradient_fd_max_relerr(obj, mu) <= 1e-6

    def test_single_particle_rejected(self):
        obj = CoulombMMDObjective(np.zeros((3, 3)) + np.eye(3))
        with pytest.raises(ValueError, match="2 particles"):
            obj.value(ParticleEnsemble([[0.0, 0, 0]]))

    def test_block_symmetry(self):
        obj, mu = self._instance(n=7)
        for i in range(mu.count):
            for j in range(mu.count):
                a_ij = obj.k_block(mu, i, j)
                a_ji = obj.k_block(mu, j, i)
                assert np.max(np.abs(a_ij - a_ji.T)) <= 1e-12

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            CoulombMMDObjective(np.zeros((4, 2)))


class TestNetworkObjectives:
    def test_matrix_decomp_gradient_passes_fd(self):
        obj = MatrixDecompositionObjective(
            feature_dim=2, input_dim=3, n_samples=20, teacher_count=5, seed=7)
        mu = _random_cloud(8, 5, seed=12, scale=0.7)
        assert gradient_fd_max_relerr(obj, mu) <= 1e-5

    def test_icl_gradient_passes_fd(self):
        obj = ICLObjective(
            feature_dim=2, input_dim=3, n_samples=20, teacher_count=5, seed=7)
        mu = _random_cloud(8, 5, seed=13, scale=0.7)
        assert gradient_fd_max_relerr(obj, mu) <= 1e-5

    def test_embedded_data_deterministic(self):
        a = ICLObjective(feature_dim=3, input_dim=4, n_samples=11, seed=21)
        b = ICLObjective(feature_dim=3, input_dim=4, n_samples=11, seed=21)
        np.testing.assert_array_equal(a.teacher_particles, b.teacher_particles)
        np.testing.assert_array_equal(a.inputs, b.inputs)

    def test_icl_loss_with_disjoint_feature_supports(self):
        """Orthogonal student/teacher activity leaves only the target term.

        With relu and a single teacher, students placed on the opposite
        half-space are active exactly where the teacher is silent, so the
        cross covariance vanishes sample by sample and the fit term drops.
        """
        obj = ICLObjective(feature_dim=2, input_dim=3, n_samples=25,
                           teacher_count=1, activation="relu", seed=5)
        w_star = obj.teacher_particles[0, 2:]
        rng = np.random.default_rng(17)
        a = rng.standard_normal((6, 2))
        w = np.tile(-4.0 * w_star, (6, 1))
        mu = ParticleEnsemble(np.hstack([a, w]))
        expected = 0.5 * float(np.trace(obj.h_star @ obj.h_star.T)) / obj.n
        assert obj.value(mu) == pytest.approx(expected, rel=1e-12)

    def test_blocks_unsupported(self):
        obj = MatrixDecompositionObjective(
            feature_dim=2, input_dim=2, n_samples=5, teacher_count=3)
        mu = _random_cloud(4, 4, seed=14)
        assert not obj.supports_blocks
        with pytest.raises(CapabilityError):
            obj.m_block(mu, 0)


class TestDispatch:
    def test_make_objective_all_kinds(self):
        assert set(KINDS) == {
            "potential", "interaction", "coulomb_mmd", "matrix_decomp", "icl"}
        spec = {
            "kind": "coulomb_mmd", "dim": 3, "eps_ker": 0.05,
            "target": {"mode": "gaussian_modes",
                       "centers": [[2.0, 0, 0], [-2.0, 0, 0]],
                       "noise": 0.25, "count": 50, "seed": 33},
        }
        obj = make_objective(spec)
        assert obj.kind == "coulomb_mmd"
        assert obj.target.shape == (50, 3)
        # same spec, same embedded data
        np.testing.assert_array_equal(make_objective(spec).target, obj.target)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            make_objective({"kind": "entropy"})

    def test_gradient_convention_on_potential(self):
        # the per-particle gradient is N times the derivative of the
        # empirical average, which for the quadratic well is exactly x - m
        obj = make_objective({"kind": "potential", "dim": 2})
        mu = _random_cloud(6, 2, seed=15)
        assert gradient_fd_max_relerr(obj, mu) <= 1e-7


class TestGradientMutation:
    def test_dropping_particle_weight_is_caught(self):
        """A gradient missing the 1/N in the empirical mean must fail FD."""

        class Corrupted:
            def __init__(self, inner):
                self._inner = inner
                self.kind = inner.kind
                self.particle_dim = inner.particle_dim

            def value(self, mu):
                return self._inner.value(mu)

            def grad(self, mu):
                field = self._inner.grad(mu)
                return type(field)(field.values * mu.count)

        obj = Corrupted(InteractionObjective(dim=2))
        mu = _random_cloud(5, 2, seed=16)
        assert gradient_fd_max_relerr(obj, mu) > 1e-5
