"""Measurement-ensemble construction, action, adjoints, serialization."""

import math

import numpy as np
import pytest

from conicrecovery import measure
from conicrecovery.measure import (
    Atom,
    OperatorKind,
    adjoint,
    apply,
    bounded_symmetric_ensemble,
    gaussian_ensemble,
    gaussian_matrix_ensemble,
    lifted_phase_ensemble,
    load_operator,
    measure_with_noise,
    rademacher_atom,
    save_operator,
    uniform_atom,
)
from conicrecovery.rng import generator


class TestGaussianEnsemble:
    def test_shape_and_determinism(self):
        a = gaussian_ensemble(3, 2, seed=7)
        b = gaussian_ensemble(3, 2, seed=7)
        assert a.rows.shape == (3, 2)
        np.testing.assert_array_equal(a.rows, b.rows)

    def test_different_seed_differs(self):
        a = gaussian_ensemble(3, 2, seed=7)
        b = gaussian_ensemble(3, 2, seed=8)
        assert not np.array_equal(a.rows, b.rows)

    def test_sample_mean_clt(self):
        # CLT: mean of 2000 standard normals is within 4/sqrt(2000) of 0
        # with overwhelming probability (4-sigma event)
        op = gaussian_ensemble(2000, 1, seed=11)
        assert abs(np.mean(op.rows)) <= 4.0 / math.sqrt(2000)

    def test_sample_variance(self):
        op = gaussian_ensemble(2000, 1, seed=11)
        assert 0.85 <= np.var(op.rows) <= 1.15

    @pytest.mark.parametrize("m,d", [(0, 4), (4, 0), (0, 0)])
    def test_rejects_zero_dims(self, m, d):
        with pytest.raises(ValueError):
            gaussian_ensemble(m, d, seed=0)

    def test_spec_constants(self):
        op = gaussian_ensemble(2, 2, seed=0)
        assert op.ensemble.sigma == 1.0
        assert op.ensemble.alpha == pytest.approx(math.sqrt(2.0 / math.pi))


class TestBoundedEnsemble:
    def test_rademacher_support(self):
        op = bounded_symmetric_ensemble(4, 4, rademacher_atom(), seed=1)
        assert set(np.unique(op.rows)) <= {-1.0, 1.0}

    def test_rademacher_declared_constants(self):
        op = bounded_symmetric_ensemble(4, 4, rademacher_atom(), seed=1)
        assert op.ensemble.sigma == 1.0
        assert op.ensemble.alpha == pytest.approx(2.0 ** -0.5)

    def test_uniform_abs_mean_estimated(self):
        # atom without a declared abs_mean triggers MC calibration;
        # E|Uniform[-1,1]| = 1/2 exactly
        atom = Atom(name="uniform-uncalibrated",
                    sampler=lambda rng, size: rng.uniform(-1, 1, size=size),
                    bound=1.0)
        op = bounded_symmetric_ensemble(5000, 1, atom, seed=3,
                                        n_calibration=100_000)
        est_abs_mean = op.ensemble.alpha * math.sqrt(2.0)
        assert abs(est_abs_mean - 0.5) <= 0.02
        assert op.ensemble.alpha_std_error > 0
        # the direct sample mean also concentrates at 1/2
        assert abs(np.mean(np.abs(op.rows)) - 0.5) <= 0.02

    def test_uniform_atom_declared(self):
        atom = uniform_atom()
        assert atom.abs_mean == 0.5
        op = bounded_symmetric_ensemble(2, 2, atom, seed=0)
        assert op.ensemble.alpha == pytest.approx(0.5 / math.sqrt(2.0))

    def test_rejects_asymmetric_atom(self):
        atom = Atom(name="shifted",
                    sampler=lambda rng, size: rng.uniform(0, 1, size=size),
                    bound=1.0, symmetric=False)
        with pytest.raises(ValueError):
            bounded_symmetric_ensemble(2, 2, atom, seed=0)

    def test_user_declared_alpha_wins(self):
        op = bounded_symmetric_ensemble(2, 2, rademacher_atom(), seed=0,
                                        alpha=0.3)
        assert op.ensemble.alpha == 0.3


class TestLiftedEnsemble:
    def test_injected_identity_signal(self):
        op = lifted_phase_ensemble(1, 2, seed=0, vectors=np.array([[1.0, 0.0]]))
        y = apply(op, np.eye(2))
        assert y == pytest.approx([1.0])

    def test_injected_rank_one_signal(self):
        op = lifted_phase_ensemble(1, 2, seed=0, vectors=np.array([[1.0, 1.0]]))
        x = np.array([1.0, 0.0])
        y = apply(op, np.outer(x, x))
        assert y == pytest.approx([1.0])

    def test_matches_squared_inner_products(self):
        op = lifted_phase_ensemble(40, 6, seed=5)
        x = generator(17).standard_normal(6)
        y = apply(op, np.outer(x, x))
        direct = (op.vectors @ x) ** 2
        np.testing.assert_allclose(y, direct, rtol=1e-13, atol=1e-13)

    def test_memory_layout_stores_vectors_only(self):
        op = lifted_phase_ensemble(3, 4, seed=0)
        assert op.vectors.shape == (3, 4)
        assert op.rows is None

    def test_injected_shape_mismatch(self):
        with pytest.raises(ValueError):
            lifted_phase_ensemble(2, 2, seed=0, vectors=np.ones((3, 2)))


class TestApplyAdjoint:
    def test_identity_like(self):
        op = measure.MeasurementOperator(OperatorKind.DENSE, 2, (2,),
                                         rows=np.eye(2))
        np.testing.assert_array_equal(apply(op, np.array([3.0, 4.0])), [3.0, 4.0])

    def test_adjoint_identity_dense(self):
        op = gaussian_ensemble(7, 5, seed=2)
        rng = generator(99)
        for _ in range(100):
            x = rng.standard_normal(5)
            v = rng.standard_normal(7)
            lhs = float(apply(op, x) @ v)
            rhs = float(np.sum(x * adjoint(op, v)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_adjoint_identity_matrix_signals(self):
        op = gaussian_matrix_ensemble(6, 3, 4, seed=2)
        rng = generator(98)
        for _ in range(100):
            x = rng.standard_normal((3, 4))
            v = rng.standard_normal(6)
            lhs = float(apply(op, x) @ v)
            rhs = float(np.sum(x * adjoint(op, v)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_adjoint_identity_lifted(self):
        op = lifted_phase_ensemble(6, 4, seed=3)
        rng = generator(97)
        for _ in range(100):
            x = rng.standard_normal((4, 4))
            x = 0.5 * (x + x.T)   # lifted signals are symmetric
            v = rng.standard_normal(6)
            lhs = float(apply(op, x) @ v)
            rhs = float(np.sum(x * adjoint(op, v)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_lifted_adjoint_all_ones(self):
        op = lifted_phase_ensemble(1, 2, seed=0, vectors=np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(adjoint(op, np.array([1.0])), np.ones((2, 2)))

    def test_shape_mismatch_rejected(self):
        op = gaussian_ensemble(3, 2, seed=0)
        with pytest.raises(ValueError):
            apply(op, np.zeros(3))
        with pytest.raises(ValueError):
            adjoint(op, np.zeros(4))


class TestMeasureWithNoise:
    def test_zero_noise_exact(self):
        op = gaussian_ensemble(5, 3, seed=1)
        x = generator(4).standard_normal(3)
        np.testing.assert_array_equal(
            measure_with_noise(op, x, e=np.zeros(5)), apply(op, x))
        np.testing.assert_array_equal(measure_with_noise(op, x), apply(op, x))

    def test_generated_noise_respects_budget(self):
        op = gaussian_ensemble(5, 3, seed=1)
        x = generator(4).standard_normal(3)
        y = measure_with_noise(op, x, noise_norm=0.1, seed=9)
        assert np.linalg.norm(y - apply(op, x)) <= 0.1 + 1e-12

    def test_zero_signal_returns_noise(self):
        op = gaussian_ensemble(5, 3, seed=1)
        e = generator(5).standard_normal(5)
        np.testing.assert_array_equal(
            measure_with_noise(op, np.zeros(3), e=e), e)

    def test_rejects_oversized_noise(self):
        op = gaussian_ensemble(5, 3, seed=1)
        with pytest.raises(ValueError):
            measure_with_noise(op, np.zeros(3), e=np.ones(5), noise_norm=0.5)

    def test_requires_seed_for_generated_noise(self):
        op = gaussian_ensemble(5, 3, seed=1)
        with pytest.raises(ValueError):
            measure_with_noise(op, np.zeros(3), noise_norm=0.5)


class TestImmutability:
    def test_rows_not_writable(self):
        op = gaussian_ensemble(3, 2, seed=0)
        with pytest.raises(ValueError):
            op.rows[0, 0] = 99.0

    def test_vectors_not_writable(self):
        op = lifted_phase_ensemble(3, 2, seed=0)
        with pytest.raises(ValueError):
            op.vectors[0, 0] = 99.0


class TestSerialization:
    @pytest.mark.parametrize("ext", ["npz", "csv"])
    def test_dense_roundtrip(self, tmp_path, ext):
        op = gaussian_ensemble(4, 3, seed=12)
        path = str(tmp_path / f"op.{ext}")
        save_operator(op, path)
        back = load_operator(path)
        assert back.kind is OperatorKind.DENSE
        assert back.m == 4 and back.signal_shape == (3,)
        np.testing.assert_array_equal(back.rows, op.rows)

    @pytest.mark.parametrize("ext", ["npz", "csv"])
    def test_lifted_roundtrip(self, tmp_path, ext):
        op = lifted_phase_ensemble(4, 3, seed=12)
        path = str(tmp_path / f"op.{ext}")
        save_operator(op, path)
        back = load_operator(path)
        assert back.kind is OperatorKind.LIFTED
        np.testing.assert_array_equal(back.vectors, op.vectors)

    def test_unknown_extension_rejected(self, tmp_path):
        op = gaussian_ensemble(2, 2, seed=0)
        with pytest.raises(ValueError):
            save_operator(op, str(tmp_path / "op.bin"))
