import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_stable, scalar
from rpodstar.errors import ConfigError, NumericalError
from rpodstar.linsys import StateSpaceSystem
from rpodstar.snapshots import (
    check_snapshot_sufficiency,
    default_spacing,
    estimate_settling_time,
    impulse_ensemble_adjoint,
    impulse_ensemble_primal,
    noise_ensemble,
    noise_ensemble_adjoint,
)


class TestImpulse:
    def test_scalar(self):
        np.testing.assert_allclose(impulse_ensemble_primal(scalar(), [1, 2]).columns.ravel(), [0.5, 0.25])

    def test_two_inputs_single_step(self):
        s = random_stable(4, 2, 1, 0)
        X = impulse_ensemble_primal(s, [1])
        np.testing.assert_allclose(X.columns, s.A @ s.B)

    def test_time_zero_is_B(self, diag3):
        np.testing.assert_array_equal(impulse_ensemble_primal(diag3, [0]).columns, diag3.B)

    def test_heat_ensemble_shape(self, heat):
        assert impulse_ensemble_primal(heat, range(400)).columns.shape == (100, 800)

    def test_adjoint_diagonal(self):
        s = StateSpaceSystem(np.diag([0.5, 0.4]), np.ones((2, 1)), np.eye(2))
        np.testing.assert_allclose(impulse_ensemble_adjoint(s, [1]).columns, np.diag([0.5, 0.4]))

    def test_adjoint_scalar(self):
        np.testing.assert_allclose(impulse_ensemble_adjoint(scalar(), range(6)).columns.ravel(), 0.5 ** np.arange(6))

    def test_adjoint_dense_oracle(self, diag3):
        Z = impulse_ensemble_adjoint(diag3, [1, 2]).columns
        ref = np.hstack([np.linalg.matrix_power(diag3.A.T, t) @ diag3.C.T for t in (1, 2)])
        np.testing.assert_allclose(Z, ref, rtol=1e-15)

    def test_bad_times(self, diag3):
        for t in ([], [2, 1], [-1, 2], [0.5]):
            with pytest.raises(ConfigError):
                impulse_ensemble_primal(diag3, t)


class TestNoise:
    def test_convolution(self):
        E = noise_ensemble(scalar(), 3, 1, seed=7, record_inputs=True)
        u = E.inputs[:, 0]
        expect = [sum(0.5 ** (k - i) * u[i] for i in range(k + 1)) for k in range(3)]
        np.testing.assert_allclose(E.columns.ravel(), expect, rtol=1e-14)

    def test_spacing_samples(self):
        s = random_stable(4, 2, 2, 1)
        E = noise_ensemble(s, 5, 3, seed=2, record_inputs=True)
        x = np.zeros(4)
        states = []
        for u in E.inputs:
            x = s.A @ x + s.B @ u
            states.append(x)
        np.testing.assert_allclose(E.columns, np.array(states)[2::3].T, rtol=1e-13)
        np.testing.assert_array_equal(E.times, [3, 6, 9, 12, 15])

    def test_zero_forcing(self, diag3):
        s = StateSpaceSystem(diag3.A, np.zeros((3, 1)), diag3.C)
        assert not noise_ensemble(s, 10, 2, seed=0).columns.any()

    def test_heat_shape(self, heat):
        assert noise_ensemble(heat, 80, 40, seed=0).columns.shape == (100, 80)

    def test_deterministic(self):
        s = random_stable(6, 2, 3, 3)
        a = noise_ensemble_adjoint(s, 7, 2, seed=11).columns
        b = noise_ensemble_adjoint(s, 7, 2, seed=11).columns
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, noise_ensemble_adjoint(s, 7, 2, seed=12).columns)

    def test_adjoint_uses_transpose(self):
        s = random_stable(5, 1, 3, 4)
        Z = noise_ensemble_adjoint(s, 4, 1, seed=3, record_inputs=True)
        z = np.zeros(5)
        for v in Z.inputs:
            z = s.A.T @ z + s.C.T @ v
        np.testing.assert_allclose(Z.columns[:, -1], z, rtol=1e-13)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 1000), m=st.integers(1, 12))
    def test_stays_in_reachable_subspace(self, seed, m):
        """Snapshots never leave the span of the forced coordinates."""
        B = np.zeros((8, 2))
        B[:3, 0] = 1.0
        B[3, 1] = 1.0
        s = StateSpaceSystem(np.diag(np.linspace(0.2, 0.8, 8)), B, np.ones((1, 8)))
        E = noise_ensemble(s, m, 2, seed=seed)
        assert np.abs(E.columns[4:]).max() == 0.0

    def test_default_spacing(self):
        assert default_spacing(3000, 80) == 38
        assert default_spacing(10, 20) == 1


class TestSettling:
    def test_scalar(self):
        assert estimate_settling_time(scalar(), 1e-3).t_ss == 10

    def test_nilpotent(self):
        s = StateSpaceSystem(np.zeros((2, 2)), np.ones((2, 1)), np.ones((1, 2)))
        assert estimate_settling_time(s, 1e-3).t_ss == 1

    def test_unstable(self):
        with pytest.raises(NumericalError):
            estimate_settling_time(scalar(1.0), 1e-3, max_steps=200)

    def test_heat_order_of_magnitude(self, heat):
        t = estimate_settling_time(heat, 1e-3).t_ss
        # benchmark step is 200 s; settling should be in the thousands of steps
        assert 1000 <= t <= 10000


class TestSufficiency:
    def test_rank_deficient(self):
        X = np.array([[1.0, 2.0], [0.0, 0.0]])
        v = check_snapshot_sufficiency(X, X)
        assert v.rank == 1 and v.sufficient

    def test_single_snapshots(self):
        v = check_snapshot_sufficiency(np.ones((3, 1)), np.ones((3, 1)))
        assert v.rank == 1 and not v.sufficient
        assert v.suggested == (2, 2)

    def test_three_state(self, diag3):
        X = noise_ensemble(diag3, 3, 1, seed=0)
        Z = noise_ensemble_adjoint(diag3, 3, 1, seed=1)
        v = check_snapshot_sufficiency(X, Z)
        assert v.rank == 1
        np.testing.assert_allclose(v.singular_values, np.linalg.svd(Z.columns.T @ X.columns, compute_uv=False))

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            check_snapshot_sufficiency(np.ones((3, 1)), np.ones((4, 1)))


class TestEnsembleStructure:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 1000), m=st.integers(1, 6), spacing=st.integers(1, 4))
    def test_factorization_through_impulse_ensemble(self, seed, m, spacing):
        """A noise ensemble is the full impulse ensemble over steps
        ``0..m*spacing-1`` times a coefficient matrix."""
        s = random_stable(20, 2, 2, seed, rho=0.9)
        Xr = noise_ensemble(s, m, spacing, seed).columns
        Xfull = impulse_ensemble_primal(s, range(m * spacing)).columns
        coef, *_ = np.linalg.lstsq(Xfull, Xr, rcond=None)
        assert np.linalg.norm(Xr - Xfull @ coef) <= 1e-8 * np.linalg.norm(Xr)

    def test_rank_equals_l_with_l_snapshots(self):
        from rpodstar.synthetic import gen_synthetic

        hits = 0
        for seed in range(20):
            syn = gen_synthetic("a3-exact", 30, 4, seed=seed)
            X = noise_ensemble(syn.system, 4, 5, seed)
            Z = noise_ensemble_adjoint(syn.system, 4, 5, seed + 1)
            hits += check_snapshot_sufficiency(X, Z).rank == 4
        assert hits >= 19
