import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_stable, scalar
from rpodstar.errors import ConfigError, DefectiveMatrixError, SizeSelectionError
from rpodstar.evaluate import markov_error
from rpodstar.linsys import StateSpaceSystem, markov_parameters
from rpodstar.rom import (
    ReducedOrderModel,
    RomBases,
    RomWarning,
    bpod,
    bpod_output_projection,
    derive_seeds,
    hankel,
    modalize,
    output_projection_basis,
    reduce_from_ensembles,
    rpod_star,
    select_rom_size,
    svd_truncate,
)
from rpodstar.snapshots import noise_ensemble, noise_ensemble_adjoint
from rpodstar.synthetic import gen_synthetic


def rom_markov(rom, horizon):
    return np.real_if_close(markov_parameters(rom, horizon), tol=1e6)


class TestHankel:
    def test_unit(self):
        e = np.zeros((4, 1))
        e[0] = 1
        np.testing.assert_array_equal(hankel(e, e), [[1.0]])

    def test_orthogonal(self):
        Z = np.eye(4)[:, :2]
        X = np.eye(4)[:, 2:]
        assert not hankel(Z, X).any()

    def test_dense_oracle(self, diag3):
        X = noise_ensemble(diag3, 2, 1, seed=5)
        Z = noise_ensemble_adjoint(diag3, 2, 1, seed=6)
        np.testing.assert_allclose(hankel(Z, X), Z.columns.T @ X.columns, rtol=1e-14, atol=0)

    def test_blocked_accumulation(self):
        rng = np.random.default_rng(0)
        Z, X = rng.standard_normal((30, 7)), rng.standard_normal((30, 11))
        np.testing.assert_allclose(hankel(Z, X, block=3), Z.T @ X, rtol=1e-14)

    def test_mismatch(self):
        with pytest.raises(ConfigError):
            hankel(np.ones((3, 1)), np.ones((4, 1)))


class TestSvd:
    def test_diagonal(self):
        svd = svd_truncate(np.diag([2.0, 1.0, 0.0]))
        assert svd.l == 2 and svd.rank == 2
        assert svd.sigma_next == 0.0

    def test_rank_one(self):
        a, b = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
        svd = svd_truncate(np.outer(a, b), 1)
        assert svd.singular_values[0] == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b))

    def test_reconstruction(self):
        H = np.random.default_rng(1).standard_normal((10, 8))
        svd = svd_truncate(H, 8)
        recon = (svd.L * svd.singular_values) @ svd.R.T
        assert np.abs(recon - H).max() <= 1e-12 * svd.singular_values[0]

    def test_request_above_rank(self):
        svd = svd_truncate(np.diag([2.0, 1.0, 0.0]), 3)
        assert svd.l == 2 and svd.requested_l == 3
        assert "exceeds numerical rank" in svd.warnings[0]

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            svd_truncate(np.eye(2), 3)


class TestBpod:
    def test_scalar(self):
        rom, bases = bpod(scalar(), range(1, 11), range(1, 11), 1)
        assert rom.A[0, 0] == pytest.approx(0.5, abs=1e-14)
        np.testing.assert_allclose(rom_markov(rom, 20).ravel(), 0.5 ** np.arange(1, 21), atol=1e-12)

    def test_three_state(self, diag3):
        rom, bases = bpod(diag3, range(10), range(10), 1)
        np.testing.assert_allclose(rom_markov(rom, 30).ravel(), 0.9 ** np.arange(1, 31), atol=1e-10)
        assert bases.biorthogonality_error() <= 1e-8

    def test_full_order_is_exact(self):
        s = random_stable(6, 2, 2, 3, rho=0.8)
        rom, bases = bpod(s, range(10), range(10), 6)
        assert markov_error(s, rom, 30).max() <= 1e-10
        assert bases.biorthogonality_error() <= 1e-8

    def test_timings(self, diag3):
        rom, _ = bpod(diag3, range(5), range(5), 1)
        t = rom.provenance["timings"]
        for phase in ("generate_X", "generate_Z", "construct_ZtX", "solve_SVD", "build_ROM", "total"):
            assert t[phase] >= 0


class TestModalize:
    def test_diagonal_reduced_operator(self, diag3):
        rom, bases = bpod(diag3, range(10), range(10), 1)
        mrom, mb = modalize(rom, bases, diag3)
        assert mrom.A[0, 0] == pytest.approx(0.9)
        np.testing.assert_allclose(mrom.B[0, 0] * mrom.C[0, 0], rom.B[0, 0] * rom.C[0, 0])
        assert mrom.method == "bpod-modal" and mrom.modal
        assert mb.biorthogonality_error() <= 1e-8

    def test_rotation_block(self):
        s = StateSpaceSystem(np.array([[0.0, 0.8], [-0.8, 0.0]]), np.array([[1.0], [0.0]]),
                             np.array([[1.0, 1.0]]))
        rom, bases = bpod(s, range(6), range(6), 2)
        mrom, mb = modalize(rom, bases, s)
        lam = np.diag(mrom.A)
        np.testing.assert_allclose(sorted(lam.imag), [-0.8, 0.8], atol=1e-12)
        M = markov_parameters(mrom, 12)
        assert np.abs(M.imag).max() <= 1e-10
        np.testing.assert_allclose(M.real, markov_parameters(s, 12), atol=1e-10)
        assert mb.biorthogonality_error() <= 1e-8

    def test_defective(self, diag3):
        bases = RomBases(np.eye(3)[:, :2], np.eye(3)[:2])
        rom = ReducedOrderModel(np.array([[0.5, 1.0], [0.0, 0.5]]), np.ones((2, 1)), np.ones((1, 2)), "bpod")
        with pytest.raises(DefectiveMatrixError, match="smaller l"):
            modalize(rom, bases, diag3)

    def test_to_real(self):
        s = random_stable(8, 2, 2, 7, rho=0.85)
        rom, bases = bpod(s, range(20), range(20), 8)
        mrom, _ = modalize(rom, bases, s)
        real = mrom.to_real()
        assert not np.iscomplexobj(real.A)
        np.testing.assert_allclose(markov_parameters(real, 15), markov_parameters(rom, 15), atol=1e-10)


class TestRpodStar:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_three_state(self, diag3, seed):
        rom, bases, svd = rpod_star(diag3, 2, 2, 1, 1, 1, seed=seed)
        np.testing.assert_allclose(rom_markov(rom, 30).ravel(), 0.9 ** np.arange(1, 31), atol=1e-8)
        assert bases.biorthogonality_error() <= 1e-8

    def test_zero_input(self, diag3):
        s = StateSpaceSystem(diag3.A, np.zeros((3, 1)), diag3.C)
        with pytest.raises(SizeSelectionError):
            rpod_star(s, 3, 3, 1, 1, None, seed=0)

    def test_unstable(self):
        with pytest.raises(SizeSelectionError, match="select_rom_size"):
            rpod_star(scalar(1.05), 3, 3, 1, 1, 1, seed=0)

    def test_deterministic(self):
        s = random_stable(10, 2, 2, 9, rho=0.8)
        a = rpod_star(s, 12, 12, 2, 2, 5, seed=4)[0]
        b = rpod_star(s, 12, 12, 2, 2, 5, seed=4)[0]
        np.testing.assert_array_equal(a.A, b.A)
        np.testing.assert_array_equal(a.B, b.B)

    @settings(max_examples=10, deadline=None)
    @given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 100))
    def test_noise_scale_equivariance(self, scale, seed):
        syn = gen_synthetic("a3-exact", 20, 3, seed=seed)
        base = rpod_star(syn.system, 10, 10, 5, 5, 3, seed=seed)[0]
        scaled = rpod_star(syn.system, 10, 10, 5, 5, 3, seed=seed, noise_scale=scale)[0]
        M0, M1 = rom_markov(base, 20), rom_markov(scaled, 20)
        assert np.abs(M1 - M0).max() <= 1e-10 * np.abs(M0).max()

    def test_short_window_warning(self, diag3):
        with pytest.warns(RomWarning, match="shorter than t_ss"):
            rom, _, _ = rpod_star(diag3, 2, 2, 1, 1, 1, seed=0, t_ss=50)
        assert any("t_ss" in w for w in rom.provenance["warnings"])

    def test_rank_clip_warning(self, diag3):
        with pytest.warns(RomWarning, match="exceeds numerical rank"):
            rom, _, svd = rpod_star(diag3, 3, 3, 1, 1, 3, seed=0)
        assert rom.order == 1 and svd.requested_l == 3

    def test_select(self):
        syn = gen_synthetic("a3-exact", 25, 4, seed=3)
        rom, _, _ = rpod_star(syn.system, 30, 30, 5, 5, "select", seed=3)
        assert rom.order == 4
        assert rom.provenance["size_trace"]["selected"] == 4
        assert rom.provenance["timings"]["select_size"] >= 0

    def test_seeds_independent(self):
        a, b = derive_seeds(0)
        assert a != b and derive_seeds(0) == (a, b)


class TestSeedStability:
    def test_heat(self, heat):
        truth = markov_parameters(heat, 200)
        errs = [markov_error(heat, rpod_star(heat, 80, 80, 40, 40, None, seed=k)[0], 200, truth=truth).max()
                for k in range(20)]
        assert max(errs) < 10 * min(errs)

    def test_dispersion(self, desk):
        truth = markov_parameters(desk, 100)
        errs = [markov_error(desk, rpod_star(desk, 200, 200, 1, 1, None, seed=k)[0], 100, truth=truth).max()
                for k in range(20)]
        assert max(errs) < 10 * min(errs)


class TestMixingInvariance:
    def test_recombined_ensembles(self):
        syn = gen_synthetic("a3-exact", 20, 3, seed=5)
        s = syn.system
        X = noise_ensemble(s, 15, 3, seed=1).columns
        Z = noise_ensemble_adjoint(s, 15, 3, seed=2).columns
        ref, _, _ = reduce_from_ensembles(s, X, Z, 3)
        rng = np.random.default_rng(0)
        rom, _, _ = reduce_from_ensembles(s, X @ rng.standard_normal((15, 15)),
                                          Z @ rng.standard_normal((15, 15)), 3)
        M0, M1 = rom_markov(ref, 20), rom_markov(rom, 20)
        assert np.abs(M1 - M0).max() <= 1e-8 * np.abs(M0).max()


class TestOutputProjection:
    def test_single_row(self):
        X = np.random.default_rng(0).standard_normal((3, 5))
        C = np.zeros((4, 3))
        C[2] = [1.0, 2.0, 3.0]
        theta = output_projection_basis(X, C, 1)
        np.testing.assert_allclose(np.abs(theta.ravel()), [0, 0, 1, 0], atol=1e-14)

    def test_diagonal_gram(self):
        Y = np.diag([1.0, 3.0, 2.0])
        theta = output_projection_basis(Y, np.eye(3), 2)
        P = theta @ theta.T
        np.testing.assert_allclose(P, np.diag([0.0, 1.0, 1.0]), atol=1e-14)

    def test_padding(self):
        X = np.zeros((3, 2))
        X[0] = 1.0
        with pytest.warns(RomWarning, match="padding"):
            theta = output_projection_basis(X, np.eye(3), 3)
        np.testing.assert_allclose(theta.T @ theta, np.eye(3), atol=1e-14)

    def test_s_too_large(self):
        with pytest.raises(ConfigError):
            output_projection_basis(np.ones((3, 2)), np.eye(3), 4)

    def test_full_projection_matches_bpod(self):
        s = random_stable(10, 2, 3, 4, rho=0.8)
        a, _ = bpod(s, range(15), range(15), 6)
        b, _ = bpod_output_projection(s, range(15), range(15), 3, 6)
        np.testing.assert_allclose(markov_parameters(b, 20), markov_parameters(a, 20), atol=1e-10)
        np.testing.assert_allclose(b.provenance["sigma"], a.provenance["sigma"], rtol=1e-10, atol=1e-14)

    def test_scalar_output(self):
        s = random_stable(8, 2, 1, 6, rho=0.8)
        a, _ = bpod(s, range(12), range(12), 4)
        b, _ = bpod_output_projection(s, range(12), range(12), 1, 4)
        np.testing.assert_allclose(markov_parameters(b, 20), markov_parameters(a, 20), atol=1e-10)

    def test_hankel_shape(self):
        s = random_stable(30, 2, 10, 1, rho=0.8)
        rom, _ = bpod_output_projection(s, range(7), range(5), 4, 3)
        assert rom.provenance["hankel_shape"] == [20, 14]

    def test_projection_residual_matches_svd_tail(self, heat):
        from rpodstar.snapshots import impulse_ensemble_primal

        X = impulse_ensemble_primal(heat, range(400)).columns
        Y = heat.C @ X
        theta = output_projection_basis(X, heat.C, 20)
        assert theta.shape == (100, 20)
        resid = np.linalg.norm(Y - theta @ (theta.T @ Y))
        tail = np.sqrt(np.sum(np.linalg.svd(Y, compute_uv=False)[20:] ** 2))
        assert resid == pytest.approx(tail, rel=1e-6, abs=1e-12 * np.linalg.norm(Y))


class TestSelectSize:
    def test_three_state_trace(self, diag3):
        X = noise_ensemble(diag3, 3, 1, seed=0)
        Z = noise_ensemble_adjoint(diag3, 3, 1, seed=100)
        svd = svd_truncate(hankel(Z, X), None, rank_tol=1e-30)
        assert svd.rank == 3
        l, trace = select_rom_size(diag3, X, Z, svd)
        assert l == 1
        ev = trace.spectrum(3)
        assert np.sum(np.abs(ev) < 1e-6 * np.abs(ev).max()) == 2

    @pytest.mark.parametrize("seed", range(5))
    def test_exact_synthetic(self, seed):
        syn = gen_synthetic("a3-exact", 30, 4, seed=seed)
        X = noise_ensemble(syn.system, 40, 10, seed=1)
        Z = noise_ensemble_adjoint(syn.system, 40, 10, seed=2)
        l, trace = select_rom_size(syn.system, X, Z, svd_truncate(hankel(Z, X)))
        assert l == 4
        assert trace.as_dict()["selected"] == 4

    def test_dominant_mode_does_not_truncate(self):
        # the slow real mode is nearly decoupled in balanced coordinates, so the
        # 1x1 block matches it within match_tol; the discarded direction is strong
        syn = gen_synthetic("a3-exact", 26, 3, seed=1093729599)
        s = syn.system
        X = noise_ensemble(s, 40, 10, 1093729599)
        Z = noise_ensemble_adjoint(s, 40, 10, 1093729600)
        svd = svd_truncate(hankel(Z, X))
        assert select_rom_size(s, X, Z, svd)[0] == 3
        assert select_rom_size(s, X, Z, svd, weak_tol=1.0)[0] == 1

    def test_zero_hankel(self, diag3):
        with pytest.raises(SizeSelectionError):
            select_rom_size(diag3, np.zeros((3, 2)), np.zeros((3, 2)), svd_truncate(np.zeros((2, 2))))

    def test_unstable_everywhere(self):
        s = scalar(1.2)
        X = noise_ensemble(s, 3, 1, seed=0)
        Z = noise_ensemble_adjoint(s, 3, 1, seed=1)
        with pytest.raises(SizeSelectionError):
            select_rom_size(s, X, Z, svd_truncate(hankel(Z, X)))
