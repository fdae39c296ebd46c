import csv
import time

import numpy as np
import pytest

from conftest import random_stable, scalar
from rpodstar.errors import ConfigError, NumericalError
from rpodstar.evaluate import (
    EvaluationReport,
    complexity_report,
    default_omega_grid,
    fmt,
    frequency_response_error,
    gaussian_excitation,
    markov_error,
    output_relative_error,
    simulate_outputs,
    timing_report,
)
from rpodstar.linsys import propagate
from rpodstar.rom import ReducedOrderModel, bpod, rpod_star
from rpodstar.synthetic import gen_synthetic
from rpodstar.timing import PhaseTimer


def identity_rom(sys):
    A = sys.A.toarray() if hasattr(sys.A, "toarray") else sys.A
    C = sys.C.toarray() if hasattr(sys.C, "toarray") else sys.C
    return ReducedOrderModel(np.asarray(A), np.asarray(sys.B), np.asarray(C), "identity")


class TestMarkovError:
    def test_identity(self):
        s = random_stable(8, 2, 3, 0)
        assert markov_error(s, identity_rom(s), 50).max() <= 1e-12

    def test_three_state(self, diag3):
        rom, _ = bpod(diag3, range(10), range(10), 1)
        assert markov_error(diag3, rom, 100).max() <= 1e-10

    def test_perturbed_scaling(self):
        syn = gen_synthetic("a4-perturbed", 30, 4, eps=1e-4, seed=1)
        rom, _, _ = rpod_star(syn.system, 40, 40, 10, 10, 4, seed=1)
        err = markov_error(syn.system, rom, 50).max()
        assert 1e-7 < err < 1e-2

    def test_dimension_mismatch(self, diag3):
        rom = ReducedOrderModel(np.eye(1) * 0.5, np.ones((1, 2)), np.ones((1, 1)), "x")
        with pytest.raises(ConfigError):
            markov_error(diag3, rom, 5)

    def test_complex_rom_checked(self, diag3):
        rom = ReducedOrderModel(np.diag([0.5j]), np.ones((1, 1)), np.ones((1, 1)), "x", {"modal": True})
        with pytest.raises(NumericalError, match="imaginary"):
            markov_error(diag3, rom, 3)


class TestOutputError:
    def test_simulation_matches_propagate(self):
        s = random_stable(6, 2, 3, 1)
        U = gaussian_excitation(2, 30, seed=0)
        X = propagate(s, np.zeros(6), U)
        np.testing.assert_allclose(simulate_outputs(s, U), X @ s.C.T, rtol=1e-13)

    def test_identity(self, heat):
        U = gaussian_excitation(heat.p, 300, seed=1)
        assert output_relative_error(heat, identity_rom(heat), U) <= 1e-12

    def test_zero_prediction(self):
        s = random_stable(6, 2, 3, 1)
        rom = ReducedOrderModel(np.eye(2) * 0.3, np.zeros((2, 2)), np.ones((3, 2)), "zero")
        U = gaussian_excitation(2, 40, seed=2)
        assert output_relative_error(s, rom, U) == pytest.approx(1.0)

    def test_zero_truth(self, diag3):
        with pytest.raises(NumericalError, match="undefined"):
            output_relative_error(diag3, identity_rom(diag3), np.zeros((5, 1)))

    def test_excitation_seeded(self):
        np.testing.assert_array_equal(gaussian_excitation(3, 10, 4), gaussian_excitation(3, 10, 4))


class TestFrequency:
    def test_identity(self):
        s = random_stable(8, 2, 3, 2)
        assert frequency_response_error(s, identity_rom(s)).max() <= 1e-12

    def test_scalar_perturbation(self):
        rom = ReducedOrderModel(np.array([[0.5 + 1e-6]]), np.ones((1, 1)), np.ones((1, 1)), "x")
        err = frequency_response_error(scalar(), rom, [0.0])[0]
        assert err == pytest.approx(abs(2 - 1 / (0.5 - 1e-6)), rel=1e-6)
        assert err == pytest.approx(4e-6, rel=1e-5)

    def test_grid(self):
        w = default_omega_grid()
        assert len(w) == 60 and w[0] == pytest.approx(1e-3) and w[-1] == pytest.approx(np.pi)
        assert np.all(np.diff(w) > 0)

    def test_finite_on_grid(self, diag3):
        rom, _ = bpod(diag3, range(10), range(10), 1)
        assert np.all(np.isfinite(frequency_response_error(diag3, rom)))


class TestComplexity:
    def test_heat_dimensions(self):
        rep = complexity_report(N=100, m=80, n=80, p=2, s=40, primal_snapshots=400, adjoint_snapshots=400)
        assert rep["output-projection"]["hankel"] == (16000, 800)
        assert rep["rpod-star"]["hankel"] == (80, 80)

    def test_dispersion_dimensions(self):
        rep = complexity_report(N=100_000, m=400, n=400, p=10, s=80, primal_snapshots=200, adjoint_snapshots=50)
        assert rep["output-projection"]["hankel"] == (4000, 2000)
        assert rep["rpod-star"]["hankel"] == (400, 400)

    def test_unit(self):
        rep = complexity_report(N=1, m=1, n=1)
        assert rep["rpod-star"]["svd_flops"] == 1 and rep["rpod-star"]["build_flops"] == 1

    def test_cost_formulas(self):
        rep = complexity_report(N=50, m=3, n=5, p=2, s=4, primal_snapshots=10, adjoint_snapshots=10)
        assert rep["rpod-star"]["build_flops"] == 3 * 5 * 50
        assert rep["rpod-star"]["svd_flops"] == 9 * 5
        assert rep["output-projection"]["build_flops"] == 2 * 4 * 10 * 10 * 50
        assert rep["output-projection"]["svd_flops"] == 20**2 * 40


class TestTiming:
    def test_additivity(self, heat):
        rom, _, _ = rpod_star(heat, 80, 80, 40, 40, None, seed=0)
        t = dict(rom.provenance["timings"])
        total = t.pop("total")
        assert all(v >= 0 for v in t.values())
        assert abs(total - sum(t.values())) <= 0.05 * total

    def test_timer(self):
        timer = PhaseTimer()
        with timer.phase("a"):
            time.sleep(0.01)
        with timer.phase("a"):
            time.sleep(0.01)
        out = timer.stop()
        assert out["a"] >= 0.02 and out["total"] >= out["a"]

    def test_report_rows(self):
        table = timing_report({"m": {"solve_SVD": 0.5, "select_size": 0.1}})
        assert table["m"]["generate_X"] == 0.0
        assert table["m"]["solve_SVD"] == 0.5 and table["m"]["select_size"] == 0.1

    def test_negative(self):
        with pytest.raises(NumericalError):
            timing_report({"m": {"total": -1.0}})


class TestReport:
    def test_write(self, tmp_path):
        rep = EvaluationReport()
        rep.markov_error = {"a": np.array([0.1, 1 / 3])}
        rep.markov_norm = {"full": [1.0, 0.5], "a": [1.0, 0.4]}
        rep.e_output = {"a": 1e-5}
        rep.freq_grid = np.array([0.1, 1.0])
        rep.freq_response = {"full": [2.0, 1.0]}
        rep.e_fre = {"a": np.array([1e-9, 2e-9])}
        rep.hankel_dims = {"a": (80, 80)}
        rep.timings = timing_report({"a": {"solve_SVD": 0.01, "total": 0.02}})
        names = {p.name for p in rep.write(tmp_path)}
        assert names == {"markov_norm.csv", "markov_error.csv", "freq_response.csv",
                         "freq_error.csv", "summary.txt"}
        rows = list(csv.reader((tmp_path / "markov_error.csv").open()))
        assert rows[0] == ["step", "a"]
        assert float(rows[2][1]) == 1 / 3
        summary = (tmp_path / "summary.txt").read_text()
        assert "80 x 80" in summary and "solve_SVD" in summary

    def test_fmt_round_trip(self):
        for v in (np.pi, 1e-300, 1 / 3, -2.5e17):
            assert float(fmt(v)) == v
        assert fmt(3) == "3"
