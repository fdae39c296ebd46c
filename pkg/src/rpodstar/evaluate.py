"""Error curves, size accounting and timing tables for comparing ROMs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .errors import ConfigError, NumericalError
from .linsys import markov_parameters, transfer_function
from .timing import PhaseTimer

__all__ = [
    "EvaluationReport",
    "PhaseTimer",
    "default_omega_grid",
    "gaussian_excitation",
    "simulate_outputs",
    "markov_error",
    "markov_norms",
    "output_relative_error",
    "frequency_response",
    "frequency_response_error",
    "complexity_report",
    "timing_report",
    "write_curve_csv",
    "write_summary",
    "fmt",
]

IMAG_TOL = 1e-10


def fmt(x) -> str:
    """17-significant-digit decimal, enough to round-trip a double."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _real(Y, what="output", scale=None):
    """Real part of a possibly complex array after checking the imaginary part.

    ``scale`` is the magnitude the imaginary part is measured against; for
    modal ROMs this is the sum of absolute modal contributions, which is the
    size rounding errors are proportional to.
    """
    if not np.iscomplexobj(Y):
        return Y
    ref = float(np.abs(Y.real).max(initial=0.0)) if scale is None else float(np.max(scale, initial=0.0))
    imag = float(np.abs(Y.imag).max(initial=0.0))
    if imag > IMAG_TOL * max(ref, 1e-300):
        raise NumericalError(
            f"complex {what} has imaginary part {imag:.3e} relative {imag / max(ref, 1e-300):.3e}; "
            "conjugate modes do not cancel"
        )
    return Y.real


def default_omega_grid(n: int = 60, lo: float = 1e-3, hi: float = math.pi) -> np.ndarray:
    """Log-spaced frequencies in rad/step."""
    return np.logspace(np.log10(lo), np.log10(hi), n)


def gaussian_excitation(p: int, K: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Seeded ``(K, p)`` i.i.d. Gaussian input shared by all models under comparison."""
    return scale * np.random.default_rng(seed).standard_normal((K, p))


def simulate_outputs(sys, inputs) -> np.ndarray:
    """Zero-initial-state output trajectory ``(K, q)`` for the given ``(K, p)`` inputs."""
    U = np.asarray(inputs, dtype=float)
    A, B, C = sys.A, sys.B, sys.C
    forcing = np.asarray(B @ U.T)
    x = np.zeros(A.shape[0], dtype=np.result_type(A.dtype, forcing.dtype))
    Y = np.empty((U.shape[0], C.shape[0]), dtype=np.result_type(x.dtype, C.dtype))
    for k in range(U.shape[0]):
        x = A @ x + forcing[:, k]
        Y[k] = C @ x
    if not np.iscomplexobj(Y):
        return Y
    # majorant |C| |x|, |x_k| <= |A| |x_{k-1}| + |B| |u_k|
    Aa, Ca, Fa = np.abs(A), np.abs(C), np.abs(B) @ np.abs(U.T)
    xa = np.zeros(A.shape[0])
    bound = 0.0
    for k in range(U.shape[0]):
        xa = Aa @ xa + Fa[:, k]
        bound = max(bound, float((Ca @ xa).max(initial=0.0)))
    return _real(Y, scale=bound)


def _rom_markov(rom, horizon):
    M = markov_parameters(rom, horizon)
    if not np.iscomplexobj(M):
        return M
    majorant = SimpleNamespace(A=np.abs(rom.A), B=np.abs(rom.B), C=np.abs(rom.C))
    bound = markov_parameters(majorant, horizon)
    return _real(M, "Markov parameters", scale=np.abs(bound).max(axis=(1, 2)))


def markov_norms(sys, horizon: int) -> np.ndarray:
    """Spectral norms ``|C A^i B|`` for ``i = 1..horizon``."""
    M = _rom_markov(sys, horizon)
    return np.array([np.linalg.norm(m, 2) for m in M])


def markov_error(sys, rom, horizon: int = 100, *, truth=None) -> np.ndarray:
    """Spectral-norm errors ``|C_r A_r^i B_r - C A^i B|`` for ``i = 1..horizon``.

    ``truth`` may pass precomputed full-order Markov parameters.
    """
    if (sys.B.shape[1], sys.C.shape[0]) != (rom.B.shape[1], rom.C.shape[0]):
        raise ConfigError("system and ROM have different input/output dimensions")
    full = markov_parameters(sys, horizon) if truth is None else np.asarray(truth)[:horizon]
    red = _rom_markov(rom, horizon)
    return np.array([np.linalg.norm(full[i] - red[i], 2) for i in range(horizon)])


def output_relative_error(sys, rom, excitation, *, truth=None) -> float:
    """``|Y_true - Y_rom|_F / |Y_true|_F`` under a shared input sequence."""
    Y = simulate_outputs(sys, excitation) if truth is None else truth
    Yr = simulate_outputs(rom, excitation)
    den = np.linalg.norm(Y)
    if den == 0.0:
        raise NumericalError("true output is identically zero; relative error undefined")
    return float(np.linalg.norm(Y - Yr) / den)


def frequency_response(sys, omegas) -> np.ndarray:
    """Largest singular value of ``H(e^{jw})`` on a frequency grid."""
    return np.array([transfer_function(sys, float(w))[1] for w in np.asarray(omegas)])


def frequency_response_error(sys, rom, omegas=None, *, truth=None) -> np.ndarray:
    """``| smax H_true(w) - smax H_rom(w) |`` on ``omegas`` (default grid if None)."""
    w = default_omega_grid() if omegas is None else np.asarray(omegas, dtype=float)
    full = frequency_response(sys, w) if truth is None else np.asarray(truth)
    red = frequency_response(rom, w)
    err = np.abs(full - red)
    if not np.all(np.isfinite(err)):
        raise NumericalError("non-finite frequency-response error on the grid")
    return err


def complexity_report(
    *,
    N: int,
    m: int | None = None,
    n: int | None = None,
    p: int | None = None,
    s: int | None = None,
    primal_snapshots: int | None = None,
    adjoint_snapshots: int | None = None,
) -> dict:
    """Hankel dimensions and leading-order cost estimates.

    RPOD*: ``Z'X`` is ``n x m``; building it costs ``m n N``, its SVD
    ``min(m,n)^2 max(m,n)``.  Output projection with ``t_p`` primal and
    ``t_a`` adjoint snapshots per run: ``Z'X`` is ``(s t_a) x (p t_p)``;
    building costs ``p s t_p t_a N`` and the SVD cost follows from the same
    dimensions (``p^2 s t^3`` when ``t_p = t_a = t``).
    """
    out = {}
    if m is not None and n is not None:
        out["rpod-star"] = {
            "hankel": (int(n), int(m)),
            "build_flops": int(m) * int(n) * int(N),
            "svd_flops": min(m, n) ** 2 * max(m, n),
        }
    if p is not None and s is not None and primal_snapshots is not None:
        ta = primal_snapshots if adjoint_snapshots is None else adjoint_snapshots
        rows, cols = s * ta, p * primal_snapshots
        out["output-projection"] = {
            "hankel": (int(rows), int(cols)),
            "build_flops": int(p * s * primal_snapshots * ta * N),
            "svd_flops": int(min(rows, cols) ** 2 * max(rows, cols)),
        }
    return out


TIMING_ROWS = ("generate_X", "generate_Z", "construct_ZtX", "solve_SVD", "total")


def timing_report(traces: dict) -> dict:
    """Table of phase durations keyed by method.

    ``traces`` maps method names to phase dictionaries (as produced by
    :class:`PhaseTimer`); missing phases are reported as 0.
    """
    table = {}
    for method, phases in traces.items():
        row = {k: float(phases.get(k, 0.0)) for k in TIMING_ROWS}
        for k, v in phases.items():
            row.setdefault(k, float(v))
        if any(v < 0 for v in row.values()):
            raise NumericalError(f"negative duration recorded for {method}")
        table[method] = row
    return table


@dataclass
class EvaluationReport:
    """All comparison curves for one model and a set of methods."""

    markov_error: dict = field(default_factory=dict)
    markov_norm: dict = field(default_factory=dict)
    e_output: dict = field(default_factory=dict)
    freq_grid: np.ndarray | None = None
    e_fre: dict = field(default_factory=dict)
    freq_response: dict = field(default_factory=dict)
    hankel_dims: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        if self.markov_norm or self.markov_error:
            files.append(write_curve_csv(out / "markov_norm.csv", "step", self.markov_norm, start=1))
            files.append(write_curve_csv(out / "markov_error.csv", "step", self.markov_error, start=1))
        if self.freq_grid is not None:
            files.append(write_curve_csv(out / "freq_response.csv", "omega", self.freq_response, x=self.freq_grid))
            files.append(write_curve_csv(out / "freq_error.csv", "omega", self.e_fre, x=self.freq_grid))
        files.append(write_summary(out / "summary.txt", self))
        return files


def write_curve_csv(path, xname, curves: dict, *, x=None, start=0) -> Path:
    """One row per abscissa, one column per method."""
    path = Path(path)
    names = list(curves)
    length = max((len(v) for v in curves.values()), default=0)
    xs = np.arange(start, start + length) if x is None else np.asarray(x)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([xname] + names)
        for i, xv in enumerate(xs):
            w.writerow([fmt(xv)] + [fmt(curves[k][i]) if i < len(curves[k]) else "" for k in names])
    return path


def write_summary(path, report: EvaluationReport) -> Path:
    """Plain-text table of output errors, Hankel sizes and phase timings."""
    lines = ["# output relative error"]
    for k, v in report.e_output.items():
        lines.append(f"{k}\t{fmt(v)}")
    if report.e_fre:
        lines.append("# max frequency-response error")
        for k, v in report.e_fre.items():
            lines.append(f"{k}\t{fmt(np.max(v))}")
    lines.append("# hankel matrix (rows x cols)")
    for k, (r, c) in report.hankel_dims.items():
        lines.append(f"{k}\t{r} x {c}")
    if report.timings:
        methods = list(report.timings)
        lines.append("# timings [s]")
        lines.append("phase\t" + "\t".join(methods))
        phases = list(TIMING_ROWS) + sorted(
            {p for t in report.timings.values() for p in t} - set(TIMING_ROWS)
        )
        for ph in phases:
            lines.append(ph + "\t" + "\t".join(fmt(report.timings[m].get(ph, 0.0)) for m in methods))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
