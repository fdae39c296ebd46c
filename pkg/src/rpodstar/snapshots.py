"""Snapshot ensembles for balancing: impulse responses and white-noise runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .linsys import StateSpaceSystem, adjoint, as_dense

__all__ = [
    "SnapshotEnsemble",
    "SettlingEstimate",
    "SufficiencyVerdict",
    "impulse_ensemble",
    "impulse_ensemble_primal",
    "impulse_ensemble_adjoint",
    "noise_ensemble",
    "noise_ensemble_adjoint",
    "estimate_settling_time",
    "check_snapshot_sufficiency",
    "default_spacing",
]


@dataclass(frozen=True, eq=False)
class SnapshotEnsemble:
    """State snapshots stored column-wise.

    ``times`` are step indices.  Impulse ensembles hold ``n_initial`` columns
    per time (all initial conditions at the first time, then the second ...),
    noise ensembles hold one column per time.
    """

    columns: np.ndarray
    times: np.ndarray
    kind: str
    source: str = "primal"
    seed: int | None = None
    n_initial: int = 1
    scale: float = 1.0
    inputs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.int64)
        if t.ndim != 1 or t.size == 0:
            raise ConfigError("ensemble needs at least one time")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("ensemble times must be strictly increasing")
        if self.columns.shape[1] != t.size * self.n_initial:
            raise ConfigError("column count does not match times x initial conditions")
        object.__setattr__(self, "times", t)
        self.columns.setflags(write=False)

    @property
    def N(self) -> int:
        return self.columns.shape[0]

    @property
    def M(self) -> int:
        return self.columns.shape[1]

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            "source": self.source,
            "seed": self.seed,
            "n_initial": int(self.n_initial),
            "scale": float(self.scale),
            "times": [int(t) for t in self.times],
            "shape": [int(s) for s in self.columns.shape],
        }


def _check_times(times) -> np.ndarray:
    t = np.asarray(times)
    if t.ndim != 1 or t.size == 0:
        raise ConfigError("times must be a non-empty 1-D sequence")
    if not np.all(np.equal(np.mod(t, 1), 0)) or t.min() < 0:
        raise ConfigError("times must be non-negative step indices")
    t = t.astype(np.int64)
    if np.any(np.diff(t) <= 0):
        raise ConfigError("times must be strictly increasing")
    return t


def impulse_ensemble(A, initial, times, *, source="primal") -> SnapshotEnsemble:
    """Columns ``A^t w_i`` for every time ``t`` and initial condition ``w_i``.

    A time of 0 stores the initial conditions themselves.
    """
    t = _check_times(times)
    W = np.array(as_dense(initial), dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape[0] != A.shape[0]:
        raise ConfigError("initial conditions do not match the state dimension")
    k = W.shape[1]
    out = np.empty((W.shape[0], k * t.size))
    step = 0
    for slot, target in enumerate(t):
        while step < target:
            W = A @ W
            step += 1
        out[:, slot * k:(slot + 1) * k] = W
    return SnapshotEnsemble(out, t, "impulse", source=source, n_initial=k)


def impulse_ensemble_primal(sys: StateSpaceSystem, times) -> SnapshotEnsemble:
    """Impulse responses ``A^t b_i`` of every input column."""
    return impulse_ensemble(sys.A, sys.B, times, source="primal")


def impulse_ensemble_adjoint(sys: StateSpaceSystem, times) -> SnapshotEnsemble:
    """Adjoint impulse responses ``(A')^t c_j'`` of every output row."""
    adj = adjoint(sys)
    return impulse_ensemble(adj.A, adj.B, times, source="adjoint")


def _draw_and_propagate(A, B, m, spacing, rng, scale, record):
    N, p = B.shape
    total = m * spacing
    x = np.zeros(N)
    out = np.empty((N, m))
    kept = np.empty((total, p)) if record else None
    chunk = 512
    col = 0
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        U = scale * rng.standard_normal((stop - start, p))
        if record:
            kept[start:stop] = U
        F = np.asarray(B @ U.T)
        for j in range(stop - start):
            x = A @ x + F[:, j]
            if (start + j + 1) % spacing == 0:
                out[:, col] = x
                col += 1
    return out, kept


def noise_ensemble(
    sys: StateSpaceSystem,
    m: int,
    spacing: int,
    seed: int,
    *,
    scale: float = 1.0,
    record_inputs: bool = False,
    source: str = "primal",
) -> SnapshotEnsemble:
    """One white-noise-forced trajectory sampled every ``spacing`` steps.

    Starts from ``x_0 = 0`` with i.i.d. ``N(0, scale^2)`` inputs on every
    channel and keeps ``x_spacing, x_2*spacing, ..., x_m*spacing``.
    """
    if m < 1 or spacing < 1:
        raise ConfigError("noise ensemble needs m >= 1 and spacing >= 1")
    rng = np.random.default_rng(seed)
    cols, inputs = _draw_and_propagate(sys.A, sys.B, int(m), int(spacing), rng, scale, record_inputs)
    times = spacing * np.arange(1, m + 1)
    return SnapshotEnsemble(
        cols, times, "noise", source=source, seed=seed, scale=scale, inputs=inputs
    )


def noise_ensemble_adjoint(sys: StateSpaceSystem, n: int, spacing: int, seed: int, **kw):
    """White-noise-forced adjoint trajectory ``z_k = A' z_{k-1} + C' v_k``."""
    return noise_ensemble(adjoint(sys), n, spacing, seed, source="adjoint", **kw)


def default_spacing(t_ss: int, m: int) -> int:
    """Smallest snapshot spacing with ``m * spacing >= t_ss``."""
    return max(1, math.ceil(t_ss / m))


@dataclass(frozen=True)
class SettlingEstimate:
    t_ss: int
    decay_norm: float
    tolerance: float


def estimate_settling_time(
    sys, tol: float = 1e-3, *, n_probe: int = 8, seed: int = 0, max_steps: int = 1_000_000
) -> SettlingEstimate:
    """First step ``t`` with ``max_v |A^t v| <= tol`` over random unit probes.

    The probe maximum bounds ``|A^t|`` from below; it is a cheap stand-in for
    the operator norm on large sparse systems.
    """
    if tol <= 0:
        raise ConfigError("tolerance must be positive")
    A = sys.A
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((A.shape[0], n_probe))
    V /= np.linalg.norm(V, axis=0)
    for t in range(1, max_steps + 1):
        V = A @ V
        decay = float(np.linalg.norm(V, axis=0).max())
        if not np.isfinite(decay):
            break
        if decay <= tol:
            return SettlingEstimate(t, decay, tol)
    raise NumericalError(
        f"no settling within {max_steps} steps at tolerance {tol:g}; system may be unstable"
    )


@dataclass(frozen=True)
class SufficiencyVerdict:
    sufficient: bool
    rank: int
    m: int
    n: int
    singular_values: np.ndarray
    suggested: tuple | None = None


def check_snapshot_sufficiency(X, Z, rank_tol: float = 1e-10) -> SufficiencyVerdict:
    """Rank test on ``Z'X``: full rank means more snapshots may be needed."""
    Xc = X.columns if isinstance(X, SnapshotEnsemble) else np.asarray(X)
    Zc = Z.columns if isinstance(Z, SnapshotEnsemble) else np.asarray(Z)
    if Xc.shape[0] != Zc.shape[0]:
        raise ConfigError("ensembles have different state dimensions")
    s = np.linalg.svd(Zc.T @ Xc, compute_uv=False)
    rank = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    m, n = Xc.shape[1], Zc.shape[1]
    full = rank == min(m, n)
    return SufficiencyVerdict(
        sufficient=not full,
        rank=rank,
        m=m,
        n=n,
        singular_values=s,
        suggested=(2 * m, 2 * n) if full else None,
    )
