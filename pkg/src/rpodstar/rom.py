"""Snapshot-based balancing reductions.

Four pipelines share one core: given primal snapshots ``X`` and adjoint
snapshots ``Z``, take the SVD ``Z'X = L S R'``, keep ``l`` triplets and form
the biorthogonal bases ``T = X R S^{-1/2}``, ``S_ = S^{-1/2} L' Z'``.

* ``bpod``                   impulse ensembles of every input and output
* ``modalize``               rotate any ROM into the eigenbasis of its ``A``
* ``rpod_star``              one white-noise run each for primal and adjoint
* ``bpod_output_projection`` adjoint impulses from a rank-``s`` output basis
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, DefectiveMatrixError, SizeSelectionError
from .linsys import StateSpaceSystem, adjoint, as_dense, eig_biorthogonal
from .snapshots import (
    SnapshotEnsemble,
    impulse_ensemble,
    impulse_ensemble_primal,
    noise_ensemble,
    noise_ensemble_adjoint,
)
from .timing import PhaseTimer

__all__ = [
    "HankelSvd",
    "RomBases",
    "ReducedOrderModel",
    "SizeTrace",
    "hankel",
    "svd_truncate",
    "reduce_from_ensembles",
    "bpod",
    "modalize",
    "rpod_star",
    "output_projection_basis",
    "bpod_output_projection",
    "select_rom_size",
    "derive_seeds",
]

RANK_TOL = 1e-10


class RomWarning(UserWarning):
    pass


def _cols(E):
    return E.columns if isinstance(E, SnapshotEnsemble) else np.asarray(E)


def hankel(Z, X, block: int = 4096) -> np.ndarray:
    """``Z'X`` accumulated over column blocks of ``X``."""
    Zc, Xc = _cols(Z), _cols(X)
    if Zc.shape[0] != Xc.shape[0]:
        raise ConfigError(
            f"state dimensions differ: Z has {Zc.shape[0]} rows, X has {Xc.shape[0]}"
        )
    H = np.empty((Zc.shape[1], Xc.shape[1]), dtype=np.result_type(Zc, Xc))
    ZT = Zc.T
    for j in range(0, Xc.shape[1], block):
        H[:, j:j + block] = ZT @ Xc[:, j:j + block]
    return H


@dataclass(frozen=True, eq=False)
class HankelSvd:
    """Economy SVD of ``H = L diag(s) R'`` with a truncation index.

    ``l`` is the order actually used (never above the numerical rank);
    ``requested_l`` is what the caller asked for.
    """

    H: np.ndarray
    singular_values: np.ndarray
    L: np.ndarray
    R: np.ndarray
    l: int
    rank: int
    requested_l: int | None
    rank_tol: float
    warnings: tuple = ()

    @property
    def sigma_next(self) -> float:
        s = self.singular_values
        return float(s[self.l]) if self.l < len(s) else 0.0

    @property
    def shape(self):
        return self.H.shape


def svd_truncate(H, l: int | None = None, rank_tol: float = RANK_TOL) -> HankelSvd:
    """SVD of ``H`` truncated at ``l`` (or at the numerical rank when ``l`` is None).

    Singular values below ``rank_tol * s_1`` are never inverted; a request
    above the numerical rank is clipped and a warning recorded.
    """
    H = np.asarray(H)
    kmax = min(H.shape)
    if l is not None and not 0 <= l <= kmax:
        raise ConfigError(f"truncation l={l} outside [0, {kmax}]")
    try:
        L, s, Rt = sla.svd(H, full_matrices=False, lapack_driver="gesdd")
    except sla.LinAlgError:
        L, s, Rt = sla.svd(H, full_matrices=False, lapack_driver="gesvd")
    rank = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    notes = []
    if l is None:
        use = rank
    elif l > rank:
        notes.append(f"requested l={l} exceeds numerical rank {rank}; truncating at {rank}")
        use = rank
    else:
        use = l
    return HankelSvd(H, s, L, Rt.T, use, rank, l, rank_tol, tuple(notes))


@dataclass(frozen=True, eq=False)
class RomBases:
    """Direct basis ``T`` (N x l) and inverse basis ``S`` (l x N) with ``S T = I``."""

    T: np.ndarray
    S: np.ndarray
    modal: bool = False
    eigenvalues: np.ndarray | None = None
    P: np.ndarray | None = None

    def biorthogonality_error(self) -> float:
        return float(np.abs(self.S @ self.T - np.eye(self.T.shape[1])).max())


@dataclass(frozen=True, eq=False)
class ReducedOrderModel:
    """Reduced triple; complex diagonal ``A`` when ``modal``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    method: str
    provenance: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.order

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    @property
    def modal(self) -> bool:
        return bool(self.provenance.get("modal", False))

    def spectral_radius(self) -> float:
        if self.order == 0:
            return 0.0
        if self.modal:
            return float(np.abs(np.diag(self.A)).max())
        return float(np.abs(np.linalg.eigvals(self.A)).max())

    def to_real(self) -> "ReducedOrderModel":
        """Real block-diagonal form (2x2 rotation blocks for conjugate pairs)."""
        if not np.iscomplexobj(self.A):
            return self
        lam = np.diag(self.A)
        n = len(lam)
        Q = np.zeros((n, n), dtype=complex)
        i = 0
        while i < n:
            if abs(lam[i].imag) <= 1e-12 * max(1.0, abs(lam[i])):
                Q[i, i] = 1.0
                i += 1
                continue
            if i + 1 >= n or abs(lam[i + 1] - lam[i].conjugate()) > 1e-8 * max(1.0, abs(lam[i])):
                raise ValueError(f"eigenvalue {lam[i]} has no adjacent conjugate partner")
            # a = r1 + i r2 and its conjugate
            Q[i:i + 2, i:i + 2] = [[1.0, 1.0j], [1.0, -1.0j]]
            i += 2
        Qi = np.linalg.inv(Q)
        Ar = (Qi @ self.A @ Q).real
        Br = (Qi @ self.B).real
        Cr = (self.C @ Q).real
        prov = dict(self.provenance, real_form=True, modal=False)
        return ReducedOrderModel(Ar, Br, Cr, self.method, prov)


def _project(sys, T, S):
    AT = sys.A @ T
    return S @ AT, np.asarray(S @ as_dense(sys.B)), np.asarray(sys.C @ T)


def _balancing_bases(Xc, Zc, svd: HankelSvd, k: int | None = None):
    k = svd.l if k is None else k
    s = svd.singular_values[:k]
    w = 1.0 / np.sqrt(s)
    T = Xc @ (svd.R[:, :k] * w)
    S = (svd.L[:, :k] * w).T @ Zc.T
    return T, S


def _modal_rotation(Ab, T, S, cond_max):
    try:
        lam, P, Pinv_h = eig_biorthogonal(Ab, cond_max=cond_max)
    except DefectiveMatrixError as exc:
        raise DefectiveMatrixError(f"reduced operator is defective ({exc}); try a smaller l")
    Pinv = Pinv_h.conj().T
    Phi = Pinv @ S
    Psi = T @ P
    residual = float(np.abs(Pinv @ Ab @ P - np.diag(lam)).max()) if len(lam) else 0.0
    return lam, P, Phi, Psi, residual


def reduce_from_ensembles(
    sys,
    X,
    Z,
    l: int | None = None,
    *,
    modal: bool = True,
    method: str = "custom",
    rank_tol: float = RANK_TOL,
    cond_max: float = 1e10,
    timer: PhaseTimer | None = None,
):
    """Balanced reduction from arbitrary snapshot ensembles.

    Returns ``(rom, bases, svd)``; with ``modal=True`` the ROM is expressed
    in the eigenbasis of ``S A T``.
    """
    timer = timer or PhaseTimer()
    Xc, Zc = _cols(X), _cols(Z)
    with timer.phase("construct_ZtX"):
        H = hankel(Zc, Xc)
    with timer.phase("solve_SVD"):
        svd = svd_truncate(H, l, rank_tol=rank_tol)
    if svd.l == 0:
        raise SizeSelectionError("Hankel matrix is numerically zero; no admissible ROM order")
    for note in svd.warnings:
        warnings.warn(note, RomWarning, stacklevel=2)
    with timer.phase("build_ROM"):
        T, S = _balancing_bases(Xc, Zc, svd)
        Ab, Bb, Cb = _project(sys, T, S)
        prov = {
            "method": method,
            "l": svd.l,
            "requested_l": l,
            "rank": svd.rank,
            "sigma": svd.singular_values.tolist(),
            "sigma_next": svd.sigma_next,
            "hankel_shape": list(H.shape),
            "warnings": list(svd.warnings),
            "modal": False,
        }
        if modal:
            lam, P, Phi, Psi, resid = _modal_rotation(Ab, T, S, cond_max)
            rom = ReducedOrderModel(
                np.diag(lam),
                np.asarray(Phi @ as_dense(sys.B)),
                np.asarray(sys.C @ Psi),
                method,
                dict(prov, modal=True, diagonalization_residual=resid),
            )
            bases = RomBases(Psi, Phi, modal=True, eigenvalues=lam, P=P)
        else:
            rom = ReducedOrderModel(Ab, Bb, Cb, method, prov)
            bases = RomBases(T, S)
    return rom, bases, svd


def bpod(
    sys: StateSpaceSystem,
    primal_times,
    adjoint_times,
    l: int | None = None,
    *,
    rank_tol: float = RANK_TOL,
):
    """Balanced POD from impulse responses of all inputs and all outputs.

    Returns ``(rom, bases)`` with ``rom = (S A T, S B, C T)``.
    """
    timer = PhaseTimer()
    with timer.phase("generate_X"):
        X = impulse_ensemble_primal(sys, primal_times)
    with timer.phase("generate_Z"):
        adj = adjoint(sys)
        Z = impulse_ensemble(adj.A, adj.B, adjoint_times, source="adjoint")
    rom, bases, svd = reduce_from_ensembles(
        sys, X, Z, l, modal=False, method="bpod", rank_tol=rank_tol, timer=timer
    )
    rom.provenance.update(
        timings=timer.stop(),
        primal=X.manifest(),
        adjoint=Z.manifest(),
    )
    return rom, bases


def modalize(rom: ReducedOrderModel, bases: RomBases, sys, *, cond_max: float = 1e10):
    """Rotate a ROM into the eigenbasis of its reduced operator.

    With ``A_r = P diag(lam) P^{-1}`` the new bases are ``Phi = P^{-1} S`` and
    ``Psi = T P``; the result is ``(diag(lam), Phi B, C Psi)``.
    """
    lam, P, Phi, Psi, resid = _modal_rotation(rom.A, bases.T, bases.S, cond_max)
    method = rom.method if rom.method.endswith("modal") or rom.method == "rpod-star" else f"{rom.method}-modal"
    prov = dict(rom.provenance, modal=True, diagonalization_residual=resid, method=method)
    new = ReducedOrderModel(
        np.diag(lam), np.asarray(Phi @ as_dense(sys.B)), np.asarray(sys.C @ Psi), method, prov
    )
    return new, RomBases(Psi, Phi, modal=True, eigenvalues=lam, P=P)


def derive_seeds(seed: int) -> tuple[int, int]:
    """Independent primal/adjoint seeds from one experiment seed."""
    a, b = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(b)


def rpod_star(
    sys: StateSpaceSystem,
    m: int,
    n: int,
    spacing_primal: int,
    spacing_adjoint: int,
    l: int | str | None = None,
    seed: int = 0,
    *,
    t_ss: int | None = None,
    rank_tol: float = RANK_TOL,
    noise_scale: float = 1.0,
    cond_max: float = 1e10,
):
    """Randomized POD from one white-noise run of the primal and the adjoint.

    ``l`` may be an integer, ``None`` (numerical rank of ``Z'X``) or
    ``"select"`` to run :func:`select_rom_size`.

    Returns ``(rom, bases, svd)``.
    """
    timer = PhaseTimer()
    notes = []
    if t_ss is not None:
        if m * spacing_primal < t_ss:
            notes.append(f"primal window m*dT={m * spacing_primal} shorter than t_ss={t_ss}")
        if n * spacing_adjoint < t_ss:
            notes.append(f"adjoint window n*dT={n * spacing_adjoint} shorter than t_ss={t_ss}")
    for note in notes:
        warnings.warn(note, RomWarning, stacklevel=2)

    seed_x, seed_z = derive_seeds(seed)
    with timer.phase("generate_X"):
        X = noise_ensemble(sys, m, spacing_primal, seed_x, scale=noise_scale)
    with timer.phase("generate_Z"):
        Z = noise_ensemble_adjoint(sys, n, spacing_adjoint, seed_z, scale=noise_scale)

    trace = None
    if l == "select":
        with timer.phase("construct_ZtX"):
            H = hankel(Z, X)
        with timer.phase("solve_SVD"):
            full = svd_truncate(H, None, rank_tol=rank_tol)
        if full.rank == 0:
            raise SizeSelectionError("Hankel matrix is numerically zero; no admissible ROM order")
        with timer.phase("select_size"):
            l, trace = select_rom_size(sys, X, Z, full)

    rom, bases, svd = reduce_from_ensembles(
        sys, X, Z, l, modal=True, method="rpod-star", rank_tol=rank_tol,
        cond_max=cond_max, timer=timer,
    )
    rho = rom.spectral_radius()
    if rho >= 1.0:
        raise SizeSelectionError(
            f"reduced operator unstable at l={svd.l} (spectral radius {rho:.6g}); "
            "use select_rom_size to pick a smaller order"
        )
    rom.provenance.update(
        timings=timer.stop(),
        seed=seed,
        primal=X.manifest(),
        adjoint=Z.manifest(),
        warnings=rom.provenance["warnings"] + notes,
    )
    if trace is not None:
        rom.provenance["size_trace"] = trace.as_dict()
    return rom, bases, svd


def output_projection_basis(X, C, s: int) -> np.ndarray:
    """Leading ``s`` POD modes (left singular vectors) of ``Y = C X``."""
    Y = np.asarray(C @ _cols(X))
    q = Y.shape[0]
    if not 1 <= s <= q:
        raise ConfigError(f"projection rank s={s} outside [1, q={q}]")
    U, sv, _ = np.linalg.svd(Y, full_matrices=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv.size and sv[0] > 0 else 0
    if s <= rank:
        return U[:, :s]
    warnings.warn(
        f"output projection rank s={s} exceeds rank {rank} of the output data; padding",
        RomWarning,
        stacklevel=2,
    )
    # complete the basis with an orthonormal complement
    Q, _ = np.linalg.qr(np.hstack([U[:, :rank], np.eye(q)]))
    return Q[:, :s]


def bpod_output_projection(
    sys: StateSpaceSystem,
    primal_times,
    adjoint_times,
    s: int,
    l: int | None = None,
    *,
    rank_tol: float = RANK_TOL,
):
    """Balanced POD with adjoint runs started from ``C' Theta_s``.

    Returns ``(rom, bases)``; the Hankel matrix has ``s * len(adjoint_times)``
    rows and ``p * len(primal_times)`` columns.
    """
    timer = PhaseTimer()
    with timer.phase("generate_X"):
        X = impulse_ensemble_primal(sys, primal_times)
    with timer.phase("projection"):
        theta = output_projection_basis(X, sys.C, s)
    with timer.phase("generate_Z"):
        adj = adjoint(sys)
        Z = impulse_ensemble(adj.A, adj.B @ theta, adjoint_times, source="adjoint")
    rom, bases, svd = reduce_from_ensembles(
        sys, X, Z, l, modal=False, method="output-projection", rank_tol=rank_tol, timer=timer
    )
    rom.provenance.update(
        timings=timer.stop(),
        s=s,
        primal=X.manifest(),
        adjoint=Z.manifest(),
    )
    return rom, bases


@dataclass
class SizeTrace:
    """Spectra of the reduced operator visited by :func:`select_rom_size`."""

    trials: list = field(default_factory=list)
    stable_k: int | None = None
    clean_k: int | None = None
    selected: int | None = None
    persistent: dict = field(default_factory=dict)

    def add(self, k, spectrum):
        self.trials.append((k, spectrum))

    def spectrum(self, k):
        for kk, sp_ in self.trials:
            if kk == k:
                return sp_
        return None

    def as_dict(self) -> dict:
        return {
            "stable_k": self.stable_k,
            "clean_k": self.clean_k,
            "selected": self.selected,
            "persistent": {int(k): int(v) for k, v in self.persistent.items()},
            "trials": [
                {"k": int(k), "abs_max": float(np.abs(s).max(initial=0.0)),
                 "eigenvalues": [[float(v.real), float(v.imag)] for v in s]}
                for k, s in self.trials
            ],
        }


def _matched(small, large, tol) -> bool:
    """Every eigenvalue of ``small`` has a distinct partner in ``large`` within ``tol``."""
    if len(small) == 0:
        return True
    if len(small) > len(large):
        return False
    D = np.abs(small[:, None] - large[None, :])
    r, c = linear_sum_assignment(D)
    return bool(np.all(D[r, c] <= tol))


def select_rom_size(
    sys,
    X,
    Z,
    svd: HankelSvd,
    *,
    zero_tol: float = 1e-6,
    match_tol: float = 1e-3,
    weak_tol: float = 1e-3,
    window: int | None = None,
):
    """Trial-and-error choice of the ROM order from the spectra of ``S_k A T_k``.

    1. start at the numerical rank of ``Z'X`` and drop ``k`` until the
       reduced operator is stable;
    2. keep dropping while it has eigenvalues below ``zero_tol * max|lam|``
       (perturbations of zero eigenvalues); call the result ``k_top``;
    3. walk down from ``k_top - 1`` and stop at the first ``k`` whose
       non-negligible eigenvalues all reappear (one-to-one match within
       ``match_tol``) in every larger order up to ``k_top``, or up to
       ``k + window`` when ``window`` is given.  Spurious directions wander
       as ``k`` changes while the controllable-and-observable eigenvalues
       stay put.

    Orders below ``k_top`` are only considered while the Hankel directions
    they discard are weak (``sigma_{k+1} < weak_tol * sigma_1``).  Dropping a
    strong direction changes the input-output map, and a dominant, nearly
    decoupled mode can otherwise make a too-small block look consistent.

    The order returned is the number of non-negligible eigenvalues at that
    ``k``; when no smaller order is consistent, ``k_top`` is used.

    Returns ``(l, trace)``.
    """
    Xc, Zc = _cols(X), _cols(Z)
    kmax = svd.rank
    if kmax == 0:
        raise SizeSelectionError("Hankel matrix is numerically zero")
    # the order-k operator is the leading k x k block of the order-kmax one
    T, S = _balancing_bases(Xc, Zc, svd, kmax)
    G = S @ (sys.A @ T)
    trace = SizeTrace()
    cache = {}

    def spectrum(k):
        if k not in cache:
            cache[k] = np.linalg.eigvals(G[:k, :k])
            trace.add(k, cache[k])
        return cache[k]

    def negligible(ev):
        return np.abs(ev) < zero_tol * np.abs(ev).max()

    k = kmax
    while np.abs(spectrum(k)).max() >= 1.0:
        k -= 1
        if k == 0:
            raise SizeSelectionError("no stable reduced operator at any order")
    trace.stable_k = k

    while k > 1 and negligible(spectrum(k)).any():
        if np.abs(spectrum(k - 1)).max() >= 1.0:
            break
        k -= 1
    trace.clean_k = top = k

    chosen = top
    sig = svd.singular_values
    for k in range(top - 1, 0, -1):
        if sig[k] >= weak_tol * sig[0]:
            break
        ev = spectrum(k)
        ev = ev[~negligible(ev)]
        upper = range(k + 1, top + 1 if window is None else min(k + window, top) + 1)
        if all(_matched(ev, spectrum(j), match_tol) for j in upper):
            chosen = k
            break
    ev = spectrum(chosen)
    l = int(np.sum(~negligible(ev)))
    trace.selected = l
    return l, trace
