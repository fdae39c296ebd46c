"""Discrete-time linear state-space systems.

The primal system is ``x_k = A x_{k-1} + B u_k``, ``y_k = C x_k``; its adjoint
is the transposed triple ``(A', C', B')``.  ``A`` is kept sparse (CSC) when
given sparse, ``B`` and ``C`` may be dense arrays or sparse selection maps.

Every routine here is duck-typed on objects exposing ``A``, ``B`` and ``C``
attributes so the same code evaluates full-order systems and (possibly complex)
reduced-order models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, DefectiveMatrixError, NumericalError

__all__ = [
    "StateSpaceSystem",
    "ModalDecomposition",
    "ModePartition",
    "propagate",
    "adjoint",
    "markov_parameters",
    "eigendecompose",
    "eig_biorthogonal",
    "classify_modes",
    "transfer_function",
    "spectral_radius",
    "as_dense",
]


def as_dense(M):
    """Return ``M`` as a dense ndarray (no copy when already dense)."""
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M)


def _matnorm(M):
    if sp.issparse(M):
        return float(spla.norm(M))
    return float(np.linalg.norm(M))


def _freeze(M):
    if sp.issparse(M):
        return M
    M = np.array(M, dtype=float if not np.iscomplexobj(M) else complex)
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class StateSpaceSystem:
    """Real discrete-time triple ``(A, B, C)``.

    Parameters
    ----------
    A : (N, N) array or sparse matrix
        One-step state transition map.
    B : (N, p) array or sparse matrix
        Input map.
    C : (q, N) array or sparse matrix
        Output map.
    dt : float
        Physical duration of one step; metadata only.
    description : str
        Free-form label stored in manifests.
    """

    A: object
    B: object
    C: object
    dt: float = 1.0
    description: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        A, B, C = self.A, self.B, self.C
        if sp.issparse(A):
            A = sp.csc_matrix(A, dtype=float)
        if B is not None and not sp.issparse(B):
            B = np.atleast_2d(np.asarray(B, dtype=float))
        if C is not None and not sp.issparse(C):
            C = np.atleast_2d(np.asarray(C, dtype=float))
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "B", _freeze(B))
        object.__setattr__(self, "C", _freeze(C))

        N = self.A.shape[0]
        if self.A.ndim != 2 or self.A.shape != (N, N):
            raise ConfigError(f"A must be square, got shape {self.A.shape}")
        if self.B.shape[0] != N:
            raise ConfigError(f"B has {self.B.shape[0]} rows, expected N={N}")
        if self.C.shape[1] != N:
            raise ConfigError(f"C has {self.C.shape[1]} columns, expected N={N}")
        for name in "ABC":
            M = getattr(self, name)
            data = M.data if sp.issparse(M) else M
            if not np.all(np.isfinite(data)):
                raise ConfigError(f"{name} contains non-finite entries")

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    def is_stable(self) -> bool:
        return spectral_radius(self.A) < 1.0

    def __repr__(self):
        kind = "sparse" if sp.issparse(self.A) else "dense"
        return f"StateSpaceSystem(N={self.N}, p={self.p}, q={self.q}, {kind})"


AdjointSystem = StateSpaceSystem


def adjoint(sys: StateSpaceSystem) -> StateSpaceSystem:
    """Return the adjoint triple ``(A', C', B')``.

    Transposition is exact, so ``adjoint(adjoint(sys))`` reproduces ``sys``
    bit for bit.
    """
    At = sys.A.T
    if sp.issparse(At):
        At = sp.csc_matrix(At)
    return StateSpaceSystem(
        At,
        sys.C.T,
        sys.B.T,
        dt=sys.dt,
        description=f"adjoint({sys.description})" if sys.description else "adjoint",
    )


def propagate(sys, x0, inputs) -> np.ndarray:
    """Run ``x_k = A x_{k-1} + B u_k`` for every input row.

    Parameters
    ----------
    sys
        Any object with ``A`` and ``B``.
    x0 : (N,) array
        Initial state.
    inputs : (K, p) array
        One input vector per step.

    Returns
    -------
    (K, N) array
        States ``x_1 .. x_K``.
    """
    A, B = sys.A, sys.B
    N, p = B.shape
    x = np.asarray(x0)
    if x.shape != (N,):
        raise ConfigError(f"x0 must have length {N}, got shape {x.shape}")
    U = np.asarray(inputs, dtype=float)
    if U.ndim == 1 and p == 1:
        U = U[:, None]
    if U.ndim != 2 or U.shape[1] != p:
        raise ConfigError(f"inputs must be (K, {p}), got shape {U.shape}")

    dtype = np.result_type(x.dtype, A.dtype, B.dtype, float)
    # precompute B u_k for all steps in one product
    forcing = np.asarray((B @ U.T).T) if U.shape[0] else np.zeros((0, N))
    out = np.empty((U.shape[0], N), dtype=dtype)
    x = x.astype(dtype)
    for k in range(U.shape[0]):
        x = A @ x + forcing[k]
        out[k] = x
    return out


def markov_parameters(sys, horizon: int) -> np.ndarray:
    """Return ``C A^i B`` for ``i = 1 .. horizon`` as a ``(horizon, q, p)`` array.

    Powers of ``A`` are never formed; ``A`` is applied repeatedly to the
    columns of ``B``.
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    W = as_dense(sys.B)
    C = sys.C
    out = None
    for i in range(horizon):
        W = sys.A @ W
        Y = np.asarray(C @ W)
        if out is None:
            out = np.empty((horizon,) + Y.shape, dtype=Y.dtype)
        out[i] = Y
    return out


def spectral_radius(A) -> float:
    """Largest eigenvalue magnitude of ``A``.

    Dense eigenvalues for moderate sizes, ARPACK for large sparse operators.
    """
    n = A.shape[0]
    if sp.issparse(A) and n > 3000:
        vals = spla.eigs(A, k=1, which="LM", return_eigenvectors=False, tol=1e-10)
        return float(np.abs(vals).max())
    return float(np.abs(np.linalg.eigvals(as_dense(A))).max())


@dataclass(frozen=True, eq=False)
class ModalDecomposition:
    """``A = V diag(eigenvalues) U^H`` with ``U^H V = I``.

    Right eigenvectors are unit 2-norm columns of ``V``; ``U`` holds the
    matching left eigenvectors as columns.
    """

    eigenvalues: np.ndarray
    V: np.ndarray
    U: np.ndarray

    @property
    def N(self) -> int:
        return len(self.eigenvalues)


def _sort_order(lam: np.ndarray) -> np.ndarray:
    # descending |lam|, then descending real part, then ascending imag part;
    # rounding keeps conjugates and exact ties together
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    mag = np.round(np.abs(lam) / scale, 11)
    re = np.round(lam.real / scale, 11)
    im = np.round(lam.imag / scale, 11)
    return np.lexsort((im, -re, -mag))


def eig_biorthogonal(M, cond_max: float = 1e10):
    """Eigendecompose a dense matrix with biorthogonal left/right eigenvectors.

    Returns
    -------
    lam : (n,) complex array
        Eigenvalues sorted by descending magnitude (conjugates adjacent).
    V : (n, n) complex array
        Unit-norm right eigenvectors.
    U : (n, n) complex array
        Left eigenvectors scaled so that ``U^H V = I``.

    Raises
    ------
    DefectiveMatrixError
        If the eigenvector matrix condition number exceeds ``cond_max``.
    """
    M = as_dense(M)
    lam, V = np.linalg.eig(M)
    lam = lam.astype(complex)
    V = V.astype(complex)
    order = _sort_order(lam)
    lam, V = lam[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)

    cond = np.linalg.cond(V) if len(lam) else 1.0
    if not np.isfinite(cond) or cond > cond_max:
        # blame the eigenvalue with the worst individual condition number
        Vinv = np.linalg.pinv(V)
        kappa = np.linalg.norm(Vinv, axis=1)
        worst = int(np.argmax(kappa))
        tol = 1e-6 * max(1.0, abs(lam[worst]))
        cluster = lam[np.abs(lam - lam[worst]) <= max(tol, 1e-3 * abs(lam[worst]))]
        raise DefectiveMatrixError(
            f"eigenvector matrix condition number {cond:.3e} exceeds {cond_max:.1e}; "
            f"near-defective cluster around eigenvalue {lam[worst]:.6g}: "
            f"{np.array2string(cluster, precision=6)}"
        )
    U = np.linalg.inv(V).conj().T
    return lam, V, U


def eigendecompose(sys, cond_max: float = 1e10) -> ModalDecomposition:
    """Modal decomposition of ``sys.A`` (dense eigensolve)."""
    lam, V, U = eig_biorthogonal(sys.A, cond_max=cond_max)
    for M in (lam, V, U):
        M.setflags(write=False)
    return ModalDecomposition(lam, V, U)


@dataclass(frozen=True)
class ModePartition:
    """Four-way split of mode indices (0-based) by controllability/observability.

    ``co`` controllable and observable, ``c_unobs`` controllable only,
    ``unc_o`` observable only, ``unc_unobs`` neither.
    """

    co: np.ndarray
    c_unobs: np.ndarray
    unc_o: np.ndarray
    unc_unobs: np.ndarray
    controllability: np.ndarray
    observability: np.ndarray
    eps_class: float

    @property
    def l(self) -> int:
        return len(self.co)


def classify_modes(dec: ModalDecomposition, sys, eps_class: float = 1e-8) -> ModePartition:
    """Classify modes by the relative magnitudes ``|U_i^H B|/|B|`` and ``|C V_i|/|C|``."""
    B = as_dense(sys.B)
    ctrl = np.linalg.norm(dec.U.conj().T @ B, axis=1)
    obs = np.linalg.norm(np.asarray(sys.C @ dec.V), axis=0)
    nb, nc = _matnorm(sys.B), _matnorm(sys.C)
    is_c = ctrl > eps_class * nb if nb > 0 else np.zeros(dec.N, bool)
    is_o = obs > eps_class * nc if nc > 0 else np.zeros(dec.N, bool)
    idx = np.arange(dec.N)
    return ModePartition(
        co=idx[is_c & is_o],
        c_unobs=idx[is_c & ~is_o],
        unc_o=idx[~is_c & is_o],
        unc_unobs=idx[~is_c & ~is_o],
        controllability=ctrl,
        observability=obs,
        eps_class=eps_class,
    )


def transfer_function(sys, omega: float, residual_tol: float = 1e-8):
    """Evaluate ``H(w) = C (e^{jw} I - A)^{-1} B``.

    Returns
    -------
    H : (q, p) complex array
    smax : float
        Largest singular value of ``H``.
    """
    z = np.exp(1j * omega)
    A = sys.A
    B = as_dense(sys.B).astype(complex)
    n = A.shape[0]
    if sp.issparse(A):
        M = (z * sp.identity(n, format="csc") - A).tocsc()
        try:
            X = spla.splu(M).solve(B)
        except RuntimeError as exc:
            raise NumericalError(f"resolvent factorization failed at omega={omega}: {exc}")
    else:
        M = z * np.eye(n) - np.asarray(A)
        try:
            # a singular resolvent shows up as a non-finite residual below
            with np.errstate(all="ignore"):
                X = sla.solve(M, B)
        except (sla.LinAlgError, ValueError) as exc:
            raise NumericalError(f"resolvent solve failed at omega={omega}: {exc}")
    with np.errstate(all="ignore"):
        res = np.linalg.norm(M @ X - B) / max(np.linalg.norm(B), 1e-300)
    if not np.isfinite(res) or res > residual_tol:
        raise NumericalError(f"resolvent solve at omega={omega} left residual {res:.3e}")
    H = np.asarray(sys.C @ X)
    smax = float(np.linalg.svd(H, compute_uv=False)[0]) if H.size else 0.0
    return H, smax
