"""Synthetic systems with a prescribed controllable/observable mode structure.

The state matrix is ``A = Q M Q'`` with ``Q`` a random orthogonal matrix and
``M`` real block diagonal (1x1 real eigenvalues and 2x2 rotation blocks for
conjugate pairs).  Because ``Q`` is orthogonal the modal input rows ``Q'B``
and modal output columns ``CQ`` carry the coupling magnitudes directly, so
couplings between mode groups can be set to exactly zero or to ``eps`` times
a unit-norm random matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from .errors import ConfigError
from .linsys import StateSpaceSystem, _sort_order

__all__ = ["SyntheticSystem", "gen_synthetic", "KINDS"]

KINDS = ("a3-exact", "a4-perturbed")
GROUPS = ("co", "c_unobs", "unc_o", "unc_unobs")


@dataclass(frozen=True, eq=False)
class SyntheticSystem:
    """A generated system together with its ground truth."""

    system: StateSpaceSystem
    l: int
    eigenvalues_co: np.ndarray
    groups: dict
    manifest: dict
    modal: tuple = ()

    def exact_markov(self, horizon: int) -> np.ndarray:
        """``C A^i B`` for ``i = 1..horizon`` from the modal triple.

        Couplings that are zero by construction contribute exactly nothing,
        so this is free of the rounding noise of the rotated full-order triple.
        """
        M, Bm, Cm = self.modal
        W = Bm
        out = np.empty((horizon, Cm.shape[0], Bm.shape[1]))
        for i in range(horizon):
            W = M @ W
            out[i] = Cm @ W
        return out


def _draw_block(rng, count, lo, hi, pair_prob):
    """Real block-diagonal matrix with ``count`` eigenvalues and its spectrum."""
    blocks, lam = [], []
    left = count
    while left > 0:
        r = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        if left >= 2 and rng.random() < pair_prob:
            th = rng.uniform(0.1, np.pi - 0.1)
            a, b = r * np.cos(th), r * np.sin(th)
            blocks.append(np.array([[a, b], [-b, a]]))
            lam += [complex(a, b), complex(a, -b)]
            left -= 2
        else:
            sign = 1.0 if rng.random() < 0.75 else -1.0
            blocks.append(np.array([[sign * r]]))
            lam.append(complex(sign * r, 0.0))
            left -= 1
    return blocks, np.array(lam)


def _unit(rng, shape):
    M = rng.standard_normal(shape)
    nrm = np.linalg.norm(M)
    return M / nrm if nrm > 0 else M


def _split(N, l, rng, counts):
    rest = N - l
    if counts is not None:
        c_unobs, unc_o = counts
        if c_unobs + unc_o > rest:
            raise ConfigError("group counts exceed N - l")
        return l, c_unobs, unc_o, rest - c_unobs - unc_o
    c_unobs = int(rng.integers(0, rest + 1) // 3)
    unc_o = int(rng.integers(0, rest - c_unobs + 1) // 2)
    return l, c_unobs, unc_o, rest - c_unobs - unc_o


def gen_synthetic(
    kind: str = "a3-exact",
    N: int = 20,
    l: int = 3,
    eps: float = 0.0,
    seed: int = 0,
    *,
    p: int = 2,
    q: int = 2,
    pair_prob: float = 0.5,
    magnitude: tuple[float, float] = (0.3, 0.95),
    counts: tuple[int, int] | None = None,
) -> SyntheticSystem:
    """Random stable system whose ``l`` controllable-and-observable modes are known.

    Parameters
    ----------
    kind : {"a3-exact", "a4-perturbed"}
        ``a3-exact`` zeroes the four cross couplings; ``a4-perturbed`` sets them
        to ``eps`` times random unit-Frobenius-norm matrices.
    N, l : int
        State dimension and number of controllable-and-observable modes.
    eps : float
        Coupling magnitude, ignored for ``a3-exact``.
    counts : (int, int), optional
        Sizes of the controllable-unobservable and uncontrollable-observable
        groups; the remainder is uncontrollable and unobservable.  Drawn from
        ``seed`` when omitted.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown synthetic kind {kind!r}; expected one of {KINDS}")
    if not 1 <= l < N:
        raise ConfigError(f"need 1 <= l < N, got l={l}, N={N}")
    if eps < 0:
        raise ConfigError("eps must be non-negative")
    lo, hi = magnitude
    if not 0 < lo <= hi < 1:
        raise ConfigError("eigenvalue magnitudes must lie in (0, 1)")
    if kind == "a3-exact":
        eps = 0.0
    rng = np.random.default_rng(seed)
    sizes = _split(N, l, rng, counts)

    blocks, spectra = [], []
    for size in sizes:
        b, lam = _draw_block(rng, size, lo, hi, pair_prob)
        blocks.append(b)
        spectra.append(lam)
    M = np.zeros((N, N))
    pos = 0
    index = {}
    for g, bl in zip(GROUPS, blocks):
        start = pos
        for blk in bl:
            k = blk.shape[0]
            M[pos:pos + k, pos:pos + k] = blk
            pos += k
        index[g] = np.arange(start, pos)

    Bm = np.zeros((N, p))
    Cm = np.zeros((q, N))
    for g in ("co", "c_unobs"):
        Bm[index[g]] = rng.standard_normal((len(index[g]), p))
    for g in ("co", "unc_o"):
        Cm[:, index[g]] = rng.standard_normal((q, len(index[g])))
    # the perturbations are drawn even when eps = 0 so that a4 at eps=0 reproduces a3
    C1 = _unit(rng, (len(index["unc_o"]), p))
    C2 = _unit(rng, (len(index["unc_unobs"]), p))
    C3 = _unit(rng, (q, len(index["c_unobs"])))
    C4 = _unit(rng, (q, len(index["unc_unobs"])))
    if eps > 0:
        Bm[index["unc_o"]] = eps * C1
        Bm[index["unc_unobs"]] = eps * C2
        Cm[:, index["c_unobs"]] = eps * C3
        Cm[:, index["unc_unobs"]] = eps * C4

    Q = ortho_group.rvs(N, random_state=rng) if N > 1 else np.ones((1, 1))
    A = Q @ M @ Q.T
    B = Q @ Bm
    C = Cm @ Q.T

    lam_co = spectra[0][_sort_order(spectra[0])]
    manifest = {
        "kind": kind,
        "N": int(N),
        "l": int(l),
        "p": int(p),
        "q": int(q),
        "eps": float(eps),
        "seed": int(seed),
        "group_sizes": {g: int(s) for g, s in zip(GROUPS, sizes)},
        "eigenvalues_co": [[float(z.real), float(z.imag)] for z in lam_co],
        "spectral_radius": float(max(np.abs(np.concatenate(spectra)))),
    }
    sys = StateSpaceSystem(A, B, C, dt=1.0, description=f"synthetic {kind}", metadata=manifest)
    groups = {g: spectra[i] for i, g in enumerate(GROUPS)}
    return SyntheticSystem(sys, l, lam_co, groups, manifest, (M, Bm, Cm))
