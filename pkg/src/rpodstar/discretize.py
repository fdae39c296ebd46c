"""Finite-difference benchmark systems.

Two models are provided: conduction along a 1-D slab (Dirichlet at ``x=0``,
insulated at ``x=L``) and 3-D contaminant transport with wind along ``x``,
cross-wind eddy diffusion and a reflective ground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .linsys import StateSpaceSystem

__all__ = [
    "HeatConfig",
    "DispersionConfig",
    "build_heat_1d",
    "build_advection_diffusion_3d",
    "eddy_diffusivity",
    "heat_benchmark_config",
    "dispersion_desk_config",
    "dispersion_paper_config",
]


@dataclass(frozen=True)
class HeatConfig:
    """1-D conduction slab.

    ``output`` is ``"full"`` for every node or a list of node indices.
    ``scheme`` selects forward (``"explicit"``) or backward (``"implicit"``)
    Euler stepping.
    """

    L: float = 1.0
    N: int = 100
    alpha: float = 4.2e-6
    dt: float = 1.0
    source_positions: tuple = (0.15, 0.45)
    output: object = "full"
    scheme: str = "explicit"

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def ratio(self) -> float:
        return self.alpha * self.dt / self.dx**2

    def node_x(self) -> np.ndarray:
        return np.arange(1, self.N + 1) * self.dx


def heat_benchmark_config() -> HeatConfig:
    """Slab benchmark: 100 nodes, two sources, full-field output.

    Backward Euler with 200 s steps, so the slowest mode decays to about
    2e-3 within 3000 steps.
    """
    return HeatConfig(dt=200.0, scheme="implicit")


def _heat_laplacian(N: int) -> sp.csr_matrix:
    main = -2.0 * np.ones(N)
    off = np.ones(N - 1)
    lower = off.copy()
    # insulated end: ghost node mirrors node N-1
    lower[-1] = 2.0
    return sp.diags([lower, main, off], [-1, 0, 1], format="csr")


def build_heat_1d(cfg: HeatConfig) -> StateSpaceSystem:
    """Assemble the slab system on nodes ``x_i = i*dx``, ``i = 1..N``."""
    if cfg.N < 2:
        raise ConfigError("heat model needs N >= 2")
    if cfg.alpha < 0 or cfg.dt <= 0 or cfg.L <= 0:
        raise ConfigError("heat model needs alpha >= 0, dt > 0, L > 0")
    for s in cfg.source_positions:
        if not 0.0 < s < cfg.L:
            raise ConfigError(f"source position {s} outside (0, {cfg.L})")
    r = cfg.ratio
    K = _heat_laplacian(cfg.N)
    I = sp.identity(cfg.N, format="csc")
    if cfg.scheme == "explicit":
        if r > 0.5:
            raise ConfigError(f"explicit heat step unstable: alpha*dt/dx^2 = {r:.6g} > 0.5")
        A = (I + r * K).tocsc()
    elif cfg.scheme == "implicit":
        A = np.linalg.inv((I - r * K).toarray())
    else:
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")

    x = cfg.node_x()
    B = np.zeros((cfg.N, len(cfg.source_positions)))
    for j, s in enumerate(cfg.source_positions):
        B[int(np.argmin(np.abs(x - s))), j] = 1.0

    if isinstance(cfg.output, str):
        if cfg.output != "full":
            raise ConfigError(f"unknown heat output {cfg.output!r}")
        C = sp.identity(cfg.N, format="csr")
    else:
        idx = np.asarray(cfg.output, dtype=int)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= cfg.N:
            raise ConfigError("heat output indices out of range")
        C = _selection(idx, cfg.N)

    return StateSpaceSystem(
        A,
        B,
        C,
        dt=cfg.dt,
        description=f"heat1d N={cfg.N} alpha={cfg.alpha} dt={cfg.dt} {cfg.scheme}",
        metadata={"ratio": r, "x": x},
    )


def _selection(idx, N) -> sp.csr_matrix:
    q = len(idx)
    return sp.csr_matrix((np.ones(q), (np.arange(q), idx)), shape=(q, N))


@dataclass(frozen=True)
class DispersionConfig:
    """3-D advection-diffusion on a structured grid.

    Unknowns sit at ``x_i = x0 + i*dx`` (``i=1..nx``, inflow plane excluded),
    ``y_j = y0 + j*dy`` (``j=1..ny``, zero walls one spacing outside) and
    ``z_k = k*dz`` (``k=0..nz-1``; reflective ground, zero lid at ``z1``).

    ``output`` is ``"interior"`` (all nodes but the outflow plane),
    ``"all"``, ``("lattice", nsx, nsy)`` for evenly spaced sensor columns, or
    an explicit list of flat node indices.
    """

    x_extent: tuple = (0.0, 2000.0)
    y_extent: tuple = (-100.0, 400.0)
    z_extent: tuple = (0.0, 50.0)
    shape: tuple = (20, 20, 5)
    u: float = 4.0
    wind_direction: float = 0.0
    dt: float | None = None
    courant: float = 0.5
    a_y: float = 0.008
    b_y: float = 0.00001
    a_z: float = 0.006
    b_z: float = 0.00015
    sources: tuple = ()
    output: object = "interior"

    @property
    def spacing(self):
        nx, ny, nz = self.shape
        dx = (self.x_extent[1] - self.x_extent[0]) / nx
        dy = (self.y_extent[1] - self.y_extent[0]) / (ny + 1)
        dz = (self.z_extent[1] - self.z_extent[0]) / nz
        return dx, dy, dz

    def step(self) -> float:
        if self.dt is not None:
            return float(self.dt)
        if self.u <= 0:
            raise ConfigError("dt must be given when the wind speed is zero")
        dx, dy, _ = self.spacing
        ux = abs(self.u * np.cos(self.wind_direction))
        uy = abs(self.u * np.sin(self.wind_direction))
        return self.courant / (ux / dx + uy / dy)

    def coordinates(self):
        nx, ny, nz = self.shape
        dx, dy, dz = self.spacing
        x = self.x_extent[0] + dx * np.arange(1, nx + 1)
        y = self.y_extent[0] + dy * np.arange(1, ny + 1)
        z = self.z_extent[0] + dz * np.arange(nz)
        return x, y, z


def dispersion_desk_config(**overrides) -> DispersionConfig:
    """20x20x5 grid with four elevated sources; cheap enough for tests."""
    cfg = dict(
        shape=(20, 20, 5),
        sources=(
            (300.0, 40.0, 10.0),
            (300.0, 260.0, 10.0),
            (700.0, 110.0, 10.0),
            (900.0, 190.0, 20.0),
        ),
        output="interior",
    )
    cfg.update(overrides)
    return DispersionConfig(**cfg)


def dispersion_paper_config(**overrides) -> DispersionConfig:
    """100x100x10 grid (N = 1e5), ten sources, 9x9 sensor columns x 10 levels."""
    xs = (200.0, 400.0, 600.0, 800.0, 1000.0)
    cfg = dict(
        shape=(100, 100, 10),
        sources=tuple((x, y, 5.0) for x in xs for y in (60.0, 240.0)),
        output=("lattice", 9, 9),
    )
    cfg.update(overrides)
    return DispersionConfig(**cfg)


def eddy_diffusivity(x, cfg: DispersionConfig):
    """Cross-wind and vertical eddy diffusivities at downwind distance ``x``.

    With plume spreads ``sigma(x) = a x sqrt(1 + b x)`` and
    ``sigma^2 = (2/u) * int_0^x K``, differentiation gives
    ``K = (u/2) a^2 (2x + 3 b x^2)``.
    """
    x = np.asarray(x, dtype=float)
    half_u = 0.5 * cfg.u
    ky = half_u * cfg.a_y**2 * (2.0 * x + 3.0 * cfg.b_y * x**2)
    kz = half_u * cfg.a_z**2 * (2.0 * x + 3.0 * cfg.b_z * x**2)
    return ky, kz


def _nearest(coord, value):
    return int(np.argmin(np.abs(coord - value)))


def dispersion_output_indices(cfg: DispersionConfig) -> np.ndarray:
    nx, ny, nz = cfg.shape
    flat = np.arange(nx * ny * nz).reshape(nx, ny, nz)
    out = cfg.output
    if isinstance(out, str):
        if out == "interior":
            return flat[:-1].ravel()
        if out == "all":
            return flat.ravel()
        raise ConfigError(f"unknown dispersion output {out!r}")
    if len(out) == 3 and out[0] == "lattice":
        nsx, nsy = int(out[1]), int(out[2])
        ix = np.unique(np.linspace(0, nx - 2, nsx).round().astype(int))
        iy = np.unique(np.linspace(0, ny - 1, nsy).round().astype(int))
        if len(ix) != nsx or len(iy) != nsy:
            raise ConfigError(f"grid too coarse for a {nsx}x{nsy} sensor lattice")
        return flat[np.ix_(ix, iy)].ravel()
    idx = np.asarray(out, dtype=int)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= flat.size:
        raise ConfigError("dispersion output indices out of range")
    return idx


def build_advection_diffusion_3d(cfg: DispersionConfig) -> StateSpaceSystem:
    """Forward-Euler upwind/central finite differences on the ``cfg`` grid.

    Flat node index is ``(i*ny + j)*nz + k``.  Source columns of ``B`` carry
    ``dt / cell_volume`` so that an input ``Q`` adds mass ``Q*dt``.
    """
    nx, ny, nz = cfg.shape
    if min(nx, ny, nz) < 1:
        raise ConfigError("grid counts must be positive")
    if cfg.u < 0:
        raise ConfigError("wind speed must be non-negative")
    dx, dy, dz = cfg.spacing
    dt = cfg.step()
    x, y, z = cfg.coordinates()
    ux = cfg.u * np.cos(cfg.wind_direction)
    uy = cfg.u * np.sin(cfg.wind_direction)
    courant = abs(ux) * dt / dx + abs(uy) * dt / dy
    if courant > 1.0 + 1e-12:
        raise ConfigError(f"Courant number {courant:.6g} exceeds 1")

    ky, kz = eddy_diffusivity(x, cfg)
    dyn = ky * dt / dy**2
    dzn = kz * dt / dz**2
    diag_min = 1.0 - courant - 2.0 * dyn.max(initial=0.0) - 2.0 * dzn.max(initial=0.0)
    if diag_min < -1e-12:
        raise ConfigError(
            f"explicit step not positivity preserving: courant + 2*(dy, dz numbers) = "
            f"{1.0 - diag_min:.6g} > 1"
        )

    N = nx * ny * nz
    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    idx = (I * ny + J) * nz + K
    rows, cols, vals = [], [], []

    def couple(mask, di, dj, dk, coef):
        src = idx[mask]
        dst = ((I[mask] + di) * ny + (J[mask] + dj)) * nz + (K[mask] + dk)
        rows.append(src)
        cols.append(dst)
        vals.append(np.full(src.shape, coef) if np.ndim(coef) == 0 else coef[mask])

    diag = np.ones(N)
    cx = abs(ux) * dt / dx
    cy = abs(uy) * dt / dy
    # upwind advection; neighbours outside the grid are zero ghosts
    diag -= cx + cy
    if ux > 0:
        couple(I > 0, -1, 0, 0, cx)
    elif ux < 0:
        couple(I < nx - 1, 1, 0, 0, cx)
    if uy > 0:
        couple(J > 0, 0, -1, 0, cy)
    elif uy < 0:
        couple(J < ny - 1, 0, 1, 0, cy)

    # cross-wind diffusion, zero far-field walls
    dy_node = dyn[I]
    diag -= 2.0 * dy_node
    couple(J > 0, 0, -1, 0, dy_node)
    couple(J < ny - 1, 0, 1, 0, dy_node)

    # vertical diffusion: mirrored ghost at the ground, zero lid
    dz_node = dzn[I]
    diag -= 2.0 * dz_node
    if nz > 1:
        ground = K == 0
        couple(ground, 0, 0, 1, 2.0 * dz_node)
        couple((K > 0) & (K < nz - 1), 0, 0, 1, dz_node)
        couple(K > 0, 0, 0, -1, dz_node)

    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )

    if not cfg.sources:
        raise ConfigError("dispersion model needs at least one source")
    vol = dx * dy * dz
    B = np.zeros((N, len(cfg.sources)))
    for s, (xs, ys, zs) in enumerate(cfg.sources):
        if not (
            cfg.x_extent[0] < xs < cfg.x_extent[1]
            and cfg.y_extent[0] < ys < cfg.y_extent[1]
            and cfg.z_extent[0] < zs < cfg.z_extent[1]
        ):
            raise ConfigError(f"source {(xs, ys, zs)} not strictly inside the domain")
        node = (_nearest(x, xs) * ny + _nearest(y, ys)) * nz + _nearest(z, zs)
        B[node, s] += dt / vol

    C = _selection(dispersion_output_indices(cfg), N)
    return StateSpaceSystem(
        A,
        B,
        C,
        dt=dt,
        description=f"dispersion3d grid={nx}x{ny}x{nz} u={cfg.u} dt={dt:.6g}",
        metadata={"courant": courant, "shape": (nx, ny, nz)},
    )
