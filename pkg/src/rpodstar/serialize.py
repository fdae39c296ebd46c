"""Matrix Market files plus YAML manifests for systems, ensembles and ROMs.

A saved object is a directory holding one ``.mtx`` file per matrix and a
``manifest.yaml`` naming them::

    kind: system            # or ensemble / rom
    files: {A: A.mtx, B: B.mtx, C: C.mtx}
    N: 100
    ...
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io as sio
import scipy.sparse as sp
import yaml

from .errors import ConfigError
from .linsys import StateSpaceSystem
from .rom import ReducedOrderModel
from .snapshots import SnapshotEnsemble

__all__ = [
    "to_plain",
    "write_matrix",
    "read_matrix",
    "save_system",
    "load_system",
    "save_ensemble",
    "load_ensemble",
    "save_rom",
    "load_rom",
    "write_yaml",
    "read_yaml",
]

PRECISION = 17


def to_plain(obj):
    """Recursively convert numpy containers and scalars to YAML-safe Python."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_yaml(path, data) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(to_plain(data), sort_keys=False))
    return path


def read_yaml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict):
        raise ConfigError(f"manifest {path} is not a mapping")
    return data


def write_matrix(path, M, comment: str = "") -> Path:
    path = Path(path)
    sio.mmwrite(str(path), M if sp.issparse(M) else np.asarray(M), comment=comment, precision=PRECISION)
    return path


def read_matrix(path):
    """Dense array for array-format files, CSC for coordinate-format files."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"matrix file not found: {path}")
    M = sio.mmread(str(path))
    return M.tocsc() if sp.issparse(M) else np.asarray(M)


def _save_triple(directory, mats: dict, manifest: dict) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, M in mats.items():
        files[name] = f"{name}.mtx"
        write_matrix(d / files[name], M)
    manifest = dict(manifest, files=files)
    return write_yaml(d / "manifest.yaml", manifest)


def _load_files(directory, expect_kind):
    d = Path(directory)
    man = read_yaml(d / "manifest.yaml")
    if man.get("kind") != expect_kind:
        raise ConfigError(f"{d} holds a {man.get('kind')!r}, expected {expect_kind!r}")
    mats = {k: read_matrix(d / v) for k, v in man["files"].items()}
    return man, mats


def save_system(sys: StateSpaceSystem, directory) -> Path:
    meta = {k: v for k, v in sys.metadata.items() if not isinstance(v, np.ndarray)}
    return _save_triple(
        directory,
        {"A": sys.A, "B": sys.B, "C": sys.C},
        {
            "kind": "system",
            "N": sys.N,
            "p": sys.p,
            "q": sys.q,
            "dt": sys.dt,
            "description": sys.description,
            "metadata": meta,
        },
    )


def load_system(directory) -> StateSpaceSystem:
    man, m = _load_files(directory, "system")
    sys = StateSpaceSystem(
        m["A"], m["B"], m["C"], dt=float(man.get("dt", 1.0)),
        description=man.get("description", ""), metadata=man.get("metadata") or {},
    )
    for key in ("N", "p", "q"):
        if key in man and int(man[key]) != getattr(sys, key):
            raise ConfigError(f"manifest {key}={man[key]} disagrees with matrices ({getattr(sys, key)})")
    return sys


def save_ensemble(ens: SnapshotEnsemble, directory) -> Path:
    return _save_triple(directory, {"X": ens.columns}, dict(ens.manifest(), kind="ensemble", ensemble=ens.kind))


def load_ensemble(directory) -> SnapshotEnsemble:
    man, m = _load_files(directory, "ensemble")
    return SnapshotEnsemble(
        np.array(m["X"], dtype=float), np.asarray(man["times"]), man["ensemble"],
        source=man.get("source", "primal"), seed=man.get("seed"),
        n_initial=int(man.get("n_initial", 1)), scale=float(man.get("scale", 1.0)),
    )


def save_rom(rom: ReducedOrderModel, directory) -> Path:
    return _save_triple(
        directory,
        {"A": rom.A, "B": rom.B, "C": rom.C},
        {"kind": "rom", "method": rom.method, "order": rom.order, "provenance": rom.provenance},
    )


def load_rom(directory) -> ReducedOrderModel:
    man, m = _load_files(directory, "rom")
    A, B, C = (np.asarray(m[k].toarray() if sp.issparse(m[k]) else m[k]) for k in "ABC")
    return ReducedOrderModel(A, B, C, man["method"], man.get("provenance") or {})
