"""Snapshot-based balanced model reduction for large linear systems.

The main entry points are :func:`rpod_star` (randomized snapshots),
:func:`bpod` / :func:`modalize` and :func:`bpod_output_projection`, with the
benchmark models in :mod:`rpodstar.discretize` and comparison metrics in
:mod:`rpodstar.evaluate`.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DefectiveMatrixError,
    NumericalError,
    RpodError,
    SizeSelectionError,
)
from .linsys import (  # noqa: E402
    StateSpaceSystem,
    adjoint,
    classify_modes,
    eigendecompose,
    markov_parameters,
    propagate,
    transfer_function,
)
from .rom import (  # noqa: E402
    ReducedOrderModel,
    bpod,
    bpod_output_projection,
    modalize,
    rpod_star,
    select_rom_size,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DefectiveMatrixError",
    "NumericalError",
    "RpodError",
    "SizeSelectionError",
    "StateSpaceSystem",
    "adjoint",
    "classify_modes",
    "eigendecompose",
    "markov_parameters",
    "propagate",
    "transfer_function",
    "ReducedOrderModel",
    "bpod",
    "bpod_output_projection",
    "modalize",
    "rpod_star",
    "select_rom_size",
]
