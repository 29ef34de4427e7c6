"""Hot numerical kernels with a compiled core and a pure-python fallback.

The Cython extension ``photoncloud.kernels._core`` is picked at import when
present; setting ``PHOTONCLOUD_PURE=1`` forces the fallback. Both expose the
same functions and produce identical results (see tests/test_kernels.py and
benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("PHOTONCLOUD_PURE"):
    _impl = _pure
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

COMPILED = _impl.IMPLEMENTATION == "compiled"

permanent = _impl.permanent
mesh_matrix = _impl.mesh_matrix
mesh_columns_batch = _impl.mesh_columns_batch
mesh_columns_exp_batch = _impl.mesh_columns_exp_batch
fock_distribution = _impl.fock_distribution

# Always available regardless of backend (order contract lives here).
enumerate_outputs = _pure.enumerate_outputs
mzi_entries = _pure.mzi_entries


def implementation() -> str:
    return _impl.IMPLEMENTATION


def backends() -> dict:
    """All importable kernel backends, keyed by implementation name."""
    found = {"pure": _pure}
    try:
        from . import _core  # type: ignore[attr-defined]

        found["compiled"] = _core
    except ImportError:
        pass
    return found
