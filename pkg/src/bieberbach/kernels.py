"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when
``BIEBERBACH_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy implementation is used. Both produce identical results.

``BIEBERBACH_THREADS`` sets the worker count for lattice enumeration
(default: available CPUs).
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

_force_pure = os.environ.get("BIEBERBACH_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

neumaier_sum = _impl.neumaier_sum


def thread_count():
    raw = os.environ.get("BIEBERBACH_THREADS")
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError(f"BIEBERBACH_THREADS must be positive, got {raw!r}")
        return n
    return os.cpu_count() or 1


def lattice_keys(xs, py, pz, coupling, bound, slack, threads=None, impl=None):
    """Enumerate lattice keys, splitting the X values across worker threads.

    The result is concatenated in chunk order, so the output does not depend
    on scheduling.
    """
    impl = impl or _impl
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    threads = threads or thread_count()
    if threads == 1 or len(xs) < 2 * threads:
        return impl.lattice_keys(xs, py, pz, coupling, bound, slack)
    chunks = np.array_split(xs, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: impl.lattice_keys(c, py, pz, coupling, bound, slack), chunks))
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]))
