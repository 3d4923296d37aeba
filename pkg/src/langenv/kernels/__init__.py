"""Batch kernel backend selection.

The compiled extension (``langenv.kernels._core``) is preferred when it was
built; otherwise the pure-numpy implementation is used.  Set
``LANGENV_KERNEL=python`` to force the fallback (the benchmark uses this to
compare both backends).
"""

import os

from . import _ref

if os.environ.get("LANGENV_KERNEL", "").lower() == "python":
    _impl = _ref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND
second_order_exponential_batch = _impl.second_order_exponential_batch
second_order_euler_batch = _impl.second_order_euler_batch
overdamped_batch = _impl.overdamped_batch
