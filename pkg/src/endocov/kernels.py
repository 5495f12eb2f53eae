"""Backend selection for the hot kernels.

The compiled extension is preferred when it imports cleanly; otherwise the
pure NumPy fallback is used. Set ``ENDOCOV_PURE=1`` to force the fallback
(used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("ENDOCOV_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "pure"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "pure"

heston_variance = _impl.heston_variance
exit_walk_const = _impl.exit_walk_const
exit_walk_per_event = _impl.exit_walk_per_event
exit_walk_uncertainty = _impl.exit_walk_uncertainty
exit_walk_grid = _impl.exit_walk_grid
hy_pair_sum = _impl.hy_pair_sum
one_correlated_merge = _impl.one_correlated_merge
