"""Backend selection for the pairwise-difference kernel.

The compiled Cython kernel is preferred when it was built; otherwise the
numpy fallback is used. ``ROBUSTSCATTER_BACKEND=python`` forces the fallback,
``=compiled`` insists on the extension (import error if missing).
"""

from __future__ import annotations

import os

# Weight-kind codes shared by both backends.
KIND_CONST = 0
KIND_CAUCHY = 1
KIND_HUBER = 2
KIND_TYLER = 3
KIND_POWER = 4

_requested = os.environ.get("ROBUSTSCATTER_BACKEND", "auto").strip().lower()

if _requested in ("python", "py"):
    from . import _pairwise_py as _impl

    BACKEND = "python"
elif _requested in ("auto", "", "c", "compiled"):
    try:
        from . import _pairwise_c as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested in ("c", "compiled"):
            raise
        from . import _pairwise_py as _impl  # type: ignore[no-redef]

        BACKEND = "python"
else:
    raise ImportError(
        f"ROBUSTSCATTER_BACKEND={_requested!r} not recognized "
        "(use 'auto', 'compiled' or 'python')"
    )

pair_block_accum = _impl.pair_block_accum


def available_backends() -> dict[str, object]:
    """Importable backends keyed by name (for the benchmark command)."""
    from . import _pairwise_py

    found: dict[str, object] = {"python": _pairwise_py}
    try:
        from . import _pairwise_c

        found["compiled"] = _pairwise_c
    except ImportError:
        pass
    return found
