"""Ray-cast kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available.  Force a backend with VILOOP_BACKEND=python|compiled.
Both backends return bit-identical results.
"""

from __future__ import annotations

import os

from . import _raycast_py

_BACKENDS = {"python": _raycast_py.raycast}

try:
    from . import _raycast as _compiled

    _BACKENDS["compiled"] = _compiled.raycast
except ImportError:
    _compiled = None

_forced = os.environ.get("VILOOP_BACKEND", "").strip()
if _forced:
    if _forced not in _BACKENDS:
        raise ImportError(
            f"VILOOP_BACKEND={_forced!r} requested but only {sorted(_BACKENDS)} available"
        )
    ACTIVE_BACKEND = _forced
else:
    ACTIVE_BACKEND = "compiled" if _compiled is not None else "python"

raycast = _BACKENDS[ACTIVE_BACKEND]


def available_backends() -> dict:
    """Name -> raycast callable for every importable backend."""
    return dict(_BACKENDS)
