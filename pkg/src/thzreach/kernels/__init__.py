"""Backend selection for the geometry kernels.

The compiled extension is preferred when present; the numpy fallback is
always available. Set THZREACH_KERNELS=pure to force the fallback, or call
select() at runtime (used by the benchmark and the parity tests).
"""

from __future__ import annotations

import os

from . import pure

try:
    from . import _geomcore
except ImportError:
    _geomcore = None

_BACKENDS = {"pure": pure}
if _geomcore is not None:
    _BACKENDS["compiled"] = _geomcore

if os.environ.get("THZREACH_KERNELS", "").strip().lower() == "pure":
    _active = pure
else:
    _active = _geomcore if _geomcore is not None else pure


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active.BACKEND_NAME


def select(name: str) -> None:
    """Switch the active backend. Only 'pure' and 'compiled' exist."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")
    _active = _BACKENDS[name]


def segment_occluded(*args):
    return _active.segment_occluded(*args)


def segments_occluded_from(*args):
    return _active.segments_occluded_from(*args)
