"""Search, depth and precision ceilings shared by every module.

The active limits live in a context variable so concurrent tasks can run with
different caps without stepping on each other.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Limits:
    precision_cap: int = 1 << 16  # bits
    search_cap: int = 10**6  # steps of any linear scan
    depth_cap: int = 10**6  # largest D-index any scan may reach

    def __post_init__(self):
        for name in ("precision_cap", "search_cap", "depth_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


_LIMITS: ContextVar[Limits] = ContextVar("approx_codec_limits", default=Limits())


def current() -> Limits:
    return _LIMITS.get()


@contextmanager
def using(limits: Limits | None = None, **overrides):
    """Temporarily replace the active limits (or some of their fields)."""
    base = limits if limits is not None else current()
    token = _LIMITS.set(replace(base, **overrides) if overrides else base)
    try:
        yield _LIMITS.get()
    finally:
        _LIMITS.reset(token)
