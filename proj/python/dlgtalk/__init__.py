"""Executable dialogue DSL toolkit (python surface over the C++ core)."""

try:
    from ._dlgtalk import *  # noqa: F401,F403  (installed layout)
    from ._dlgtalk import DlgError, Session  # noqa: F401
except ImportError:  # build-tree layout: extension on sys.path, not in package
    from _dlgtalk import *  # noqa: F401,F403
    from _dlgtalk import DlgError, Session  # noqa: F401

__all__ = [
    "parse",
    "dump",
    "round_trips",
    "constructs",
    "Session",
    "DlgError",
]
