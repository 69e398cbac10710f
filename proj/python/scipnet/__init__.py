"""Continuous-time treatment-effect estimation toolkit."""

try:
    from ._core import *  # noqa: F401,F403
except ImportError:  # build-tree layout: _core.so sits next to the package dir
    from _core import *  # noqa: F401,F403
