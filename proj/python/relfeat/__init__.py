"""Automated feature engineering from relational databases."""

try:
    from relfeat._core import *  # noqa: F401,F403  (installed wheel layout)
    from relfeat._core import __version__  # noqa: F401
except ImportError:  # build-tree layout: _core sits next to this package on sys.path
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
