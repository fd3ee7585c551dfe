"""Numba toggle.

Set ``HARVESTOPT_DISABLE_NUMBA=1`` to run every kernel as plain Python.
The flag is read once, at import time.
"""

import os

DISABLE_ENV = "HARVESTOPT_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("", "0", "false", "no")


try:
    if _disabled_by_env():
        raise ImportError("numba disabled via " + DISABLE_ENV)
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
