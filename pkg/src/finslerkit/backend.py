"""Kernel backend selection.

Hot kernels (batched Newton solves, condenser descent stencils) exist in two
variants: numba @njit and pure numpy. The active backend is chosen once per
process from the FINSLERKIT_BACKEND environment variable:

    FINSLERKIT_BACKEND=numba   force numba (error if not importable)
    FINSLERKIT_BACKEND=numpy   force the pure-numpy path
    FINSLERKIT_BACKEND=auto    numba when importable, else numpy (default)

``set_backend`` exists for tests and the benchmark; library code should only
call ``use_numba``.
"""

from __future__ import annotations

import os

_VALID = ("auto", "numba", "numpy")
_state: dict = {"resolved": None}


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def set_backend(name: str) -> None:
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _state["resolved"] = None if name == "auto" else name
    if name == "auto":
        _resolve()


def _resolve() -> str:
    env = os.environ.get("FINSLERKIT_BACKEND", "auto").lower()
    if env not in _VALID:
        raise ValueError(f"FINSLERKIT_BACKEND must be one of {_VALID}, got {env!r}")
    if env == "numba" and not _numba_available():
        raise RuntimeError("FINSLERKIT_BACKEND=numba but numba is not importable")
    resolved = env if env != "auto" else ("numba" if _numba_available() else "numpy")
    _state["resolved"] = resolved
    return resolved


def backend_name() -> str:
    if _state["resolved"] is None:
        _resolve()
    return _state["resolved"]


def use_numba() -> bool:
    return backend_name() == "numba"
