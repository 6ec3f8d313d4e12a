"""Select the compiled search kernels when available, else the pure-Python ones.

``MAPFSPLIT_BACKEND=python`` forces the fallback; ``=compiled`` makes a missing
extension an import error instead of a silent fallback.
"""
import os

_choice = os.environ.get("MAPFSPLIT_BACKEND", "auto").lower()

if _choice == "python":
    from mapfsplit import _pycore as core
    BACKEND = "python"
else:
    try:
        from mapfsplit import _core as core
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from mapfsplit import _pycore as core
        BACKEND = "python"

__all__ = ["core", "BACKEND"]
