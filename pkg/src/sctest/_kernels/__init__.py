"""Hot-loop kernels with a compiled fast path.

Two kernels dominate campaign runtime: the Keccak-256 permutation and the
bytecode frame interpreter.  Both ship twice — a Cython extension
(_speedups) and pure-Python twins — with the backend chosen here at import
time.  Set SCTEST_PURE_PYTHON=1 to force the fallback; tests and the
benchmark script use that to compare the two.
"""

import os

from . import interp_py, keccak_py

BACKEND = "python"
keccak256 = keccak_py.keccak256
run_frame = interp_py.run_frame

if os.environ.get("SCTEST_PURE_PYTHON") != "1":
    try:
        from . import _speedups  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        BACKEND = "compiled"
        keccak256 = _speedups.keccak256
        run_frame = _speedups.run_frame

__all__ = ["BACKEND", "keccak256", "run_frame"]
