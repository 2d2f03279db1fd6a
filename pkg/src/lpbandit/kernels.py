"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when
``LPBANDIT_PURE_PYTHON=1``) the pure-Python reference is used.  Both expose
``fill``, ``round_counts``, ``evolve`` and ``run_program``.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("LPBANDIT_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if backend is compiled_backend else "python"

fill = backend.fill
round_counts = backend.round_counts
evolve = backend.evolve
run_program = backend.run_program
