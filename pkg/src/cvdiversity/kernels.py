"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``CVDIVERSITY_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation is used.  Both backends expose
``uniforms``, ``diversity_fidelity`` and ``key_rates`` with identical
signatures.
"""

import os

from . import _kernels_py as python_backend
from ._kernels_py import PASSIVE, POST_AMPLIFIED, PRE_AMPLIFIED, stream_key  # noqa: F401

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

_force_pure = os.environ.get("CVDIVERSITY_PURE_PYTHON", "") not in ("", "0")

backend = python_backend if (_force_pure or compiled_backend is None) else compiled_backend
BACKEND_NAME = "python" if backend is python_backend else "compiled"

uniforms = backend.uniforms
diversity_fidelity = backend.diversity_fidelity
key_rates = backend.key_rates
