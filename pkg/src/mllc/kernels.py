"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``MLLC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python

compiled = None
if os.environ.get("MLLC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else python
BACKEND = active.BACKEND


def get_backend(name="auto"):
    if name == "auto":
        return active
    if name == "python":
        return python
    if name == "compiled":
        if compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")


labeling_scores = active.labeling_scores
chain_forward_backward = active.chain_forward_backward
sparse_scores = active.sparse_scores
mllog_coefs = active.mllog_coefs
mllog_sparse_grad = active.mllog_sparse_grad
mllog_sgd_step = active.mllog_sgd_step
