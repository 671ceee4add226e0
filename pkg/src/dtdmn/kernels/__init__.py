"""GRU sequence kernel with a compiled core and a numpy fallback.

The compiled Cython extension is preferred when importable; set
``DTDMN_KERNEL=python`` or ``DTDMN_KERNEL=cython`` to force a backend.
Both backends implement the same recurrence with the same operation order,
and the test suite cross-checks them to double precision.
"""

from __future__ import annotations

import os

import numpy as np

from .. import autodiff as ad
from . import reference

_choice = os.environ.get("DTDMN_KERNEL", "auto").lower()
if _choice not in ("auto", "python", "cython"):
    raise ValueError(f"DTDMN_KERNEL must be auto|python|cython, got {_choice!r}")

_compiled = None
if _choice in ("auto", "cython"):
    try:
        from . import _gru_cy as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None
        if _choice == "cython":
            raise ImportError(
                "DTDMN_KERNEL=cython but the compiled kernel is not built; "
                "run `pip install -e .` or `python setup.py build_ext --inplace`"
            )

if _compiled is not None:
    BACKEND = "cython"
    gru_forward = _compiled.gru_forward
    gru_backward = _compiled.gru_backward
else:
    BACKEND = "python"
    gru_forward = reference.gru_forward
    gru_backward = reference.gru_backward


def backend_name() -> str:
    return BACKEND


def gru_op(x: ad.Tensor, lengths, wz, wr, wn, uz, ur, un, bz, br, bn) -> ad.Tensor:
    """Tape op wrapping the selected kernel.

    x: Tensor [B, T, I]; lengths: int array [B]; remaining arguments are
    parameter Tensors. Returns the hidden-state sequence [B, T, H].
    """
    lengths = np.ascontiguousarray(np.asarray(lengths, dtype=np.int64))
    params = (wz, wr, wn, uz, ur, un, bz, br, bn)
    arrs = [np.ascontiguousarray(p.data) for p in params]
    xc = np.ascontiguousarray(x.data)
    h, z, r, n = gru_forward(xc, lengths, *arrs)
    out = ad.Tensor(h)
    parents = (x, *params)
    if ad._needs_graph(*parents):
        def backward(g):
            grads = gru_backward(np.ascontiguousarray(g), xc, lengths, h, z, r, n, *arrs[:6])
            dx, dwz, dwr, dwn, duz, dur, dun, dbz, dbr, dbn = grads
            for tensor, grad in zip(parents, (dx, dwz, dwr, dwn, duz, dur, dun, dbz, dbr, dbn)):
                if tensor.requires_grad or tensor._backward is not None:
                    tensor._accumulate(grad)

        out._parents = parents
        out._backward = backward
        out.requires_grad = True
    return out
