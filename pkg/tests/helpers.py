"""Shared test utilities: central finite differences against tape gradients."""

from __future__ import annotations

import numpy as np

from dtdmn import autodiff as ad


def finite_difference(f, arrays, h: float = 1e-6):
    """Central-difference gradient of scalar f(arrays) w.r.t. each array."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(arrays)
            flat[i] = orig - h
            fm = f(arrays)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray,
                  floor: float = 1e-6) -> float:
    """Largest elementwise relative error, guarding small denominators.

    ``floor`` sets the denominator for near-zero entries; composites with
    large loss magnitudes need a larger floor because central differences
    carry absolute rounding noise proportional to the loss value.
    """
    denom = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradcheck(build, arrays, tol: float = 1e-5, h: float = 1e-6,
              floor: float = 1e-6) -> float:
    """Check tape gradients of ``build`` against central differences.

    ``build`` takes a list of Tensors and returns a scalar Tensor. Returns
    the worst relative error across all inputs, asserting it is below tol.
    """
    tensors = [ad.Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(tensors)
    loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def f(arrs):
        ts = [ad.Tensor(a) for a in arrs]
        return build(ts).item()

    numeric = finite_difference(f, [a.copy() for a in arrays], h=h)
    worst = max(max_rel_error(a, n, floor=floor) for a, n in zip(analytic, numeric))
    assert worst < tol, f"gradient mismatch: max rel error {worst:.3g} >= {tol}"
    return worst
