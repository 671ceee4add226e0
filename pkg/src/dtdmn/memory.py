"""Gated dynamic memory addressed by topic and discourse weights.

The memory holds one row per topic and one per discourse role. Each turn
produces an addressing weight w (its topic mixture concatenated with its
discourse assignment), an erase vector e in (0, 1), and an add vector a in
(-1, 1); every row is then decayed and written in proportion to its weight:

    M_i <- M_i * (1 - w_i e) + w_i a

and the read is the weight-averaged memory, taken after the update so a
turn's own contribution is visible to its read.

All functions are batched with a leading conversation axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import VARIANTS
from .rng import substream


@dataclass
class GateParams:
    """Erase/add projections from the turn vector."""

    erase_w: Tensor
    erase_b: Tensor
    add_w: Tensor
    add_b: Tensor

    @staticmethod
    def shape_spec(hidden_size: int, memory_embedding: int) -> dict[str, tuple]:
        H, E = hidden_size, memory_embedding
        return {"erase_w": (H, E), "erase_b": (E,),
                "add_w": (H, E), "add_b": (E,)}


def initial_memory(rows: int, memory_embedding: int, seed: int) -> np.ndarray:
    """Fixed random starting memory, drawn from its own seed substream.

    The array is a buffer, not a parameter: it is stored in checkpoints and
    never updated by the optimizer.
    """
    rng = substream(seed, "memory_init")
    return rng.uniform(-0.05, 0.05, size=(rows, memory_embedding))


def memory_weight(z: Tensor, d: Tensor, variant: str) -> Tensor:
    """Addressing weights [B, K + D] for the given model variant.

    Ablations zero one block but keep its rows addressable at weight zero,
    so memory shape and parameter count stay identical across variants.
    """
    if variant == "full":
        return ad.concat([z, d], axis=1)
    if variant == "no_topic":
        return ad.concat([ad.mul(z, 0.0), d], axis=1)
    if variant == "no_discourse":
        return ad.concat([z, ad.mul(d, 0.0)], axis=1)
    if variant in VARIANTS:
        raise ValueError(f"variant {variant!r} does not use the memory")
    raise ValueError(f"unknown variant {variant!r}")


def erase_add(gates: GateParams, turn_vec: Tensor) -> tuple[Tensor, Tensor]:
    """Erase in (0, 1) and add in (-1, 1) vectors, each [B, E]."""
    e = ad.sigmoid(ad.affine(turn_vec, gates.erase_w, gates.erase_b))
    a = ad.tanh(ad.affine(turn_vec, gates.add_w, gates.add_b))
    return e, a


def update_memory(memory: Tensor, w: Tensor, e: Tensor, a: Tensor) -> Tensor:
    """One gated write: memory [B, R, E], w [B, R], e and a [B, E]."""
    B, R = w.data.shape
    E = e.data.shape[1]
    wcol = ad.reshape(w, (B, R, 1))
    erow = ad.reshape(e, (B, 1, E))
    arow = ad.reshape(a, (B, 1, E))
    keep = ad.add(ad.neg(ad.mul(wcol, erow)), 1.0)
    new = ad.add(ad.mul(memory, keep), ad.mul(wcol, arow))
    # With w in [0, 1], e in (0, 1), |a| < 1 each entry can grow by at most 1.
    assert np.max(np.abs(new.data)) <= np.max(np.abs(memory.data)) + 1.0 + 1e-9
    return new


def read_memory(w: Tensor, memory: Tensor) -> Tensor:
    """Weight-averaged memory rows [B, E]."""
    return ad.weighted_sum(w, memory)


def process_turn(gates: GateParams, memory: Tensor, w: Tensor,
                 turn_vec: Tensor) -> tuple[Tensor, Tensor]:
    """Apply one turn: write first, then read the updated memory."""
    e, a = erase_add(gates, turn_vec)
    new_memory = update_memory(memory, w, e, a)
    return new_memory, read_memory(w, new_memory)
