"""Reusable sequence layers: GRU wrappers, bidirectional encoding, attention.

Parameter bundles are small dataclasses of tape Tensors so model assembly can
name, group, and checkpoint them while the layer functions stay free of any
global state.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor


@dataclass
class GruParams:
    """Gate weights for one GRU direction.

    Convention: update gate z, reset gate r, candidate n with the reset
    applied to the recurrent term, new state (1 - z) * h + z * n.
    """

    wz: Tensor
    wr: Tensor
    wn: Tensor
    uz: Tensor
    ur: Tensor
    un: Tensor
    bz: Tensor
    br: Tensor
    bn: Tensor

    def tensors(self):
        return tuple(getattr(self, f.name) for f in fields(self))

    @staticmethod
    def shape_spec(input_size: int, hidden_size: int) -> dict[str, tuple]:
        I, H = input_size, hidden_size
        spec = {}
        for gate in ("z", "r", "n"):
            spec[f"w{gate}"] = (I, H)
            spec[f"u{gate}"] = (H, H)
            spec[f"b{gate}"] = (H,)
        return spec


@dataclass
class AttentionParams:
    """Additive attention: score = v . tanh(W u + b)."""

    w: Tensor
    b: Tensor
    v: Tensor

    @staticmethod
    def shape_spec(input_size: int, attn_size: int) -> dict[str, tuple]:
        return {"w": (input_size, attn_size), "b": (attn_size,), "v": (attn_size, 1)}


@dataclass
class SequenceEncoder:
    """Token embedding plus BiGRU plus additive attention over positions."""

    emb: Tensor  # [V, word_embedding]
    fwd: GruParams
    bwd: GruParams
    attn: AttentionParams


def run_gru(params: GruParams, x: Tensor, lengths: np.ndarray) -> Tensor:
    """States [B, T, H] of a unidirectional GRU over x [B, T, I]."""
    return kernels.gru_op(x, lengths, *params.tensors())


def reverse_time(x: Tensor, lengths: np.ndarray) -> Tensor:
    """Reverse each row's valid prefix in time; padded positions stay put.

    Applying it twice restores the original order, so the same call also
    un-reverses backward-direction states.
    """
    B, T = x.data.shape[0], x.data.shape[1]
    idx = np.tile(np.arange(T), (B, 1))
    for b, n in enumerate(np.asarray(lengths, dtype=int)):
        idx[b, :n] = np.arange(n - 1, -1, -1)
    return ad.gather_time(x, idx)


def run_bigru(fwd: GruParams, bwd: GruParams, x: Tensor, lengths: np.ndarray) -> Tensor:
    """Concatenated forward and backward GRU states [B, T, 2H]."""
    h_f = run_gru(fwd, x, lengths)
    h_b = reverse_time(run_gru(bwd, reverse_time(x, lengths), lengths), lengths)
    return ad.concat([h_f, h_b], axis=2)


def attend(params: AttentionParams, states: Tensor, mask: np.ndarray) -> tuple[Tensor, Tensor]:
    """Masked additive attention pooling.

    Returns (context [B, H], weights [B, T]); weights are exactly zero at
    masked positions and each row sums to one.
    """
    B, T, H = states.data.shape
    flat = ad.reshape(states, (B * T, H))
    scores = ad.matmul(ad.tanh(ad.affine(flat, params.w, params.b)), params.v)
    weights = ad.masked_softmax(ad.reshape(scores, (B, T)), mask)
    return ad.weighted_sum(weights, states), weights


def encode_turns(enc: SequenceEncoder, ids: np.ndarray, mask: np.ndarray,
                 lengths: np.ndarray,
                 dropout_mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """Encode token id rows [B, L] into turn vectors [B, 2H].

    ``dropout_mask`` (train only) zeroes whole word vectors and rescales the
    survivors; evaluation passes None.
    """
    x = ad.embedding(enc.emb, ids)
    if dropout_mask is not None:
        x = ad.mul(x, Tensor(dropout_mask))
    states = run_bigru(enc.fwd, enc.bwd, x, lengths)
    return attend(enc.attn, states, mask)
