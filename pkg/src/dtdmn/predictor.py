"""Persuasiveness scoring over per-turn memory reads.

A GRU consumes the sequence of reads, additive attention pools its states
into a conversation summary, and an affine head maps the summary to a
scalar score. Training minimizes a pairwise ranking loss that pushes the
winning conversation's score above the losing one's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import AttentionParams, GruParams, attend, run_gru


@dataclass
class PredictorParams:
    gru: GruParams
    attn: AttentionParams
    score_w: Tensor  # [E, 1]
    score_b: Tensor  # [1]


def summarize(params: PredictorParams, reads: Tensor) -> tuple[Tensor, Tensor]:
    """Pool per-turn reads [B, T, E] into summaries [B, E].

    Every turn is valid by construction (reads exist exactly for real turns),
    so the attention mask is all ones.
    """
    B, T, _ = reads.data.shape
    states = run_gru(params.gru, reads, np.full(B, T, dtype=int))
    return attend(params.attn, states, np.ones((B, T)))


def score(params: PredictorParams, summary: Tensor) -> Tensor:
    """Scalar persuasiveness score per conversation, shape [B, 1]."""
    return ad.affine(summary, params.score_w, params.score_b)


def pairwise_loss(y_pos: Tensor, y_neg: Tensor) -> Tensor:
    """softplus(y_neg - y_pos): log 2 at a tie, decreasing in the margin."""
    return ad.softplus(ad.add(y_neg, ad.neg(y_pos)))


def first_wins(y_first: float, y_second: float) -> bool:
    """Decision rule for a presented pair; an exact tie picks the first."""
    return y_first >= y_second
