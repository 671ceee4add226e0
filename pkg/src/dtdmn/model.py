"""Model assembly: parameters, variants, forward passes, checkpoints.

Parameters live in one flat name-to-Tensor dict. Names prefixed ``factor.``
form the factor-encoder group; everything else belongs to the sequence,
memory, and predictor group. The two groups are optimized in alternation,
so the split is part of the model contract and is exercised by tests.

Variants share every shape they have in common:

* ``full``          topic and discourse weights both address the memory
* ``no_topic``      topic block of the addressing weights forced to zero
* ``no_discourse``  discourse block forced to zero
* ``no_memory``     no memory at all; an affine bypass maps each turn
                    vector straight to the read the predictor consumes
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import factor_encoder as fe
from . import memory as mem
from . import predictor as pred
from .autodiff import Tensor
from .config import ModelConfig
from .corpus import Conversation, ConversationPair
from .layers import AttentionParams, GruParams, SequenceEncoder, encode_turns
from .rng import substream

FACTOR_PREFIX = "factor."
M0_KEY = "memory.m0"
CONFIG_KEY = "__config__"


def parameter_shapes(config: ModelConfig) -> dict[str, tuple]:
    """Expected shape of every trainable parameter for this config."""
    V, H, E, We = (config.vocab_size, config.hidden_size,
                   config.memory_embedding, config.word_embedding)
    H2 = H // 2
    shapes: dict[str, tuple] = {}
    for k, s in fe.FactorParams.shape_spec(config).items():
        shapes[f"factor.{k}"] = s
    shapes["seq.emb"] = (V, We)
    for k, s in GruParams.shape_spec(We, H2).items():
        shapes[f"seq.fwd.{k}"] = s
        shapes[f"seq.bwd.{k}"] = s
    for k, s in AttentionParams.shape_spec(H, H).items():
        shapes[f"seq.attn.{k}"] = s
    if config.variant == "no_memory":
        shapes["bypass.proj_w"] = (H, E)
        shapes["bypass.proj_b"] = (E,)
    else:
        for k, s in mem.GateParams.shape_spec(H, E).items():
            shapes[f"gate.{k}"] = s
    for k, s in GruParams.shape_spec(E, E).items():
        shapes[f"pred.gru.{k}"] = s
    for k, s in AttentionParams.shape_spec(E, E).items():
        shapes[f"pred.attn.{k}"] = s
    shapes["pred.score_w"] = (E, 1)
    shapes["pred.score_b"] = (1,)
    return shapes


def init_parameters(config: ModelConfig) -> dict[str, Tensor]:
    """Draw weights in sorted name order from the ``init`` seed substream.

    Matrices get Glorot-uniform values, vectors start at zero.
    """
    rng = substream(config.seed, "init")
    params: dict[str, Tensor] = {}
    for name in sorted(parameter_shapes(config)):
        shape = parameter_shapes(config)[name]
        if len(shape) == 1:
            data = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            data = rng.uniform(-limit, limit, size=shape)
        params[name] = Tensor(data, requires_grad=True)
    return params


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, Tensor]
    m0: np.ndarray | None  # fixed starting memory; None for no_memory

    @classmethod
    def create(cls, config: ModelConfig) -> "Model":
        m0 = None
        if config.variant != "no_memory":
            m0 = mem.initial_memory(config.weight_size, config.memory_embedding,
                                    config.seed)
        return cls(config=config, params=init_parameters(config), m0=m0)

    # -- named views ------------------------------------------------------

    def _sub(self, cls, prefix: str, spec) -> object:
        return cls(**{k: self.params[f"{prefix}{k}"] for k in spec})

    @property
    def factor(self) -> fe.FactorParams:
        return self._sub(fe.FactorParams, "factor.",
                         fe.FactorParams.shape_spec(self.config))

    @property
    def seq(self) -> SequenceEncoder:
        We, H2 = self.config.word_embedding, self.config.hidden_size // 2
        return SequenceEncoder(
            emb=self.params["seq.emb"],
            fwd=self._sub(GruParams, "seq.fwd.", GruParams.shape_spec(We, H2)),
            bwd=self._sub(GruParams, "seq.bwd.", GruParams.shape_spec(We, H2)),
            attn=self._sub(AttentionParams, "seq.attn.",
                           AttentionParams.shape_spec(2 * H2, 2 * H2)),
        )

    @property
    def gates(self) -> mem.GateParams:
        return self._sub(mem.GateParams, "gate.",
                         mem.GateParams.shape_spec(self.config.hidden_size,
                                                   self.config.memory_embedding))

    @property
    def predictor(self) -> pred.PredictorParams:
        E = self.config.memory_embedding
        return pred.PredictorParams(
            gru=self._sub(GruParams, "pred.gru.", GruParams.shape_spec(E, E)),
            attn=self._sub(AttentionParams, "pred.attn.",
                           AttentionParams.shape_spec(E, E)),
            score_w=self.params["pred.score_w"],
            score_b=self.params["pred.score_b"],
        )

    def parameter_groups(self) -> tuple[list[str], list[str]]:
        """(factor names, remaining names), each sorted."""
        names = sorted(self.params)
        factor = [n for n in names if n.startswith(FACTOR_PREFIX)]
        rest = [n for n in names if not n.startswith(FACTOR_PREFIX)]
        return factor, rest


# ---------------------------------------------------------------------------
# turn batching
# ---------------------------------------------------------------------------


@dataclass
class TurnBatch:
    """All turns of several conversations stacked row-wise, conv-major."""

    bows: np.ndarray  # [N, V]
    ids: np.ndarray  # [N, L]
    mask: np.ndarray  # [N, L]
    lengths: np.ndarray  # [N]
    turns_per_conv: list[int] = field(default_factory=list)

    def conv_slices(self) -> list[slice]:
        out, start = [], 0
        for t in self.turns_per_conv:
            out.append(slice(start, start + t))
            start += t
        return out


def stack_conversations(convs: list[Conversation]) -> TurnBatch:
    turns = [turn for conv in convs for turn in conv.turns]
    if not turns:
        raise ValueError("cannot stack conversations without encoded turns")
    return TurnBatch(
        bows=np.stack([t.bow for t in turns]),
        ids=np.stack([t.seq for t in turns]),
        mask=np.stack([t.mask for t in turns]),
        lengths=np.array([t.length for t in turns], dtype=int),
        turns_per_conv=[conv.num_turns for conv in convs],
    )


@dataclass
class EncodedTurns:
    """Factor outputs and turn vectors for one stacked batch."""

    factor: fe.FactorOutputs
    factor_rows: Tensor  # per-turn factor loss [N]
    hx: Tensor  # turn vectors [N, H]


def encode_turn_batch(model: Model, batch: TurnBatch, *, train: bool,
                      rngs: dict | None = None,
                      neutral_discourse: bool = False) -> EncodedTurns:
    """Run the factor encoder and the turn encoder over stacked turns.

    Training draws reparameterization, Gumbel, and word-dropout noise from
    the supplied generators; evaluation uses the deterministic hard path.
    The Gumbel noise is drawn even under ``neutral_discourse`` so the noise
    streams advance identically whether or not a warmup is configured.
    """
    cfg = model.config
    N = batch.bows.shape[0]
    if train:
        if rngs is None:
            raise ValueError("training forward needs noise generators")
        noise = rngs["reparam"].standard_normal((N, cfg.num_topics))
        gumbel = fe.gumbel_noise(rngs["gumbel"], (N, cfg.num_discourse))
        factor = fe.forward(model.factor, batch.bows,
                            temperature=cfg.gumbel_temperature,
                            reparam_noise=noise, gumbel=gumbel,
                            neutral_discourse=neutral_discourse)
        dropout_mask = None
        if cfg.dropout > 0:
            keep = rngs["dropout"].random((N, batch.ids.shape[1], 1)) >= cfg.dropout
            dropout_mask = keep.astype(float) / (1.0 - cfg.dropout)
    else:
        factor = fe.forward(model.factor, batch.bows,
                            temperature=cfg.gumbel_temperature, hard=True)
        dropout_mask = None
    rows = fe.factor_loss_rows(model.factor, batch.bows, factor, cfg.mi_weight)
    hx, _ = encode_turns(model.seq, batch.ids, batch.mask, batch.lengths,
                         dropout_mask=dropout_mask)
    return EncodedTurns(factor=factor, factor_rows=rows, hx=hx)


# ---------------------------------------------------------------------------
# memory rollout and scoring
# ---------------------------------------------------------------------------


@dataclass
class Rollout:
    y: Tensor  # [B, 1] scores
    reads: Tensor  # [B, T, E]
    weights: np.ndarray | None  # [B, T, R] addressing weights, None for no_memory


def rollout_scores(model: Model, z: Tensor, d: Tensor, hx: Tensor,
                   *, weight_mask: np.ndarray | None = None) -> Rollout:
    """Score conversations from per-turn factors and turn vectors.

    z [B, T, K], d [B, T, D], hx [B, T, H]; all conversations in the batch
    must have the same turn count (pairs do by construction). The optional
    ``weight_mask`` [R] multiplies every addressing weight, which the
    interpretation tools use to isolate one memory row.
    """
    cfg = model.config
    B, T, _ = hx.data.shape
    E = cfg.memory_embedding
    if cfg.variant == "no_memory":
        flat = ad.reshape(hx, (B * T, cfg.hidden_size))
        proj = ad.affine(flat, model.params["bypass.proj_w"],
                         model.params["bypass.proj_b"])
        reads = ad.reshape(proj, (B, T, E))
        summary, _ = pred.summarize(model.predictor, reads)
        return Rollout(y=pred.score(model.predictor, summary), reads=reads,
                       weights=None)

    gates = model.gates
    R = cfg.weight_size
    state = Tensor(np.broadcast_to(model.m0, (B, R, E)).copy())
    read_list: list[Tensor] = []
    weight_log = np.zeros((B, T, R))
    for t in range(T):
        z_t = ad.take(z, (slice(None), t))
        d_t = ad.take(d, (slice(None), t))
        hx_t = ad.take(hx, (slice(None), t))
        w = mem.memory_weight(z_t, d_t, cfg.variant)
        if weight_mask is not None:
            w = ad.mul(w, Tensor(np.asarray(weight_mask, dtype=float)))
        weight_log[:, t, :] = w.data
        state, read = mem.process_turn(gates, state, w, hx_t)
        read_list.append(ad.reshape(read, (B, 1, E)))
    reads = ad.concat(read_list, axis=1)
    summary, _ = pred.summarize(model.predictor, reads)
    return Rollout(y=pred.score(model.predictor, summary), reads=reads,
                   weights=weight_log)


# ---------------------------------------------------------------------------
# whole-pair and whole-conversation passes
# ---------------------------------------------------------------------------


@dataclass
class PairForward:
    y_pos: float
    y_neg: float
    pairwise: Tensor  # [1, 1] ranking loss
    factor_rows: Tensor  # [2T] per-turn factor losses
    overall: Tensor  # scalar: pairwise + sum of factor rows


def pair_rollout(model: Model, turns: EncodedTurns, T: int,
                  detach_factors: bool) -> Rollout:
    cfg = model.config
    z, d = turns.factor.z, turns.factor.d
    if detach_factors:
        z, d = z.detach(), d.detach()
    z3 = ad.reshape(z, (2, T, cfg.num_topics))
    d3 = ad.reshape(d, (2, T, cfg.num_discourse))
    hx3 = ad.reshape(turns.hx, (2, T, cfg.hidden_size))
    return rollout_scores(model, z3, d3, hx3)


def forward_pair(model: Model, pair: ConversationPair, *, train: bool = False,
                 rngs: dict | None = None) -> PairForward:
    """Score one stored pair (positive conversation first).

    In training mode the factor outputs feeding the memory are detached, so
    this graph only reaches the sequence, memory, and predictor group; the
    factor group trains on ``factor_rows`` in its own step.
    """
    T = pair.positive.num_turns

    def run() -> PairForward:
        batch = stack_conversations([pair.positive, pair.negative])
        turns = encode_turn_batch(model, batch, train=train, rngs=rngs)
        roll = pair_rollout(model, turns, T, detach_factors=train)
        y_pos, y_neg = roll.y[0:1], roll.y[1:2]
        pairwise = pred.pairwise_loss(y_pos, y_neg)
        overall = ad.add(ad.sum_(pairwise), ad.sum_(turns.factor_rows))
        return PairForward(y_pos=float(y_pos.data[0, 0]),
                           y_neg=float(y_neg.data[0, 0]),
                           pairwise=pairwise, factor_rows=turns.factor_rows,
                           overall=overall)

    if train:
        return run()
    with ad.no_grad():
        return run()


@dataclass
class ConvForward:
    """Evaluation artifacts for one conversation."""

    y: float
    reads: np.ndarray  # [T, E]
    weights: np.ndarray | None  # [T, R], None for no_memory
    z: np.ndarray  # [T, K]
    d: np.ndarray  # [T, D]


def forward_conversation(model: Model, conv: Conversation,
                         *, weight_mask: np.ndarray | None = None) -> ConvForward:
    """Deterministic evaluation pass over a single conversation."""
    cfg = model.config
    with ad.no_grad():
        batch = stack_conversations([conv])
        turns = encode_turn_batch(model, batch, train=False)
        T = conv.num_turns
        z3 = ad.reshape(turns.factor.z, (1, T, cfg.num_topics))
        d3 = ad.reshape(turns.factor.d, (1, T, cfg.num_discourse))
        hx3 = ad.reshape(turns.hx, (1, T, cfg.hidden_size))
        roll = rollout_scores(model, z3, d3, hx3, weight_mask=weight_mask)
        return ConvForward(
            y=float(roll.y.data[0, 0]),
            reads=roll.reads.data[0],
            weights=None if roll.weights is None else roll.weights[0],
            z=turns.factor.z.data,
            d=turns.factor.d.data,
        )


def predict_pair(model: Model, first: Conversation,
                 second: Conversation) -> tuple[float, float]:
    """Score two conversations independently; no state is shared."""
    return (forward_conversation(model, first).y,
            forward_conversation(model, second).y)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_model(model: Model, path) -> None:
    arrays = {name: tensor.data for name, tensor in model.params.items()}
    if model.m0 is not None:
        arrays[M0_KEY] = model.m0
    arrays[CONFIG_KEY] = np.array(model.config.to_json())
    np.savez(path, **arrays)


def load_model(path) -> Model:
    with np.load(path, allow_pickle=False) as bundle:
        if CONFIG_KEY not in bundle:
            raise ValueError(f"checkpoint {path} has no embedded config")
        config = ModelConfig.from_json(str(bundle[CONFIG_KEY]))
        expected = parameter_shapes(config)
        params: dict[str, Tensor] = {}
        for name, shape in expected.items():
            if name not in bundle:
                raise ValueError(f"checkpoint missing parameter {name!r}")
            arr = bundle[name]
            if arr.shape != shape:
                raise ValueError(
                    f"parameter {name!r} has shape {arr.shape}, expected "
                    f"{shape} for this config")
            params[name] = Tensor(arr.astype(float), requires_grad=True)
        m0 = None
        if config.variant != "no_memory":
            if M0_KEY not in bundle:
                raise ValueError(f"checkpoint missing buffer {M0_KEY!r}")
            m0 = bundle[M0_KEY].astype(float)
            want = (config.weight_size, config.memory_embedding)
            if m0.shape != want:
                raise ValueError(
                    f"buffer {M0_KEY!r} has shape {m0.shape}, expected {want}")
        known = set(expected) | {CONFIG_KEY, M0_KEY}
        extras = sorted(set(bundle.files) - known)
        if extras:
            raise ValueError(f"checkpoint has unexpected arrays: {extras}")
    return Model(config=config, params=params, m0=m0)
