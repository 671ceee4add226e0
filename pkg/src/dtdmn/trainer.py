"""Alternating two-group training with Adam and early stopping.

Each mini-batch takes two optimizer steps. Step A backpropagates the mean
per-turn factor loss and updates only the factor-encoder group. Step B
treats the topic and discourse outputs computed in that same forward as
constants, backpropagates the mean pairwise ranking loss, and updates the
sequence, memory, and predictor group. Using the pre-update factor outputs
in step B keeps the batch to a single encoding pass; the half-step lag is
the usual price of alternating updates.

Early stopping watches validation accuracy with strict improvement; the
best-validation parameters are restored before returning. Runs without
validation pairs keep the final epoch instead.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import model as M
from . import predictor as pred
from .analysis import evaluate
from .autodiff import Tensor
from .corpus import ConversationPair, DatasetSplit
from .rng import substream


class Adam:
    """Adam over one named parameter group; missing gradients count as zero."""

    def __init__(self, names: list[str], params: dict[str, Tensor],
                 lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.names = list(names)
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {n: np.zeros_like(params[n].data) for n in self.names}
        self.v = {n: np.zeros_like(params[n].data) for n in self.names}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for name in self.names:
            tensor = self.params[name]
            g = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correct1
            v_hat = self.v[name] / correct2
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def zero_gradients(params: dict[str, Tensor]) -> None:
    for tensor in params.values():
        tensor.grad = None


class EarlyStopper:
    """Strict-improvement patience counter over validation accuracy."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.bad = 0

    def update(self, epoch: int, accuracy: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if accuracy > self.best:
            self.best = accuracy
            self.best_epoch = epoch
            self.bad = 0
            return False
        self.bad += 1
        return self.bad >= self.patience


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_f1: float
    seconds: float


@dataclass
class TrainResult:
    model: M.Model
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0


def _snapshot(model: M.Model) -> dict[str, np.ndarray]:
    return {name: tensor.data.copy() for name, tensor in model.params.items()}


def _restore(model: M.Model, snapshot: dict[str, np.ndarray]) -> None:
    for name, data in snapshot.items():
        model.params[name].data = data.copy()


def train_batch(model: M.Model, pairs: list[ConversationPair],
                opt_factor: Adam, opt_rest: Adam, rngs: dict,
                *, neutral_discourse: bool = False) -> list[float]:
    """Two alternating updates on one batch; returns per-pair overall losses.

    The reported loss is the pairwise ranking term plus the summed factor
    terms of the pair's turns, both measured before this batch's updates.
    """
    cfg = model.config
    convs = [c for p in pairs for c in (p.positive, p.negative)]
    batch = M.stack_conversations(convs)
    turns = M.encode_turn_batch(model, batch, train=True, rngs=rngs,
                                neutral_discourse=neutral_discourse)

    zero_gradients(model.params)
    ad.mean_(turns.factor_rows).backward()
    opt_factor.step()

    zero_gradients(model.params)
    slices = batch.conv_slices()
    z_rows, d_rows = turns.factor.z.data, turns.factor.d.data
    row_losses = turns.factor_rows.data
    pair_losses, reports = [], []
    for j, pair in enumerate(pairs):
        lo = slices[2 * j].start
        hi = slices[2 * j + 1].stop
        T = pair.positive.num_turns
        z3 = Tensor(z_rows[lo:hi].reshape(2, T, cfg.num_topics))
        d3 = Tensor(d_rows[lo:hi].reshape(2, T, cfg.num_discourse))
        hx3 = ad.reshape(ad.take(turns.hx, (slice(lo, hi),)),
                         (2, T, cfg.hidden_size))
        roll = M.rollout_scores(model, z3, d3, hx3)
        pw = pred.pairwise_loss(roll.y[0:1], roll.y[1:2])
        pair_losses.append(pw)
        reports.append(float(pw.data[0, 0]) + float(row_losses[lo:hi].sum()))
    total = ad.mul(ad.sum_(ad.concat(pair_losses, axis=0)), 1.0 / len(pairs))
    total.backward()
    opt_rest.step()
    zero_gradients(model.params)
    return reports


def train_model(model: M.Model, split: DatasetSplit, *, quiet: bool = False,
                log_path=None) -> TrainResult:
    cfg = model.config
    rngs = {"reparam": substream(cfg.seed, "reparam"),
            "gumbel": substream(cfg.seed, "gumbel"),
            "dropout": substream(cfg.seed, "dropout")}
    shuffle_rng = substream(cfg.seed, "shuffle")
    factor_names, rest_names = model.parameter_groups()
    opt_factor = Adam(factor_names, model.params, cfg.learning_rate)
    opt_rest = Adam(rest_names, model.params, cfg.learning_rate)
    stopper = EarlyStopper(cfg.patience)
    best_state = _snapshot(model)
    result = TrainResult(model=model)

    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        neutral = epoch <= cfg.discourse_warmup
        order = shuffle_rng.permutation(len(split.train))
        losses: list[float] = []
        for start in range(0, len(order), cfg.batch_size):
            chunk = [split.train[i] for i in order[start:start + cfg.batch_size]]
            losses.extend(train_batch(model, chunk, opt_factor, opt_rest, rngs,
                                      neutral_discourse=neutral))
        train_loss = float(np.mean(losses)) if losses else 0.0

        if split.val:
            val = evaluate(model, split.val, seed=cfg.seed)
            val_acc, val_f1 = val.accuracy, val.f1
            improved = val_acc > stopper.best
            should_stop = stopper.update(epoch, val_acc)
        else:
            val_acc, val_f1 = 0.0, 0.0
            improved, should_stop = True, False
            stopper.best_epoch = epoch
        if improved:
            best_state = _snapshot(model)
        seconds = time.perf_counter() - started
        result.history.append(EpochStats(epoch, train_loss, val_acc, val_f1, seconds))
        if not quiet:
            print(f"epoch {epoch:3d}  loss {train_loss:9.4f}  "
                  f"val_acc {val_acc:.4f}  val_f1 {val_f1:.4f}  {seconds:6.2f}s")
        if should_stop:
            break

    _restore(model, best_state)
    result.best_epoch = stopper.best_epoch
    result.best_val_accuracy = 0.0 if stopper.best == -np.inf else stopper.best
    if log_path is not None:
        write_training_log(result.history, log_path)
    return result


def write_training_log(history: list[EpochStats], path) -> None:
    """CSV log; the seconds column is wall-clock and varies across runs."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_accuracy", "val_f1", "seconds"])
        for row in history:
            writer.writerow([row.epoch, f"{row.train_loss:.6f}",
                             f"{row.val_accuracy:.6f}", f"{row.val_f1:.6f}",
                             f"{row.seconds:.3f}"])


def grid_search(base_config, split: DatasetSplit, topic_grid: list[int],
                *, quiet: bool = False) -> list[dict]:
    """Train one model per topic count; report validation metrics for each."""
    rows = []
    for k in topic_grid:
        config = base_config.with_overrides(num_topics=k)
        model = M.Model.create(config)
        result = train_model(model, split, quiet=quiet)
        val = evaluate(model, split.val, seed=config.seed) if split.val else None
        rows.append({
            "num_topics": k,
            "val_accuracy": val.accuracy if val else 0.0,
            "val_f1": val.f1 if val else 0.0,
            "best_epoch": result.best_epoch,
        })
        if not quiet:
            print(f"topics {k:3d}  val_acc {rows[-1]['val_accuracy']:.4f}")
    return rows
