"""Joint topic/discourse factor encoder over turn bags-of-words.

Each turn's bag is encoded into a Gaussian topic latent (softmax-mapped onto
the topic simplex) and a categorical discourse assignment (Gumbel-Softmax
relaxed during training, hard argmax at evaluation). A shared decoder mixes
per-topic and per-discourse word logits to reconstruct the bag. The training
objective is reconstruction plus the two KL terms plus a small weighted
information term between the topic-side and discourse-side word
distributions (the symmetrized divergence measuring how much a word's
identity reveals about which side generated it).

All functions are batched over rows (one row per turn) and operate on tape
Tensors so the same code serves training, evaluation, and gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import ModelConfig

GUMBEL_EPS = 1e-20


@dataclass
class FactorParams:
    """Encoder/decoder weights; see shapes in ``shape_spec``."""

    enc_w: Tensor
    enc_b: Tensor
    mu_w: Tensor
    mu_b: Tensor
    logsig_w: Tensor
    logsig_b: Tensor
    pi_w: Tensor
    pi_b: Tensor
    z_w: Tensor
    z_b: Tensor
    topic_words: Tensor  # [K, V]; softmax rows = topic-word distributions
    discourse_words: Tensor  # [D, V]

    @staticmethod
    def shape_spec(config: ModelConfig) -> dict[str, tuple]:
        V, K, D, S = (config.vocab_size, config.num_topics,
                      config.num_discourse, config.factor_hidden)
        return {
            "enc_w": (V, S), "enc_b": (S,),
            "mu_w": (S, K), "mu_b": (K,),
            "logsig_w": (S, K), "logsig_b": (K,),
            "pi_w": (V, D), "pi_b": (D,),
            "z_w": (K, K), "z_b": (K,),
            "topic_words": (K, V),
            "discourse_words": (D, V),
        }


@dataclass
class FactorOutputs:
    """Per-turn encoder outputs, all Tensors batched over rows."""

    mu: Tensor
    log_sigma: Tensor
    pi: Tensor
    latent: Tensor
    z: Tensor  # topic mixture, rows on the K-simplex
    d: Tensor  # discourse weights, rows on the D-simplex (one-hot when hard)
    beta: Tensor  # joint reconstruction distribution [N, V]
    beta_topic: Tensor  # topic-side word distribution [N, V]
    beta_discourse: Tensor  # discourse-side word distribution [N, V]


def encode(params: FactorParams, bows) -> tuple[Tensor, Tensor, Tensor]:
    """Map bags [N, V] to (mu, log_sigma, pi)."""
    bows = bows if isinstance(bows, Tensor) else Tensor(bows)
    hidden = ad.tanh(ad.affine(bows, params.enc_w, params.enc_b))
    mu = ad.affine(hidden, params.mu_w, params.mu_b)
    log_sigma = ad.affine(hidden, params.logsig_w, params.logsig_b)
    pi = ad.softmax(ad.affine(bows, params.pi_w, params.pi_b))
    return mu, log_sigma, pi


def reparameterize(mu: Tensor, log_sigma: Tensor, noise: np.ndarray) -> Tensor:
    """mu + exp(log_sigma) * noise, with externally supplied noise."""
    return ad.add(mu, ad.mul(ad.exp(log_sigma), Tensor(noise)))


def topic_mixture(params: FactorParams, latent: Tensor) -> Tensor:
    return ad.softmax(ad.affine(latent, params.z_w, params.z_b))


def sample_discourse(pi: Tensor, gumbel_noise: np.ndarray, temperature: float) -> Tensor:
    """Gumbel-Softmax relaxation of a draw from pi."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    logits = ad.add(ad.log_clip(pi), Tensor(gumbel_noise))
    return ad.softmax(ad.mul(logits, 1.0 / temperature))


def hard_discourse(pi: Tensor) -> Tensor:
    """Evaluation-time one-hot at the most probable discourse role."""
    p = pi.data
    out = np.zeros_like(p)
    out[np.arange(p.shape[0]), p.argmax(axis=1)] = 1.0
    return Tensor(out)


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    return -np.log(-np.log(u + GUMBEL_EPS) + GUMBEL_EPS)


def decode(params: FactorParams, z: Tensor, d: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Return (beta, beta_topic, beta_discourse), each rows on the V-simplex."""
    topic_logits = ad.matmul(z, params.topic_words)
    discourse_logits = ad.matmul(d, params.discourse_words)
    beta = ad.softmax(ad.add(topic_logits, discourse_logits))
    return beta, ad.softmax(topic_logits), ad.softmax(discourse_logits)


def forward(params: FactorParams, bows, *, temperature: float,
            reparam_noise: np.ndarray | None = None,
            gumbel: np.ndarray | None = None,
            hard: bool = False, neutral_discourse: bool = False) -> FactorOutputs:
    """Full encoder pass.

    Training (hard=False) requires both noise arrays; evaluation (hard=True)
    uses the Gaussian mean and a hard discourse assignment instead. With
    ``neutral_discourse`` the sampled assignment is replaced by a constant
    uniform one, so the discourse word rows act as a shared background and
    the topic side trains without a competitor; warming up this way keeps
    the fast-converging discourse path from claiming topical word mass
    before the deeper topic path has fit it.
    """
    mu, log_sigma, pi = encode(params, bows)
    if hard:
        latent = mu
        d = hard_discourse(pi)
    else:
        if reparam_noise is None or gumbel is None:
            raise ValueError("training forward needs reparam_noise and gumbel noise")
        latent = reparameterize(mu, log_sigma, reparam_noise)
        if neutral_discourse:
            D = pi.data.shape[1]
            d = Tensor(np.full_like(pi.data, 1.0 / D))
        else:
            d = sample_discourse(pi, gumbel, temperature)
    z = topic_mixture(params, latent)
    beta, beta_topic, beta_discourse = decode(params, z, d)
    return FactorOutputs(mu=mu, log_sigma=log_sigma, pi=pi, latent=latent,
                         z=z, d=d, beta=beta, beta_topic=beta_topic,
                         beta_discourse=beta_discourse)


# ---------------------------------------------------------------------------
# loss terms (each returns a per-row Tensor [N])
# ---------------------------------------------------------------------------


def kl_normal(mu: Tensor, log_sigma: Tensor) -> Tensor:
    """KL(N(mu, sigma) || N(0, I)) = 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma)."""
    sigma_sq = ad.exp(ad.mul(log_sigma, 2.0))
    inner = ad.add(ad.add(ad.mul(mu, mu), sigma_sq), ad.add(ad.mul(log_sigma, -2.0), -1.0))
    return ad.mul(ad.sum_(inner, axis=1), 0.5)


def kl_discourse(pi: Tensor) -> Tensor:
    """KL(pi || uniform) = sum pi_i * log(pi_i * D); zero exactly at uniform."""
    D = pi.data.shape[1]
    return ad.sum_(ad.mul(pi, ad.log_clip(ad.mul(pi, float(D)))), axis=1)


def reconstruction_loss(bows, beta: Tensor) -> Tensor:
    """Negative log-likelihood of the bag under beta (token counts as weights)."""
    bows = bows if isinstance(bows, Tensor) else Tensor(bows)
    return ad.neg(ad.sum_(ad.mul(bows, ad.log_clip(beta)), axis=1))


def mi_penalty(beta_topic: Tensor, beta_discourse: Tensor) -> Tensor:
    """I(word; source) under an equal prior over the two sides.

    Equals the Jensen-Shannon divergence of the two word distributions:
    0 when they coincide, log 2 when their supports are disjoint.
    """
    mix = ad.mul(ad.add(beta_topic, beta_discourse), 0.5)
    log_mix = ad.log_clip(mix)
    t_term = ad.sum_(ad.mul(beta_topic, ad.add(ad.log_clip(beta_topic), ad.neg(log_mix))), axis=1)
    d_term = ad.sum_(ad.mul(beta_discourse,
                            ad.add(ad.log_clip(beta_discourse), ad.neg(log_mix))), axis=1)
    return ad.mul(ad.add(t_term, d_term), 0.5)


def factor_loss_rows(params: FactorParams, bows, outputs: FactorOutputs,
                     mi_weight: float) -> Tensor:
    """Per-turn minimization-form loss:

    reconstruction + kl_normal + kl_discourse + mi_weight * mi_penalty.

    At the default small weight the information term is a gentle regularizer
    an order of magnitude below the reconstruction term; the separation of
    topic and discourse words comes from reconstruction structure and the
    discourse warmup, not from this term.
    """
    recon = reconstruction_loss(bows, outputs.beta)
    kl_n = kl_normal(outputs.mu, outputs.log_sigma)
    kl_d = kl_discourse(outputs.pi)
    mi = mi_penalty(outputs.beta_topic, outputs.beta_discourse)
    return ad.add(ad.add(recon, kl_n), ad.add(kl_d, ad.mul(mi, mi_weight)))


def factor_loss(params: FactorParams, bows, outputs: FactorOutputs,
                mi_weight: float) -> Tensor:
    """Batch mean of ``factor_loss_rows`` (scalar Tensor)."""
    return ad.mean_(factor_loss_rows(params, bows, outputs, mi_weight))


# ---------------------------------------------------------------------------
# interpretation helpers (plain numpy)
# ---------------------------------------------------------------------------


def topic_word_distributions(params: FactorParams) -> np.ndarray:
    """Rows of the topic decoder as probability distributions [K, V]."""
    return _softmax_rows(params.topic_words.data)


def discourse_word_distributions(params: FactorParams) -> np.ndarray:
    return _softmax_rows(params.discourse_words.data)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def word_assignment(p_topic: float, p_discourse: float) -> tuple[str, float]:
    """Assign a word to the side that better explains it.

    Ties go to the topic side. Confidence is the winning probability over
    the sum of both, 0.5 at an exact tie.
    """
    total = p_topic + p_discourse
    if total <= 0:
        return "topic", 0.5
    if p_topic >= p_discourse:
        return "topic", p_topic / total
    return "discourse", p_discourse / total
