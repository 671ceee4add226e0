"""Oracle tests for the topic/discourse factor encoder.

Closed-form values here were computed by hand from the definitions and are
frozen as literals; the implementation must reproduce them.
"""

import math

import numpy as np
import pytest

from dtdmn import autodiff as ad
from dtdmn import factor_encoder as fe
from dtdmn.autodiff import Tensor
from dtdmn.config import ModelConfig
from dtdmn.rng import substream

from helpers import gradcheck

LN2 = math.log(2.0)


def tiny_params(rng, V=20, K=3, D=2, S=7) -> fe.FactorParams:
    config = ModelConfig(vocab_size=V, num_topics=K, num_discourse=D,
                         factor_hidden=S, hidden_size=8, memory_embedding=8,
                         word_embedding=8, max_len=6)
    arrays = {name: rng.normal(scale=0.4, size=shape)
              for name, shape in fe.FactorParams.shape_spec(config).items()}
    return fe.FactorParams(**{k: Tensor(v, requires_grad=True) for k, v in arrays.items()})


def random_bows(rng, n, V):
    return rng.integers(0, 4, size=(n, V)).astype(float)


# ---------------------------------------------------------------------------
# closed-form loss values
# ---------------------------------------------------------------------------


def test_kl_normal_standard_is_zero():
    kl = fe.kl_normal(Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 3))))
    assert kl.data == pytest.approx(0.0, abs=1e-12)


def test_kl_normal_hand_value():
    # mu=1, sigma=2: 0.5 * (1 + 4 - 1 - 2 ln 2) = 2 - ln 2
    kl = fe.kl_normal(Tensor(np.array([[1.0]])), Tensor(np.array([[LN2]])))
    assert kl.data[0] == pytest.approx(2.0 - LN2, abs=1e-9)


def test_kl_discourse_uniform_is_zero():
    pi = Tensor(np.full((1, 4), 0.25))
    assert fe.kl_discourse(pi).data[0] == pytest.approx(0.0, abs=1e-9)


def test_kl_discourse_hand_value():
    # [0.75, 0.25] against uniform over 2:
    # 0.75 ln 1.5 + 0.25 ln 0.5 = 0.1308120359...
    pi = Tensor(np.array([[0.75, 0.25]]))
    assert fe.kl_discourse(pi).data[0] == pytest.approx(0.13081203594, abs=1e-9)


def test_reconstruction_uniform_one_hot():
    V = 8
    bow = np.zeros((1, V))
    bow[0, 3] = 1.0
    beta = Tensor(np.full((1, V), 1.0 / V))
    assert fe.reconstruction_loss(bow, beta).data[0] == pytest.approx(math.log(V), abs=1e-9)


def test_reconstruction_counts_scale_linearly():
    V = 8
    bow = np.zeros((1, V))
    bow[0, 3] = 5.0
    beta = Tensor(np.full((1, V), 1.0 / V))
    assert fe.reconstruction_loss(bow, beta).data[0] == pytest.approx(5 * math.log(V), abs=1e-9)


def test_mi_penalty_identical_is_zero():
    p = Tensor(np.array([[0.3, 0.2, 0.5]]))
    assert fe.mi_penalty(p, p).data[0] == pytest.approx(0.0, abs=1e-9)


def test_mi_penalty_hand_value():
    # JSD([0.75, 0.25], [0.25, 0.75]) = 0.1308120359...
    p = Tensor(np.array([[0.75, 0.25]]))
    q = Tensor(np.array([[0.25, 0.75]]))
    assert fe.mi_penalty(p, q).data[0] == pytest.approx(0.13081203594, abs=1e-9)


def test_mi_penalty_disjoint_supports_reach_ln2():
    p = Tensor(np.array([[1.0, 0.0]]))
    q = Tensor(np.array([[0.0, 1.0]]))
    assert fe.mi_penalty(p, q).data[0] == pytest.approx(LN2, abs=1e-9)


def test_mi_penalty_symmetric():
    rng = np.random.default_rng(0)
    a = rng.dirichlet(np.ones(6), size=4)
    b = rng.dirichlet(np.ones(6), size=4)
    fwd = fe.mi_penalty(Tensor(a), Tensor(b)).data
    rev = fe.mi_penalty(Tensor(b), Tensor(a)).data
    np.testing.assert_allclose(fwd, rev, atol=1e-12)
    assert np.all(fwd >= -1e-12)
    assert np.all(fwd <= LN2 + 1e-9)


def test_factor_loss_composition_hand_case():
    """The loss is the component sum with the information term at weight 0.01.

    Hand-picked outputs make every component a known closed form: a one-hot
    bag against a uniform beta (ln 2), a unit Gaussian mean shift (0.5), a
    uniform discourse posterior (0), and the [0.75, 0.25] vs [0.25, 0.75]
    divergence value.
    """
    params = tiny_params(np.random.default_rng(3), V=2, K=1, D=2)
    outputs = fe.FactorOutputs(
        mu=Tensor(np.array([[1.0]])),
        log_sigma=Tensor(np.array([[0.0]])),
        pi=Tensor(np.array([[0.5, 0.5]])),
        latent=Tensor(np.array([[1.0]])),
        z=Tensor(np.array([[1.0]])),
        d=Tensor(np.array([[1.0, 0.0]])),
        beta=Tensor(np.array([[0.5, 0.5]])),
        beta_topic=Tensor(np.array([[0.75, 0.25]])),
        beta_discourse=Tensor(np.array([[0.25, 0.75]])),
    )
    bows = np.array([[1.0, 0.0]])
    loss = fe.factor_loss_rows(params, bows, outputs, mi_weight=0.01)
    expected = LN2 + 0.5 + 0.0 + 0.01 * 0.13081203594
    assert loss.data[0] == pytest.approx(expected, abs=1e-9)
    zero_weight = fe.factor_loss_rows(params, bows, outputs, mi_weight=0.0)
    assert zero_weight.data[0] == pytest.approx(LN2 + 0.5, abs=1e-9)


# ---------------------------------------------------------------------------
# encoder mechanics
# ---------------------------------------------------------------------------


def test_reparameterize_hand_value():
    # mu=1, log_sigma=ln 2, noise=0.5 -> 1 + 2 * 0.5 = 2
    out = fe.reparameterize(Tensor(np.array([[1.0]])),
                            Tensor(np.array([[LN2]])),
                            np.array([[0.5]]))
    assert out.data[0, 0] == pytest.approx(2.0, abs=1e-12)


def test_decode_equal_logits_give_uniform():
    params = tiny_params(np.random.default_rng(1), V=2, K=1, D=1)
    params.topic_words.data[:] = np.array([[1.0, 1.0]])
    params.discourse_words.data[:] = np.array([[3.0, 3.0]])
    beta, beta_t, beta_d = fe.decode(params, Tensor(np.array([[1.0]])),
                                     Tensor(np.array([[1.0]])))
    np.testing.assert_allclose(beta.data, [[0.5, 0.5]], atol=1e-12)
    np.testing.assert_allclose(beta_t.data, [[0.5, 0.5]], atol=1e-12)
    np.testing.assert_allclose(beta_d.data, [[0.5, 0.5]], atol=1e-12)


def test_decode_row_shift_invariance():
    rng = np.random.default_rng(2)
    params = tiny_params(rng, V=6, K=2, D=2)
    z = Tensor(np.array([[0.4, 0.6]]))
    d = Tensor(np.array([[0.9, 0.1]]))
    before = fe.decode(params, z, d)[0].data.copy()
    params.topic_words.data += 3.7  # constant shift cancels in the softmax
    after = fe.decode(params, z, d)[0].data
    np.testing.assert_allclose(before, after, atol=1e-9)


def test_sample_discourse_rejects_bad_temperature():
    pi = Tensor(np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError):
        fe.sample_discourse(pi, np.zeros((1, 2)), 0.0)


def test_sample_discourse_low_temperature_is_near_one_hot():
    rng = substream(5, "gumbel")
    pi = Tensor(np.array([[0.2, 0.5, 0.3]]))
    g = fe.gumbel_noise(rng, (1, 3))
    d = fe.sample_discourse(pi, g, 0.01)
    assert d.data.max() > 0.999
    assert d.data.sum() == pytest.approx(1.0, abs=1e-9)


def test_hard_discourse_is_argmax_one_hot():
    pi = Tensor(np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]]))
    d = fe.hard_discourse(pi)
    np.testing.assert_array_equal(d.data, [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])


def test_forward_eval_uses_mean_and_hard_assignment():
    rng = np.random.default_rng(3)
    params = tiny_params(rng)
    bows = random_bows(rng, 4, 20)
    out = fe.forward(params, bows, temperature=0.67, hard=True)
    np.testing.assert_allclose(out.latent.data, out.mu.data, atol=1e-12)
    assert np.all(out.d.data.max(axis=1) == 1.0)
    row_sums = out.d.data.sum(axis=1)
    np.testing.assert_allclose(row_sums, 1.0, atol=1e-12)


def test_forward_train_requires_noise():
    rng = np.random.default_rng(4)
    params = tiny_params(rng)
    with pytest.raises(ValueError):
        fe.forward(params, random_bows(rng, 2, 20), temperature=0.67)


def test_forward_outputs_live_on_simplices():
    rng = np.random.default_rng(6)
    params = tiny_params(rng)
    n = 50
    bows = random_bows(rng, n, 20)
    noise = substream(6, "reparam").standard_normal((n, 3))
    g = fe.gumbel_noise(substream(6, "gumbel"), (n, 2))
    out = fe.forward(params, bows, temperature=0.67, reparam_noise=noise, gumbel=g)
    for tensor in (out.z, out.d, out.pi, out.beta, out.beta_topic, out.beta_discourse):
        assert np.all(tensor.data >= 0)
        np.testing.assert_allclose(tensor.data.sum(axis=1), 1.0, atol=1e-9)


def test_loss_rows_match_scalar_mean():
    rng = np.random.default_rng(7)
    params = tiny_params(rng)
    n = 5
    bows = random_bows(rng, n, 20)
    noise = rng.standard_normal((n, 3))
    g = fe.gumbel_noise(rng, (n, 2))
    out = fe.forward(params, bows, temperature=0.67, reparam_noise=noise, gumbel=g)
    rows = fe.factor_loss_rows(params, bows, out, mi_weight=0.01)
    scalar = fe.factor_loss(params, bows, out, mi_weight=0.01)
    assert scalar.data == pytest.approx(rows.data.mean(), abs=1e-12)
    kl_n = fe.kl_normal(out.mu, out.log_sigma).data
    kl_d = fe.kl_discourse(out.pi).data
    assert np.all(kl_n >= -1e-9)
    assert np.all(kl_d >= -1e-9)


def test_factor_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    V, K, D, S = 20, 3, 2, 7
    spec_config = ModelConfig(vocab_size=V, num_topics=K, num_discourse=D,
                              factor_hidden=S, hidden_size=8, memory_embedding=8,
                              word_embedding=8, max_len=6)
    shapes = fe.FactorParams.shape_spec(spec_config)
    arrays = [rng.normal(scale=0.4, size=shape) for shape in shapes.values()]
    n = 3
    bows = random_bows(rng, n, V)
    noise = rng.standard_normal((n, K))
    g = fe.gumbel_noise(rng, (n, D))

    def build(tensors):
        params = fe.FactorParams(**dict(zip(shapes.keys(), tensors)))
        out = fe.forward(params, bows, temperature=0.67,
                         reparam_noise=noise, gumbel=g)
        return fe.factor_loss(params, bows, out, mi_weight=0.01)

    # The loss magnitude here is ~100, so central differences carry absolute
    # rounding noise near 1e-8; a wider step and denominator floor keep the
    # check sensitive to real errors without tripping on that noise.
    worst = gradcheck(build, arrays, tol=2e-5, h=1e-5, floor=1e-2)
    assert worst < 2e-5


def test_word_distribution_rows_are_normalized():
    rng = np.random.default_rng(9)
    params = tiny_params(rng)
    topics = fe.topic_word_distributions(params)
    roles = fe.discourse_word_distributions(params)
    assert topics.shape == (3, 20)
    assert roles.shape == (2, 20)
    np.testing.assert_allclose(topics.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(roles.sum(axis=1), 1.0, atol=1e-9)


def test_word_assignment_cases():
    assert fe.word_assignment(0.3, 0.1) == ("topic", pytest.approx(0.75))
    assert fe.word_assignment(0.1, 0.3) == ("discourse", pytest.approx(0.75))
    assert fe.word_assignment(0.2, 0.2) == ("topic", pytest.approx(0.5))
    assert fe.word_assignment(0.0, 0.0) == ("topic", pytest.approx(0.5))
