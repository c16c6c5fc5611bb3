"""Loss values against analytic anchors and independent oracles."""

import numpy as np
import pytest

from imvclust import (ArgumentError, LossWeights, NumericError, PredictionPair,
                      composite_network1_loss, consistency_loss,
                      contrastive_consistency_loss, discriminator_loss,
                      generator_loss, joint_distribution,
                      prediction_direction_loss, prediction_loss,
                      reconstruction_loss)
from imvclust.losses import _prediction_forward


def mi_entropy_oracle(p, gamma):
    """Naive double-summation of -(MI + gamma*(H_row + H_col))."""
    p = np.asarray(p, dtype=np.float64)
    pr = p.sum(axis=1)
    pc = p.sum(axis=0)
    mi = 0.0
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            if p[i, j] > 0:
                mi += p[i, j] * np.log(p[i, j] / (pr[i] * pc[j]))
    h_row = -sum(q * np.log(q) for q in pr if q > 0)
    h_col = -sum(q * np.log(q) for q in pc if q > 0)
    return -(mi + gamma * (h_row + h_col))


def random_soft_rows(rng, n, c):
    q = rng.random((n, c)) + 0.05
    return q / q.sum(axis=1, keepdims=True)


# ------------------------------------------------------------ reconstruction

def test_reconstruction_zero_residual():
    x = np.random.default_rng(0).normal(size=(4, 3))
    assert reconstruction_loss([x], [x.copy()]).item() == 0.0


def test_reconstruction_single_row_norm():
    loss = reconstruction_loss([np.array([[1.0, 0.0]])], [np.array([[0.0, 0.0]])])
    assert loss.item() == pytest.approx(1.0)


def test_reconstruction_sums_over_views():
    x1 = np.array([[1.0, 0.0], [0.0, 1.0]])
    x2 = np.array([[2.0], [0.0]])
    xh1 = np.array([[0.0, 0.0], [0.0, 0.0]])  # row norms 1, 1 -> mean 1
    xh2 = np.array([[1.0], [1.0]])            # residuals 1, 1 -> mean 1
    assert reconstruction_loss([x1, x2], [xh1, xh2]).item() == pytest.approx(2.0)


def test_reconstruction_ignores_absent_rows():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 3)).astype(np.float64)
    xhat = rng.normal(size=(5, 3))
    presence = np.array([[True], [False], [True], [False], [True]])
    base = reconstruction_loss([x], [xhat], presence).item()
    perturbed = x.copy()
    perturbed[1] += 99.0
    perturbed[3] -= 42.0
    after = reconstruction_loss([perturbed], [xhat], presence).item()
    assert base == after  # bit-identical


def test_reconstruction_shape_mismatch():
    with pytest.raises(ArgumentError):
        reconstruction_loss([np.zeros((2, 3))], [np.zeros((2, 2))])


# ----------------------------------------------------------- direction loss

def test_direction_loss_anchors():
    q = np.array([[1.0, 2.0, 3.0]])
    assert prediction_direction_loss(q, q.copy()).item() == pytest.approx(0.0, abs=1e-12)
    assert prediction_direction_loss(q, -q).item() == pytest.approx(4.0)
    orth = np.array([[0.0, -3.0, 2.0]])
    assert prediction_direction_loss(q, orth).item() == pytest.approx(2.0)


def test_direction_loss_equals_normalized_mse():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n, d = rng.integers(1, 6), rng.integers(2, 7)
        q = rng.normal(size=(n, d)) + 0.1
        t = rng.normal(size=(n, d)) + 0.1
        got = prediction_direction_loss(q, t).item()
        qn = q / np.linalg.norm(q, axis=1, keepdims=True)
        tn = t / np.linalg.norm(t, axis=1, keepdims=True)
        mse = ((qn - tn) ** 2).sum(axis=1).mean()
        assert abs(got - mse) < 1e-9
        assert 0.0 <= got <= 4.0 + 1e-12


def test_direction_loss_zero_norm_row():
    q = np.array([[1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(NumericError, match="row 1"):
        prediction_direction_loss(q, np.ones((2, 2)))


# ---------------------------------------------------------- prediction loss

def test_prediction_loss_matches_directional_composition():
    rng = np.random.default_rng(3)
    pair_ab = PredictionPair(4, 3, hidden=5, seed=1, dtype=np.float64)
    pair_ba = PredictionPair(4, 3, hidden=5, seed=2, dtype=np.float64)
    z1 = rng.normal(size=(6, 4))
    z2 = rng.normal(size=(6, 4))
    total = prediction_loss((pair_ab, pair_ba), z1, z2, terms=4).item()
    parts = 0.0
    parts += prediction_direction_loss(pair_ab.predict_online(z1),
                                       pair_ab.project_target(z2)).item()
    parts += prediction_direction_loss(pair_ba.predict_online(z2),
                                       pair_ba.project_target(z1)).item()
    parts += prediction_direction_loss(pair_ab.predict_online(z2),
                                       pair_ab.project_target(z1)).item()
    parts += prediction_direction_loss(pair_ba.predict_online(z1),
                                       pair_ba.project_target(z2)).item()
    assert abs(total - parts) < 1e-9
    assert total <= 16.0


def test_prediction_loss_two_term_mode():
    rng = np.random.default_rng(4)
    pair_ab = PredictionPair(4, 3, hidden=5, seed=3, dtype=np.float64)
    pair_ba = PredictionPair(4, 3, hidden=5, seed=4, dtype=np.float64)
    z1, z2 = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    two = prediction_loss((pair_ab, pair_ba), z1, z2, terms=2).item()
    parts = prediction_direction_loss(pair_ab.predict_online(z1),
                                      pair_ab.project_target(z2)).item()
    parts += prediction_direction_loss(pair_ba.predict_online(z2),
                                       pair_ba.project_target(z1)).item()
    assert abs(two - parts) < 1e-9
    assert two <= 8.0


def test_prediction_forward_exposes_assignments():
    rng = np.random.default_rng(5)
    pair_ab = PredictionPair(4, 3, hidden=5, seed=5, dtype=np.float64)
    pair_ba = PredictionPair(4, 3, hidden=5, seed=6, dtype=np.float64)
    z1, z2 = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    _, q1, q2 = _prediction_forward(pair_ab, pair_ba, z1, z2)
    assert np.allclose(q1.data.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(q2.data.sum(axis=1), 1.0, atol=1e-9)


# -------------------------------------------------------- joint distribution

def test_joint_one_hot():
    e1 = np.array([[1.0, 0.0]])
    jd = joint_distribution(e1, e1)
    expect = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert np.allclose(jd.p, expect, atol=1e-8)
    assert jd.p.min() >= 1e-9 - 1e-12  # clamp floor


def test_joint_uniform():
    q = np.full((7, 4), 0.25)
    jd = joint_distribution(q, q)
    assert np.allclose(jd.p, 1.0 / 16.0, atol=1e-12)


def test_joint_symmetric_and_normalized():
    rng = np.random.default_rng(6)
    q1 = random_soft_rows(rng, 9, 5)
    q2 = random_soft_rows(rng, 9, 5)
    jd = joint_distribution(q1, q2)
    assert np.allclose(jd.p, jd.p.T, atol=1e-15)
    assert jd.p.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(jd.row_marginal, jd.p.sum(axis=1))
    assert np.allclose(jd.col_marginal, jd.p.sum(axis=0))


def test_joint_batch_order_invariance():
    rng = np.random.default_rng(7)
    q1 = random_soft_rows(rng, 8, 3)
    q2 = random_soft_rows(rng, 8, 3)
    perm = rng.permutation(8)
    a = joint_distribution(q1, q2).p
    b = joint_distribution(q1[perm], q2[perm]).p
    assert np.abs(a - b).max() <= 1e-12


def test_joint_rejects_bad_rows():
    good = np.array([[0.5, 0.5]])
    with pytest.raises(ArgumentError):
        joint_distribution(np.array([[0.7, 0.7]]), good)
    with pytest.raises(ArgumentError):
        joint_distribution(np.array([[-0.2, 1.2]]), good)


# ---------------------------------------------------------- consistency loss

def test_consistency_perfect_correlation_anchor():
    p = np.diag([0.5, 0.5])
    got = consistency_loss(p, gamma=0.0).item()
    # zero entries are lifted to the 1e-9 clamp, hence the 1e-6 leeway
    assert got == pytest.approx(-np.log(2.0), abs=1e-6)
    clamped = np.maximum(p, 1e-9)
    assert got == pytest.approx(mi_entropy_oracle(clamped, 0.0), abs=1e-12)


def test_consistency_independent_uniform_anchor():
    p = np.full((2, 2), 0.25)
    got = consistency_loss(p, gamma=9.0).item()
    assert got == pytest.approx(-12.47665, abs=1e-4)
    assert got == pytest.approx(mi_entropy_oracle(p, 9.0), abs=1e-12)


def test_consistency_independent_gamma_zero_is_zero():
    marg = np.array([0.2, 0.3, 0.5])
    p = np.outer(marg, marg)  # exactly independent, symmetric
    assert consistency_loss(p, gamma=0.0).item() == pytest.approx(0.0, abs=1e-12)


def test_consistency_matches_oracle_on_random_joints():
    rng = np.random.default_rng(8)
    for _ in range(100):
        c = rng.integers(2, 7)
        q1 = random_soft_rows(rng, int(rng.integers(2, 10)), c)
        q2 = random_soft_rows(rng, q1.shape[0], c)
        jd = joint_distribution(q1, q2)
        gamma = float(rng.choice([0.0, 1.0, 9.0]))
        got = consistency_loss(jd, gamma).item()
        assert abs(got - mi_entropy_oracle(jd.p, gamma)) <= 1e-10


def test_contrastive_consistency_composes():
    rng = np.random.default_rng(9)
    q1 = random_soft_rows(rng, 6, 4)
    q2 = random_soft_rows(rng, 6, 4)
    direct = contrastive_consistency_loss(q1, q2, gamma=9.0).item()
    via = consistency_loss(joint_distribution(q1, q2), gamma=9.0).item()
    assert abs(direct - via) < 1e-9


# ----------------------------------------------------------------- GAN losses

def test_discriminator_perfect_near_zero():
    p_real = np.full(4, 1.0 - 1e-7)
    p_fake = np.full(4, 1e-7)
    assert discriminator_loss(p_real, p_fake).item() == pytest.approx(0.0, abs=1e-5)


def test_discriminator_at_half():
    p = np.full(6, 0.5)
    assert discriminator_loss(p, p).item() == pytest.approx(2.0 * np.log(2.0), abs=1e-9)


def test_discriminator_clamps_extremes():
    loss = discriminator_loss(np.array([1.0]), np.array([0.0])).item()
    assert np.isfinite(loss)
    loss = discriminator_loss(np.array([0.0]), np.array([1.0])).item()
    assert np.isfinite(loss)


def test_generator_modes():
    p = np.full(5, 0.5)
    assert generator_loss(p, "nonsaturating").item() == pytest.approx(np.log(2.0), abs=1e-9)
    assert generator_loss(p, "minimax").item() == pytest.approx(-np.log(2.0), abs=1e-9)
    near_one = np.full(5, 1.0 - 1e-7)
    assert 0 < generator_loss(near_one, "nonsaturating").item() < 1e-5
    with pytest.raises(ArgumentError):
        generator_loss(p, "wasserstein")


# ----------------------------------------------------------------- composite

def test_composite_weighted_sum():
    w = LossWeights(alpha=0.1, beta=0.1)
    got = composite_network1_loss(-1.0, 2.0, 3.0, w).item()
    assert got == pytest.approx(-0.5, abs=1e-12)


def test_composite_zero_weights_reduce_to_cc():
    w = LossWeights(alpha=0.0, beta=0.0)
    assert composite_network1_loss(-2.5, 99.0, 99.0, w).item() == pytest.approx(-2.5)


def test_composite_defaults():
    w = LossWeights()
    assert (w.alpha, w.beta, w.gamma) == (0.1, 0.1, 9.0)


def test_composite_rejects_non_finite():
    with pytest.raises(NumericError, match="loss_rec"):
        composite_network1_loss(0.0, np.nan, 0.0, LossWeights())


def test_loss_weights_validation():
    with pytest.raises(ArgumentError):
        LossWeights(alpha=-0.1)
