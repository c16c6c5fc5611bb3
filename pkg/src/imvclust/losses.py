"""The four loss families of the training objective, each differentiable
through the tape: masked view reconstruction, cosine prediction alignment
against a detached target, mutual-information consistency over a joint
soft-assignment distribution, and the adversarial real/generated losses.

All functions accept tape Vars or plain arrays and return a scalar Var;
use ``.item()`` for the float value. Natural logarithms throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import ArgumentError, NumericError
from .tape import Var

PROB_EPS = 1e-7       # clamp for discriminator probabilities
JOINT_EPS = 1e-9      # clamp for joint-distribution entries
_ZERO_NORM = 1e-30    # rows with smaller L2 norm count as zero


@dataclass(frozen=True)
class LossWeights:
    """Balance factors: alpha on reconstruction, beta on prediction,
    gamma on the marginal-entropy regularizer."""

    alpha: float = 0.1
    beta: float = 0.1
    gamma: float = 9.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ArgumentError("loss weights must be non-negative")


@dataclass(frozen=True)
class JointDistribution:
    """Symmetrized joint distribution over paired soft assignments."""

    p: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray


def reconstruction_loss(xs, xhats, presence=None) -> Var:
    """Sum over views of the mean squared row residual over present rows.

    ``presence`` is an (n, A) boolean mask; absent rows contribute nothing.
    With no mask every row counts.
    """
    if len(xs) != len(xhats):
        raise ArgumentError(f"{len(xs)} views vs {len(xhats)} reconstructions")
    total = None
    for v, (x, xhat) in enumerate(zip(xs, xhats)):
        x = tape.as_var(x)
        xhat = tape.as_var(xhat)
        if x.data.shape != xhat.data.shape:
            raise ArgumentError(
                f"view {v}: shape {x.data.shape} vs reconstruction {xhat.data.shape}"
            )
        if presence is not None:
            rows = np.flatnonzero(presence[:, v])
            if rows.size == 0:
                continue
            if rows.size != x.data.shape[0]:
                x = tape.take_rows(x, rows)
                xhat = tape.take_rows(xhat, rows)
        d = tape.sub(x, xhat)
        term = tape.mul(tape.vsum(tape.mul(d, d)), 1.0 / x.data.shape[0])
        total = term if total is None else tape.add(total, term)
    if total is None:
        return Var(np.asarray(0.0))
    return total


def prediction_direction_loss(q, t) -> Var:
    """Mean over the batch of 2 - 2*cos(q_n, t_n); ``t`` is detached.

    Equivalent to the mean squared distance between the L2-normalized
    rows. Values lie in [0, 4].
    """
    q = tape.as_var(q)
    t = tape.stopgrad(t)
    if q.data.shape != t.data.shape:
        raise ArgumentError(f"shape mismatch: q {q.data.shape}, t {t.data.shape}")
    for name, m in (("q", q), ("t", t)):
        norms = np.sqrt((m.data.astype(np.float64) ** 2).sum(axis=1))
        if (norms < _ZERO_NORM).any():
            row = int(np.argwhere(norms < _ZERO_NORM)[0][0])
            raise NumericError(f"zero-norm row {row} in {name}")
    qn = tape.div(q, tape.sqrt(tape.vsum(tape.mul(q, q), axis=1, keepdims=True)))
    tn = tape.div(t, tape.sqrt(tape.vsum(tape.mul(t, t), axis=1, keepdims=True)))
    cos = tape.vsum(tape.mul(qn, tn), axis=1)
    return tape.sub(2.0, tape.mul(tape.vmean(cos), 2.0))


def _prediction_forward(pair_ab, pair_ba, z1, z2, terms: int = 4,
                        train: bool = False):
    """Shared forward for the prediction loss.

    Returns (loss, q1, q2) where q1/q2 are the online-decoder soft
    assignments feeding the consistency loss. ``terms`` selects the full
    four-term symmetric form or the two natural directions only.
    """
    if terms not in (2, 4):
        raise ArgumentError(f"prediction loss has 2 or 4 terms, got {terms}")
    z1, z2 = tape.as_var(z1), tape.as_var(z2)
    if z1.data.shape != z2.data.shape:
        raise ArgumentError(
            f"latent shape mismatch: {z1.data.shape} vs {z2.data.shape}"
        )
    q1, pred_12 = pair_ab.online(z1, train)
    q2, pred_21 = pair_ba.online(z2, train)
    loss = tape.add(
        prediction_direction_loss(pred_12, pair_ab.project_target(z2, train)),
        prediction_direction_loss(pred_21, pair_ba.project_target(z1, train)),
    )
    if terms == 4:
        _, pred_a2 = pair_ab.online(z2, train)
        _, pred_b1 = pair_ba.online(z1, train)
        loss = tape.add(loss, prediction_direction_loss(
            pred_a2, pair_ab.project_target(z1, train)))
        loss = tape.add(loss, prediction_direction_loss(
            pred_b1, pair_ba.project_target(z2, train)))
    return loss, q1, q2


def prediction_loss(pairs, z1, z2, terms: int = 4, train: bool = False) -> Var:
    """Total cross-view prediction loss for one pair of views.

    ``pairs`` is the (forward, mirrored) pair of prediction networks; the
    four-term form sends both latents through both online branches.
    """
    pair_ab, pair_ba = pairs
    return _prediction_forward(pair_ab, pair_ba, z1, z2, terms, train)[0]


def _validate_assignments(q, name):
    rows = np.asarray(q.data if isinstance(q, Var) else q, dtype=np.float64)
    if rows.ndim != 2:
        raise ArgumentError(f"{name} must be a matrix of soft assignments")
    if (rows < -1e-9).any():
        raise ArgumentError(f"{name} has negative entries")
    sums = rows.sum(axis=1)
    if (np.abs(sums - 1.0) > 1e-4).any():
        row = int(np.argwhere(np.abs(sums - 1.0) > 1e-4)[0][0])
        raise ArgumentError(f"{name} row {row} sums to {sums[row]:.6f}, expected 1")


def _joint_var(q1, q2, eps: float = JOINT_EPS) -> Var:
    """Differentiable joint distribution: mean outer product, symmetrized,
    clamped at ``eps`` and renormalized to sum 1."""
    q1, q2 = tape.as_var(q1), tape.as_var(q2)
    n = q1.data.shape[0]
    p = tape.mul(tape.matmul(tape.transpose(q1), q2), 1.0 / float(n))
    p = tape.mul(tape.add(p, tape.transpose(p)), 0.5)
    p = tape.clamp(p, lo=eps)
    return tape.div(p, tape.vsum(p))


def joint_distribution(q1, q2, eps: float = JOINT_EPS) -> JointDistribution:
    """Build the joint soft-assignment distribution for two views.

    Rows of ``q1``/``q2`` must be probability vectors of equal width and
    batch size. The result is symmetric, strictly positive and sums to 1.
    """
    _validate_assignments(q1, "q1")
    _validate_assignments(q2, "q2")
    a1 = np.asarray(q1.data if isinstance(q1, Var) else q1, dtype=np.float64)
    a2 = np.asarray(q2.data if isinstance(q2, Var) else q2, dtype=np.float64)
    if a1.shape != a2.shape:
        raise ArgumentError(f"shape mismatch: q1 {a1.shape}, q2 {a2.shape}")
    p = _joint_var(a1, a2, eps).data
    return JointDistribution(p=p, row_marginal=p.sum(axis=1), col_marginal=p.sum(axis=0))


def _consistency_var(p: Var, gamma: float) -> Var:
    pr = tape.vsum(p, axis=1, keepdims=True)
    pc = tape.vsum(p, axis=0, keepdims=True)
    inner = tape.sub(
        tape.log(p),
        tape.mul(tape.add(tape.log(pr), tape.log(pc)), gamma + 1.0),
    )
    return tape.neg(tape.vsum(tape.mul(p, inner)))


def consistency_loss(p, gamma: float) -> Var:
    """Negated mutual information plus entropy regularizer of a joint
    distribution: -sum_ij P_ij * (log P_ij - (gamma+1)(log Pr_i + log Pc_j)),
    which equals -(MI(P) + gamma*(H(rows) + H(cols))).

    Entries below the construction clamp are lifted to it so raw matrices
    with exact zeros are handled the same way ``joint_distribution`` built
    them.
    """
    if isinstance(p, JointDistribution):
        p = p.p
    return _consistency_var(tape.clamp(tape.as_var(p), lo=JOINT_EPS), gamma)


def contrastive_consistency_loss(q1, q2, gamma: float, eps: float = JOINT_EPS) -> Var:
    """Consistency loss straight from two batches of soft assignments."""
    return _consistency_var(_joint_var(q1, q2, eps), gamma)


def _clamped_probs(p) -> Var:
    return tape.clamp(tape.as_var(p), lo=PROB_EPS, hi=1.0 - PROB_EPS)


def discriminator_loss(p_real, p_fake) -> Var:
    """-mean(log p_real) - mean(log(1 - p_fake)); probabilities are
    clamped to [1e-7, 1-1e-7] rather than rejected."""
    pr = _clamped_probs(p_real)
    pf = _clamped_probs(p_fake)
    return tape.neg(tape.add(
        tape.vmean(tape.log(pr)),
        tape.vmean(tape.log(tape.sub(1.0, pf))),
    ))


def generator_loss(p_fake, mode: str = "nonsaturating") -> Var:
    """Generator objective on discriminator outputs for generated samples.

    ``nonsaturating`` is -mean(log p_fake); ``minimax`` is the literal
    mean(log(1 - p_fake)) value-function term.
    """
    if mode not in ("nonsaturating", "minimax"):
        raise ArgumentError(f"unknown generator mode {mode!r}")
    pf = _clamped_probs(p_fake)
    if mode == "nonsaturating":
        return tape.neg(tape.vmean(tape.log(pf)))
    return tape.vmean(tape.log(tape.sub(1.0, pf)))


def composite_network1_loss(loss_cc, loss_rec, loss_pre,
                            weights: LossWeights) -> Var:
    """Total objective: L_cc + alpha * L_rec + beta * L_pre."""
    parts = {"loss_cc": loss_cc, "loss_rec": loss_rec, "loss_pre": loss_pre}
    for name, part in parts.items():
        value = part.data if isinstance(part, Var) else np.asarray(part)
        if not np.isfinite(value).all():
            raise NumericError(f"{name} is not finite")
    total = tape.add(
        tape.as_var(loss_cc),
        tape.add(
            tape.mul(tape.as_var(loss_rec), weights.alpha),
            tape.mul(tape.as_var(loss_pre), weights.beta),
        ),
    )
    return total
