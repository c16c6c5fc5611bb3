"""The four loss families, evaluated on small inputs with known answers."""

import numpy as np

from imvclust import (LossWeights, composite_network1_loss, consistency_loss,
                      discriminator_loss, generator_loss, joint_distribution,
                      prediction_direction_loss, reconstruction_loss)

# --- masked reconstruction ------------------------------------------------
x = np.array([[1.0, 0.0], [0.0, 2.0], [5.0, 5.0]])
xhat = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
presence = np.array([[True], [True], [False]])  # third row is absent
loss = reconstruction_loss([x], [xhat], presence)
print(f"masked reconstruction: {loss.item():.3f}  (mean of row norms 1 and 4 = 2.5;"
      " the absent row contributes nothing)")

# --- cosine prediction alignment -------------------------------------------
q = np.array([[1.0, 2.0, 2.0]])
print(f"direction loss, equal vectors:      {prediction_direction_loss(q, q).item():.3f}")
print(f"direction loss, opposite vectors:   {prediction_direction_loss(q, -q).item():.3f}")
orth = np.array([[2.0, 1.0, -2.0]])
print(f"direction loss, orthogonal vectors: {prediction_direction_loss(q, orth).item():.3f}")

# --- joint distribution and mutual-information consistency ------------------
rng = np.random.default_rng(0)
logits = rng.normal(size=(64, 4))
soft = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
jd = joint_distribution(soft, soft)
print(f"joint distribution: symmetric={np.allclose(jd.p, jd.p.T)}, "
      f"sum={jd.p.sum():.9f}")

perfect = np.maximum(np.diag([0.5, 0.5]), 1e-9)   # two perfectly aligned classes
print(f"consistency at perfect correlation (gamma=0): "
      f"{consistency_loss(perfect, 0.0).item():.6f}  (= -log 2)")
independent = np.full((2, 2), 0.25)
print(f"consistency at independence (gamma=9):        "
      f"{consistency_loss(independent, 9.0).item():.5f}  (= -18 log 2)")

# --- adversarial losses ------------------------------------------------------
half = np.full(8, 0.5)
print(f"discriminator at coin-flip outputs: {discriminator_loss(half, half).item():.6f}"
      "  (= 2 log 2)")
print(f"nonsaturating generator at 0.5:     "
      f"{generator_loss(half, 'nonsaturating').item():.6f}  (= log 2)")
print(f"minimax generator at 0.5:           "
      f"{generator_loss(half, 'minimax').item():.6f}  (= -log 2)")

# --- the composite objective --------------------------------------------------
w = LossWeights()  # alpha=0.1, beta=0.1, gamma=9
total = composite_network1_loss(-1.0, 2.0, 3.0, w)
print(f"composite with (cc, rec, pre) = (-1, 2, 3): {total.item():.2f}"
      "  (= -1 + 0.1*2 + 0.1*3)")
