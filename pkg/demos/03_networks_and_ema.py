"""Autoencoders, prediction pairs with a momentum target, discriminators."""

import numpy as np

from imvclust import (PredictionPair, build_autoencoder, ema_update,
                      parameter_vector)
from imvclust.networks import Discriminator

rng = np.random.default_rng(0)

# per-view autoencoder with the standard widths
ae = build_autoencoder(input_dim=20, latent_dim=128, seed=0)
print("encoder widths:", ae.encoder.spec.widths)
x = rng.normal(size=(256, 20)).astype(np.float32)
z = ae.encode(x, train=True)
print("batch (256, 20) ->", z.data.shape, "->", ae.decode(z, train=True).data.shape)

# prediction pair: online decoder/projector/predictor vs momentum target;
# all stages end in a row softmax
pair = PredictionPair(latent_dim=128, out_dim=128, seed=1)
q, pred = pair.online(rng.normal(size=(8, 128)).astype(np.float32))
print("soft assignment rows sum to one:", np.allclose(q.data.sum(axis=1), 1.0, atol=1e-5))

# the target branch follows the online branch only through the EMA
def gap(pair):
    online = np.concatenate([p.data.ravel()
                             for m in (pair.online_decoder, pair.online_projector)
                             for _, p in m.named_parameters()])
    target = np.concatenate([p.data.ravel()
                             for m in (pair.target_decoder, pair.target_projector)
                             for _, p in m.named_parameters()])
    return np.abs(target - online).max()

for _, p in pair.online_decoder.named_parameters():
    p.data = p.data + 0.5  # pretend a gradient step moved the online branch
print(f"gap after online update:    {gap(pair):.4f}")
ema_update(pair, m=0.6)
print(f"gap after EMA with m=0.6:   {gap(pair):.4f}  (exactly 0.6x the gap)")
ema_update(pair, m=0.0)
print(f"gap after EMA with m=0:     {gap(pair):.4f}  (target copies online)")

# discriminators judge one view's rows, outputs strictly inside (0, 1)
disc = Discriminator(input_dim=20, seed=2)
p = disc.discriminate(x[:8]).data
print("discriminator outputs:", np.round(p, 3))

# every component flattens to one canonical parameter vector and back
vec = parameter_vector(pair)
print(f"prediction pair holds {vec.size} learnable parameters")
