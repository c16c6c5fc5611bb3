"""A complete small training run: three-step schedule, fused
representations, clustering metrics and checkpoint round-trip.

This walkthrough shrinks the architecture and epoch counts so it finishes
in seconds; at this toy scale the clustering numbers are not meaningful.
The calibrated configuration (TrainConfig defaults: 1024-wide layers,
latent 128) is exercised end to end by tests/test_acceptance.py.
"""

import tempfile
from pathlib import Path

import numpy as np

from imvclust import (SynthConfig, TrainConfig, apply_missing_mask, evaluate,
                      fill_latents, load_model, mean_fill, normalize,
                      run_pipeline, save_model, synth_generate)

ds = synth_generate(SynthConfig(clusters=4, instances=600, latent_dim=8,
                                view_dims=(20, 30), separation=6.0,
                                noise=1.0, seed=0))
ds = apply_missing_mask(ds, mr=0.5, seed=0)
ds, stats = normalize(ds)

cfg = TrainConfig(epochs=(20, 15, 10), batch_size=128, latent_dim=32,
                  prediction_dim=32, ae_hidden=(128, 128), head_hidden=64,
                  disc_hidden=(128, 64), seed=0)
result = run_pipeline(ds, cfg, norm_stats=stats)

print("training phases:", {k: len(v) for k, v in result.model.histories.items()})
h1 = result.model.histories["1"]
print(f"step-1 objective: {h1[0]['loss_total']:.2f} -> {h1[-1]['loss_total']:.2f}")
print(f"fused representations: {result.fused.shape}")
print("pipeline:", result.report.csv_row())

# the mean-fill reference on the same data
filled = mean_fill(ds)
baseline = evaluate(np.concatenate(filled.views, axis=1), ds.labels, k=4,
                    seed=0, dataset=ds.name, mr=ds.missing_rate,
                    method="meanfill", run_id="demo-baseline")
print("baseline:", baseline.csv_row())

# checkpoints restore the exact model
with tempfile.TemporaryDirectory() as tmp:
    save_model(result.model, Path(tmp) / "ckpt")
    restored = load_model(Path(tmp) / "ckpt")
    same = np.array_equal(fill_latents(restored, ds), result.fused)
    print("checkpoint round-trip reproduces the fused representations:", same)
