"""Parametric components: dense MLPs with batch normalization, per-view
autoencoders, per-view discriminators, and symmetric prediction pairs
whose target branch follows the online branch by exponential moving
average instead of gradients.

Default architectures: autoencoder d-1024-1024-1024-128 mirrored, batch
norm + ReLU after every encoder layer and every hidden decoder layer (the
decoder output layer is a plain linear map so arbitrary-range targets can
be reconstructed); prediction-module stages are two-layer MLPs with batch
norm after each linear layer, a ReLU in between and a row softmax output;
discriminators are d-1024-256-1 with leaky ReLU and a sigmoid output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import ArgumentError, DataError
from .tape import Var

_ACTIVATIONS = ("relu", "leaky_relu", "none")
_OUTPUT_ACTIVATIONS = ("none", "softmax", "sigmoid")


@dataclass(frozen=True)
class MLPSpec:
    """Widths plus per-layer batch-norm flags and activations."""

    widths: tuple
    batch_norm: tuple
    activations: tuple
    output_activation: str = "none"
    leaky_slope: float = 0.2

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ArgumentError("an MLP needs at least one layer")
        if any(int(w) < 1 for w in self.widths):
            raise ArgumentError(f"all widths must be positive, got {self.widths}")
        n = len(self.widths) - 1
        if len(self.batch_norm) != n or len(self.activations) != n:
            raise ArgumentError(
                f"need {n} batch_norm flags and activations for widths {self.widths}"
            )
        for a in self.activations:
            if a not in _ACTIVATIONS:
                raise ArgumentError(f"unknown activation {a!r}")
        if self.output_activation not in _OUTPUT_ACTIVATIONS:
            raise ArgumentError(
                f"unknown output activation {self.output_activation!r}"
            )

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "batch_norm": list(self.batch_norm),
            "activations": list(self.activations),
            "output_activation": self.output_activation,
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLPSpec":
        return cls(
            widths=tuple(d["widths"]),
            batch_norm=tuple(bool(b) for b in d["batch_norm"]),
            activations=tuple(d["activations"]),
            output_activation=d["output_activation"],
            leaky_slope=float(d.get("leaky_slope", 0.2)),
        )


def mlp_spec(widths, bn=True, activation="relu", output_activation="none",
             final_plain=False) -> MLPSpec:
    """Spec with uniform hidden treatment; ``final_plain`` strips batch
    norm and activation from the last layer."""
    n = len(widths) - 1
    flags = [bn] * n
    acts = [activation] * n
    if final_plain:
        flags[-1] = False
        acts[-1] = "none"
    return MLPSpec(tuple(int(w) for w in widths), tuple(flags), tuple(acts),
                   output_activation)


def _seed_seq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


class MLP:
    """Dense stack; per layer: linear -> optional batch norm -> activation.

    Parameters live in tape Vars so one instance serves both training and
    evaluation; batch-norm running statistics are plain arrays updated as
    a side effect of train-mode forwards.
    """

    BN_EPS = 1e-5
    BN_MOMENTUM = 0.1

    def __init__(self, spec: MLPSpec, seed=0, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(_seed_seq(seed))
        self.weights, self.biases = [], []
        self.bn_scale, self.bn_shift = [], []
        self.bn_mean, self.bn_var = [], []
        for i in range(spec.n_layers):
            fan_in, fan_out = spec.widths[i], spec.widths[i + 1]
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(self.dtype)
            self.weights.append(Var(w, requires_grad=True))
            self.biases.append(Var(np.zeros(fan_out, dtype=self.dtype), requires_grad=True))
            if spec.batch_norm[i]:
                self.bn_scale.append(Var(np.ones(fan_out, dtype=self.dtype), requires_grad=True))
                self.bn_shift.append(Var(np.zeros(fan_out, dtype=self.dtype), requires_grad=True))
                self.bn_mean.append(np.zeros(fan_out, dtype=self.dtype))
                self.bn_var.append(np.ones(fan_out, dtype=self.dtype))
            else:
                self.bn_scale.append(None)
                self.bn_shift.append(None)
                self.bn_mean.append(None)
                self.bn_var.append(None)

    def forward(self, x, train: bool = False) -> Var:
        h = tape.as_var(x)
        if h.data.ndim != 2 or h.data.shape[1] != self.spec.input_dim:
            raise ArgumentError(
                f"input width {h.data.shape} does not match expected "
                f"(*, {self.spec.input_dim})"
            )
        if train and h.data.shape[0] < 2 and any(self.spec.batch_norm):
            raise ArgumentError("train-mode batch norm needs a batch of >= 2 rows")
        for i in range(self.spec.n_layers):
            h = tape.add(tape.matmul(h, self.weights[i]), self.biases[i])
            if self.spec.batch_norm[i]:
                h = self._batch_norm(h, i, train)
            act = self.spec.activations[i]
            if act == "relu":
                h = tape.relu(h)
            elif act == "leaky_relu":
                h = tape.leaky_relu(h, self.spec.leaky_slope)
        out = self.spec.output_activation
        if out == "softmax":
            h = tape.softmax(h)
        elif out == "sigmoid":
            h = tape.sigmoid(h)
        return h

    def _batch_norm(self, h: Var, i: int, train: bool) -> Var:
        # multiply by the reciprocal root; the reciprocal lives on a
        # (1, width) vector so the full-size op is a cheap broadcast mul
        if train:
            mu = tape.vmean(h, axis=0, keepdims=True)
            xc = tape.sub(h, mu)
            var = tape.vmean(tape.mul(xc, xc), axis=0, keepdims=True)
            norm = tape.mul(xc, tape.div(1.0, tape.sqrt(tape.add(var, self.BN_EPS))))
            m = self.BN_MOMENTUM
            self.bn_mean[i] = (1.0 - m) * self.bn_mean[i] + m * mu.data[0]
            self.bn_var[i] = (1.0 - m) * self.bn_var[i] + m * var.data[0]
        else:
            inv = 1.0 / np.sqrt(self.bn_var[i] + self.BN_EPS)
            norm = tape.mul(tape.sub(h, self.bn_mean[i]), inv)
        return tape.add(tape.mul(norm, self.bn_scale[i]), self.bn_shift[i])

    def named_parameters(self, prefix: str = "") -> list:
        out = []
        for i in range(self.spec.n_layers):
            out.append((f"{prefix}layer{i}.weight", self.weights[i]))
            out.append((f"{prefix}layer{i}.bias", self.biases[i]))
            if self.spec.batch_norm[i]:
                out.append((f"{prefix}layer{i}.bn_scale", self.bn_scale[i]))
                out.append((f"{prefix}layer{i}.bn_shift", self.bn_shift[i]))
        return out

    def named_stats(self, prefix: str = "") -> list:
        out = []
        for i in range(self.spec.n_layers):
            if self.spec.batch_norm[i]:
                out.append((f"{prefix}layer{i}.bn_mean", self.bn_mean, i))
                out.append((f"{prefix}layer{i}.bn_var", self.bn_var, i))
        return out

    def set_trainable(self, flag: bool) -> None:
        for _, p in self.named_parameters():
            p.requires_grad = flag

    def copy_from(self, other: "MLP") -> None:
        for (_, a), (_, b) in zip(self.named_parameters(), other.named_parameters()):
            a.data = b.data.copy()
        for i in range(self.spec.n_layers):
            if self.spec.batch_norm[i]:
                self.bn_mean[i] = other.bn_mean[i].copy()
                self.bn_var[i] = other.bn_var[i].copy()


class Autoencoder:
    """Encoder/decoder pair for one view."""

    def __init__(self, encoder_spec: MLPSpec, decoder_spec: MLPSpec, seed=0,
                 dtype=np.float32):
        if encoder_spec.output_dim != decoder_spec.input_dim:
            raise ArgumentError(
                f"latent width mismatch: encoder {encoder_spec.output_dim}, "
                f"decoder {decoder_spec.input_dim}"
            )
        enc_seed, dec_seed = _seed_seq(seed).spawn(2)
        self.encoder = MLP(encoder_spec, enc_seed, dtype)
        self.decoder = MLP(decoder_spec, dec_seed, dtype)

    @property
    def input_dim(self) -> int:
        return self.encoder.spec.input_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder.spec.output_dim

    def encode(self, x, train: bool = False) -> Var:
        x = tape.as_var(x)
        if not np.isfinite(x.data).all():
            raise DataError("non-finite values in encoder input")
        return self.encoder.forward(x, train)

    def decode(self, z, train: bool = False) -> Var:
        return self.decoder.forward(z, train)

    def named_parameters(self, prefix: str = "") -> list:
        return (self.encoder.named_parameters(prefix + "encoder.")
                + self.decoder.named_parameters(prefix + "decoder."))

    def named_stats(self, prefix: str = "") -> list:
        return (self.encoder.named_stats(prefix + "encoder.")
                + self.decoder.named_stats(prefix + "decoder."))


def build_autoencoder(input_dim: int, latent_dim: int = 128,
                      hidden=(1024, 1024, 1024), seed=0,
                      dtype=np.float32) -> Autoencoder:
    """Autoencoder with the standard d-1024-1024-1024-latent widths."""
    if input_dim < 1 or latent_dim < 1 or any(h < 1 for h in hidden):
        raise ArgumentError("all autoencoder widths must be positive")
    enc = mlp_spec((input_dim, *hidden, latent_dim), bn=True, activation="relu")
    dec = mlp_spec((latent_dim, *reversed(hidden), input_dim), bn=True,
                   activation="relu", final_plain=True)
    return Autoencoder(enc, dec, seed, dtype)


class PredictionPair:
    """One direction of the cross-view prediction module.

    The online branch (decoder -> projector -> predictor, each a two-layer
    softmax-output MLP) is trained by gradients; the target branch
    (decoder -> projector) only ever moves through ``ema_update``. Target
    outputs are detached, so no gradient reaches the target parameters or
    flows back into the inputs through the target side.
    """

    def __init__(self, latent_dim: int, out_dim: int, hidden: int = 256,
                 seed=0, dtype=np.float32):
        if latent_dim < 1 or out_dim < 1 or hidden < 1:
            raise ArgumentError("all prediction-module widths must be positive")

        # two linear layers, batch norm after each, ReLU between, softmax out
        def two_layer(i, o):
            return MLPSpec((i, hidden, o), (True, True), ("relu", "none"), "softmax")

        seeds = _seed_seq(seed).spawn(3)
        self.online_decoder = MLP(two_layer(latent_dim, out_dim), seeds[0], dtype)
        self.online_projector = MLP(two_layer(out_dim, out_dim), seeds[1], dtype)
        self.online_predictor = MLP(two_layer(out_dim, out_dim), seeds[2], dtype)
        self.target_decoder = MLP(two_layer(latent_dim, out_dim), seeds[0], dtype)
        self.target_projector = MLP(two_layer(out_dim, out_dim), seeds[1], dtype)
        # target starts as a copy of online and never sees gradients
        self.target_decoder.copy_from(self.online_decoder)
        self.target_projector.copy_from(self.online_projector)
        self.target_decoder.set_trainable(False)
        self.target_projector.set_trainable(False)

    @property
    def latent_dim(self) -> int:
        return self.online_decoder.spec.input_dim

    @property
    def out_dim(self) -> int:
        return self.online_decoder.spec.output_dim

    def online(self, z, train: bool = False):
        """Full online pass; returns (soft assignment, prediction)."""
        q = self.online_decoder.forward(z, train)
        pred = self.online_predictor.forward(self.online_projector.forward(q, train), train)
        return q, pred

    def predict_online(self, z, train: bool = False) -> Var:
        return self.online(z, train)[1]

    def soft_assignment(self, z, train: bool = False) -> Var:
        return self.online_decoder.forward(z, train)

    def project_target(self, z, train: bool = False) -> Var:
        z = tape.stopgrad(tape.as_var(z))
        return self.target_projector.forward(self.target_decoder.forward(z, train), train)

    def online_mlps(self) -> list:
        return [self.online_decoder, self.online_projector, self.online_predictor]

    def target_mlps(self) -> list:
        return [self.target_decoder, self.target_projector]

    def named_parameters(self, prefix: str = "") -> list:
        out = []
        for name, mlp in (("online_decoder", self.online_decoder),
                          ("online_projector", self.online_projector),
                          ("online_predictor", self.online_predictor),
                          ("target_decoder", self.target_decoder),
                          ("target_projector", self.target_projector)):
            out.extend(mlp.named_parameters(f"{prefix}{name}."))
        return out

    def named_stats(self, prefix: str = "") -> list:
        out = []
        for name, mlp in (("online_decoder", self.online_decoder),
                          ("online_projector", self.online_projector),
                          ("online_predictor", self.online_predictor),
                          ("target_decoder", self.target_decoder),
                          ("target_projector", self.target_projector)):
            out.extend(mlp.named_stats(f"{prefix}{name}."))
        return out


def ema_update(pair: PredictionPair, m: float) -> PredictionPair:
    """Move target parameters toward online: t <- m*t + (1-m)*online.

    Batch-norm running statistics are copied from the online branch; m=1
    leaves the target untouched, m=0 copies the online branch exactly.
    """
    if not 0.0 <= m <= 1.0:
        raise ArgumentError(f"momentum must be in [0, 1], got {m}")
    branches = ((pair.online_decoder, pair.target_decoder),
                (pair.online_projector, pair.target_projector))
    for online, target in branches:
        for (_, o), (_, t) in zip(online.named_parameters(), target.named_parameters()):
            t.data = m * t.data + (1.0 - m) * o.data
        for i in range(online.spec.n_layers):
            if online.spec.batch_norm[i]:
                target.bn_mean[i] = online.bn_mean[i].copy()
                target.bn_var[i] = online.bn_var[i].copy()
    return pair


class Discriminator:
    """Per-view real-vs-generated critic with outputs in (0, 1)."""

    def __init__(self, input_dim: int, hidden=(1024, 256), seed=0, dtype=np.float32):
        if input_dim < 1 or any(h < 1 for h in hidden):
            raise ArgumentError("all discriminator widths must be positive")
        spec = MLPSpec(
            (input_dim, *hidden, 1),
            tuple(False for _ in range(len(hidden) + 1)),
            tuple(["leaky_relu"] * len(hidden) + ["none"]),
            "sigmoid",
        )
        self.mlp = MLP(spec, seed, dtype)

    @property
    def input_dim(self) -> int:
        return self.mlp.spec.input_dim

    def discriminate(self, x, train: bool = False) -> Var:
        out = self.mlp.forward(x, train)
        return tape.reshape(out, (out.data.shape[0],))

    def named_parameters(self, prefix: str = "") -> list:
        return self.mlp.named_parameters(prefix)

    def named_stats(self, prefix: str = "") -> list:
        return self.mlp.named_stats(prefix)

    def set_trainable(self, flag: bool) -> None:
        self.mlp.set_trainable(flag)


def parameter_vector(module) -> np.ndarray:
    """Flatten all learnable parameters in canonical order."""
    parts = [p.data.ravel() for _, p in module.named_parameters()]
    return np.concatenate(parts) if parts else np.zeros(0)


def set_parameter_vector(module, vec: np.ndarray) -> None:
    """Inverse of ``parameter_vector``; validates the total length."""
    vec = np.asarray(vec)
    offset = 0
    params = module.named_parameters()
    total = sum(p.data.size for _, p in params)
    if vec.size != total:
        raise ArgumentError(f"parameter vector has {vec.size} entries, expected {total}")
    for _, p in params:
        n = p.data.size
        p.data = vec[offset:offset + n].reshape(p.data.shape).astype(p.data.dtype)
        offset += n
