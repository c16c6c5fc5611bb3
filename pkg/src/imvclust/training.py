"""Three-step training schedule and model lifecycle.

Step 1 trains the autoencoders and online prediction branches on rows
where every view is present, minimizing consistency + alpha*reconstruction
+ beta*prediction, with an exponential-moving-average update of each
target branch after every optimizer step. Step 2 freezes the encoders and
turns each decoder into a generator against a per-view discriminator so
missing views can be synthesized from the views that exist. Step 3 repeats
step 1 on the pseudo-complete rows produced by the generators.

With no incomplete rows steps 2 and 3 are skipped and step 1 simply runs
longer; with no complete rows step 1 degrades to per-view reconstruction
pretraining so the adversarial stage still starts from sensible decoders.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import tape
from .clustering import ClusteringReport, evaluate
from .datamodel import MultiViewDataset, NormalizationStats, split_views
from .errors import ArgumentError, DataError, FormatError, NumericError
from .losses import (LossWeights, composite_network1_loss,
                     contrastive_consistency_loss, discriminator_loss,
                     generator_loss, reconstruction_loss, _prediction_forward)
from .networks import (Discriminator, PredictionPair, build_autoencoder,
                       ema_update)

_FILL_MODES = ("prediction", "gan")
_GENERATOR_MODES = ("nonsaturating", "minimax")


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of the training pipeline, with published defaults."""

    epochs: tuple = (300, 250, 200)
    batch_size: int = 256
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    weights: LossWeights = field(default_factory=LossWeights)
    momentum: float = 0.6
    latent_dim: int = 128
    prediction_dim: int = 128
    seed: int = 0
    fill_mode: str = "gan"
    generator_mode: str = "nonsaturating"
    disc_steps_per_gen_step: int = 1
    prediction_terms: int = 4
    include_cc: bool = True
    include_adversarial: bool = True
    gen_reconstruction_weight: float = 16.0
    ae_hidden: tuple = (1024, 1024, 1024)
    head_hidden: int = 256
    disc_hidden: tuple = (1024, 256)

    def __post_init__(self):
        if len(self.epochs) != 3 or any(int(e) < 1 for e in self.epochs):
            raise ArgumentError(f"epochs must be three positive counts, got {self.epochs}")
        if self.batch_size < 2:
            raise ArgumentError("batch_size must be >= 2")
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be positive")
        if not 0.0 <= self.momentum <= 1.0:
            raise ArgumentError(f"momentum must be in [0, 1], got {self.momentum}")
        if self.latent_dim < 1 or self.prediction_dim < 1:
            raise ArgumentError("latent_dim and prediction_dim must be positive")
        if self.fill_mode not in _FILL_MODES:
            raise ArgumentError(f"fill_mode must be one of {_FILL_MODES}")
        if self.generator_mode not in _GENERATOR_MODES:
            raise ArgumentError(f"generator_mode must be one of {_GENERATOR_MODES}")
        if self.disc_steps_per_gen_step < 1:
            raise ArgumentError("disc_steps_per_gen_step must be >= 1")
        if self.prediction_terms not in (2, 4):
            raise ArgumentError("prediction_terms must be 2 or 4")

    def to_dict(self) -> dict:
        return {
            "epochs": list(self.epochs),
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "alpha": self.weights.alpha,
            "beta": self.weights.beta,
            "gamma": self.weights.gamma,
            "momentum": self.momentum,
            "latent_dim": self.latent_dim,
            "prediction_dim": self.prediction_dim,
            "seed": self.seed,
            "fill_mode": self.fill_mode,
            "generator_mode": self.generator_mode,
            "disc_steps_per_gen_step": self.disc_steps_per_gen_step,
            "prediction_terms": self.prediction_terms,
            "include_cc": self.include_cc,
            "include_adversarial": self.include_adversarial,
            "gen_reconstruction_weight": self.gen_reconstruction_weight,
            "ae_hidden": list(self.ae_hidden),
            "head_hidden": self.head_hidden,
            "disc_hidden": list(self.disc_hidden),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        weights = LossWeights(
            alpha=float(d.pop("alpha", 0.1)),
            beta=float(d.pop("beta", 0.1)),
            gamma=float(d.pop("gamma", 9.0)),
        )
        known = {f for f in cls.__dataclass_fields__ if f != "weights"}
        unknown = set(d) - known
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        for key in ("epochs", "ae_hidden", "disc_hidden"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(weights=weights, **d)

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:8]


@dataclass
class TrainedModel:
    """All learned parameters plus the statistics and config they assume."""

    autoencoders: list
    pairs: dict
    discriminators: list
    config: TrainConfig
    norm_stats: NormalizationStats | None = None
    histories: dict = field(default_factory=dict)

    @property
    def n_views(self) -> int:
        return len(self.autoencoders)

    @property
    def latent_dim(self) -> int:
        return self.autoencoders[0].latent_dim

    @property
    def view_dims(self) -> tuple:
        return tuple(ae.input_dim for ae in self.autoencoders)

    def _pair_keys(self) -> list:
        return sorted(self.pairs)

    def named_parameters(self) -> list:
        out = []
        for v, ae in enumerate(self.autoencoders):
            out.extend(ae.named_parameters(f"view{v}."))
        for key in self._pair_keys():
            out.extend(self.pairs[key].named_parameters(f"pair{key[0]}{key[1]}."))
        for v, disc in enumerate(self.discriminators):
            out.extend(disc.named_parameters(f"disc{v}."))
        return out

    def named_stats(self) -> list:
        out = []
        for v, ae in enumerate(self.autoencoders):
            out.extend(ae.named_stats(f"view{v}."))
        for key in self._pair_keys():
            out.extend(self.pairs[key].named_stats(f"pair{key[0]}{key[1]}."))
        for v, disc in enumerate(self.discriminators):
            out.extend(disc.named_stats(f"disc{v}."))
        return out


@dataclass(frozen=True)
class PseudoComplete:
    """Incomplete rows with their missing views filled by the generators."""

    indices: np.ndarray
    views: list


@dataclass
class PipelineResult:
    model: TrainedModel
    fused: np.ndarray
    report: ClusteringReport | None


class Adam:
    """Standard adaptive-moment optimizer over tape leaves.

    Updates run in place through a scratch buffer; parameters keep their
    array identity and dtype.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.scratch = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v, buf in zip(self.params, self.m, self.v, self.scratch):
            g = p.grad
            if g is None:
                continue
            m *= self.beta1
            np.multiply(g, 1.0 - self.beta1, out=buf)
            m += buf
            v *= self.beta2
            np.multiply(g, g, out=buf)
            buf *= 1.0 - self.beta2
            v += buf
            np.divide(v, c2, out=buf)
            np.sqrt(buf, out=buf)
            buf += self.eps
            np.divide(m, buf, out=buf)
            buf *= self.lr / c1
            p.data -= buf
            p.grad = None

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def _seed_seq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def build_model(view_dims, cfg: TrainConfig, seed=None,
                norm_stats: NormalizationStats | None = None) -> TrainedModel:
    """Fresh model for the given view widths; deterministic per seed."""
    if len(view_dims) < 2:
        raise ArgumentError("need at least two views")
    if cfg.fill_mode == "prediction" and cfg.prediction_dim != cfg.latent_dim:
        raise ArgumentError(
            "fill_mode='prediction' requires prediction_dim == latent_dim "
            f"(got {cfg.prediction_dim} vs {cfg.latent_dim})"
        )
    a = len(view_dims)
    ss = _seed_seq(cfg.seed if seed is None else seed)
    children = iter(ss.spawn(a + a * (a - 1) + a))
    autoencoders = [
        build_autoencoder(d, cfg.latent_dim, cfg.ae_hidden, next(children))
        for d in view_dims
    ]
    pairs = {}
    for u in range(a):
        for v in range(a):
            if u != v:
                pairs[(u, v)] = PredictionPair(
                    cfg.latent_dim, cfg.prediction_dim, cfg.head_hidden, next(children)
                )
    discriminators = [
        Discriminator(d, cfg.disc_hidden, next(children)) for d in view_dims
    ]
    return TrainedModel(autoencoders, pairs, discriminators, cfg, norm_stats)


def _batches(n, batch_size, rng):
    """Shuffled minibatch index blocks; blocks of one row are dropped
    because train-mode batch norm needs at least two."""
    perm = rng.permutation(n)
    bs = min(batch_size, n)
    for start in range(0, n, bs):
        block = perm[start:start + bs]
        if block.size >= 2:
            yield block


def _network1_parameters(model: TrainedModel) -> list:
    params = []
    for ae in model.autoencoders:
        params.extend(p for _, p in ae.named_parameters())
    for key in model._pair_keys():
        for mlp in model.pairs[key].online_mlps():
            params.extend(p for _, p in mlp.named_parameters())
    return params


def _train_network1(model: TrainedModel, views, cfg: TrainConfig,
                    n_epochs: int, step_name: str, seed) -> list:
    """Shared engine for steps 1 and 3: minimize the composite objective
    over shuffled minibatches, EMA after every optimizer step."""
    n = views[0].shape[0]
    if n < 2:
        raise DataError("no complete pairs to train on")
    w = cfg.weights
    rng = np.random.default_rng(_seed_seq(seed))
    opt = Adam(_network1_parameters(model), cfg.learning_rate,
               cfg.adam_beta1, cfg.adam_beta2)
    view_ids = range(model.n_views)
    unordered = [(u, v) for u in view_ids for v in view_ids if u < v]
    history = []
    for epoch in range(n_epochs):
        sums = {"loss_total": 0.0, "loss_cc": 0.0, "loss_rec": 0.0, "loss_pre": 0.0}
        n_batches = 0
        for block in _batches(n, cfg.batch_size, rng):
            xb = [x[block] for x in views]
            zs = [model.autoencoders[v].encode(xb[v], train=True) for v in view_ids]
            if w.alpha > 0:
                xhats = [model.autoencoders[v].decode(zs[v], train=True) for v in view_ids]
                l_rec = reconstruction_loss(xb, xhats)
            else:
                l_rec = tape.Var(np.asarray(0.0, dtype=np.float32))
            l_pre = tape.Var(np.asarray(0.0, dtype=np.float32))
            l_cc = tape.Var(np.asarray(0.0, dtype=np.float32))
            for u, v in unordered:
                pair_uv, pair_vu = model.pairs[(u, v)], model.pairs[(v, u)]
                if w.beta > 0:
                    term, q_u, q_v = _prediction_forward(
                        pair_uv, pair_vu, zs[u], zs[v], cfg.prediction_terms, train=True
                    )
                    l_pre = tape.add(l_pre, term)
                elif cfg.include_cc:
                    q_u = pair_uv.soft_assignment(zs[u], train=True)
                    q_v = pair_vu.soft_assignment(zs[v], train=True)
                if cfg.include_cc:
                    l_cc = tape.add(l_cc, contrastive_consistency_loss(q_u, q_v, w.gamma))
            try:
                total = composite_network1_loss(l_cc, l_rec, l_pre, w)
            except NumericError as e:
                raise NumericError(f"step {step_name}, epoch {epoch + 1}: {e}") from e
            tape.backward(total)
            opt.step()
            for key in model._pair_keys():
                ema_update(model.pairs[key], cfg.momentum)
            sums["loss_total"] += total.item()
            sums["loss_cc"] += l_cc.item()
            sums["loss_rec"] += l_rec.item()
            sums["loss_pre"] += l_pre.item()
            n_batches += 1
        record = {k: s / max(n_batches, 1) for k, s in sums.items()}
        if not all(np.isfinite(list(record.values()))):
            bad = [k for k, x in record.items() if not np.isfinite(x)]
            raise NumericError(f"step {step_name}, epoch {epoch + 1}: non-finite {bad[0]}")
        history.append(record)
    return history


def train_step1(model: TrainedModel, complete_views, cfg: TrainConfig,
                seed=None) -> list:
    """Train the composite objective on fully present rows."""
    return _train_network1(model, complete_views, cfg, cfg.epochs[0], "1",
                           cfg.seed if seed is None else seed)


def _pretrain_reconstruction(model: TrainedModel, ds: MultiViewDataset,
                             cfg: TrainConfig, n_epochs: int, seed) -> list:
    """Fallback for datasets with no complete rows: fit each autoencoder
    on the rows where its view is present, reconstruction only."""
    rng = np.random.default_rng(_seed_seq(seed))
    opts, row_sets = [], []
    for v, ae in enumerate(model.autoencoders):
        params = [p for _, p in ae.named_parameters()]
        opts.append(Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2))
        row_sets.append(np.flatnonzero(ds.presence[:, v]))
    history = []
    for epoch in range(n_epochs):
        total, count = 0.0, 0
        for v, ae in enumerate(model.autoencoders):
            rows = row_sets[v]
            if rows.size < 2:
                continue
            for block in _batches(rows.size, cfg.batch_size, rng):
                xb = ds.views[v][rows[block]]
                z = ae.encode(xb, train=True)
                loss = reconstruction_loss([xb], [ae.decode(z, train=True)])
                tape.backward(loss)
                opts[v].step()
                total += loss.item()
                count += 1
        value = total / max(count, 1)
        if not np.isfinite(value):
            raise NumericError(f"step 1 (reconstruction pretraining), epoch {epoch + 1}: "
                               "non-finite loss_rec")
        history.append({"loss_total": value, "loss_rec": value})
    return history


def _generate_view(model: TrainedModel, ds: MultiViewDataset, rows, pattern,
                   v: int, train_decoder: bool):
    """Synthesize view ``v`` for rows sharing a presence pattern: encode
    each present view (frozen, eval mode) and decode into view ``v``;
    multiple sources are averaged."""
    present = [u for u, flag in enumerate(pattern) if flag]
    decoder_out = None
    for u in present:
        z = model.autoencoders[u].encode(ds.views[u][rows], train=False)
        xhat = model.autoencoders[v].decode(tape.stopgrad(z), train=train_decoder)
        decoder_out = xhat if decoder_out is None else tape.add(decoder_out, xhat)
    if len(present) > 1:
        decoder_out = tape.mul(decoder_out, 1.0 / len(present))
    return decoder_out


def train_step2(model: TrainedModel, ds: MultiViewDataset, cfg: TrainConfig,
                seed=None) -> list:
    """Adversarial completion: per view, the decoder generates the view
    from cross-view latents while a discriminator judges generated rows
    against genuinely present ones. Encoders stay frozen; a reconstruction
    term on present rows anchors each generator.

    No incomplete rows makes this a no-op with an empty history.
    """
    split = split_views(ds)
    if not split.groups:
        return []
    a = model.n_views
    rng = np.random.default_rng(_seed_seq(cfg.seed if seed is None else seed))
    for ae in model.autoencoders:
        ae.encoder.set_trainable(False)
    try:
        src_groups = {v: [] for v in range(a)}
        for pattern in sorted(split.groups):
            rows = split.groups[pattern]
            for v in range(a):
                if not pattern[v]:
                    src_groups[v].append((pattern, rows))
        real_pool = {}
        for v in range(a):
            pools = [rows for pattern, rows in sorted(split.groups.items())
                     if pattern[v]]
            pool = np.concatenate(pools) if pools else np.zeros(0, dtype=np.int64)
            if pool.size == 0:
                pool = split.complete
            real_pool[v] = pool
        opt_gen, opt_disc = {}, {}
        for v in range(a):
            if src_groups[v] and real_pool[v].size:
                dec_params = [p for _, p in model.autoencoders[v].decoder.named_parameters()]
                opt_gen[v] = Adam(dec_params, cfg.learning_rate,
                                  cfg.adam_beta1, cfg.adam_beta2)
                disc_params = [p for _, p in model.discriminators[v].named_parameters()]
                opt_disc[v] = Adam(disc_params, cfg.learning_rate,
                                   cfg.adam_beta1, cfg.adam_beta2)
        history = []
        for epoch in range(cfg.epochs[1]):
            d_sum, g_sum, count = 0.0, 0.0, 0
            for v in range(a):
                if v not in opt_gen:
                    continue
                disc = model.discriminators[v]
                for pattern, rows in src_groups[v]:
                    perm = rng.permutation(rows.size)
                    bs = min(cfg.batch_size, rows.size)
                    for start in range(0, rows.size, bs):
                        block = rows[perm[start:start + bs]]
                        if block.size < 2:
                            continue
                        fake = _generate_view(model, ds, block, pattern, v,
                                              train_decoder=True)
                        pool = real_pool[v]
                        real_idx = rng.choice(pool, size=block.size,
                                              replace=pool.size < block.size)
                        x_real = ds.views[v][real_idx]
                        d_loss = None
                        for _ in range(cfg.disc_steps_per_gen_step):
                            p_real = disc.discriminate(x_real, train=True)
                            p_fake = disc.discriminate(tape.stopgrad(fake), train=True)
                            d_loss = discriminator_loss(p_real, p_fake)
                            tape.backward(d_loss)
                            opt_disc[v].step()
                        disc.set_trainable(False)
                        g_adv = generator_loss(disc.discriminate(fake, train=True),
                                               cfg.generator_mode)
                        z_real = model.autoencoders[v].encode(x_real, train=False)
                        x_rec = model.autoencoders[v].decode(z_real, train=True)
                        rec = reconstruction_loss([x_real], [x_rec])
                        g_loss = tape.add(g_adv, tape.mul(rec, cfg.gen_reconstruction_weight))
                        tape.backward(g_loss)
                        opt_gen[v].step()
                        disc.set_trainable(True)
                        d_sum += d_loss.item()
                        g_sum += g_loss.item()
                        count += 1
            record = {"loss_disc": d_sum / max(count, 1),
                      "loss_gen": g_sum / max(count, 1)}
            if not all(np.isfinite(list(record.values()))):
                bad = [k for k, x in record.items() if not np.isfinite(x)]
                raise NumericError(f"step 2, epoch {epoch + 1}: non-finite {bad[0]}")
            history.append(record)
        return history
    finally:
        for ae in model.autoencoders:
            ae.encoder.set_trainable(True)


def generate_missing(model: TrainedModel, ds: MultiViewDataset) -> PseudoComplete:
    """Fill every incomplete row's missing views with generator output
    (evaluation mode, deterministic). Present views are kept as-is."""
    split = split_views(ds)
    if not split.groups:
        return PseudoComplete(np.zeros(0, dtype=np.int64),
                              [np.zeros((0, d), dtype=np.float32) for d in ds.view_dims])
    ordered = sorted(split.groups)
    indices = np.concatenate([split.groups[p] for p in ordered])
    views = [np.empty((indices.size, d), dtype=np.float32) for d in ds.view_dims]
    pos = 0
    for pattern in ordered:
        rows = split.groups[pattern]
        stop = pos + rows.size
        for v in range(ds.n_views):
            if pattern[v]:
                views[v][pos:stop] = ds.views[v][rows]
            else:
                out = _generate_view(model, ds, rows, pattern, v, train_decoder=False)
                views[v][pos:stop] = out.data
        pos = stop
    return PseudoComplete(indices, views)


def train_step3(model: TrainedModel, pseudo: PseudoComplete, cfg: TrainConfig,
                seed=None) -> list:
    """Repeat the step-1 objective on pseudo-complete rows; empty input is
    a no-op."""
    if pseudo.indices.size < 2:
        return []
    return _train_network1(model, pseudo.views, cfg, cfg.epochs[2], "3",
                           cfg.seed + 2 if seed is None else seed)


def fill_latents(model: TrainedModel, ds: MultiViewDataset,
                 fill_mode: str | None = None) -> np.ndarray:
    """Fused representation: per-view latents concatenated in view order.

    Present views are encoded directly; each absent view is filled either
    by the online prediction branch applied to a present view's latent
    (``prediction``, requires the prediction width to equal the latent
    width) or by encoding the generator's synthesized view (``gan``).
    Multiple present source views are averaged. Evaluation mode throughout.
    """
    mode = model.config.fill_mode if fill_mode is None else fill_mode
    if mode not in _FILL_MODES:
        raise ArgumentError(f"fill_mode must be one of {_FILL_MODES}")
    latent = model.latent_dim
    if mode == "prediction" and model.config.prediction_dim != latent:
        raise ArgumentError("prediction fill requires prediction_dim == latent_dim")
    if ds.view_dims != model.view_dims:
        raise DataError(
            f"dataset views {ds.view_dims} do not match model {model.view_dims}"
        )
    a = ds.n_views
    fused = np.zeros((ds.n_instances, a * latent), dtype=np.float32)
    split = split_views(ds)
    blocks = [(tuple([True] * a), split.complete)]
    blocks += [(p, split.groups[p]) for p in sorted(split.groups)]
    for pattern, rows in blocks:
        if rows.size == 0:
            continue
        zs = {}
        for u in range(a):
            if pattern[u]:
                zs[u] = model.autoencoders[u].encode(ds.views[u][rows], train=False).data
        present = [u for u in range(a) if pattern[u]]
        for v in range(a):
            sl = slice(v * latent, (v + 1) * latent)
            if pattern[v]:
                fused[rows, sl] = zs[v]
            elif mode == "prediction":
                fill = None
                for u in present:
                    pred = model.pairs[(u, v)].predict_online(zs[u], train=False).data
                    fill = pred if fill is None else fill + pred
                fused[rows, sl] = fill / len(present)
            else:
                xhat = _generate_view(model, ds, rows, pattern, v,
                                      train_decoder=False).data
                fused[rows, sl] = model.autoencoders[v].encode(xhat, train=False).data
    return fused


def run_pipeline(ds: MultiViewDataset, cfg: TrainConfig,
                 norm_stats: NormalizationStats | None = None,
                 method: str = "imvclust", run_id: str = "") -> PipelineResult:
    """End-to-end training, fusion and (when labels exist) evaluation.

    Complete data only: one long training phase. Mixed: steps 1, 2, 3 in
    order. No complete rows: reconstruction pretraining stands in for
    step 1. The adversarial stage can be disabled entirely, which also
    skips step 3 since there is nothing to retrain on.
    """
    if cfg.fill_mode == "prediction" and cfg.prediction_dim != cfg.latent_dim:
        raise ArgumentError("fill_mode='prediction' requires prediction_dim == latent_dim")
    s_model, s1, s2, s3 = _seed_seq(cfg.seed).spawn(4)
    model = build_model(ds.view_dims, cfg, seed=s_model, norm_stats=norm_stats)
    split = split_views(ds)
    histories = {}
    if not split.groups:
        histories["1"] = _train_network1(model, list(ds.views), cfg,
                                         cfg.epochs[0] + cfg.epochs[2], "1", s1)
    else:
        complete_views = [x[split.complete] for x in ds.views]
        if not cfg.include_adversarial:
            if split.complete.size >= 2:
                histories["1"] = _train_network1(model, complete_views, cfg,
                                                 cfg.epochs[0], "1", s1)
            else:
                histories["1"] = _pretrain_reconstruction(model, ds, cfg,
                                                          cfg.epochs[0], s1)
        else:
            if split.complete.size >= 2:
                histories["1"] = _train_network1(model, complete_views, cfg,
                                                 cfg.epochs[0], "1", s1)
            else:
                histories["1"] = _pretrain_reconstruction(model, ds, cfg,
                                                          cfg.epochs[0], s1)
            histories["2"] = train_step2(model, ds, cfg, s2)
            pseudo = generate_missing(model, ds)
            histories["3"] = train_step3(model, pseudo, cfg, s3)
    model.histories = histories
    fused = fill_latents(model, ds)
    report = None
    if ds.labels is not None:
        digest = cfg.digest()
        rid = run_id or f"{ds.name}-s{cfg.seed}-{digest}"
        report = evaluate(
            fused, ds.labels, k=ds.n_clusters, seed=cfg.seed,
            dataset=ds.name, mr=ds.missing_rate, method=method,
            run_id=rid, cfg_hash=digest,
        )
    return PipelineResult(model, fused, report)


_CHECKPOINT_FORMAT = "imvclust-checkpoint"


def save_model(model: TrainedModel, path) -> None:
    """Write checkpoint.json (architecture, config, canonical parameter
    order) plus params.bin (little-endian float32, canonical order)."""
    from pathlib import Path

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = [(name, p.data) for name, p in model.named_parameters()]
    entries += [(name, holder[i]) for name, holder, i in model.named_stats()]
    order, offset = [], 0
    for name, arr in entries:
        order.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += int(arr.size)
    blob = np.concatenate([np.ascontiguousarray(arr, dtype="<f4").ravel()
                           for _, arr in entries])
    (path / "params.bin").write_bytes(blob.tobytes())
    meta = {
        "format": _CHECKPOINT_FORMAT,
        "version": 1,
        "view_dims": list(model.view_dims),
        "config": model.config.to_dict(),
        "normalization": None if model.norm_stats is None else model.norm_stats.to_dict(),
        "params": order,
        "histories": model.histories,
    }
    (path / "checkpoint.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_model(path) -> TrainedModel:
    """Rebuild a model from a checkpoint directory, failing loudly on any
    ordering, shape or length mismatch."""
    from pathlib import Path

    path = Path(path)
    meta_path = path / "checkpoint.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"checkpoint metadata not found: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid checkpoint metadata: {e}") from e
    if meta.get("format") != _CHECKPOINT_FORMAT:
        raise FormatError(f"not a model checkpoint: {meta_path}")
    cfg = TrainConfig.from_dict(meta["config"])
    norm = meta.get("normalization")
    stats = None if norm is None else NormalizationStats.from_dict(norm)
    model = build_model(tuple(meta["view_dims"]), cfg, norm_stats=stats)
    model.histories = meta.get("histories", {})
    bin_path = path / "params.bin"
    if not bin_path.is_file():
        raise FileNotFoundError(f"parameter payload not found: {bin_path}")
    raw = np.fromfile(bin_path, dtype="<f4")
    entries = [(name, p) for name, p in model.named_parameters()]
    stats_entries = model.named_stats()
    expected = [(name, tuple(p.data.shape)) for name, p in entries]
    expected += [(name, tuple(holder[i].shape)) for name, holder, i in stats_entries]
    declared = meta["params"]
    if len(declared) != len(expected):
        raise FormatError(
            f"checkpoint declares {len(declared)} parameter arrays, "
            f"model has {len(expected)}"
        )
    offset = 0
    for (name, shape), entry in zip(expected, declared):
        if entry["name"] != name or tuple(entry["shape"]) != shape:
            raise FormatError(
                f"parameter ordering mismatch: expected {name}{shape}, "
                f"checkpoint has {entry['name']}{tuple(entry['shape'])}"
            )
        if entry["offset"] != offset:
            raise FormatError(f"parameter offset mismatch at {name}")
        offset += int(np.prod(shape)) if shape else 1
    if raw.size != offset:
        raise FormatError(
            f"params.bin holds {raw.size} values, checkpoint declares {offset}"
        )
    pos = 0
    for name, p in entries:
        n = p.data.size
        p.data = raw[pos:pos + n].reshape(p.data.shape).astype(p.data.dtype)
        pos += n
    for name, holder, i in stats_entries:
        n = holder[i].size
        holder[i] = raw[pos:pos + n].reshape(holder[i].shape).astype(holder[i].dtype)
        pos += n
    return model
