"""The alternating training loop.

Each step runs `n_critic` critic updates (Wasserstein loss on prior samples
vs encoded codes, followed by weight clipping), then one encoder/decoder
update on the full composed objective. Prior batches are drawn freshly per
step from the loop's seeded generator, so (seed, config, dataset) determine
every logged metric and every checkpoint byte.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data_io import Dataset
from .distributions import PriorSpec, sample_gaussian, sample_multinoulli
from .errors import CheckpointError, ConfigError, NumericError
from .evaluation import clustering_accuracy, mode_coverage
from .losses import (LossBreakdown, LossWeights, clip_weights,
                     total_encoder_decoder_loss, wgan_critic_loss)
from .networks import (ModelState, build_model, default_critic,
                       default_decoder, default_encoder, discriminate, encode)
from .optim import AdamState, adam_step, grads_of, zero_grads

_INIT_STREAM = 0
_TRAIN_STREAM = 1
_SAMPLE_STREAM = 2  # generation/traversal CLI commands

METRICS_LOG_NAME = "metrics.log"
FINAL_CHECKPOINT_NAME = "model.ckpt"


@dataclass
class TrainConfig:
    prior: PriorSpec
    data_mode: str
    weights: LossWeights = field(default_factory=LossWeights)
    enc_hidden: tuple = (512, 512, 256)
    dec_hidden: tuple = (256, 512, 512)
    critic_hidden: tuple = (100, 100)
    activation: str = "leaky_relu"
    critic_dropout: float = 0.2
    init_std: float = 0.02
    lr_enc_dec: float = 1e-3
    lr_critic: float = 1e-4
    batch_size: int = 128
    epochs: int = 30
    n_critic: int = 1
    clip_c: float = 0.01
    seed: int = 0
    ablation_no_cr: bool = False
    checkpoint_every: int = 0  # epochs between checkpoints; 0 = final only
    out_dir: str | None = None

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("training.batch_size must be >= 2 (batch norm)")
        if self.epochs < 1:
            raise ConfigError("training.epochs must be >= 1")
        # zero rates are legal (a zero step is a supported no-op run)
        if self.lr_enc_dec < 0 or self.lr_critic < 0:
            raise ConfigError("learning rates must be >= 0")
        if self.n_critic < 1:
            raise ConfigError("training.n_critic must be >= 1")
        if self.clip_c <= 0:
            raise ConfigError("training.clip_c must be > 0")
        if self.checkpoint_every < 0:
            raise ConfigError("training.checkpoint_every must be >= 0")
        self.enc_hidden = tuple(int(w) for w in self.enc_hidden)
        self.dec_hidden = tuple(int(w) for w in self.dec_hidden)
        self.critic_hidden = tuple(int(w) for w in self.critic_hidden)

    def to_dict(self) -> dict:
        return {
            "priors": {"k": self.prior.k, "d_h": self.prior.d_h,
                       "d_z": self.prior.d_z, "pi": self.prior.pi.tolist()},
            "data_mode": self.data_mode,
            "weights": {"lambda1": self.weights.lambda1,
                        "lambda2": self.weights.lambda2},
            "architecture": {"encoder": list(self.enc_hidden),
                             "decoder": list(self.dec_hidden),
                             "critic": list(self.critic_hidden),
                             "activation": self.activation,
                             "critic_dropout": self.critic_dropout,
                             "init_std": self.init_std},
            "training": {"lr_enc_dec": self.lr_enc_dec,
                         "lr_critic": self.lr_critic,
                         "batch_size": self.batch_size,
                         "epochs": self.epochs,
                         "n_critic": self.n_critic,
                         "clip_c": self.clip_c,
                         "seed": self.seed,
                         "ablation_no_cr": self.ablation_no_cr,
                         "checkpoint_every": self.checkpoint_every},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        pr = doc["priors"]
        arch = doc["architecture"]
        tr = doc["training"]
        return cls(
            prior=PriorSpec(k=pr["k"], d_h=pr["d_h"], d_z=pr["d_z"],
                            pi=np.asarray(pr["pi"])),
            data_mode=doc["data_mode"],
            weights=LossWeights(**doc["weights"]),
            enc_hidden=tuple(arch["encoder"]),
            dec_hidden=tuple(arch["decoder"]),
            critic_hidden=tuple(arch["critic"]),
            activation=arch["activation"],
            critic_dropout=arch["critic_dropout"],
            init_std=arch["init_std"],
            lr_enc_dec=tr["lr_enc_dec"], lr_critic=tr["lr_critic"],
            batch_size=tr["batch_size"], epochs=tr["epochs"],
            n_critic=tr["n_critic"], clip_c=tr["clip_c"], seed=tr["seed"],
            ablation_no_cr=tr["ablation_no_cr"],
            checkpoint_every=tr["checkpoint_every"])


@dataclass
class EpochMetrics:
    epoch: int                 # 1-based, counts completed epochs
    recon_x: float
    recon_c: float
    adv_enc: float
    adv_critic: float
    cr: float
    acc: float | None
    modes_covered: int
    kl_marginal: float
    seconds: float

    def format_line(self) -> str:
        acc = "na" if self.acc is None else f"{self.acc:.6f}"
        return (f"epoch={self.epoch} recon_x={self.recon_x:.6f} "
                f"recon_c={self.recon_c:.6f} adv={self.adv_enc:.6f} "
                f"cr={self.cr:.6f} acc={acc} modes={self.modes_covered} "
                f"kl={self.kl_marginal:.6f}")


def build_state(cfg: TrainConfig, in_dim: int, rng=None) -> ModelState:
    if rng is None:
        rng = np.random.default_rng([cfg.seed, _INIT_STREAM])
    enc = default_encoder(cfg.prior, cfg.enc_hidden, cfg.activation)
    dec = default_decoder(in_dim, cfg.dec_hidden, cfg.data_mode, cfg.activation)
    critic = default_critic(cfg.critic_hidden, cfg.critic_dropout)
    return build_model(cfg.prior, in_dim, enc, dec, critic, cfg.data_mode,
                       rng=rng, init_std=cfg.init_std,
                       adversarial_y=cfg.ablation_no_cr)


def _finite_or_die(value: float, what: str, context: str) -> float:
    if not np.isfinite(value):
        raise NumericError(f"non-finite {what} ({value!r}) during {context}; "
                           "aborting the run")
    return value


def _critic_update(state: ModelState, batch, cfg: TrainConfig,
                   opt_c: AdamState, rng) -> float:
    n = batch.shape[0]
    # the encoder is read, not trained, on this step: run it untaped so the
    # critic graph treats its codes as constants
    y_q, h_q, z_q = encode(state, batch, "train", update_stats=False)
    p = state.prior
    y_p = sample_multinoulli(p.pi, rng, n) if state.adversarial_y else None
    h_p = sample_gaussian(p.d_h, rng, n)
    z_p = sample_gaussian(p.d_z, rng, n)
    with Tape() as tape:
        s_prior = discriminate(state, h_p, z_p, "train", rng=rng, y=y_p)
        s_post = discriminate(state, h_q, z_q, "train", rng=rng,
                              y=y_q if state.adversarial_y else None)
        loss = wgan_critic_loss(s_prior, s_post)
    value = _finite_or_die(loss.item(), "critic loss", "a critic update")
    tape.backward(loss)
    cparams = state.critic_params()
    adam_step(cparams, grads_of(cparams), opt_c)
    zero_grads(cparams)
    clip_weights(cparams, cfg.clip_c)
    return value


def train_step(state: ModelState, batch, cfg: TrainConfig,
               opt_enc_dec: AdamState, opt_critic: AdamState, rng):
    """n_critic critic updates with clipping, then one encoder/decoder
    update. Returns (state, LossBreakdown); non-finite losses abort."""
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    critic_losses = [
        _critic_update(state, batch, cfg, opt_critic, rng)
        for _ in range(cfg.n_critic)
    ]
    with Tape() as tape:
        total, parts = total_encoder_decoder_loss(
            batch, state, cfg.weights, rng, mode="train", update_stats=True,
            ablation_no_cr=cfg.ablation_no_cr)
    values = {name: t.item() for name, t in parts.items()}
    total_value = total.item()
    for name, v in values.items():
        _finite_or_die(v, name, "an encoder/decoder update")
    _finite_or_die(total_value, "total loss", "an encoder/decoder update")
    tape.backward(total)
    gparams = state.enc_dec_params()
    adam_step(gparams, grads_of(gparams), opt_enc_dec)
    zero_grads(gparams)
    breakdown = LossBreakdown(
        recon_x=values["recon_x"], recon_c=values["recon_c"],
        adv_enc=values["adv_enc"],
        adv_critic=float(np.mean(critic_losses)),
        cr=values["cr"], total=total_value)
    return state, breakdown


def predict_proba(state: ModelState, features, chunk=1024) -> np.ndarray:
    """Eval-mode posterior q(y|x) for every row of `features`."""
    features = np.asarray(features, dtype=np.float64)
    out = []
    for start in range(0, features.shape[0], chunk):
        y, _, _ = encode(state, features[start:start + chunk], mode="eval")
        out.append(y.data)
    return np.concatenate(out, axis=0)


def _epoch_metrics(state: ModelState, dataset: Dataset, epoch: int,
                   sums: dict, steps: int, seconds: float) -> EpochMetrics:
    probs = predict_proba(state, dataset.features)
    preds = probs.argmax(axis=1)
    modes, kl = mode_coverage(preds, state.prior.k)
    acc = None
    if dataset.labels is not None:
        acc, _, _ = clustering_accuracy(dataset.labels, preds,
                                        k_pred=state.prior.k)
    return EpochMetrics(
        epoch=epoch,
        recon_x=sums["recon_x"] / steps, recon_c=sums["recon_c"] / steps,
        adv_enc=sums["adv_enc"] / steps, adv_critic=sums["adv_critic"] / steps,
        cr=sums["cr"] / steps, acc=acc, modes_covered=modes, kl_marginal=kl,
        seconds=seconds)


def _snapshot(state: ModelState, opt_g: AdamState, opt_c: AdamState, rng,
              epoch: int, cfg: TrainConfig, data_echo=None) -> Checkpoint:
    arrays: dict[str, np.ndarray] = {}
    for name, p in state.params.items():
        arrays[name] = p.data
    for name, buf in state.stats.items():
        arrays[f"stats.{name}"] = buf
    for tag, opt in (("g", opt_g), ("c", opt_c)):
        for name, buf in opt.m.items():
            arrays[f"adam.{tag}.m.{name}"] = buf
        for name, buf in opt.v.items():
            arrays[f"adam.{tag}.v.{name}"] = buf
    run_state = {"epoch": epoch,
                 "adam_t": {"enc_dec": opt_g.t, "critic": opt_c.t},
                 "rng": rng.bit_generator.state}
    echo = {"train_config": cfg.to_dict()}
    if data_echo is not None:
        echo["data"] = data_echo
    return Checkpoint(arrays=arrays, run_state=run_state, config_echo=echo)


def _check_arch_echo(stored: dict, cfg: TrainConfig):
    current = cfg.to_dict()
    for section in ("priors", "architecture", "data_mode"):
        if stored.get(section) != current.get(section):
            raise CheckpointError(
                f"checkpoint is architecture-incompatible with the config: "
                f"{section} differs ({stored.get(section)!r} vs "
                f"{current.get(section)!r})")
    if stored["training"]["ablation_no_cr"] != cfg.ablation_no_cr:
        raise CheckpointError(
            "checkpoint ablation_no_cr flag differs from the config")


def _restore_into(state: ModelState, opt_g: AdamState, opt_c: AdamState,
                  ckpt: Checkpoint):
    for name, p in state.params.items():
        if name not in ckpt.arrays:
            raise CheckpointError(f"checkpoint is missing parameter {name!r}")
        arr = ckpt.arrays[name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"checkpoint parameter {name!r} has shape {arr.shape}, "
                f"model expects {p.data.shape}")
        p.data = arr.copy()
    for name, buf in state.stats.items():
        arr = ckpt.arrays.get(f"stats.{name}")
        if arr is None or arr.shape != buf.shape:
            raise CheckpointError(f"checkpoint is missing stats for {name!r}")
        buf[:] = arr
    for tag, opt in (("g", opt_g), ("c", opt_c)):
        for kind, store in (("m", opt.m), ("v", opt.v)):
            for name in store:
                arr = ckpt.arrays.get(f"adam.{tag}.{kind}.{name}")
                if arr is None or arr.shape != store[name].shape:
                    raise CheckpointError(
                        f"checkpoint is missing optimizer moments for {name!r}")
                store[name] = arr.copy()
    opt_g.t = int(ckpt.run_state["adam_t"]["enc_dec"])
    opt_c.t = int(ckpt.run_state["adam_t"]["critic"])


def load_model(path):
    """Rebuild a ModelState (and its TrainConfig) from a checkpoint."""
    ckpt = load_checkpoint(path)
    cfg = TrainConfig.from_dict(ckpt.config_echo["train_config"])
    in_dim = ckpt.arrays["enc.l0.W"].shape[0]
    state = build_state(cfg, int(in_dim))
    opt_g = AdamState.for_params(state.enc_dec_params(), cfg.lr_enc_dec)
    opt_c = AdamState.for_params(state.critic_params(), cfg.lr_critic)
    _restore_into(state, opt_g, opt_c, ckpt)
    return state, cfg, ckpt


def train(dataset: Dataset, cfg: TrainConfig, resume_from=None,
          data_echo=None):
    """Run the alternating loop; returns (final state, per-epoch metrics).

    Shuffles with the seeded stream each epoch and drops the last incomplete
    minibatch. When cfg.out_dir is set, writes one metrics line per epoch to
    metrics.log, cadence checkpoints, and a final model.ckpt.
    """
    if dataset.n < cfg.batch_size:
        raise ConfigError(
            f"dataset has {dataset.n} rows, fewer than one batch of "
            f"{cfg.batch_size}")
    if dataset.data_mode != cfg.data_mode:
        raise ConfigError(
            f"dataset is {dataset.data_mode}-mode but the config says "
            f"{cfg.data_mode}")

    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        _check_arch_echo(ckpt.config_echo["train_config"], cfg)
        state = build_state(cfg, dataset.dim)
        opt_g = AdamState.for_params(state.enc_dec_params(), cfg.lr_enc_dec)
        opt_c = AdamState.for_params(state.critic_params(), cfg.lr_critic)
        _restore_into(state, opt_g, opt_c, ckpt)
        rng = np.random.default_rng()
        rng.bit_generator.state = ckpt.run_state["rng"]
        start_epoch = int(ckpt.run_state["epoch"])
    else:
        state = build_state(cfg, dataset.dim)
        opt_g = AdamState.for_params(state.enc_dec_params(), cfg.lr_enc_dec)
        opt_c = AdamState.for_params(state.critic_params(), cfg.lr_critic)
        rng = np.random.default_rng([cfg.seed, _TRAIN_STREAM])
        start_epoch = 0

    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        if start_epoch == 0:
            # fresh run: truncate any previous log in this directory
            open(os.path.join(cfg.out_dir, METRICS_LOG_NAME), "w").close()

    steps = dataset.n // cfg.batch_size
    metrics_list = []
    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.perf_counter()
        perm = rng.permutation(dataset.n)
        sums = {"recon_x": 0.0, "recon_c": 0.0, "adv_enc": 0.0,
                "adv_critic": 0.0, "cr": 0.0}
        for s in range(steps):
            idx = perm[s * cfg.batch_size:(s + 1) * cfg.batch_size]
            _, bd = train_step(state, dataset.features[idx], cfg, opt_g,
                               opt_c, rng)
            for key in sums:
                sums[key] += getattr(bd, key)
        em = _epoch_metrics(state, dataset, epoch + 1, sums, steps,
                            time.perf_counter() - t0)
        metrics_list.append(em)
        if cfg.out_dir:
            _append_log(cfg.out_dir, em.format_line())
            if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
                path = os.path.join(cfg.out_dir,
                                    f"checkpoint_epoch{epoch + 1}.ckpt")
                save_checkpoint(path, _snapshot(state, opt_g, opt_c, rng,
                                                epoch + 1, cfg, data_echo))
    if cfg.out_dir:
        save_checkpoint(os.path.join(cfg.out_dir, FINAL_CHECKPOINT_NAME),
                        _snapshot(state, opt_g, opt_c, rng, cfg.epochs, cfg,
                                  data_echo))
    return state, metrics_list


def resume(checkpoint_path, dataset: Dataset, cfg: TrainConfig):
    """Continue training from a checkpoint up to cfg.epochs."""
    return train(dataset, cfg, resume_from=checkpoint_path)


def _append_log(out_dir, line):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, METRICS_LOG_NAME), "a") as f:
        f.write(line + "\n")
