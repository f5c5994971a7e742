"""Encoder Q, decoder P, and critic D as configurable fully-connected nets.

The encoder maps a data batch to (y probabilities, style h, noise z) through
a shared trunk whose last layer is linear and split into heads: softmax over
the first K units, identity for the rest (the posterior over (h, z) is a
deterministic point mass). The decoder maps [y, h, z] back to data space,
ending in a sigmoid for pixel data or a linear layer for real features.
The critic scores (h, z) pairs with an unbounded output; in the
adversarial-y ablation it scores (y, h, z) instead.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .distributions import PriorSpec
from .errors import ConfigError, DimensionError

ACTIVATIONS = ("leaky_relu", "relu", "sigmoid", "linear")
LEAKY_SLOPE = 0.1
BN_MOMENTUM = 0.9
BN_EPS = 1e-5
DATA_MODES = ("pixel", "feature")


@dataclass
class LayerSpec:
    """One fully-connected layer: output width, nonlinearity, regularizers."""

    width: int
    activation: str = "leaky_relu"
    batch_norm: bool = False
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.width < 1:
            raise ConfigError(f"layer width must be >= 1, got {self.width}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


@dataclass
class ModelState:
    """All trainable parameters and batch-norm running buffers, by name."""

    prior: PriorSpec
    in_dim: int
    data_mode: str
    enc: list[LayerSpec]
    dec: list[LayerSpec]
    critic: list[LayerSpec]
    params: dict[str, Tensor] = field(default_factory=dict)
    stats: dict[str, np.ndarray] = field(default_factory=dict)
    adversarial_y: bool = False

    @property
    def code_dim(self) -> int:
        return self.prior.code_dim

    @property
    def critic_in_dim(self) -> int:
        base = self.prior.d_h + self.prior.d_z
        return base + self.prior.k if self.adversarial_y else base

    def _subset(self, prefix: str) -> dict[str, Tensor]:
        return {n: p for n, p in self.params.items() if n.startswith(prefix)}

    def encoder_params(self) -> dict[str, Tensor]:
        return self._subset("enc.")

    def decoder_params(self) -> dict[str, Tensor]:
        return self._subset("dec.")

    def critic_params(self) -> dict[str, Tensor]:
        return self._subset("crit.")

    def enc_dec_params(self) -> dict[str, Tensor]:
        out = self.encoder_params()
        out.update(self.decoder_params())
        return out


def default_encoder(prior: PriorSpec, hidden, activation="leaky_relu"):
    specs = [LayerSpec(w, activation, batch_norm=True) for w in hidden]
    specs.append(LayerSpec(prior.code_dim, "linear", batch_norm=False))
    return specs


def default_decoder(in_dim: int, hidden, data_mode: str, activation="leaky_relu"):
    specs = [LayerSpec(w, activation, batch_norm=True) for w in hidden]
    final_act = "sigmoid" if data_mode == "pixel" else "linear"
    specs.append(LayerSpec(in_dim, final_act, batch_norm=False))
    return specs


def default_critic(hidden=(100, 100), dropout_p=0.2):
    specs = [LayerSpec(w, "relu", batch_norm=False, dropout_p=dropout_p)
             for w in hidden]
    specs.append(LayerSpec(1, "linear", batch_norm=False))
    return specs


def build_model(prior: PriorSpec, in_dim: int, enc, dec, critic,
                data_mode: str, rng, init_std: float = 0.02,
                adversarial_y: bool = False) -> ModelState:
    """Validate the width chain and initialize all parameters.

    Weights ~ N(0, init_std^2), biases 0, batch-norm gamma 1 / beta 0 with
    running stats (0, 1). Deterministic given the rng.
    """
    if data_mode not in DATA_MODES:
        raise ConfigError(f"data_mode must be one of {DATA_MODES}, got {data_mode!r}")
    if in_dim < 1:
        raise ConfigError(f"input dimension must be >= 1, got {in_dim}")
    if init_std <= 0:
        raise ConfigError(f"init_std must be > 0, got {init_std}")
    enc, dec, critic = list(enc), list(dec), list(critic)
    for name, specs in (("encoder", enc), ("decoder", dec), ("critic", critic)):
        if not specs:
            raise ConfigError(f"{name} needs at least one layer")

    if enc[-1].width != prior.code_dim:
        raise ConfigError(
            f"encoder output width {enc[-1].width} != k + d_h + d_z = "
            f"{prior.code_dim}")
    if enc[-1].batch_norm or dec[-1].batch_norm:
        raise ConfigError("the final encoder/decoder layer must not use batch norm")
    if enc[-1].activation != "linear":
        raise ConfigError("the final encoder layer must be linear (heads split it)")
    if dec[-1].width != in_dim:
        raise ConfigError(
            f"decoder output width {dec[-1].width} != input dimension {in_dim}")
    want = "sigmoid" if data_mode == "pixel" else "linear"
    if dec[-1].activation != want:
        raise ConfigError(
            f"decoder final activation must be {want!r} in {data_mode} mode")
    if critic[-1].width != 1 or critic[-1].activation != "linear":
        raise ConfigError("the critic must end in a linear width-1 layer")

    state = ModelState(prior=prior, in_dim=in_dim, data_mode=data_mode,
                       enc=enc, dec=dec, critic=critic,
                       adversarial_y=adversarial_y)
    critic_in = state.critic_in_dim
    if critic_in < 1:
        raise ConfigError("critic input is empty: d_h + d_z must be >= 1")
    for prefix, specs, fan_in in (("enc", enc, in_dim),
                                  ("dec", dec, prior.code_dim),
                                  ("crit", critic, critic_in)):
        for i, spec in enumerate(specs):
            w = rng.standard_normal((fan_in, spec.width)) * init_std
            state.params[f"{prefix}.l{i}.W"] = Tensor(w, requires_grad=True)
            state.params[f"{prefix}.l{i}.b"] = Tensor(
                np.zeros(spec.width), requires_grad=True)
            if spec.batch_norm:
                state.params[f"{prefix}.l{i}.gamma"] = Tensor(
                    np.ones(spec.width), requires_grad=True)
                state.params[f"{prefix}.l{i}.beta"] = Tensor(
                    np.zeros(spec.width), requires_grad=True)
                state.stats[f"{prefix}.l{i}.rmean"] = np.zeros(spec.width)
                state.stats[f"{prefix}.l{i}.rvar"] = np.ones(spec.width)
            fan_in = spec.width
    return state


def _activate(t: Tensor, spec: LayerSpec) -> Tensor:
    if spec.activation == "leaky_relu":
        return ad.leaky_relu(t, LEAKY_SLOPE)
    if spec.activation == "relu":
        return ad.relu(t)
    if spec.activation == "sigmoid":
        return ad.sigmoid(t)
    return t


def _forward(state: ModelState, prefix: str, specs, x: Tensor, mode: str,
             rng=None, update_stats=False, capture_penultimate=False):
    h = x
    penultimate = None
    for i, spec in enumerate(specs):
        W = state.params[f"{prefix}.l{i}.W"]
        b = state.params[f"{prefix}.l{i}.b"]
        h = ad.add(ad.matmul(h, W), b)
        if spec.batch_norm:
            h = ad.batch_norm(h, state.params[f"{prefix}.l{i}.gamma"],
                              state.params[f"{prefix}.l{i}.beta"], mode,
                              state.stats[f"{prefix}.l{i}.rmean"],
                              state.stats[f"{prefix}.l{i}.rvar"],
                              momentum=BN_MOMENTUM, eps=BN_EPS,
                              update_stats=update_stats and mode == "train")
        if spec.dropout_p > 0.0:
            h = ad.dropout(h, spec.dropout_p, mode, rng)
        h = _activate(h, spec)
        if capture_penultimate and i == len(specs) - 2:
            penultimate = h
    return h, penultimate


def encode(state: ModelState, x, mode="eval", rng=None, update_stats=False,
           return_hidden=False):
    """Map a data batch to (y_probs, h, z); y rows are valid probabilities."""
    x = ad.as_tensor(x)
    if x.ndim != 2 or x.shape[1] != state.in_dim:
        raise DimensionError(
            f"encoder input must be (n, {state.in_dim}), got {x.shape}")
    out, hidden = _forward(state, "enc", state.enc, x, mode, rng,
                           update_stats, capture_penultimate=return_hidden)
    k, d_h = state.prior.k, state.prior.d_h
    y = ad.softmax(ad.slice_axis(out, 1, 0, k), axis=1)
    h = ad.slice_axis(out, 1, k, k + d_h)
    z = ad.slice_axis(out, 1, k + d_h, state.code_dim)
    if return_hidden:
        return y, h, z, hidden
    return y, h, z


def decode(state: ModelState, y, h, z, mode="eval", rng=None,
           update_stats=False) -> Tensor:
    """Generate a data batch from a latent triple."""
    y, h, z = ad.as_tensor(y), ad.as_tensor(h), ad.as_tensor(z)
    p = state.prior
    for part, width, label in ((y, p.k, "y"), (h, p.d_h, "h"), (z, p.d_z, "z")):
        if part.ndim != 2 or part.shape[1] != width:
            raise DimensionError(
                f"decoder {label} must be (n, {width}), got {part.shape}")
    code = ad.concat([y, h, z], axis=1)
    out, _ = _forward(state, "dec", state.dec, code, mode, rng, update_stats)
    return out


def discriminate(state: ModelState, h, z, mode="eval", rng=None, y=None) -> Tensor:
    """Wasserstein critic scores, one unbounded real per row."""
    h, z = ad.as_tensor(h), ad.as_tensor(z)
    parts = [h, z]
    if state.adversarial_y:
        if y is None:
            raise ConfigError("this model routes y through the critic; pass y")
        parts = [ad.as_tensor(y), h, z]
    elif y is not None:
        raise ConfigError("this model's critic scores (h, z) only")
    code = ad.concat(parts, axis=1)
    if code.shape[1] != state.critic_in_dim:
        raise DimensionError(
            f"critic input must be (n, {state.critic_in_dim}), got {code.shape}")
    out, _ = _forward(state, "crit", state.critic, code, mode, rng)
    return ad.reshape(out, (out.shape[0],))


def embed(state: ModelState, x) -> np.ndarray:
    """Eval-mode activations of the encoder's penultimate layer."""
    if len(state.enc) < 2:
        raise ConfigError("embed needs an encoder with at least one hidden layer")
    _, _, _, hidden = encode(state, x, mode="eval", return_hidden=True)
    return hidden.data


@contextmanager
def frozen(tensors):
    """Temporarily clear requires_grad (ops recorded inside take no gradient)."""
    tensors = list(tensors)
    saved = [t.requires_grad for t in tensors]
    for t in tensors:
        t.requires_grad = False
    try:
        yield
    finally:
        for t, flag in zip(tensors, saved):
            t.requires_grad = flag
