import numpy as np
import pytest

from dual_aae import PriorSpec, TrainConfig
from dual_aae.networks import LayerSpec, build_model, default_critic


def tiny_config(**overrides) -> TrainConfig:
    """A deliberately small, fast configuration for loop-level tests."""
    defaults = dict(
        prior=PriorSpec(k=3, d_h=2, d_z=1),
        data_mode="feature",
        enc_hidden=(8, 8),
        dec_hidden=(8, 8),
        critic_hidden=(8,),
        batch_size=8,
        epochs=2,
        seed=0,
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


def tiny_model(prior=None, in_dim=6, data_mode="feature", seed=0,
               critic_dropout=0.0, init_std=0.3, adversarial_y=False,
               hidden=(8,), activation="leaky_relu", batch_norm=True):
    """A small hand-assembled model; healthy init keeps gradients well above
    finite-difference noise."""
    prior = prior or PriorSpec(k=3, d_h=2, d_z=1)
    enc = [LayerSpec(w, activation, batch_norm=batch_norm) for w in hidden]
    enc.append(LayerSpec(prior.code_dim, "linear"))
    dec = [LayerSpec(w, activation, batch_norm=batch_norm) for w in hidden]
    dec.append(LayerSpec(in_dim, "sigmoid" if data_mode == "pixel" else "linear"))
    critic = default_critic(hidden=(8,), dropout_p=critic_dropout)
    rng = np.random.default_rng(seed)
    return build_model(prior, in_dim, enc, dec, critic, data_mode, rng=rng,
                       init_std=init_std, adversarial_y=adversarial_y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
