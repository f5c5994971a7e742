"""All training loss terms and their composition.

Four pieces make up the encoder/decoder objective:

* data reconstruction (O-AE path): encode a real batch, decode it, and score
  the reconstruction under the output model (Bernoulli per pixel, or
  unit-variance Gaussian per feature up to its constant);
* latent-code reconstruction (D-AE path): draw (y, h, z) from the priors,
  decode them to a fake batch, re-encode, and score how well the code
  (y, h) round-trips -- cross-entropy for y, half squared error for h; the
  noise z is deliberately not reconstructed;
* the adversarial term: a Wasserstein critic scores encoded (h, z) against
  prior samples, Lipschitz-constrained by weight clipping;
* the clustering regularizer (CR): per-sample assignment entropy is pushed
  down while the batch-marginal entropy is pushed up, which balances the
  clusters and prevents the category variable from collapsing.

The critic trains on its own loss; everything else trains the encoder and
decoder jointly (the critic is frozen on that step).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .autodiff import Tensor
from .distributions import sample_gaussian, sample_multinoulli
from .errors import ConfigError, DimensionError
from .networks import ModelState, decode, discriminate, encode, frozen

PROB_EPS = 1e-12


@dataclass
class LossWeights:
    """lambda1 scales the latent reconstruction, lambda2 the conditional
    entropy inside the clustering regularizer."""

    lambda1: float = 0.1
    lambda2: float = 0.5

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("loss weights must be >= 0")


@dataclass
class LossBreakdown:
    recon_x: float
    recon_c: float
    adv_enc: float
    adv_critic: float
    cr: float
    total: float


def _clamped_log(t: Tensor) -> Tensor:
    return ad.log(ad.clamp(t, PROB_EPS, 1.0))


def recon_x_loss(x, x_hat, data_mode: str) -> Tensor:
    """Per-element mean reconstruction loss of a data batch."""
    x, x_hat = ad.as_tensor(x), ad.as_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise DimensionError(
            f"reconstruction shapes differ: {x.shape} vs {x_hat.shape}")
    if data_mode == "pixel":
        nll = ad.neg(ad.add(ad.mul(x, _clamped_log(x_hat)),
                            ad.mul(ad.sub(1.0, x),
                                   _clamped_log(ad.sub(1.0, x_hat)))))
        return ad.mean(nll)
    if data_mode == "feature":
        diff = ad.sub(x, x_hat)
        return ad.mul(0.5, ad.mean(ad.mul(diff, diff)))
    raise ConfigError(f"unknown data_mode {data_mode!r}")


def recon_c_loss(y_true, h_true, y_probs_hat, h_hat) -> Tensor:
    """Latent-code reconstruction: cross-entropy on y plus half squared
    error on h, averaged per sample. z carries residual information and is
    not reconstructed."""
    y_true, h_true = ad.as_tensor(y_true), ad.as_tensor(h_true)
    y_probs_hat, h_hat = ad.as_tensor(y_probs_hat), ad.as_tensor(h_hat)
    if y_true.shape != y_probs_hat.shape:
        raise DimensionError(
            f"y shapes differ: {y_true.shape} vs {y_probs_hat.shape}")
    if h_true.shape != h_hat.shape:
        raise DimensionError(
            f"h shapes differ: {h_true.shape} vs {h_hat.shape}")
    ce = ad.neg(ad.tsum(ad.mul(y_true, _clamped_log(y_probs_hat)), axis=1))
    dh = ad.sub(h_true, h_hat)
    sq = ad.mul(0.5, ad.tsum(ad.mul(dh, dh), axis=1))
    return ad.mean(ad.add(ce, sq))


def _entropy_rows(p: Tensor) -> Tensor:
    return ad.neg(ad.tsum(ad.mul(p, _clamped_log(p)), axis=1))


def cr_loss(y_probs, lambda2: float) -> Tensor:
    """Clustering regularizer: -H(batch marginal) + lambda2 * mean row
    entropy. Minimized at -ln K by confident, balanced assignments."""
    y_probs = ad.as_tensor(y_probs)
    if y_probs.ndim != 2 or y_probs.shape[0] == 0:
        raise DimensionError("cr_loss needs a nonempty (n, k) batch")
    marginal = ad.mean(y_probs, axis=0)
    h_marginal = ad.neg(ad.tsum(ad.mul(marginal, _clamped_log(marginal))))
    h_cond = ad.mean(_entropy_rows(y_probs))
    return ad.add(ad.neg(h_marginal), ad.mul(lambda2, h_cond))


def wgan_critic_loss(score_prior, score_posterior) -> Tensor:
    """Negated critic objective mean(D(prior)) - mean(D(posterior)),
    as a minimization target for the critic parameters."""
    score_prior = ad.as_tensor(score_prior)
    score_posterior = ad.as_tensor(score_posterior)
    if score_prior.size == 0 or score_posterior.size == 0:
        raise DimensionError("critic loss needs nonempty score batches")
    return ad.sub(ad.mean(score_posterior), ad.mean(score_prior))


def wgan_encoder_loss(score_posterior) -> Tensor:
    """-mean(D(posterior)): the encoder pushes its codes toward scores the
    critic assigns to prior samples."""
    score_posterior = ad.as_tensor(score_posterior)
    if score_posterior.size == 0:
        raise DimensionError("encoder adversarial loss needs nonempty scores")
    return ad.neg(ad.mean(score_posterior))


def clip_weights(critic_params, c: float) -> None:
    """Clamp every critic parameter to [-c, c] in place."""
    if c <= 0:
        raise ConfigError(f"clip constant must be > 0, got {c}")
    if isinstance(critic_params, dict):
        critic_params = critic_params.values()
    for p in critic_params:
        K.clip_(p.data, c)


def dual_aae_losses(state: ModelState, x, y_prior, h_prior, z_prior,
                    weights: LossWeights, rng=None, mode="train",
                    update_stats=True, ablation_no_cr=False):
    """All encoder/decoder loss terms for one batch with the prior draws
    supplied explicitly (deterministic given its inputs when the critic has
    no dropout; this is the function gradient checks target).

    Returns (total, parts) where parts maps term names to scalar tensors.
    Batch-norm running buffers update only on the two forwards whose input
    distribution eval mode will see: the encoder on real data, the decoder
    on prior codes.
    """
    xt = ad.as_tensor(x)
    # O-AE: reconstruct the observed batch
    y_q, h_q, z_q = encode(state, xt, mode, rng=rng, update_stats=update_stats)
    x_hat = decode(state, y_q, h_q, z_q, mode, rng=rng, update_stats=False)
    l_recon_x = recon_x_loss(xt, x_hat, state.data_mode)
    # D-AE: generate from the priors and reconstruct the structured code
    x_gen = decode(state, y_prior, h_prior, z_prior, mode, rng=rng,
                   update_stats=update_stats)
    y_rec, h_rec, _ = encode(state, x_gen, mode, rng=rng, update_stats=False)
    l_recon_c = recon_c_loss(y_prior, h_prior, y_rec, h_rec)
    # adversarial: the critic is read-only here
    with frozen(state.critic_params().values()):
        scores = discriminate(state, h_q, z_q, mode, rng=rng,
                              y=y_q if state.adversarial_y else None)
    l_adv = wgan_encoder_loss(scores)
    l_cr = cr_loss(y_q, weights.lambda2)

    total = ad.add(ad.add(l_recon_x, ad.mul(weights.lambda1, l_recon_c)), l_adv)
    if not ablation_no_cr:
        total = ad.add(total, l_cr)
    parts = {"recon_x": l_recon_x, "recon_c": l_recon_c, "adv_enc": l_adv,
             "cr": l_cr}
    return total, parts


def total_encoder_decoder_loss(batch, state: ModelState, weights: LossWeights,
                               rng, mode="train", update_stats=True,
                               ablation_no_cr=False):
    """Sample a prior batch (y, then h, then z) and compose all
    encoder/decoder terms on `batch`."""
    batch = np.asarray(batch, dtype=np.float64)
    n = batch.shape[0]
    p = state.prior
    y_prior = sample_multinoulli(p.pi, rng, n)
    h_prior = sample_gaussian(p.d_h, rng, n)
    z_prior = sample_gaussian(p.d_z, rng, n)
    return dual_aae_losses(state, batch, y_prior, h_prior, z_prior, weights,
                           rng=rng, mode=mode, update_stats=update_stats,
                           ablation_no_cr=ablation_no_cr)
