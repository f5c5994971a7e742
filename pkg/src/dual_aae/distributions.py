"""Latent-variable priors, sampling, and categorical information measures.

The latent code of a sample is (y, h, z): a category indicator over K
clusters, a continuous style vector, and residual noise. Priors are
y ~ Mult(pi), h ~ N(0, I), z ~ N(0, I). Entropies and divergences are in
nats throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

PROB_ATOL = 1e-9


@dataclass
class PriorSpec:
    """Cluster count, category probabilities, and latent dimensions."""

    k: int
    d_h: int
    d_z: int
    pi: np.ndarray = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"priors.k must be >= 1, got {self.k}")
        if self.d_h < 0 or self.d_z < 0:
            raise ConfigError("priors.d_h and priors.d_z must be >= 0")
        if self.pi is None:
            self.pi = np.full(self.k, 1.0 / self.k)
        self.pi = np.asarray(self.pi, dtype=np.float64)
        _check_probs(self.pi, "priors.pi")
        if self.pi.shape != (self.k,):
            raise ConfigError(
                f"priors.pi must have length k={self.k}, got {self.pi.shape}")

    @property
    def code_dim(self) -> int:
        return self.k + self.d_h + self.d_z


@dataclass
class LatentCode:
    """One latent triple; y may be soft probabilities or an exact one-hot."""

    y: np.ndarray
    h: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        self.h = np.asarray(self.h, dtype=np.float64)
        self.z = np.asarray(self.z, dtype=np.float64)
        _check_probs(self.y, "latent y")


def _check_probs(p: np.ndarray, what: str) -> None:
    if np.any(p < 0):
        raise ConfigError(f"{what}: negative probability entry")
    if abs(float(p.sum()) - 1.0) > PROB_ATOL:
        raise ConfigError(f"{what}: probabilities sum to {p.sum()!r}, not 1")


def sample_multinoulli(pi, rng, n=None) -> np.ndarray:
    """Draw one-hot categories; shape (k,) for n=None else (n, k)."""
    pi = np.asarray(pi, dtype=np.float64)
    _check_probs(pi, "pi")
    k = pi.shape[0]
    size = 1 if n is None else int(n)
    idx = rng.choice(k, size=size, p=pi)
    out = np.zeros((size, k))
    out[np.arange(size), idx] = 1.0
    return out[0] if n is None else out


def sample_gaussian(dim, rng, n=None) -> np.ndarray:
    """Standard normal draws; shape (dim,) for n=None else (n, dim)."""
    if dim < 0:
        raise ConfigError(f"gaussian dim must be >= 0, got {dim}")
    shape = (dim,) if n is None else (int(n), dim)
    return rng.standard_normal(shape)


def entropy_categorical(p) -> float:
    """-sum p ln p in nats, with 0 ln 0 := 0."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("entropy of a vector with negative entries")
    if abs(float(p.sum()) - 1.0) > 1e-6:
        raise ValueError(f"entropy of an unnormalized vector (sum {p.sum()!r})")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def kl_categorical(q, p) -> float:
    """KL(q || p) in nats; requires support(q) within support(p)."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if q.shape != p.shape:
        raise ValueError(f"KL operands differ in length: {q.shape} vs {p.shape}")
    if np.any(q < 0) or np.any(p < 0):
        raise ValueError("KL of a vector with negative entries")
    mask = q > 0
    if np.any(p[mask] <= 0):
        raise ValueError("KL support violation: q puts mass where p has none")
    return float((q[mask] * np.log(q[mask] / p[mask])).sum())


def batch_marginal(y_probs) -> np.ndarray:
    """Aggregated posterior estimate: the mean of a batch of q(y|x) rows."""
    y_probs = np.asarray(y_probs, dtype=np.float64)
    if y_probs.ndim != 2 or y_probs.shape[0] == 0:
        raise ValueError("batch_marginal needs a nonempty (n, k) batch")
    return y_probs.mean(axis=0)
