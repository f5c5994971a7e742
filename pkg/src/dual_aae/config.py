"""JSON run configuration: parsing, validation, dataset construction.

A config document has top-level sections {data, priors, architecture,
training, weights, output}. Parsing is total: any malformed document raises
ConfigError naming the offending field.
"""

from __future__ import annotations

import json

import numpy as np

from .data_io import Dataset, load_features_csv, load_idx, synth_gmm
from .distributions import PriorSpec
from .errors import ConfigError
from .losses import LossWeights
from .trainer import TrainConfig

_MISSING = object()


def _lookup(doc: dict, path: str, default=_MISSING):
    node = doc
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is _MISSING:
                raise ConfigError(f"{path}: missing required field")
            return default
        node = node[part]
    return node


def _number(doc, path, default=_MISSING, minimum=None, integer=False):
    value = _lookup(doc, path, default)
    if value is default and default is not _MISSING:
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def _string(doc, path, default=_MISSING, choices=None):
    value = _lookup(doc, path, default)
    if value is default and default is not _MISSING:
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(f"{path}: expected one of {choices}, got {value!r}")
    return value


def _bool(doc, path, default=_MISSING):
    value = _lookup(doc, path, default)
    if value is default and default is not _MISSING:
        return value
    if not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    return value


def _int_list(doc, path, default=_MISSING):
    value = _lookup(doc, path, default)
    if value is default and default is not _MISSING:
        return value
    if (not isinstance(value, list) or not value
            or not all(isinstance(v, int) and not isinstance(v, bool) and v > 0
                       for v in value)):
        raise ConfigError(f"{path}: expected a nonempty list of positive "
                          f"integers, got {value!r}")
    return tuple(value)


def load_config_file(path) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None


def parse_config(doc: dict):
    """Build (TrainConfig, data_section, output_dir) from a parsed document."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    k = _number(doc, "priors.k", integer=True, minimum=1)
    d_h = _number(doc, "priors.d_h", integer=True, minimum=0)
    d_z = _number(doc, "priors.d_z", integer=True, minimum=0)
    pi = _lookup(doc, "priors.pi", None)
    if pi is not None:
        if not isinstance(pi, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in pi):
            raise ConfigError(f"priors.pi: expected a list of numbers, got {pi!r}")
        pi = np.asarray(pi, dtype=np.float64)
    try:
        prior = PriorSpec(k=k, d_h=d_h, d_z=d_z, pi=pi)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"priors: {e}") from None

    weights = LossWeights(
        lambda1=_number(doc, "weights.lambda1", 0.1, minimum=0.0),
        lambda2=_number(doc, "weights.lambda2", 0.5, minimum=0.0))

    data_section = _lookup(doc, "data")
    if not isinstance(data_section, dict):
        raise ConfigError("data: expected an object")
    data_mode = data_mode_of(data_section)

    cfg = TrainConfig(
        prior=prior,
        data_mode=data_mode,
        weights=weights,
        enc_hidden=_int_list(doc, "architecture.encoder", (512, 512, 256)),
        dec_hidden=_int_list(doc, "architecture.decoder", (256, 512, 512)),
        critic_hidden=_int_list(doc, "architecture.critic", (100, 100)),
        activation=_string(doc, "architecture.activation", "leaky_relu",
                           choices=("leaky_relu", "relu")),
        critic_dropout=_number(doc, "architecture.critic_dropout", 0.2,
                               minimum=0.0),
        init_std=_number(doc, "architecture.init_std", 0.02),
        lr_enc_dec=_number(doc, "training.lr_enc_dec", 1e-3, minimum=0.0),
        lr_critic=_number(doc, "training.lr_critic", 1e-4, minimum=0.0),
        batch_size=_number(doc, "training.batch_size", 128, integer=True,
                           minimum=2),
        epochs=_number(doc, "training.epochs", integer=True, minimum=1),
        n_critic=_number(doc, "training.n_critic", 1, integer=True, minimum=1),
        clip_c=_number(doc, "training.clip_c", 0.01),
        seed=_number(doc, "training.seed", 0, integer=True, minimum=0),
        ablation_no_cr=_bool(doc, "training.ablation_no_cr", False),
        checkpoint_every=_number(doc, "training.checkpoint_every", 0,
                                 integer=True, minimum=0),
        out_dir=_string(doc, "output.dir", None),
    )
    return cfg, data_section, cfg.out_dir


def data_mode_of(data_section: dict) -> str:
    kind = _string(data_section, "kind",
                   choices=("synth_gmm", "idx", "csv"))
    if kind == "idx":
        return "pixel"
    if kind == "csv":
        return "feature"
    return _string(data_section, "mode", "feature",
                   choices=("pixel", "feature"))


def build_dataset(data_section: dict, default_seed: int = 0) -> Dataset:
    """Construct the dataset a data section describes."""
    kind = _string(data_section, "kind",
                   choices=("synth_gmm", "idx", "csv"))
    limit = _number(data_section, "limit", None, integer=True, minimum=1)
    if kind == "synth_gmm":
        return synth_gmm(
            k=_number(data_section, "k", integer=True, minimum=1),
            dim=_number(data_section, "dim", integer=True, minimum=1),
            n_per_cluster=_number(data_section, "n_per_cluster", integer=True,
                                  minimum=1),
            separation=_number(data_section, "separation", 6.0),
            cluster_std=_number(data_section, "cluster_std", 1.0),
            seed=_number(data_section, "seed", default_seed, integer=True,
                         minimum=0),
            data_mode=_string(data_section, "mode", "feature",
                              choices=("pixel", "feature")))
    if kind == "idx":
        return load_idx(_string(data_section, "images"),
                        labels_path=_string(data_section, "labels", None),
                        limit=limit, name="idx")
    return load_features_csv(_string(data_section, "path"),
                             has_labels=_bool(data_section, "has_labels", False),
                             limit=limit, name="csv")


def load_data_descriptor(path, default_seed: int = 0) -> Dataset:
    """Load a dataset from a JSON descriptor file: either a bare data
    section or a full config containing one."""
    doc = load_config_file(path)
    if isinstance(doc, dict) and "data" in doc and "kind" not in doc:
        doc = doc["data"]
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a dataset descriptor object")
    return build_dataset(doc, default_seed=default_seed)
