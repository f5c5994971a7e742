"""Batch command-line interface.

Subcommands: train, eval, generate, traverse, embed. Exit codes: 0 success,
2 configuration/usage error, 3 numeric abort (non-finite loss). The
environment variable DUAL_AAE_SEED overrides the config seed everywhere a
seed is consumed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from . import trainer
from .data_io import write_features_csv
from .errors import (CheckpointError, ConfigError, DataFormatError,
                     DimensionError, NumericError)
from .evaluation import reject_evaluate
from .networks import decode, embed, encode
from .trainer import _SAMPLE_STREAM

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _env_seed():
    raw = os.environ.get("DUAL_AAE_SEED")
    if raw is None:
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"DUAL_AAE_SEED={raw!r}: expected an integer")
    if seed < 0:
        raise ConfigError(f"DUAL_AAE_SEED={raw!r}: expected >= 0")
    return seed


def cmd_train(args) -> int:
    doc = cfgmod.load_config_file(args.config)
    cfg, data_section, _ = cfgmod.parse_config(doc)
    seed = _env_seed()
    if seed is not None:
        cfg.seed = seed
    dataset = cfgmod.build_dataset(data_section, default_seed=cfg.seed)
    data_echo = dict(data_section)
    if dataset.image_shape is not None:
        data_echo["image_shape"] = list(dataset.image_shape)
    trainer.train(dataset, cfg, data_echo=data_echo)
    if cfg.out_dir:
        print(f"trained {cfg.epochs} epochs; wrote "
              f"{os.path.join(cfg.out_dir, trainer.FINAL_CHECKPOINT_NAME)}")
    return EXIT_OK


def _parse_gammas(raw: str):
    try:
        gammas = [float(g) for g in raw.split(",") if g.strip() != ""]
    except ValueError:
        raise ConfigError(f"--gamma {raw!r}: expected comma-separated numbers")
    for g in gammas:
        if not 0.0 <= g <= 1.0:
            raise ConfigError(f"--gamma: thresholds must be in [0, 1], got {g}")
    if 0.0 not in gammas:
        gammas.append(0.0)
    # ascending thresholds keep rejection rates non-decreasing down the file
    return sorted(set(gammas))


def cmd_eval(args) -> int:
    state, cfg, _ = trainer.load_model(args.checkpoint)
    dataset = cfgmod.load_data_descriptor(args.data, default_seed=cfg.seed)
    if dataset.dim != state.in_dim:
        raise DimensionError(
            f"dataset dimension {dataset.dim} != model input {state.in_dim}")
    probs = trainer.predict_proba(state, dataset.features)
    lines = []
    for gamma in _parse_gammas(args.gamma):
        report = reject_evaluate(probs, dataset.labels, gamma)
        lines.append(report.format_record(gamma))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def _sampling_rng(cfg):
    seed = _env_seed()
    if seed is None:
        seed = cfg.seed
    return np.random.default_rng([seed, _SAMPLE_STREAM])


def _write_pgms(out_path, rows, image_shape):
    """One binary PGM per sample next to the CSV, for pixel-mode models."""
    h, w = image_shape
    stem, _ = os.path.splitext(out_path)
    for i, row in enumerate(rows):
        pixels = np.clip(np.rint(row * 255.0), 0, 255).astype(np.uint8)
        with open(f"{stem}_{i:03d}.pgm", "wb") as f:
            f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            f.write(pixels.reshape(h, w).tobytes())


def _image_shape(ckpt):
    data = ckpt.config_echo.get("data") or {}
    shape = data.get("image_shape")
    return tuple(shape) if shape else None


def cmd_generate(args) -> int:
    state, cfg, ckpt = trainer.load_model(args.checkpoint)
    k = state.prior.k
    if not 0 <= args.cluster < k:
        raise ConfigError(f"--cluster must be in [0, {k}), got {args.cluster}")
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    rng = _sampling_rng(cfg)
    y = np.zeros((args.n, k))
    y[:, args.cluster] = 1.0
    h = rng.standard_normal((args.n, state.prior.d_h))
    z = rng.standard_normal((args.n, state.prior.d_z))
    x = decode(state, y, h, z, mode="eval").data
    write_features_csv(args.out, x)
    if state.data_mode == "pixel":
        shape = _image_shape(ckpt)
        if shape is not None:
            _write_pgms(args.out, x, shape)
    print(f"wrote {args.n} samples from cluster {args.cluster} to {args.out}")
    return EXIT_OK


def cmd_traverse(args) -> int:
    state, cfg, _ = trainer.load_model(args.checkpoint)
    p = state.prior
    if not 0 <= args.style < p.d_h:
        raise ConfigError(
            f"--style must be in [0, {p.d_h}), got {args.style}")
    if args.steps < 1:
        raise ConfigError(f"--steps must be >= 1, got {args.steps}")
    rng = _sampling_rng(cfg)
    h_base = rng.standard_normal(p.d_h)
    z_base = rng.standard_normal(p.d_z)
    values = (np.linspace(args.lo, args.hi, args.steps) if args.steps > 1
              else np.array([args.lo]))
    rows = []
    meta = []
    for cluster in range(p.k):
        for v in values:
            y = np.zeros((1, p.k))
            y[0, cluster] = 1.0
            h = h_base.copy()
            h[args.style] = v
            x = decode(state, y, h.reshape(1, -1), z_base.reshape(1, -1),
                       mode="eval").data[0]
            rows.append(x)
            meta.append((cluster, v))
    features = np.asarray(rows)
    with open(args.out, "w") as f:
        for (cluster, v), row in zip(meta, features):
            cells = [str(cluster), repr(float(v))]
            cells.extend(repr(float(x)) for x in row)
            f.write(",".join(cells) + "\n")
    print(f"wrote {len(rows)} samples ({p.k} clusters x {len(values)} steps) "
          f"to {args.out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    state, cfg, _ = trainer.load_model(args.checkpoint)
    dataset = cfgmod.load_data_descriptor(args.data, default_seed=cfg.seed)
    if dataset.dim != state.in_dim:
        raise DimensionError(
            f"dataset dimension {dataset.dim} != model input {state.in_dim}")
    hidden = embed(state, dataset.features)
    y, _, _ = encode(state, dataset.features, mode="eval")
    preds = y.data.argmax(axis=1)
    maxp = y.data.max(axis=1)
    with open(args.out, "w") as f:
        for i in range(hidden.shape[0]):
            cells = [repr(float(v)) for v in hidden[i]]
            cells.append(str(int(preds[i])))
            cells.append(repr(float(maxp[i])))
            f.write(",".join(cells) + "\n")
    print(f"wrote {hidden.shape[0]} embeddings to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dual-aae",
        description="Train and evaluate dual adversarial auto-encoder "
                    "clustering models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cluster report at rejection thresholds")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True,
                   help="JSON dataset descriptor (a config 'data' section)")
    p.add_argument("--gamma", default="0",
                   help="comma-separated thresholds; 0 is always included")
    p.add_argument("--out", default=None, help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate", help="decode prior samples of one cluster")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cluster", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("traverse", help="sweep one style coordinate")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--style", type=int, required=True)
    p.add_argument("--lo", type=float, default=-2.0)
    p.add_argument("--hi", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_traverse)

    p = sub.add_parser("embed", help="export penultimate-layer embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, CheckpointError, DimensionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
