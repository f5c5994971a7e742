"""End-to-end pixel-mode pipeline through the CLI: IDX ingestion, training
with the Bernoulli reconstruction head, evaluation records, sample
generation with PGM export, style traversal, and embeddings."""

import json
import struct

import numpy as np
import pytest

from dual_aae.cli import main

SIDE = 6  # images are SIDE x SIDE
K = 3


def make_images(n_per_class, rng):
    """Three visually distinct classes: a bright band in the top, middle, or
    bottom third of the image, over a dim noisy background."""
    images = []
    labels = []
    for cls in range(K):
        for _ in range(n_per_class):
            img = rng.uniform(0.0, 0.25, size=(SIDE, SIDE))
            band = slice(cls * 2, cls * 2 + 2)
            img[band, :] = rng.uniform(0.75, 1.0, size=(2, SIDE))
            images.append(img)
            labels.append(cls)
    images = (np.asarray(images) * 255).astype(np.uint8)
    return images, np.asarray(labels, dtype=np.uint8)


@pytest.fixture(scope="module")
def pixel_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("pixel")
    rng = np.random.default_rng(17)
    images, labels = make_images(40, rng)
    img_path = tmp_path / "images-idx3-ubyte"
    lab_path = tmp_path / "labels-idx1-ubyte"
    with open(img_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        f.write(images.tobytes())
    with open(lab_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.tobytes())

    data = {"kind": "idx", "images": str(img_path), "labels": str(lab_path)}
    config = {
        "data": data,
        "priors": {"k": K, "d_h": 2, "d_z": 1},
        "architecture": {"encoder": [32, 32], "decoder": [32, 32],
                         "critic": [16]},
        "training": {"epochs": 12, "batch_size": 20, "seed": 0},
        "output": {"dir": str(tmp_path / "run")},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    data_path = tmp_path / "data.json"
    data_path.write_text(json.dumps(data))
    assert main(["train", "--config", str(cfg_path)]) == 0
    return tmp_path, str(tmp_path / "run" / "model.ckpt"), str(data_path)


def test_training_clusters_banded_images(pixel_run, capsys):
    tmp_path, ckpt, data_path = pixel_run
    assert main(["eval", "--checkpoint", ckpt, "--data", data_path,
                 "--gamma", "0,0.5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    acc = float(lines[0].split(" acc=")[1].split()[0])
    assert acc >= 0.9


def test_generate_writes_pgm_grids(pixel_run, capsys):
    tmp_path, ckpt, _ = pixel_run
    out = tmp_path / "gen.csv"
    assert main(["generate", "--checkpoint", ckpt, "--cluster", "0",
                 "--n", "4", "--out", str(out)]) == 0
    pgms = sorted(tmp_path.glob("gen_*.pgm"))
    assert len(pgms) == 4
    blob = pgms[0].read_bytes()
    header, rest = blob.split(b"\n", 1)
    assert header == b"P5"
    dims, rest = rest.split(b"\n", 1)
    assert dims == f"{SIDE} {SIDE}".encode()
    maxval, pixels = rest.split(b"\n", 1)
    assert maxval == b"255"
    assert len(pixels) == SIDE * SIDE
    # decoded samples stay inside (0, 1) before quantization
    rows = [line.split(",") for line in out.read_text().strip().splitlines()]
    values = np.asarray(rows, dtype=float)
    assert values.min() > 0.0 and values.max() < 1.0


def test_traverse_and_embed_complete(pixel_run, capsys):
    tmp_path, ckpt, data_path = pixel_run
    trav = tmp_path / "trav.csv"
    assert main(["traverse", "--checkpoint", ckpt, "--style", "0",
                 "--steps", "5", "--out", str(trav)]) == 0
    assert len(trav.read_text().strip().splitlines()) == K * 5
    emb = tmp_path / "emb.csv"
    assert main(["embed", "--checkpoint", ckpt, "--data", data_path,
                 "--out", str(emb)]) == 0
    assert len(emb.read_text().strip().splitlines()) == 120
