"""Binary checkpoint container: a canonical JSON manifest followed by
concatenated little-endian float32 arrays.

Layout: 4-byte magic "UNCM", uint32-LE manifest length, manifest JSON
(UTF-8, sorted keys), payload. Manifest offsets must cover the payload
exactly, and load -> save round-trips byte-identically.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .attention import ConfigSeed
from .dims import ModelDims
from .dp import PrivacyAccount
from .emails import Vocabs
from .model import SIGMOID, SOFTMAX, Uncm, build_uncm
from .nn import ParamSet
from .passmodel import CharVocab, SeededModel

MAGIC = b"UNCM"
FORMAT_VERSION = "uncm-v1"


class CheckpointError(ValueError):
    pass


def container_bytes(arrays: dict[str, np.ndarray], meta: dict) -> bytes:
    index = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f4")
        raw = a.tobytes()
        index.append(
            {"name": name, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)}
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "meta": meta,
        "arrays": index,
        "payload_nbytes": offset,
    }
    mbytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(mbytes)) + mbytes + b"".join(chunks)


def parse_container(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint container (bad magic)")
    (mlen,) = struct.unpack("<I", blob[4:8])
    manifest = json.loads(blob[8 : 8 + mlen].decode("utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported format version {manifest.get('format_version')!r}"
        )
    payload = blob[8 + mlen :]
    if len(payload) != manifest["payload_nbytes"]:
        raise CheckpointError("payload size mismatch")
    covered = 0
    arrays = {}
    for entry in manifest["arrays"]:
        lo, nbytes = entry["offset"], entry["nbytes"]
        if lo != covered:
            raise CheckpointError("manifest offsets do not cover the payload exactly")
        covered += nbytes
        arrays[entry["name"]] = np.frombuffer(
            payload[lo : lo + nbytes], dtype="<f4"
        ).reshape(entry["shape"]).copy()
    if covered != len(payload):
        raise CheckpointError("manifest offsets do not cover the payload exactly")
    return arrays, manifest["meta"]


def save_container(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    Path(path).write_bytes(container_bytes(arrays, meta))


def load_container(path):
    return parse_container(Path(path).read_bytes())


# -- model containers -----------------------------------------------------


def save_uncm(path, uncm: Uncm) -> None:
    meta = {
        "kind": "uncm",
        "dims": uncm.dims.to_dict(),
        "attention": uncm.attention,
        "clip_norm": uncm.clip_norm,
        "vocabs": uncm.vocabs.to_dict(),
        "char_vocab": uncm.char_vocab.chars,
    }
    save_container(path, uncm.params.arrays(), meta)


def load_uncm(path) -> Uncm:
    arrays, meta = load_container(path)
    if meta.get("kind") != "uncm":
        raise CheckpointError(f"container holds {meta.get('kind')!r}, expected 'uncm'")
    dims = ModelDims.from_dict(meta["dims"])
    vocabs = Vocabs.from_dict(meta["vocabs"])
    char_vocab = CharVocab(meta["char_vocab"])
    uncm = build_uncm(
        dims, vocabs, char_vocab, rng=0,
        private=meta["attention"] == SIGMOID, clip_norm=float(meta["clip_norm"]),
    )
    uncm.params.load_arrays({k: v.astype(np.float64) for k, v in arrays.items()})
    return uncm


def seeded_bundle_bytes(model: SeededModel, privacy: PrivacyAccount | None = None) -> bytes:
    """Ship the password model with precomputed initial states; the
    seed-to-state projection layers are not included."""
    arrays = {
        name: t.data
        for name, t in model.params.values.items()
        if name.startswith("pm.") and not name.startswith("pm.seed_")
    }
    for layer, (h, c) in enumerate(model.states):
        arrays[f"state.h{layer}"] = h
        arrays[f"state.c{layer}"] = c
    meta = {
        "kind": "seeded-bundle",
        "dims": model.dims.to_dict(),
        "char_vocab": model.vocab.chars,
        "seed_id": model.seed_id,
        "privacy": privacy.to_dict() if privacy else None,
    }
    return container_bytes(arrays, meta)


def save_seeded_bundle(path, model: SeededModel, privacy: PrivacyAccount | None = None) -> None:
    Path(path).write_bytes(seeded_bundle_bytes(model, privacy))


def load_seeded_bundle(path) -> SeededModel:
    arrays, meta = load_container(path)
    if meta.get("kind") != "seeded-bundle":
        raise CheckpointError(
            f"container holds {meta.get('kind')!r}, expected 'seeded-bundle'"
        )
    dims = ModelDims.from_dict(meta["dims"])
    vocab = CharVocab(meta["char_vocab"])
    params = ParamSet()
    from . import passmodel  # local import avoids a cycle at module load

    rng = np.random.default_rng(0)
    passmodel.add_password_model(params, rng, dims, vocab, conditional=False)
    params.load_arrays(
        {
            k: v.astype(np.float64)
            for k, v in arrays.items()
            if k.startswith("pm.")
        }
    )
    states = [
        (
            arrays[f"state.h{layer}"].astype(np.float64),
            arrays[f"state.c{layer}"].astype(np.float64),
        )
        for layer in range(dims.lstm_layers)
    ]
    return SeededModel(params, dims, vocab, states, seed_id=meta["seed_id"])


def save_seed(path, seed: ConfigSeed) -> None:
    meta = {
        "kind": "config-seed",
        "seed_id": seed.seed_id,
        "k_used": seed.k_used,
        "rng_seed": seed.rng_seed,
        "skipped_malformed": seed.skipped_malformed,
        "created_at": seed.created_at,
        "dp": seed.dp.to_dict() if seed.dp else None,
    }
    save_container(path, {"psi": seed.psi}, meta)


def load_seed(path) -> ConfigSeed:
    arrays, meta = load_container(path)
    if meta.get("kind") != "config-seed":
        raise CheckpointError(
            f"container holds {meta.get('kind')!r}, expected 'config-seed'"
        )
    return ConfigSeed(
        psi=arrays["psi"].astype(np.float64),
        k_used=int(meta["k_used"]),
        dp=PrivacyAccount.from_dict(meta["dp"]) if meta.get("dp") else None,
        rng_seed=meta.get("rng_seed"),
        skipped_malformed=int(meta.get("skipped_malformed", 0)),
        seed_id=meta["seed_id"],
        created_at=float(meta.get("created_at", 0.0)),
    )
