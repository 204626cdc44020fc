"""Model hyperparameters, the named-parameter store, and the weights file.

The weights file is one JSON header line (format version, hyperparameters,
shape manifest, parameter count, content checksum) followed by the raw
little-endian float32 parameter data in manifest order. Loading verifies
both the count and the checksum, so a truncated or bit-flipped file never
parses silently.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..errors import ConfigError, FormatError

WEIGHTS_FORMAT = "gw1"


@dataclass(frozen=True)
class Hyperparams:
    steps: int = 32        # grid length T
    voices: int = 9        # drum voices V
    latent: int = 16       # latent size Z
    token_dim: int = 32
    layers: int = 2
    heads: int = 2
    ff_dim: int = 64

    def __post_init__(self):
        if self.token_dim % self.heads != 0:
            raise ConfigError("token_dim must divide evenly into heads")


#: Small configuration for finite-difference gradient verification.
TINY_HPARAMS = Hyperparams(steps=4, voices=2, latent=4, token_dim=8,
                           layers=1, heads=2, ff_dim=16)


class ParamStore:
    """Named float64 parameter arrays with matching gradient slots.

    Insertion order is the manifest order; serialization flattens every
    array in that order.
    """

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise ConfigError(f"duplicate parameter {name!r}")
        self.params[name] = np.asarray(value, dtype=np.float64)
        self.grads[name] = np.zeros_like(self.params[name])
        return self.params[name]

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def manifest(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return [(name, tuple(arr.shape)) for name, arr in self.params.items()]

    @property
    def count(self) -> int:
        return sum(arr.size for arr in self.params.values())

    def flatten(self, dtype=np.float32) -> np.ndarray:
        return np.concatenate([arr.ravel() for arr in self.params.values()]).astype(dtype)

    def load_flat(self, flat: np.ndarray) -> None:
        if flat.size != self.count:
            raise ConfigError(f"expected {self.count} parameters, got {flat.size}")
        pos = 0
        for name, arr in self.params.items():
            n = arr.size
            arr[...] = flat[pos:pos + n].astype(np.float64).reshape(arr.shape)
            pos += n


@dataclass
class ModelWeights:
    """A hyperparameter set plus its parameter store, as one versioned unit."""

    hyperparams: Hyperparams
    store: ParamStore

    def checksum(self) -> str:
        return "sha256:" + hashlib.sha256(self.store.flatten().tobytes()).hexdigest()


def save_weights(weights: ModelWeights, path: Union[str, Path]) -> None:
    flat = weights.store.flatten()
    raw = flat.astype("<f4").tobytes()
    header = {
        "format": WEIGHTS_FORMAT,
        "hyperparams": asdict(weights.hyperparams),
        "manifest": [[name, list(shape)] for name, shape in weights.store.manifest()],
        "param_count": int(flat.size),
        "checksum": "sha256:" + hashlib.sha256(raw).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode())
        fh.write(b"\n")
        fh.write(raw)


def load_weights(path: Union[str, Path], build) -> ModelWeights:
    """Read and verify a weights file.

    ``build`` is a callable (hyperparams) -> ModelWeights providing the
    architecture; its manifest must match the file's.
    """
    with open(path, "rb") as fh:
        header_line = fh.readline()
        raw = fh.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"weights header is not valid JSON: {exc}") from None
    if header.get("format") != WEIGHTS_FORMAT:
        raise FormatError(f"unsupported weights format {header.get('format')!r}")
    digest = "sha256:" + hashlib.sha256(raw).hexdigest()
    if digest != header["checksum"]:
        raise FormatError("weights checksum mismatch (file corrupt?)")
    flat = np.frombuffer(raw, dtype="<f4")
    if flat.size != header["param_count"]:
        raise FormatError(f"expected {header['param_count']} parameters, found {flat.size}")
    weights = build(Hyperparams(**header["hyperparams"]))
    file_manifest = [(name, tuple(shape)) for name, shape in header["manifest"]]
    if file_manifest != weights.store.manifest():
        raise FormatError("weights manifest does not match this architecture")
    weights.store.load_flat(flat)
    return weights
