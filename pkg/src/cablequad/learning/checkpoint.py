"""Binary checkpoint: magic, length-prefixed JSON manifest, little-endian float64 payload.

The payload holds the trainable parameters followed by the observation
normalization buffers, at the offsets listed in the manifest.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .network import NetworkSpec, PolicyParams

MAGIC = b"RVFLY1"


def to_bytes(params: PolicyParams, extra: dict | None = None) -> bytes:
    manifest = {
        "spec": params.spec.to_dict(),
        "layers": [[name, off, list(shape)] for name, (off, shape) in params.manifest.items()],
        "size": params.size,
        "buffers": [["obs_mean", params.size, [params.spec.obs_dim]],
                    ["obs_std", params.size + params.spec.obs_dim, [params.spec.obs_dim]]],
        "extra": extra or {},
    }
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.concatenate([params.flat, params.obs_mean, params.obs_std]).astype("<f8")
    return MAGIC + struct.pack("<I", len(text)) + text + payload.tobytes()


def from_bytes(data: bytes) -> tuple[PolicyParams, dict]:
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError("not a policy checkpoint (bad magic)")
    pos = len(MAGIC)
    (n,) = struct.unpack("<I", data[pos: pos + 4])
    pos += 4
    manifest = json.loads(data[pos: pos + n].decode("utf-8"))
    pos += n
    payload = np.frombuffer(data[pos:], dtype="<f8").astype(np.float64)
    spec = NetworkSpec.from_dict(manifest["spec"])
    n, d = manifest["size"], spec.obs_dim
    if payload.size != n + 2 * d:
        raise ValueError("checkpoint payload length does not match its manifest")
    params = PolicyParams(spec, payload[:n].copy(), payload[n: n + d].copy(), payload[n + d:].copy())
    layers = {name: (off, tuple(shape)) for name, off, shape in manifest["layers"]}
    if layers != params.manifest:
        raise ValueError("checkpoint manifest does not match the network layout")
    return params, manifest.get("extra", {})


def save(path, params: PolicyParams, extra: dict | None = None) -> None:
    Path(path).write_bytes(to_bytes(params, extra))


def load(path) -> tuple[PolicyParams, dict]:
    return from_bytes(Path(path).read_bytes())
