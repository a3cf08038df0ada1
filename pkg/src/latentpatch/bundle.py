"""Model serialization: manifest JSON plus a checksummed float32 blob.

File layout, all little-endian:

    magic "LPBUNDLE" (8 bytes)
    manifest length (uint32)
    manifest JSON (UTF-8, sorted keys)
    weight blob (float32 arrays concatenated in manifest order)
    SHA-256 of every preceding byte (32 bytes)

The manifest also records the blob's own SHA-256 and byte length, so a
flipped byte anywhere in the file is caught either by the trailing digest
or by the blob digest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import DetectorModel, GeneratorModel

MAGIC = b"LPBUNDLE"
FORMAT_VERSION = 1


class BundleError(Exception):
    """Base class for bundle file problems."""


class BundleFormatError(BundleError):
    pass


class BundleTruncatedError(BundleError):
    pass


class BundleChecksumError(BundleError):
    pass


class BundleVersionError(BundleError):
    pass


@dataclass
class ModelBundle:
    """Parsed bundle: manifest dict plus named float32 weight arrays."""

    manifest: dict
    weights: dict

    @property
    def kind(self) -> str:
        return self.manifest["kind"]


def bundle_from_model(model) -> ModelBundle:
    weights = {}
    entries = []
    for name, tensor in model.named_weights():
        arr = np.ascontiguousarray(tensor.data, dtype=np.float32)
        weights[name] = arr
        entries.append({"name": name, "shape": list(arr.shape)})
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "arch": model.arch,
        "class_names": list(getattr(model, "class_names", ())),
        "weights": entries,
    }
    return ModelBundle(manifest=manifest, weights=weights)


def bundle_bytes(bundle: ModelBundle) -> bytes:
    blob = b"".join(
        bundle.weights[e["name"]].tobytes()
        for e in bundle.manifest["weights"]
    )
    manifest = dict(bundle.manifest)
    manifest["blob_bytes"] = len(blob)
    manifest["blob_sha256"] = hashlib.sha256(blob).hexdigest()
    mbytes = json.dumps(manifest, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    head = MAGIC + np.uint32(len(mbytes)).tobytes() + mbytes + blob
    return head + hashlib.sha256(head).digest()


def save_bundle(model_or_bundle, path) -> ModelBundle:
    """Write a model (or an already parsed bundle) to ``path``."""
    if isinstance(model_or_bundle, ModelBundle):
        bundle = model_or_bundle
    else:
        bundle = bundle_from_model(model_or_bundle)
    Path(path).write_bytes(bundle_bytes(bundle))
    return bundle


def load_bundle(path) -> ModelBundle:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4:
        raise BundleTruncatedError(f"{path}: file shorter than header")
    if raw[: len(MAGIC)] != MAGIC:
        raise BundleFormatError(f"{path}: bad magic bytes")
    mlen = int(np.frombuffer(raw, dtype="<u4", count=1,
                             offset=len(MAGIC))[0])
    body_end = len(MAGIC) + 4 + mlen
    if len(raw) < body_end + 32:
        raise BundleTruncatedError(f"{path}: manifest extends past end of file")
    try:
        manifest = json.loads(raw[len(MAGIC) + 4: body_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        # A corrupted manifest byte may break JSON before the digest check
        # runs; report it as corruption, not as a malformed file.
        if hashlib.sha256(raw[:-32]).digest() != raw[-32:]:
            raise BundleChecksumError(f"{path}: file digest mismatch") from e
        raise BundleFormatError(f"{path}: unreadable manifest: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleVersionError(
            f"{path}: unsupported format_version {version!r}; "
            f"this build reads version {FORMAT_VERSION}"
        )
    blob_len = int(manifest["blob_bytes"])
    if len(raw) != body_end + blob_len + 32:
        raise BundleTruncatedError(
            f"{path}: expected {body_end + blob_len + 32} bytes, "
            f"found {len(raw)}"
        )
    if hashlib.sha256(raw[:-32]).digest() != raw[-32:]:
        raise BundleChecksumError(f"{path}: file digest mismatch")
    blob = raw[body_end: body_end + blob_len]
    if hashlib.sha256(blob).hexdigest() != manifest["blob_sha256"]:
        raise BundleChecksumError(f"{path}: weight blob digest mismatch")

    weights = {}
    offset = 0
    for entry in manifest["weights"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count,
                            offset=offset).reshape(shape)
        arr.setflags(write=False)
        weights[entry["name"]] = arr
        offset += count * 4
    if offset != blob_len:
        raise BundleFormatError(
            f"{path}: weight shapes cover {offset} bytes, blob has {blob_len}"
        )
    return ModelBundle(manifest=manifest, weights=weights)


def model_from_bundle(bundle: ModelBundle):
    """Rebuild a frozen model from a parsed bundle."""
    kind = bundle.manifest.get("kind")
    if kind == "generator":
        model = GeneratorModel(bundle.manifest["arch"])
    elif kind == "detector":
        model = DetectorModel(bundle.manifest["arch"])
    else:
        raise BundleFormatError(f"unknown model kind {kind!r}")
    for name, tensor in model.named_weights():
        if name not in bundle.weights:
            raise BundleFormatError(f"bundle is missing weight {name!r}")
        arr = bundle.weights[name].astype(np.float64)
        if arr.shape != tensor.data.shape:
            raise BundleFormatError(
                f"weight {name!r} has shape {arr.shape}, model expects "
                f"{tensor.data.shape}"
            )
        tensor.data = arr
    model.freeze()
    return model


def load_model(path):
    return model_from_bundle(load_bundle(path))
