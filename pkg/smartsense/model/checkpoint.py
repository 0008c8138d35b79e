"""Binary checkpoint codec.

Layout:
    b"SMSN" | uint64 little-endian header length | UTF-8 JSON header | blobs

The header holds format_version, model_config, vocabulary, dtype and a tensor
directory [{name, shape, dtype, offset, nbytes}]; offsets are relative to
the first byte after the header. Blobs are little-endian, row-major and
written in directory order.
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from smartsense.common import DataError, UsageError
from smartsense.config import ModelConfig
from smartsense.constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC
from smartsense.data.vocab import Vocabulary
from smartsense.model.smartsense import SmartSenseModel

logger = logging.getLogger(__name__)

STORAGE_DTYPES = {"float64": np.dtype("<f8"), "float32": np.dtype("<f4")}
_LENGTH = struct.Struct("<Q")


@dataclass
class Checkpoint:
    model: SmartSenseModel
    vocabulary: Vocabulary | None
    metadata: dict


def save_checkpoint(
    path: str | Path,
    model: SmartSenseModel,
    vocabulary: Vocabulary | None = None,
    *,
    dtype: str = "float64",
    metadata: dict | None = None,
) -> Path:
    """Write model parameters, config and vocabulary to one file.

    Args:
        dtype: Storage precision, "float64" (value-exact) or "float32".
        metadata: Extra JSON-serializable fields (epoch, val score, ...).
    """
    if dtype not in STORAGE_DTYPES:
        raise UsageError(f"Unsupported checkpoint dtype '{dtype}'")
    storage = STORAGE_DTYPES[dtype]

    directory = []
    blobs = []
    offset = 0
    for name, tensor in model.state_dict().items():
        blob = tensor.detach().cpu().numpy().astype(storage).tobytes(order="C")
        directory.append(
            {
                "name": name,
                "shape": list(tensor.shape),
                "dtype": dtype,
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)

    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "vocabulary": vocabulary.to_dict() if vocabulary is not None else None,
        "dtype": dtype,
        "metadata": metadata or {},
        "tensors": directory,
    }
    encoded = json.dumps(header).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_LENGTH.pack(len(encoded)))
        f.write(encoded)
        for blob in blobs:
            f.write(blob)
    logger.debug("Saved checkpoint %s (%d tensors, %s)", path, len(directory), dtype)
    return path


def read_header(path: str | Path) -> tuple[dict, bytes]:
    """Return the parsed JSON header and the raw blob section."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as e:
        raise DataError(f"Checkpoint not found: {path}") from e
    prefix = len(CHECKPOINT_MAGIC) + _LENGTH.size
    if len(raw) < prefix or raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise DataError(f"{path} is not a SmartSense checkpoint")
    (header_length,) = _LENGTH.unpack_from(raw, len(CHECKPOINT_MAGIC))
    try:
        header = json.loads(raw[prefix : prefix + header_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"Corrupt checkpoint header in {path}: {e}") from e
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise DataError(
            f"Unsupported checkpoint format {header.get('format_version')!r} in {path}"
        )
    return header, raw[prefix + header_length :]


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Rebuild a float64 model (in eval mode) from a checkpoint file."""
    header, blobs = read_header(path)
    config = ModelConfig.from_dict(header["model_config"])
    model = SmartSenseModel(config, seed=None)

    state = {}
    for entry in header["tensors"]:
        storage = STORAGE_DTYPES.get(entry["dtype"])
        if storage is None:
            raise DataError(f"Unknown tensor dtype {entry['dtype']!r} in {path}")
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(blobs):
            raise DataError(f"Checkpoint {path} is truncated at tensor {entry['name']}")
        values = np.frombuffer(blobs, dtype=storage, count=nbytes // storage.itemsize, offset=start)
        state[entry["name"]] = torch.from_numpy(values.reshape(entry["shape"]).copy())
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise DataError(f"Checkpoint {path} does not match its model config: {e}") from e
    model.eval()

    vocabulary = None
    if header.get("vocabulary") is not None:
        vocabulary = Vocabulary.from_dict(header["vocabulary"])
    logger.debug("Loaded checkpoint %s", path)
    return Checkpoint(model=model, vocabulary=vocabulary, metadata=header.get("metadata", {}))
