"""Base64 little-endian float32 payloads and manifest digests."""
import base64
import hashlib
import json

import numpy as np


def pack_f32(array):
    return base64.b64encode(np.asarray(array, dtype="<f4").tobytes()).decode("ascii")


def unpack_f32(text, shape):
    flat = np.frombuffer(base64.b64decode(text), dtype="<f4")
    return flat.reshape(shape).astype(np.float64)


def digest(obj):
    """sha256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
