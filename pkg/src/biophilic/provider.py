"""Client for an external embedding provider speaking newline-delimited JSON.

The provider is any subprocess that answers one request line
``{"id": ..., "png_b64": ...}`` with one response line
``{"id": ..., "embedding": [...]}``, in order. Composed with a decoder
checkpoint this yields a PredictFn over raw images for the explain pipeline.
"""

from __future__ import annotations

import base64
import io
import json
import shlex
import subprocess

import numpy as np
from PIL import Image

from .decoder import DecoderParams
from .errors import FormatError, ValidationError
from .training import predict_probs


def png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


class EmbeddingProvider:
    """Serial line-protocol client; one in-flight request at a time."""

    parallel_safe = False

    def __init__(self, command: str):
        self._proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._counter = 0

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        self._counter += 1
        req_id = f"req-{self._counter}"
        payload = {
            "id": req_id,
            "png_b64": base64.b64encode(png_bytes(image)).decode("ascii"),
        }
        self._proc.stdin.write(json.dumps(payload) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise FormatError("embedding provider closed its output stream")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"provider sent invalid JSON: {line[:80]!r}") from exc
        if "error" in resp:
            raise ValidationError(f"provider error: {resp['error']}")
        if resp.get("id") != req_id:
            raise FormatError(
                f"provider answered out of order: sent {req_id}, got {resp.get('id')!r}"
            )
        vec = np.asarray(resp["embedding"], dtype=np.float32)
        if vec.ndim != 1:
            raise FormatError("provider embedding must be a flat list")
        return vec

    def embed_batch(self, images: np.ndarray) -> np.ndarray:
        return np.stack([self.embed_image(img) for img in images])

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def make_predict_fn(provider: EmbeddingProvider, params: DecoderParams):
    """PredictFn: images -> provider embeddings -> decoder probabilities."""

    def predict(images: np.ndarray) -> np.ndarray:
        x = provider.embed_batch(images)
        return predict_probs(params, x)

    predict.parallel_safe = False  # the provider link is serial
    return predict
