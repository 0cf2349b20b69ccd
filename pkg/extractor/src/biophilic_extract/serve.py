"""Long-running embedding provider over stdin/stdout.

One request line ``{"id": ..., "png_b64": ...}`` gets one response line
``{"id": ..., "embedding": [512 floats]}``, in request order. Malformed
requests get a JSON error response and the process stays alive; EOF ends
the loop. Single-threaded by design so ordering is structural.
"""

from __future__ import annotations

import base64
import io
import json
import sys

from PIL import Image


def handle_line(line: str, encoder) -> str:
    req_id = None
    try:
        req = json.loads(line)
        req_id = req.get("id")
        png = base64.b64decode(req["png_b64"], validate=True)
        with Image.open(io.BytesIO(png)) as img:
            vec = encoder.encode([img.convert("RGB")])[0]
        return json.dumps({"id": req_id, "embedding": [float(v) for v in vec]})
    except Exception as exc:  # keep serving whatever happens to one request
        err = {"error": f"{type(exc).__name__}: {exc}"}
        if req_id is not None:
            err["id"] = req_id
        return json.dumps(err)


def serve(encoder, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(handle_line(line, encoder) + "\n")
        stdout.flush()
