import textwrap

import numpy as np
import pytest

from biophilic.data import LabelTaxonomy, default_taxonomy

# A scripted stand-in for an external embedding provider: answers the
# newline-delimited JSON protocol with a deterministic 512-float vector
# derived from the PNG payload.
FAKE_PROVIDER = textwrap.dedent(
    """
    import base64, hashlib, json, sys

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            png = base64.b64decode(req["png_b64"])
            digest = hashlib.sha256(png).digest()
            vec = [((b / 255.0) - 0.5) for b in digest] * 16  # 32 * 16 = 512
            resp = {"id": req["id"], "embedding": vec}
        except Exception as exc:
            resp = {"error": str(exc)}
        sys.stdout.write(json.dumps(resp) + "\\n")
        sys.stdout.flush()
    """
)


@pytest.fixture(scope="session")
def taxonomy15() -> LabelTaxonomy:
    return default_taxonomy()


@pytest.fixture
def tiny_taxonomy() -> LabelTaxonomy:
    return LabelTaxonomy(
        labels=("Water", "Humans", "Plants & Trees", "Non-significantly Biophilic"),
        biophilic_set=frozenset({"Water", "Plants & Trees"}),
    )


def random_binary(rng: np.random.Generator, shape):
    return rng.integers(0, 2, size=shape).astype(np.int8)
