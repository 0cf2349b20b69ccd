"""The classification head: 512 -> 256 -> 128 -> L with batch norm,
ReLU, inverted dropout (p=0.2), and a sigmoid output layer.

``forward`` in train mode normalizes with batch statistics, updates the
running statistics (momentum 0.1), and applies inverted dropout so eval
needs no rescaling. ``backward`` returns exact analytic gradients of the
batch objective

    loss = (1/B) * sum over samples of sum over labels of BCE terms,

i.e. binary cross-entropy summed across the label dimension and averaged
over the batch, which makes the output-layer gradient exactly (P - Y) / B.

Checkpoints (BDEC): magic "BDEC", u32 version=1, u32 L, f32 dropout_p,
every tensor in declaration order as float32 little-endian, then a one-byte
flag and an optional Adam-state section.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FormatError, ShapeError, ValidationError
from .numerics import BCE_EPS, sigmoid
from .rng import RngStream, seeded_stream

IN_DIM = 512
HIDDEN1 = 256
HIDDEN2 = 128
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
DROPOUT_P = 0.2

BDEC_MAGIC = b"BDEC"
BDEC_VERSION = 1

# Tensor names in declaration (checkpoint) order.
TENSOR_ORDER = (
    "w1", "b1", "bn1_gamma", "bn1_beta", "bn1_mean", "bn1_var",
    "w2", "b2", "bn2_gamma", "bn2_beta", "bn2_mean", "bn2_var",
    "w3", "b3",
)
LEARNABLE = (
    "w1", "b1", "bn1_gamma", "bn1_beta",
    "w2", "b2", "bn2_gamma", "bn2_beta",
    "w3", "b3",
)


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class DecoderParams:
    w1: np.ndarray
    b1: np.ndarray
    bn1: BatchNorm
    w2: np.ndarray
    b2: np.ndarray
    bn2: BatchNorm
    w3: np.ndarray
    b3: np.ndarray
    dropout_p: float = DROPOUT_P

    @property
    def n_labels(self) -> int:
        return self.w3.shape[1]

    def tensor(self, name: str) -> np.ndarray:
        return _TENSOR_GETTERS[name](self)

    def set_tensor(self, name: str, value: np.ndarray) -> None:
        _TENSOR_SETTERS[name](self, value)

    def named_tensors(self):
        """(name, array) pairs in declaration order, running stats included."""
        return [(name, self.tensor(name)) for name in TENSOR_ORDER]

    def learnable_tensors(self):
        return [(name, self.tensor(name)) for name in LEARNABLE]

    def copy(self) -> "DecoderParams":
        return DecoderParams(
            w1=self.w1.copy(), b1=self.b1.copy(),
            bn1=BatchNorm(self.bn1.gamma.copy(), self.bn1.beta.copy(),
                          self.bn1.running_mean.copy(), self.bn1.running_var.copy()),
            w2=self.w2.copy(), b2=self.b2.copy(),
            bn2=BatchNorm(self.bn2.gamma.copy(), self.bn2.beta.copy(),
                          self.bn2.running_mean.copy(), self.bn2.running_var.copy()),
            w3=self.w3.copy(), b3=self.b3.copy(),
            dropout_p=self.dropout_p,
        )

    def astype(self, dtype) -> "DecoderParams":
        out = self.copy()
        for name in TENSOR_ORDER:
            out.set_tensor(name, out.tensor(name).astype(dtype))
        return out


_TENSOR_GETTERS = {
    "w1": lambda p: p.w1, "b1": lambda p: p.b1,
    "bn1_gamma": lambda p: p.bn1.gamma, "bn1_beta": lambda p: p.bn1.beta,
    "bn1_mean": lambda p: p.bn1.running_mean, "bn1_var": lambda p: p.bn1.running_var,
    "w2": lambda p: p.w2, "b2": lambda p: p.b2,
    "bn2_gamma": lambda p: p.bn2.gamma, "bn2_beta": lambda p: p.bn2.beta,
    "bn2_mean": lambda p: p.bn2.running_mean, "bn2_var": lambda p: p.bn2.running_var,
    "w3": lambda p: p.w3, "b3": lambda p: p.b3,
}


def _setter(name):
    def set_(p, v):
        if name.startswith("bn"):
            bn = p.bn1 if name[2] == "1" else p.bn2
            attr = {"gamma": "gamma", "beta": "beta",
                    "mean": "running_mean", "var": "running_var"}[name.split("_")[1]]
            setattr(bn, attr, v)
        else:
            setattr(p, name, v)
    return set_


_TENSOR_SETTERS = {name: _setter(name) for name in TENSOR_ORDER}


def _kaiming_uniform(rng: RngStream, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    draws = rng.uniform((fan_in, fan_out))
    return (2.0 * draws - 1.0) * bound


def init_params(
    taxonomy_len: int,
    seed: int,
    dropout_p: float = DROPOUT_P,
    dtype=np.float64,
) -> DecoderParams:
    """Fresh parameters: Kaiming-uniform weights, zero biases, identity BN."""
    if taxonomy_len < 2:
        raise ValidationError("taxonomy must have at least two labels")
    if not 0.0 <= dropout_p < 1.0:
        raise ValidationError("dropout_p must be in [0, 1)")
    rng = seeded_stream(seed)

    def bn(width):
        return BatchNorm(
            gamma=np.ones(width, dtype=dtype),
            beta=np.zeros(width, dtype=dtype),
            running_mean=np.zeros(width, dtype=dtype),
            running_var=np.ones(width, dtype=dtype),
        )

    return DecoderParams(
        w1=_kaiming_uniform(rng, IN_DIM, HIDDEN1).astype(dtype),
        b1=np.zeros(HIDDEN1, dtype=dtype),
        bn1=bn(HIDDEN1),
        w2=_kaiming_uniform(rng, HIDDEN1, HIDDEN2).astype(dtype),
        b2=np.zeros(HIDDEN2, dtype=dtype),
        bn2=bn(HIDDEN2),
        w3=_kaiming_uniform(rng, HIDDEN2, taxonomy_len).astype(dtype),
        b3=np.zeros(taxonomy_len, dtype=dtype),
        dropout_p=float(dropout_p),
    )


@dataclass
class ForwardCache:
    """Intermediate activations a train-mode forward saves for backward."""

    x: np.ndarray
    xhat1: np.ndarray
    var1: np.ndarray
    t1: np.ndarray
    keep1: np.ndarray | None
    a1: np.ndarray
    xhat2: np.ndarray
    var2: np.ndarray
    t2: np.ndarray
    keep2: np.ndarray | None
    a2: np.ndarray


def _bn_forward_train(z, bn: BatchNorm):
    b = z.shape[0]
    mu = z.mean(axis=0)
    var = z.var(axis=0)  # biased, used for normalization
    xhat = (z - mu) / np.sqrt(var + BN_EPS)
    out = bn.gamma * xhat + bn.beta
    # Running stats track the unbiased variance, as frameworks do.
    var_unbiased = var * (b / (b - 1.0))
    bn.running_mean = ((1.0 - BN_MOMENTUM) * bn.running_mean + BN_MOMENTUM * mu).astype(z.dtype)
    bn.running_var = ((1.0 - BN_MOMENTUM) * bn.running_var + BN_MOMENTUM * var_unbiased).astype(z.dtype)
    return out, xhat, var


def _bn_forward_eval(z, bn: BatchNorm):
    xhat = (z - bn.running_mean) / np.sqrt(bn.running_var + BN_EPS)
    return bn.gamma * xhat + bn.beta


def forward(
    params: DecoderParams,
    batch: np.ndarray,
    mode: str = "eval",
    rng: RngStream | None = None,
):
    """Run the network; returns (probs, cache). ``cache`` is None in eval mode.

    Train mode needs a batch of at least two rows (batch statistics) and an
    RngStream when dropout is active.
    """
    if mode not in ("train", "eval"):
        raise ValidationError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(batch)
    if x.ndim != 2 or x.shape[1] != params.w1.shape[0]:
        raise ShapeError(f"batch must be B x {params.w1.shape[0]}, got {x.shape}")
    if x.shape[0] < 1:
        raise ShapeError("batch is empty")
    x = x.astype(params.w1.dtype, copy=False)
    train = mode == "train"
    p_drop = params.dropout_p
    if train:
        if x.shape[0] < 2:
            raise ContractError("train-mode forward needs a batch of at least 2 rows")
        if p_drop > 0.0 and rng is None:
            raise ContractError("train-mode forward with dropout needs an RngStream")

    z1 = x @ params.w1 + params.b1
    if train:
        t1, xhat1, var1 = _bn_forward_train(z1, params.bn1)
    else:
        t1 = _bn_forward_eval(z1, params.bn1)
    r1 = np.maximum(t1, 0.0)
    keep1 = None
    if train and p_drop > 0.0:
        keep1 = rng.bernoulli(1.0 - p_drop, r1.shape).astype(r1.dtype)
        a1 = r1 * keep1 / (1.0 - p_drop)
    else:
        a1 = r1

    z2 = a1 @ params.w2 + params.b2
    if train:
        t2, xhat2, var2 = _bn_forward_train(z2, params.bn2)
    else:
        t2 = _bn_forward_eval(z2, params.bn2)
    r2 = np.maximum(t2, 0.0)
    keep2 = None
    if train and p_drop > 0.0:
        keep2 = rng.bernoulli(1.0 - p_drop, r2.shape).astype(r2.dtype)
        a2 = r2 * keep2 / (1.0 - p_drop)
    else:
        a2 = r2

    z3 = a2 @ params.w3 + params.b3
    probs = sigmoid(z3).astype(x.dtype, copy=False)

    if not train:
        return probs, None
    cache = ForwardCache(
        x=x, xhat1=xhat1, var1=var1, t1=t1, keep1=keep1, a1=a1,
        xhat2=xhat2, var2=var2, t2=t2, keep2=keep2, a2=a2,
    )
    return probs, cache


def batch_bce(probs: np.ndarray, targets: np.ndarray, eps: float = BCE_EPS) -> float:
    """The training objective: BCE summed over labels, averaged over the batch."""
    p = np.clip(np.asarray(probs, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeError(f"shape mismatch: probs {p.shape} vs targets {y.shape}")
    per_sample = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum(axis=1)
    return float(per_sample.mean())


def _bn_backward(dt, xhat, var, gamma):
    # Full backward through batch mean and variance:
    # dz = inv/B * (B*dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
    b = dt.shape[0]
    dgamma = (dt * xhat).sum(axis=0)
    dbeta = dt.sum(axis=0)
    dxhat = dt * gamma
    inv = 1.0 / np.sqrt(var + BN_EPS)
    dz = (inv / b) * (b * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dz, dgamma, dbeta


def backward(
    params: DecoderParams,
    cache: ForwardCache,
    probs: np.ndarray,
    targets: np.ndarray,
) -> dict[str, np.ndarray]:
    """Exact gradients of :func:`batch_bce` for every learnable tensor."""
    if cache is None:
        raise ContractError("backward needs the cache from a train-mode forward")
    probs = np.asarray(probs)
    targets = np.asarray(targets, dtype=probs.dtype)
    if probs.shape != targets.shape:
        raise ShapeError(f"shape mismatch: probs {probs.shape} vs targets {targets.shape}")
    if probs.shape != (cache.x.shape[0], params.w3.shape[1]):
        raise ShapeError("probs shape does not match the cached forward")
    b = probs.shape[0]
    p_drop = params.dropout_p

    # Sigmoid + BCE collapse to (P - Y) / B at the logits.
    dz3 = (probs - targets) / b
    g_w3 = cache.a2.T @ dz3
    g_b3 = dz3.sum(axis=0)
    da2 = dz3 @ params.w3.T

    if cache.keep2 is not None:
        da2 = da2 * cache.keep2 / (1.0 - p_drop)
    dt2 = da2 * (cache.t2 > 0)
    dz2, g_g2, g_be2 = _bn_backward(dt2, cache.xhat2, cache.var2, params.bn2.gamma)
    g_w2 = cache.a1.T @ dz2
    g_b2 = dz2.sum(axis=0)
    da1 = dz2 @ params.w2.T

    if cache.keep1 is not None:
        da1 = da1 * cache.keep1 / (1.0 - p_drop)
    dt1 = da1 * (cache.t1 > 0)
    dz1, g_g1, g_be1 = _bn_backward(dt1, cache.xhat1, cache.var1, params.bn1.gamma)
    g_w1 = cache.x.T @ dz1
    g_b1 = dz1.sum(axis=0)

    return {
        "w1": g_w1, "b1": g_b1, "bn1_gamma": g_g1, "bn1_beta": g_be1,
        "w2": g_w2, "b2": g_b2, "bn2_gamma": g_g2, "bn2_beta": g_be2,
        "w3": g_w3, "b3": g_b3,
    }


def _expected_shapes(n_labels: int) -> dict[str, tuple]:
    return {
        "w1": (IN_DIM, HIDDEN1), "b1": (HIDDEN1,),
        "bn1_gamma": (HIDDEN1,), "bn1_beta": (HIDDEN1,),
        "bn1_mean": (HIDDEN1,), "bn1_var": (HIDDEN1,),
        "w2": (HIDDEN1, HIDDEN2), "b2": (HIDDEN2,),
        "bn2_gamma": (HIDDEN2,), "bn2_beta": (HIDDEN2,),
        "bn2_mean": (HIDDEN2,), "bn2_var": (HIDDEN2,),
        "w3": (HIDDEN2, n_labels), "b3": (n_labels,),
    }


def save_checkpoint(params: DecoderParams, path, adam_state=None) -> None:
    """Serialize params (and optionally Adam state) as float32 little-endian."""
    parts = [BDEC_MAGIC, struct.pack("<II", BDEC_VERSION, params.n_labels),
             struct.pack("<f", params.dropout_p)]
    for _, tensor in params.named_tensors():
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    if adam_state is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<Qddd", adam_state.t, adam_state.beta1,
                                 adam_state.beta2, adam_state.eps))
        for name in LEARNABLE:
            parts.append(np.ascontiguousarray(adam_state.m[name], dtype="<f4").tobytes())
        for name in LEARNABLE:
            parts.append(np.ascontiguousarray(adam_state.v[name], dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path):
    """Read a BDEC file; returns (params, adam_state or None), float32 tensors."""
    from .training import AdamState  # local import to avoid a cycle

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != BDEC_MAGIC:
        raise FormatError("not a BDEC checkpoint (bad magic or truncated header)")
    version, n_labels = struct.unpack_from("<II", blob, 4)
    if version != BDEC_VERSION:
        raise FormatError(f"unsupported BDEC version {version}")
    (dropout_p,) = struct.unpack_from("<f", blob, 12)
    off = 16
    shapes = _expected_shapes(n_labels)

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        nbytes = 4 * count
        if off + nbytes > len(blob):
            raise FormatError("checkpoint truncated inside a tensor")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).copy()
        off += nbytes
        return arr.reshape(shape)

    tensors = {name: take(shapes[name]) for name in TENSOR_ORDER}
    params = DecoderParams(
        w1=tensors["w1"], b1=tensors["b1"],
        bn1=BatchNorm(tensors["bn1_gamma"], tensors["bn1_beta"],
                      tensors["bn1_mean"], tensors["bn1_var"]),
        w2=tensors["w2"], b2=tensors["b2"],
        bn2=BatchNorm(tensors["bn2_gamma"], tensors["bn2_beta"],
                      tensors["bn2_mean"], tensors["bn2_var"]),
        w3=tensors["w3"], b3=tensors["b3"],
        dropout_p=float(dropout_p),
    )
    if off + 1 > len(blob):
        raise FormatError("checkpoint truncated before optimizer flag")
    (has_opt,) = struct.unpack_from("<B", blob, off)
    off += 1
    if not has_opt:
        if off != len(blob):
            raise FormatError("trailing bytes after checkpoint payload")
        return params, None
    t, beta1, beta2, eps = struct.unpack_from("<Qddd", blob, off)
    off += 8 + 24
    m = {name: take(shapes[name]) for name in LEARNABLE}
    v = {name: take(shapes[name]) for name in LEARNABLE}
    if off != len(blob):
        raise FormatError("trailing bytes after optimizer state")
    return params, AdamState(m=m, v=v, t=int(t), beta1=beta1, beta2=beta2, eps=eps)
