"""Trainable classification head: pooling, grouped bilinear pair embedding, logits.

The head maps one entity pair to a pair embedding and a logit vector:

    h_head = logsumexp-pool of head mention embeddings
    h_tail = logsumexp-pool of tail mention embeddings
    z_h = tanh(W_h h_head + W_c1 context)
    z_t = tanh(W_t h_tail + W_c2 context)
    x   = concat over groups p of (z_h^p outer z_t^p), flattened row-major
    f   = W_o x + b_o

``x`` (raw) feeds the logits; its L2-normalized copy ``x_unit`` feeds the
contrastive losses. The backward pass is closed-form reverse mode over the
same graph, including the normalization Jacobian (I - uu^T)/||x|| and the
softmax distribution of the pooled gradient over mentions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import PairExample
from .errors import ConfigError, ContractError, DataFormatError, ShapeError

__all__ = [
    "HeadParams",
    "PairForward",
    "logsumexp_pool",
    "head_forward",
    "head_backward",
    "init_head_params",
    "zero_gradients",
    "save_checkpoint",
    "load_checkpoint",
]

logger = logging.getLogger(__name__)

_PARAM_NAMES = ("W_h", "W_t", "W_c1", "W_c2", "W_o", "b_o")


@dataclass(frozen=True, eq=False)
class HeadParams:
    """Learnable parameters of the head.

    W_h, W_t, W_c1, W_c2 are (d1, d); W_o is (num_logits, d_x) with
    d_x = d1^2 / group_count; b_o is (num_logits,).
    """

    W_h: np.ndarray
    W_t: np.ndarray
    W_c1: np.ndarray
    W_c2: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray
    group_count: int

    def __post_init__(self):
        d1, d = self.W_h.shape
        if d1 % self.group_count != 0:
            raise ConfigError(
                f"hidden dim {d1} not divisible by group count {self.group_count}"
            )
        if (d1 * d1) % self.group_count != 0:
            raise ConfigError("d1^2 must be divisible by the group count")
        for name in ("W_t", "W_c1", "W_c2"):
            if getattr(self, name).shape != (d1, d):
                raise ShapeError(f"{name} shape {getattr(self, name).shape} != ({d1}, {d})")
        if self.W_o.shape != (self.b_o.shape[0], self.pair_dim):
            raise ShapeError(
                f"W_o shape {self.W_o.shape} != ({self.b_o.shape[0]}, {self.pair_dim})"
            )
        for name in _PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigError(f"{name} contains non-finite values")

    @property
    def input_dim(self) -> int:
        return self.W_h.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_h.shape[0]

    @property
    def pair_dim(self) -> int:
        d1 = self.W_h.shape[0]
        return (d1 * d1) // self.group_count

    @property
    def num_logits(self) -> int:
        return self.b_o.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _PARAM_NAMES}

    def copy(self) -> "HeadParams":
        return HeadParams(
            *(getattr(self, name).copy() for name in _PARAM_NAMES), self.group_count
        )


@dataclass(eq=False)
class PairForward:
    """Forward-pass outputs plus the cache needed for the backward pass."""

    x: np.ndarray
    x_unit: np.ndarray
    f: np.ndarray
    cache: dict | None = field(default=None, repr=False)


def logsumexp_pool(mention_embeddings) -> np.ndarray:
    """Componentwise log-sum-exp over a nonempty stack of same-length vectors."""
    if len(mention_embeddings) == 0:
        raise ContractError("logsumexp_pool: empty mention sequence")
    try:
        mat = np.asarray(mention_embeddings, dtype=np.float64)
    except ValueError as exc:
        raise ShapeError(f"logsumexp_pool: ragged mention stack: {exc}") from exc
    if mat.ndim != 2:
        raise ShapeError("logsumexp_pool: mentions must share one dimension")
    shift = np.max(mat, axis=0)
    return shift + np.log(np.sum(np.exp(mat - shift), axis=0))


def _pool_backward(mat: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Distribute the pooled gradient over mentions via componentwise softmax."""
    shift = np.max(mat, axis=0)
    w = np.exp(mat - shift)
    w /= np.sum(w, axis=0)
    return w * grad_out


def head_forward(
    example: PairExample, params: HeadParams, keep_cache: bool = True
) -> PairForward:
    """Compute the pair embedding and logits for one example."""
    d = params.input_dim
    if example.context.shape != (d,):
        raise ShapeError(
            f"context shape {example.context.shape} incompatible with head input dim {d}"
        )
    head_mat = np.stack([m.embedding for m in example.head_mentions]).astype(np.float64)
    tail_mat = np.stack([m.embedding for m in example.tail_mentions]).astype(np.float64)
    if head_mat.shape[1] != d or tail_mat.shape[1] != d:
        raise ShapeError("mention embedding dim incompatible with head input dim")

    h_head = logsumexp_pool(head_mat)
    h_tail = logsumexp_pool(tail_mat)
    c = example.context.astype(np.float64)

    z_h = np.tanh(params.W_h @ h_head + params.W_c1 @ c)
    z_t = np.tanh(params.W_t @ h_tail + params.W_c2 @ c)

    P = params.group_count
    g = params.hidden_dim // P
    # per-group outer products, flattened row-major and concatenated
    x = np.einsum("pi,pj->pij", z_h.reshape(P, g), z_t.reshape(P, g)).reshape(-1)

    norm = float(np.linalg.norm(x))
    if norm > 0.0:
        x_unit = x / norm
    else:
        logger.debug("zero pair embedding; unit vector set to zero")
        x_unit = np.zeros_like(x)

    f = params.W_o @ x + params.b_o

    cache = None
    if keep_cache:
        cache = {
            "head_mat": head_mat,
            "tail_mat": tail_mat,
            "h_head": h_head,
            "h_tail": h_tail,
            "context": c,
            "z_h": z_h,
            "z_t": z_t,
            "norm": norm,
        }
    return PairForward(x=x, x_unit=x_unit, f=f, cache=cache)


def zero_gradients(params: HeadParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.tensors().items()}


def head_backward(
    forward: PairForward,
    grad_x_unit: np.ndarray,
    grad_f: np.ndarray,
    params: HeadParams,
    grads: dict[str, np.ndarray] | None = None,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Reverse-mode pass for one example.

    ``grad_x_unit`` is the loss gradient w.r.t. the normalized pair
    embedding, ``grad_f`` w.r.t. the logits. Parameter gradients are
    accumulated into ``grads`` (created zeroed when omitted). The second
    return value holds this example's input gradients under keys
    ``head_mentions``, ``tail_mentions``, ``context``.
    """
    if forward.cache is None:
        raise ContractError("head_backward: forward pass was run without cache")
    cache = forward.cache
    if grads is None:
        grads = zero_gradients(params)

    x = forward.x
    grads["W_o"] += np.outer(grad_f, x)
    grads["b_o"] += grad_f
    grad_x = params.W_o.T @ grad_f

    norm = cache["norm"]
    if norm > 0.0:
        u = forward.x_unit
        grad_x = grad_x + (grad_x_unit - np.dot(u, grad_x_unit) * u) / norm
    # norm == 0: the unit branch emitted a constant zero; no gradient flows

    P = params.group_count
    g = params.hidden_dim // P
    z_h, z_t = cache["z_h"], cache["z_t"]
    gx = grad_x.reshape(P, g, g)
    grad_z_h = np.einsum("pij,pj->pi", gx, z_t.reshape(P, g)).reshape(-1)
    grad_z_t = np.einsum("pij,pi->pj", gx, z_h.reshape(P, g)).reshape(-1)

    grad_a_h = grad_z_h * (1.0 - z_h * z_h)
    grad_a_t = grad_z_t * (1.0 - z_t * z_t)

    h_head, h_tail, c = cache["h_head"], cache["h_tail"], cache["context"]
    grads["W_h"] += np.outer(grad_a_h, h_head)
    grads["W_c1"] += np.outer(grad_a_h, c)
    grads["W_t"] += np.outer(grad_a_t, h_tail)
    grads["W_c2"] += np.outer(grad_a_t, c)

    grad_h_head = params.W_h.T @ grad_a_h
    grad_h_tail = params.W_t.T @ grad_a_t
    input_grads = {
        "context": params.W_c1.T @ grad_a_h + params.W_c2.T @ grad_a_t,
        "head_mentions": _pool_backward(cache["head_mat"], grad_h_head),
        "tail_mentions": _pool_backward(cache["tail_mat"], grad_h_tail),
    }
    return grads, input_grads


def init_head_params(
    input_dim: int,
    hidden_dim: int,
    group_count: int,
    num_logits: int,
    rng: np.random.Generator,
) -> HeadParams:
    """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; zero output bias."""
    if hidden_dim % group_count != 0:
        raise ConfigError(
            f"hidden dim {hidden_dim} not divisible by group count {group_count}"
        )
    bound = 1.0 / np.sqrt(input_dim)
    pair_dim = hidden_dim * hidden_dim // group_count
    bound_o = 1.0 / np.sqrt(pair_dim)

    def u(shape, b):
        return rng.uniform(-b, b, size=shape)

    return HeadParams(
        W_h=u((hidden_dim, input_dim), bound),
        W_t=u((hidden_dim, input_dim), bound),
        W_c1=u((hidden_dim, input_dim), bound),
        W_c2=u((hidden_dim, input_dim), bound),
        W_o=u((num_logits, pair_dim), bound_o),
        b_o=np.zeros(num_logits),
        group_count=group_count,
    )


# ---------------------------------------------------------------------------
# Checkpoint format: one text header line, one JSON metadata line, then the
# tensors as raw little-endian float64 in declaration order.

_CKPT_MAGIC = b"DOCREL-CKPT 1\n"


def save_checkpoint(params: HeadParams, path) -> None:
    import json

    meta = {
        "group_count": params.group_count,
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in params.tensors().items()
        ],
    }
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write((json.dumps(meta) + "\n").encode("utf-8"))
        for arr in params.tensors().values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> HeadParams:
    import json

    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != _CKPT_MAGIC:
            raise DataFormatError(f"{path}: not a checkpoint file (bad magic)")
        meta = json.loads(fh.readline().decode("utf-8"))
        arrays = {}
        for spec in meta["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise DataFormatError(f"{path}: truncated payload for {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return HeadParams(
        W_h=arrays["W_h"],
        W_t=arrays["W_t"],
        W_c1=arrays["W_c1"],
        W_c2=arrays["W_c2"],
        W_o=arrays["W_o"],
        b_o=arrays["b_o"],
        group_count=int(meta["group_count"]),
    )
