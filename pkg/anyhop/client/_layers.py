"""Dense layers with explicit backward passes.

All trainable models of the package are small enough to be written directly in
numpy. Every forward function returns its output together with a cache, and the
matching backward function turns an upstream gradient and that cache into input
and parameter gradients. Row-major batches are used throughout: a linear map
with weight ``W`` of shape ``(out, in)`` computes ``x @ W.T + b``.

Classes
-------
ParamSet
    Base dataclass for collections of named parameter tensors
TransformerParams
    Weights of one single-head, pre-norm transformer encoder layer
"""

import dataclasses
import math
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Any, TypeVar, Union

import numpy as np
import numpy.typing as npt

from anyhop.client._client_vars import LAYER_NORM_EPS, PARAMS_FORMAT_VERSION
from anyhop.client._exceptions import ModelMismatchError
from anyhop.client.config import EncoderConfig


Array = npt.NDArray[np.float64]
BoolArray = npt.NDArray[np.bool_]
P = TypeVar("P", bound="ParamSet")


def sigmoid(x: Any) -> Any:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def bce_with_logits(logits: Any, labels: Any) -> Any:
    """Elementwise binary cross-entropy of ``sigmoid(logits)`` against labels."""
    logits = np.asarray(logits, dtype=np.float64)
    return np.logaddexp(0.0, logits) - np.asarray(labels) * logits


def masked_softmax(scores: Array, mask: BoolArray) -> Array:
    """Softmax over the last axis restricted to ``mask``.

    Masked entries get probability 0. Every row must keep at least one entry.
    """
    shifted = np.where(mask, scores, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def softmax_backward(probs: Array, dprobs: Array) -> Array:
    """Backward pass of a (masked) softmax over the last axis."""
    return probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))


def layer_norm(x: Array, gain: Array, bias: Array) -> tuple[Array, tuple[Any, ...]]:
    """Normalize rows to zero mean and unit variance, then scale and shift."""
    mean = x.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + LAYER_NORM_EPS)
    normed = (x - mean) * inv_std
    return normed * gain + bias, (normed, inv_std, gain)


def layer_norm_backward(
    dy: Array, cache: tuple[Any, ...]
) -> tuple[Array, Array, Array]:
    """Return input, gain and bias gradients of :func:`layer_norm`."""
    normed, inv_std, gain = cache
    size = normed.shape[-1]
    dnormed = dy * gain
    dx = (inv_std / size) * (
        size * dnormed
        - dnormed.sum(axis=-1, keepdims=True)
        - normed * (dnormed * normed).sum(axis=-1, keepdims=True)
    )
    return dx, (dy * normed).sum(axis=0), dy.sum(axis=0)


@dataclass
class ParamSet:
    """Collection of named parameter tensors.

    Subclasses are dataclasses whose fields are numpy arrays or nested
    ``ParamSet`` instances. Gradients use the same class as the parameters.
    """

    def named_tensors(self, prefix: str = "") -> dict[str, Array]:
        """Return every tensor keyed by its dotted field path."""
        tensors: dict[str, Array] = {}
        for item in dataclasses.fields(self):
            value = getattr(self, item.name)
            name = f"{prefix}{item.name}"
            if isinstance(value, ParamSet):
                tensors.update(value.named_tensors(f"{name}."))
            else:
                tensors[name] = value
        return tensors

    def _rebuild(self: P, tensors: dict[str, Array], prefix: str = "") -> P:
        values: dict[str, Any] = {}
        for item in dataclasses.fields(self):
            value = getattr(self, item.name)
            name = f"{prefix}{item.name}"
            if isinstance(value, ParamSet):
                values[item.name] = value._rebuild(tensors, f"{name}.")
            else:
                values[item.name] = tensors[name]
        return type(self)(**values)

    def map(self: P, fn: Any) -> P:
        """Apply ``fn`` to every tensor, returning a new instance."""
        return self._rebuild(
            {name: fn(tensor) for name, tensor in self.named_tensors().items()}
        )

    def zeros_like(self: P) -> P:
        """Return a same-shaped instance filled with zeros."""
        return self.map(np.zeros_like)

    def copy(self: P) -> P:
        """Return a deep copy."""
        return self.map(np.array)

    def step(self: P, grads: P, lr: float) -> P:
        """Return ``self - lr * grads``."""
        grad_tensors = grads.named_tensors()
        return self._rebuild(
            {
                name: tensor - lr * grad_tensors[name]
                for name, tensor in self.named_tensors().items()
            }
        )

    def add(self: P, other: P, scale: float = 1.0) -> P:
        """Return ``self + scale * other``."""
        return self.step(other, -scale)

    def is_finite(self) -> bool:
        """Whether every entry of every tensor is finite."""
        return all(np.isfinite(t).all() for t in self.named_tensors().values())

    def num_entries(self) -> int:
        """Total number of scalar parameters."""
        return sum(t.size for t in self.named_tensors().values())

    def iter_entries(self) -> Iterator[tuple[str, tuple[int, ...]]]:
        """Yield ``(tensor name, index)`` for every scalar parameter."""
        for name, tensor in self.named_tensors().items():
            for index in np.ndindex(tensor.shape):
                yield name, index

    def save(
        self, path: Union[str, Path], kind: str, encoder: EncoderConfig
    ) -> None:
        """Write the tensors to an ``.npz`` archive.

        The archive records the format version, the model kind and the encoder
        configuration the parameters were trained against.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {f"param:{name}": t for name, t in self.named_tensors().items()}
        with path.open("wb") as f:
            np.savez(
                f,
                format_version=np.array(PARAMS_FORMAT_VERSION),
                kind=np.array(kind),
                encoder_max_length=np.array(encoder.max_length),
                encoder_hidden_size=np.array(encoder.hidden_size),
                encoder_seed=np.array(encoder.seed),
                **arrays,
            )

    def load_into(
        self: P, path: Union[str, Path], kind: str, encoder: EncoderConfig
    ) -> P:
        """Read an archive written by :meth:`save` using ``self`` as template.

        Raises
        ------
        FileNotFoundError
            If the file does not exist
        ModelMismatchError
            If version, kind, encoder configuration or tensor shapes differ
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Could not find parameter file: {path}")
        with np.load(path, allow_pickle=False) as data:
            version = int(data["format_version"])
            if version != PARAMS_FORMAT_VERSION:
                raise ModelMismatchError(
                    f"{path} has format version {version}, "
                    f"expected {PARAMS_FORMAT_VERSION}"
                )
            stored_kind = str(data["kind"])
            if stored_kind != kind:
                raise ModelMismatchError(f"{path} holds a {stored_kind}, not a {kind}")
            stored = (
                int(data["encoder_max_length"]),
                int(data["encoder_hidden_size"]),
                int(data["encoder_seed"]),
            )
            expected = (encoder.max_length, encoder.hidden_size, encoder.seed)
            if stored != expected:
                raise ModelMismatchError(
                    f"{path} was trained with encoder (L, h, seed) = {stored}, "
                    f"configured encoder is {expected}"
                )
            tensors = {}
            for name, template in self.named_tensors().items():
                key = f"param:{name}"
                if key not in data or data[key].shape != template.shape:
                    raise ModelMismatchError(
                        f"{path} has no tensor {name} of shape {template.shape}"
                    )
                tensors[name] = data[key].astype(np.float64)
        return self._rebuild(tensors)


@dataclass
class TransformerParams(ParamSet):
    """Weights of a single-head, pre-norm transformer encoder layer.

    Attributes
    ----------
    wq, wk, wv, wo : np.ndarray
        ``h x h`` query, key, value and output projections
    ln1_gain, ln1_bias, ln2_gain, ln2_bias : np.ndarray
        Layer normalization parameters before attention and feed-forward
    ff_w1, ff_b1 : np.ndarray
        ``4h x h`` expansion and its bias
    ff_w2, ff_b2 : np.ndarray
        ``h x 4h`` projection and its bias
    """

    wq: Array
    wk: Array
    wv: Array
    wo: Array
    ln1_gain: Array
    ln1_bias: Array
    ln2_gain: Array
    ln2_bias: Array
    ff_w1: Array
    ff_b1: Array
    ff_w2: Array
    ff_b2: Array

    @classmethod
    def initialize(
        cls, hidden_size: int, rng: np.random.Generator
    ) -> "TransformerParams":
        """Near-identity attention projections plus small seeded noise."""
        h = hidden_size
        eye = np.eye(h)
        noise = 0.1 / math.sqrt(h)
        return cls(
            wq=eye + rng.normal(0.0, noise, (h, h)),
            wk=eye + rng.normal(0.0, noise, (h, h)),
            wv=eye + rng.normal(0.0, noise, (h, h)),
            wo=0.1 * eye + rng.normal(0.0, noise, (h, h)),
            ln1_gain=np.ones(h),
            ln1_bias=np.zeros(h),
            ln2_gain=np.ones(h),
            ln2_bias=np.zeros(h),
            ff_w1=rng.normal(0.0, 0.5 / math.sqrt(h), (4 * h, h)),
            ff_b1=np.zeros(4 * h),
            ff_w2=rng.normal(0.0, 0.1 / math.sqrt(4 * h), (h, 4 * h)),
            ff_b2=np.zeros(h),
        )


def transformer_forward(
    x: Array, valid: BoolArray, params: TransformerParams
) -> tuple[Array, dict[str, Any]]:
    """Apply one pre-norm transformer encoder layer.

    Attention spans every valid row; padding rows are never attended and their
    outputs are zero.

    Parameters
    ----------
    x : np.ndarray
        ``R x h`` input rows
    valid : np.ndarray
        Boolean mask of the non-padding rows
    params : TransformerParams
        Layer weights

    Returns
    -------
    tuple[np.ndarray, dict[str, Any]]
        Output rows and the cache for :func:`transformer_backward`
    """
    scale = 1.0 / math.sqrt(x.shape[1])
    normed1, ln1 = layer_norm(x, params.ln1_gain, params.ln1_bias)
    query = normed1 @ params.wq.T
    key = normed1 @ params.wk.T
    value = normed1 @ params.wv.T
    attn = masked_softmax((query @ key.T) * scale, valid[None, :])
    context = attn @ value
    x1 = x + context @ params.wo.T

    normed2, ln2 = layer_norm(x1, params.ln2_gain, params.ln2_bias)
    hidden_pre = normed2 @ params.ff_w1.T + params.ff_b1
    hidden = np.maximum(hidden_pre, 0.0)
    out = (x1 + hidden @ params.ff_w2.T + params.ff_b2) * valid[:, None]

    cache = {
        "valid": valid,
        "scale": scale,
        "normed1": normed1,
        "ln1": ln1,
        "query": query,
        "key": key,
        "value": value,
        "attn": attn,
        "context": context,
        "normed2": normed2,
        "ln2": ln2,
        "hidden_pre": hidden_pre,
        "hidden": hidden,
    }
    return out, cache


def transformer_backward(
    dout: Array, cache: dict[str, Any], params: TransformerParams
) -> tuple[Array, TransformerParams]:
    """Backward pass of :func:`transformer_forward`.

    Returns
    -------
    tuple[np.ndarray, TransformerParams]
        Gradient with respect to the input rows and the parameter gradients
    """
    dout = dout * cache["valid"][:, None]

    d_ff_w2 = dout.T @ cache["hidden"]
    d_ff_b2 = dout.sum(axis=0)
    dhidden_pre = (dout @ params.ff_w2) * (cache["hidden_pre"] > 0)
    d_ff_w1 = dhidden_pre.T @ cache["normed2"]
    d_ff_b1 = dhidden_pre.sum(axis=0)
    dnormed2 = dhidden_pre @ params.ff_w1
    dx1_ln, d_ln2_gain, d_ln2_bias = layer_norm_backward(dnormed2, cache["ln2"])
    dx1 = dout + dx1_ln

    d_wo = dx1.T @ cache["context"]
    dcontext = dx1 @ params.wo
    attn = cache["attn"]
    dattn = dcontext @ cache["value"].T
    dvalue = attn.T @ dcontext
    dscores = softmax_backward(attn, dattn) * cache["scale"]
    dquery = dscores @ cache["key"]
    dkey = dscores.T @ cache["query"]

    normed1 = cache["normed1"]
    d_wq = dquery.T @ normed1
    d_wk = dkey.T @ normed1
    d_wv = dvalue.T @ normed1
    dnormed1 = dquery @ params.wq + dkey @ params.wk + dvalue @ params.wv
    dx_ln, d_ln1_gain, d_ln1_bias = layer_norm_backward(dnormed1, cache["ln1"])

    grads = TransformerParams(
        wq=d_wq,
        wk=d_wk,
        wv=d_wv,
        wo=d_wo,
        ln1_gain=d_ln1_gain,
        ln1_bias=d_ln1_bias,
        ln2_gain=d_ln2_gain,
        ln2_bias=d_ln2_bias,
        ff_w1=d_ff_w1,
        ff_b1=d_ff_b1,
        ff_w2=d_ff_w2,
        ff_b2=d_ff_b2,
    )
    return dx1 + dx_ln, grads
