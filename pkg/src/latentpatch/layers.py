"""Parameterized layers built from the tensor ops.

Layers hold their weights as Tensors and expose ``params()`` in a stable
order, which doubles as the serialization order for model bundles.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .tensor import Tensor


def he_normal(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)


def xavier_normal(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * math.sqrt(1.0 / fan_in)


class Affine:
    """Dense layer: (n, d_in) @ (d_in, d_out) + bias."""

    def __init__(self, w: Tensor, b: Tensor):
        self.w = w
        self.b = b

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, d_out: int,
             scheme=he_normal) -> "Affine":
        return cls(
            Tensor(scheme(rng, (d_in, d_out), d_in), requires_grad=True),
            Tensor(np.zeros(d_out), requires_grad=True),
        )

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.w), self.b)

    def params(self) -> list:
        return [self.w, self.b]


class Conv2d:
    """Strided 2-D convolution, kernel (kh, kw, c_in, c_out)."""

    def __init__(self, k: Tensor, b: Tensor, stride: int = 1, pad: int = 0):
        self.k = k
        self.b = b
        self.stride = stride
        self.pad = pad

    @classmethod
    def init(cls, rng: np.random.Generator, kh: int, kw: int, c_in: int,
             c_out: int, stride: int = 1, pad: int = 0,
             scheme=he_normal) -> "Conv2d":
        fan_in = kh * kw * c_in
        return cls(
            Tensor(scheme(rng, (kh, kw, c_in, c_out), fan_in),
                   requires_grad=True),
            Tensor(np.zeros(c_out), requires_grad=True),
            stride=stride,
            pad=pad,
        )

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.conv2d(x, self.k, self.stride, self.pad), self.b)

    def params(self) -> list:
        return [self.k, self.b]


class ConvTranspose2d:
    """Fractionally strided convolution for learned upsampling.

    Output size per axis: (in - 1) * stride + kh - 2 * pad + out_pad.
    Implemented as dilate -> pad -> unit-stride conv, so gradients come for
    free from the building blocks.
    """

    def __init__(self, k: Tensor, b: Tensor, stride: int, pad: int,
                 out_pad: int):
        self.k = k
        self.b = b
        self.stride = stride
        self.pad = pad
        self.out_pad = out_pad

    @classmethod
    def init(cls, rng: np.random.Generator, kh: int, kw: int, c_in: int,
             c_out: int, stride: int, pad: int, out_pad: int,
             scheme=he_normal) -> "ConvTranspose2d":
        fan_in = kh * kw * c_in
        return cls(
            Tensor(scheme(rng, (kh, kw, c_in, c_out), fan_in),
                   requires_grad=True),
            Tensor(np.zeros(c_out), requires_grad=True),
            stride=stride,
            pad=pad,
            out_pad=out_pad,
        )

    def __call__(self, x: Tensor) -> Tensor:
        kh, kw = self.k.shape[0], self.k.shape[1]
        d = T.dilate2d(x, self.stride)
        top = kh - 1 - self.pad
        left = kw - 1 - self.pad
        if min(top, left) < 0:
            raise T.ShapeError("conv transpose pad exceeds kernel extent")
        p = T.pad2d(d, top, top + self.out_pad, left, left + self.out_pad)
        return T.add(T.conv2d(p, self.k, 1, 0), self.b)

    def params(self) -> list:
        return [self.k, self.b]


def softmax_rows(logits: Tensor) -> Tensor:
    """Row softmax of an (n, k) tensor.

    The row max is subtracted as a constant; that keeps exp() in range and
    leaves the softmax gradient exact.
    """
    rowmax = Tensor(np.max(logits.data, axis=1, keepdims=True))
    e = T.exp(T.sub(logits, rowmax))
    return T.div(e, T.tsum(e, axis=1, keepdims=True))


def log_softmax_rows(logits: Tensor) -> Tensor:
    rowmax = Tensor(np.max(logits.data, axis=1, keepdims=True))
    shifted = T.sub(logits, rowmax)
    lse = T.log(T.tsum(T.exp(shifted), axis=1, keepdims=True))
    return T.sub(shifted, lse)
