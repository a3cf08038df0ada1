"""Patch generator and anchor-grid sign detector.

The generator maps a latent vector to a small RGB patch through a dense
layer and a stack of fractionally strided convolutions, ending in a sigmoid
so outputs always lie in [0,1].

The detector is a single-stage design: a strided conv backbone downsamples
the scene to a coarse grid, and a 1x1 head scores a fixed set of anchor
boxes per cell over the sign classes plus background. Proposal count is a
pure function of input size and anchor spec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import (Affine, Conv2d, ConvTranspose2d, log_softmax_rows,
                     softmax_rows, xavier_normal)
from .tensor import ShapeError, Tensor

DEFAULT_CLASS_NAMES = ("prohibitory", "mandatory", "danger")


@dataclass(frozen=True)
class ProposalScore:
    """One scored anchor box: (x, y, w, h) in input pixels, scores over
    the sign classes plus background (last column)."""

    box: tuple
    logits: np.ndarray
    probs: np.ndarray


class Detections:
    """Full detector output for one image.

    Behaves as a sequence of ProposalScore for inspection; the ``logits``
    and ``probs`` tensors stay on the tape for gradient-based use.
    """

    def __init__(self, logits: Tensor, probs: Tensor, boxes: np.ndarray,
                 class_names: tuple):
        self.logits = logits
        self.probs = probs
        self.boxes = boxes
        self.class_names = class_names

    def __len__(self) -> int:
        return self.boxes.shape[0]

    def __getitem__(self, i: int) -> ProposalScore:
        return ProposalScore(
            box=tuple(self.boxes[i]),
            logits=self.logits.data[i].copy(),
            probs=self.probs.data[i].copy(),
        )

    def max_prob(self, class_index: int) -> float:
        return float(np.max(self.probs.data[:, class_index]))


class GeneratorModel:
    """Latent vector -> patch image in [0,1].

    Architecture: dense to a base feature map, then one upsampling conv per
    entry of ``stages`` plus a final upsampling conv to RGB. Patch side is
    base_hw * 2^(len(stages)+1).
    """

    kind = "generator"

    def __init__(self, arch: dict, rng: np.random.Generator | None = None):
        self.arch = dict(arch)
        d = int(arch["latent_dim"])
        bh, bw, bc = (int(v) for v in arch["base"])
        stages = [int(c) for c in arch["stages"]]
        out_c = int(arch["out_channels"])
        if d < 2:
            raise ValueError("latent_dim must be >= 2")
        self.latent_dim = d
        self.base = (bh, bw, bc)
        rng = rng if rng is not None else np.random.default_rng(0)

        self.dense = Affine.init(rng, d, bh * bw * bc)
        chain = []
        c_in = bc
        for c_out in stages:
            chain.append(ConvTranspose2d.init(rng, 3, 3, c_in, c_out,
                                              stride=2, pad=1, out_pad=1))
            c_in = c_out
        chain.append(ConvTranspose2d.init(rng, 3, 3, c_in, out_c,
                                          stride=2, pad=1, out_pad=1,
                                          scheme=xavier_normal))
        self.ups = chain
        self.patch_shape = (bh * 2 ** len(chain), bw * 2 ** len(chain), out_c)

    def forward(self, z: Tensor) -> Tensor:
        z = T.as_tensor(z)
        if z.data.shape != (self.latent_dim,):
            raise ShapeError(
                f"latent vector shape {z.data.shape} does not match "
                f"latent_dim {self.latent_dim}"
            )
        h = T.relu(self.dense(T.reshape(z, (1, self.latent_dim))))
        h = T.reshape(h, self.base)
        for layer in self.ups[:-1]:
            h = T.relu(layer(h))
        return T.sigmoid(self.ups[-1](h))

    def named_weights(self) -> list:
        out = [("dense_w", self.dense.w), ("dense_b", self.dense.b)]
        for i, layer in enumerate(self.ups):
            out.append((f"up{i}_k", layer.k))
            out.append((f"up{i}_b", layer.b))
        return out

    def params(self) -> list:
        return [w for _, w in self.named_weights()]

    def freeze(self) -> None:
        _freeze(self.params())


class DetectorModel:
    """Scene image -> scored anchor proposals."""

    kind = "detector"

    def __init__(self, arch: dict, rng: np.random.Generator | None = None):
        self.arch = dict(arch)
        h, w, c = (int(v) for v in arch["input"])
        channels = [int(v) for v in arch["channels"]]
        stride = int(arch["anchor"]["stride"])
        sizes = [float(s) for s in arch["anchor"]["sizes"]]
        names = tuple(arch.get("class_names", DEFAULT_CLASS_NAMES))
        k = int(arch.get("num_classes", len(names)))
        if k != len(names):
            raise ValueError("num_classes does not match class_names")
        if stride != 2 ** len(channels):
            raise ValueError(
                f"anchor stride {stride} must equal the backbone downsampling "
                f"factor {2 ** len(channels)}"
            )
        if h % stride or w % stride:
            raise ValueError("input size must be a multiple of the stride")
        self.input_shape = (h, w, c)
        self.class_names = names
        self.num_classes = k
        self.anchor_stride = stride
        self.anchor_sizes = sizes
        self.grid = (h // stride, w // stride)
        rng = rng if rng is not None else np.random.default_rng(0)

        convs = []
        c_in = c
        for c_out in channels:
            convs.append(Conv2d.init(rng, 3, 3, c_in, c_out, stride=2, pad=1))
            c_in = c_out
        self.convs = convs
        self.head = Conv2d.init(rng, 1, 1, c_in,
                                len(sizes) * (k + 1), scheme=xavier_normal)
        self.boxes = _anchor_boxes(self.grid, stride, sizes, (h, w))
        self.boxes.setflags(write=False)

    @property
    def num_proposals(self) -> int:
        return self.boxes.shape[0]

    def forward(self, image: Tensor) -> Detections:
        image = T.as_tensor(image)
        if image.data.shape != self.input_shape:
            raise ShapeError(
                f"image shape {image.data.shape} does not match detector "
                f"input {self.input_shape}"
            )
        h = image
        for conv in self.convs:
            h = T.relu(conv(h))
        raw = self.head(h)
        logits = T.reshape(raw, (self.num_proposals, self.num_classes + 1))
        return Detections(logits, softmax_rows(logits), self.boxes,
                          self.class_names)

    def log_probs(self, image: Tensor) -> Tensor:
        """Row log-softmax of the proposal logits (stable form for training)."""
        det = self.forward(image)
        return log_softmax_rows(det.logits)

    def class_index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise ValueError(
                f"unknown class {name!r}; detector classes are "
                f"{list(self.class_names)}"
            ) from None

    def named_weights(self) -> list:
        out = []
        for i, conv in enumerate(self.convs):
            out.append((f"conv{i}_k", conv.k))
            out.append((f"conv{i}_b", conv.b))
        out.append(("head_k", self.head.k))
        out.append(("head_b", self.head.b))
        return out

    def params(self) -> list:
        return [w for _, w in self.named_weights()]

    def freeze(self) -> None:
        _freeze(self.params())


def _freeze(params: list) -> None:
    for p in params:
        p.requires_grad = False
        p.data.setflags(write=False)


def _anchor_boxes(grid: tuple, stride: int, sizes: list,
                  bounds: tuple) -> np.ndarray:
    gh, gw = grid
    hb, wb = bounds
    boxes = np.empty((gh * gw * len(sizes), 4))
    idx = 0
    for i in range(gh):
        for j in range(gw):
            cy = (i + 0.5) * stride
            cx = (j + 0.5) * stride
            for s in sizes:
                x0 = max(0.0, cx - s / 2.0)
                y0 = max(0.0, cy - s / 2.0)
                x1 = min(float(wb), cx + s / 2.0)
                y1 = min(float(hb), cy + s / 2.0)
                boxes[idx] = (x0, y0, x1 - x0, y1 - y0)
                idx += 1
    return boxes


def generate(g: GeneratorModel, z) -> Tensor:
    """Decode a latent vector into a patch image."""
    return g.forward(T.as_tensor(z))


def detect(m: DetectorModel, image) -> list:
    """Run the detector and return detached per-proposal scores."""
    with T.no_grad():
        det = m.forward(T.as_tensor(image))
    return [det[i] for i in range(len(det))]


def crop_proposal(image, box, out_size: tuple = (32, 32)) -> Tensor:
    """Bilinearly resample a box of the image to a fixed-size crop.

    ``box`` is (x, y, w, h) in pixels and must lie inside the image; the
    crop samples out_size points per axis spanning the box span inclusively.
    """
    image = T.as_tensor(image)
    hh, ww = image.data.shape[0], image.data.shape[1]
    x, y, w, h = (float(v) for v in box)
    if w <= 0 or h <= 0:
        raise ShapeError(f"box must have positive extent, got w={w}, h={h}")
    if x < 0 or y < 0 or x + w > ww or y + h > hh:
        raise ShapeError(
            f"box {(x, y, w, h)} extends outside image of size "
            f"{(hh, ww)}"
        )
    oh, ow = (int(v) for v in out_size)
    ys = y + _span(h, oh)[:, None] * np.ones((1, ow))
    xs = x + np.ones((oh, 1)) * _span(w, ow)[None, :]
    return T.grid_sample(image, ys, xs)


def _span(extent: float, n: int) -> np.ndarray:
    if n == 1:
        return np.array([(extent - 1.0) / 2.0])
    return np.arange(n) * ((extent - 1.0) / (n - 1))
