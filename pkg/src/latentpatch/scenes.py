"""Procedural scenes with geometric traffic-sign-like objects.

Scenes are a deterministic function of (spec, seed): a gradient background
with rectangle distractors and noise, optional benign logo patches as hard
negatives, and zero or more signs drawn with 1-pixel antialiased edges.
Sign interiors are painted with the exact palette color, so the pixel at an
annotation center equals the class palette entry bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIGN_SHAPES = ("ring", "disc", "triangle")
LOGO_SHAPES = ("disc", "ring", "bar", "square", "triangle")


class SceneSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ClassSpec:
    name: str
    shape: str
    palette: tuple
    border: tuple


@dataclass(frozen=True)
class PatchSpec:
    """Distribution of small logo-like images for generator training."""

    size: tuple = (32, 32)
    shape_count: tuple = (1, 3)
    shape_kinds: tuple = LOGO_SHAPES


@dataclass(frozen=True)
class SceneSpec:
    size: tuple = (128, 128)
    classes: tuple = ()
    sign_count: tuple = (0, 2)
    sign_size: tuple = (20, 44)
    margin: int = 6
    noise_sigma: float = 0.02
    distractors: tuple = (2, 6)
    logo_probability: float = 0.5
    logo: PatchSpec = field(default_factory=PatchSpec)


@dataclass(frozen=True)
class Annotation:
    class_index: int
    class_name: str
    box: tuple  # (x, y, w, h) in pixels

    @property
    def center(self) -> tuple:
        x, y, w, h = self.box
        return (x + w / 2.0, y + h / 2.0)


@dataclass(frozen=True)
class SyntheticScene:
    image: np.ndarray
    annotations: tuple
    seed: int


def default_classes() -> tuple:
    red = (0.82, 0.06, 0.09)
    return (
        ClassSpec("prohibitory", "ring", (0.96, 0.96, 0.96), red),
        ClassSpec("mandatory", "disc", (0.10, 0.25, 0.85), (0.92, 0.92, 0.95)),
        ClassSpec("danger", "triangle", (0.97, 0.85, 0.25), red),
    )


def default_scene_spec(**overrides) -> SceneSpec:
    return SceneSpec(classes=default_classes(), **overrides)


def load_dataset_spec(path):
    """Read a scene or patch spec from JSON; kind field selects which."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SceneSpecError(f"{path}: not valid JSON: {e}") from e
    return parse_dataset_spec(raw)


def parse_dataset_spec(raw: dict):
    kind = raw.get("kind")
    if kind == "scenes":
        return _parse_scene_spec(raw)
    if kind == "patches":
        return _parse_patch_spec(raw)
    raise SceneSpecError(
        f"spec key 'kind' must be 'scenes' or 'patches', got {kind!r}"
    )


def _parse_patch_spec(raw: dict) -> PatchSpec:
    allowed = {"kind", "size", "shape_count", "shape_kinds"}
    _reject_unknown(raw, allowed)
    spec = PatchSpec(
        size=_pair(raw.get("size", (32, 32)), "size"),
        shape_count=_pair(raw.get("shape_count", (1, 3)), "shape_count"),
        shape_kinds=tuple(raw.get("shape_kinds", LOGO_SHAPES)),
    )
    for k in spec.shape_kinds:
        if k not in LOGO_SHAPES:
            raise SceneSpecError(
                f"spec key 'shape_kinds' contains unknown shape {k!r}"
            )
    return spec


def _parse_scene_spec(raw: dict) -> SceneSpec:
    allowed = {"kind", "size", "classes", "sign_count", "sign_size", "margin",
               "noise_sigma", "distractors", "logo_probability", "logo"}
    _reject_unknown(raw, allowed)
    classes = []
    for entry in raw.get("classes", _class_dicts(default_classes())):
        _reject_unknown(entry, {"name", "shape", "palette", "border"},
                        prefix="classes.")
        shape = entry.get("shape")
        if shape not in SIGN_SHAPES:
            raise SceneSpecError(
                f"spec key 'classes.shape' must be one of {SIGN_SHAPES}, "
                f"got {shape!r}"
            )
        classes.append(ClassSpec(
            name=str(entry["name"]),
            shape=shape,
            palette=_color(entry["palette"], "classes.palette"),
            border=_color(entry.get("border", (0.8, 0.8, 0.8)),
                          "classes.border"),
        ))
    logo_raw = raw.get("logo")
    logo = (_parse_patch_spec({"kind": "patches", **logo_raw})
            if logo_raw else PatchSpec())
    return SceneSpec(
        size=_pair(raw.get("size", (128, 128)), "size"),
        classes=tuple(classes),
        sign_count=_pair(raw.get("sign_count", (0, 2)), "sign_count"),
        sign_size=_pair(raw.get("sign_size", (20, 44)), "sign_size"),
        margin=int(raw.get("margin", 6)),
        noise_sigma=float(raw.get("noise_sigma", 0.02)),
        distractors=_pair(raw.get("distractors", (2, 6)), "distractors"),
        logo_probability=float(raw.get("logo_probability", 0.5)),
        logo=logo,
    )


def _class_dicts(classes: tuple) -> list:
    return [{"name": c.name, "shape": c.shape, "palette": list(c.palette),
             "border": list(c.border)} for c in classes]


def scene_spec_to_dict(spec: SceneSpec) -> dict:
    return {
        "kind": "scenes",
        "size": list(spec.size),
        "classes": _class_dicts(spec.classes),
        "sign_count": list(spec.sign_count),
        "sign_size": list(spec.sign_size),
        "margin": spec.margin,
        "noise_sigma": spec.noise_sigma,
        "distractors": list(spec.distractors),
        "logo_probability": spec.logo_probability,
        "logo": {
            "size": list(spec.logo.size),
            "shape_count": list(spec.logo.shape_count),
            "shape_kinds": list(spec.logo.shape_kinds),
        },
    }


def patch_spec_to_dict(spec: PatchSpec) -> dict:
    return {
        "kind": "patches",
        "size": list(spec.size),
        "shape_count": list(spec.shape_count),
        "shape_kinds": list(spec.shape_kinds),
    }


def _reject_unknown(raw: dict, allowed: set, prefix: str = "") -> None:
    for key in raw:
        if key not in allowed:
            raise SceneSpecError(f"unknown spec key {prefix}{key!r}")


def _pair(v, key) -> tuple:
    try:
        a, b = (int(x) for x in v)
    except (TypeError, ValueError) as e:
        raise SceneSpecError(f"spec key {key!r} must be a pair of ints") from e
    if a > b:
        raise SceneSpecError(f"spec key {key!r} must be ordered, got {v}")
    return (a, b)


def _color(v, key) -> tuple:
    try:
        r, g, b = (float(x) for x in v)
    except (TypeError, ValueError) as e:
        raise SceneSpecError(f"spec key {key!r} must be an RGB triple") from e
    if not all(0.0 <= x <= 1.0 for x in (r, g, b)):
        raise SceneSpecError(f"spec key {key!r} must lie in [0,1]")
    return (r, g, b)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render_scene(spec: SceneSpec, seed: int) -> SyntheticScene:
    if not spec.classes:
        raise SceneSpecError("scene spec has no classes")
    h, w = spec.size
    rng = np.random.default_rng(seed)
    img = _background(rng, h, w)
    n_rects = int(rng.integers(spec.distractors[0], spec.distractors[1] + 1))
    for _ in range(n_rects):
        _draw_rect(rng, img)
    if spec.noise_sigma > 0:
        img += rng.normal(0.0, spec.noise_sigma, size=img.shape)
        np.clip(img, 0.0, 1.0, out=img)

    placed_boxes = []
    annotations = []
    n_signs = int(rng.integers(spec.sign_count[0], spec.sign_count[1] + 1))
    for _ in range(n_signs):
        ann = _place_sign(rng, spec, img, placed_boxes)
        if ann is not None:
            annotations.append(ann)
            placed_boxes.append(ann.box)

    if rng.random() < spec.logo_probability:
        for _ in range(int(rng.integers(1, 3))):
            _paste_logo(rng, spec, img, placed_boxes)

    img.setflags(write=False)
    return SyntheticScene(image=img, annotations=tuple(annotations), seed=seed)


def render_logo_patch(spec: PatchSpec, seed: int) -> np.ndarray:
    """A small colorful composition of simple shapes (not a sign)."""
    h, w = spec.size
    rng = np.random.default_rng(seed)
    img = np.empty((h, w, 3))
    img[:] = _soft_color(rng)
    n = int(rng.integers(spec.shape_count[0], spec.shape_count[1] + 1))
    for _ in range(n):
        kind = spec.shape_kinds[int(rng.integers(len(spec.shape_kinds)))]
        _draw_logo_shape(rng, img, kind)
    np.clip(img, 0.0, 1.0, out=img)
    return img


def _background(rng, h, w) -> np.ndarray:
    top = _soft_color(rng)
    bottom = _soft_color(rng)
    t = np.linspace(0.0, 1.0, h)[:, None, None]
    column = (1.0 - t) * top[None, None, :] + t * bottom[None, None, :]
    return np.ascontiguousarray(np.broadcast_to(column, (h, w, 3)))


def _soft_color(rng) -> np.ndarray:
    return rng.uniform(0.25, 0.75, size=3)


def _draw_rect(rng, img) -> None:
    h, w = img.shape[:2]
    rh = int(rng.integers(h // 8, h // 2))
    rw = int(rng.integers(w // 8, w // 2))
    y = int(rng.integers(0, h - rh))
    x = int(rng.integers(0, w - rw))
    color = rng.uniform(0.15, 0.85, size=3)
    alpha = rng.uniform(0.6, 1.0)
    img[y:y + rh, x:x + rw] *= (1.0 - alpha)
    img[y:y + rh, x:x + rw] += alpha * color


def _place_sign(rng, spec: SceneSpec, img, placed: list):
    h, w = img.shape[:2]
    size = int(rng.integers(spec.sign_size[0], spec.sign_size[1] + 1))
    half = size / 2.0
    m = spec.margin
    for _ in range(40):
        cx = int(rng.integers(m + int(half) + 1, w - m - int(half) - 1))
        cy = int(rng.integers(m + int(half) + 1, h - m - int(half) - 1))
        box = (cx - half, cy - half, float(size), float(size))
        if all(_iou(box, other) == 0.0 for other in placed):
            break
    else:
        return None
    ci = int(rng.integers(len(spec.classes)))
    cls = spec.classes[ci]
    draw = {"ring": _draw_ring, "disc": _draw_disc,
            "triangle": _draw_triangle}[cls.shape]
    box = draw(img, cx, cy, half, cls)
    return Annotation(class_index=ci, class_name=cls.name, box=box)


def _grids(img, cx, cy):
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    return yy - cy, xx - cx


def _blend(img, alpha, color) -> None:
    a = alpha[:, :, None]
    img *= (1.0 - a)
    img += a * np.asarray(color)[None, None, :]


def _aa(d: np.ndarray) -> np.ndarray:
    """1-pixel linear edge ramp from a signed distance (positive inside)."""
    return np.clip(d + 0.5, 0.0, 1.0)


def _draw_disc(img, cx, cy, half, cls) -> tuple:
    dy, dx = _grids(img, cx, cy)
    r = np.sqrt(dy * dy + dx * dx)
    _blend(img, _aa(half - r), cls.border)
    _blend(img, _aa(half * 0.9 - r), cls.palette)
    return (cx - half, cy - half, 2 * half, 2 * half)


def _draw_ring(img, cx, cy, half, cls) -> tuple:
    dy, dx = _grids(img, cx, cy)
    r = np.sqrt(dy * dy + dx * dx)
    _blend(img, _aa(half - r), cls.border)
    _blend(img, _aa(half * 0.62 - r), cls.palette)
    return (cx - half, cy - half, 2 * half, 2 * half)


def _tri_dist(dx: np.ndarray, dy: np.ndarray, half: float) -> np.ndarray:
    """Signed distance (positive inside) to an apex-up equilateral triangle
    inscribed in the radius-``half`` circle at the origin.

    Exact for points whose nearest feature is an edge, which is all the
    1-pixel antialiasing band needs.
    """
    c30, s30 = math.cos(math.pi / 6), 0.5
    d_bottom = half * s30 - dy
    d_left = c30 * dx + s30 * dy + s30 * half
    d_right = -c30 * dx + s30 * dy + s30 * half
    return np.minimum(np.minimum(d_left, d_right), d_bottom)


def _draw_triangle(img, cx, cy, half, cls) -> tuple:
    dy, dx = _grids(img, cx, cy)
    d = _tri_dist(dx, dy, half)
    _blend(img, _aa(d), cls.border)
    _blend(img, _aa(d - max(2.0, half * 0.24)), cls.palette)
    width = 2 * half * math.cos(math.pi / 6)
    return (cx - width / 2.0, cy - half, width, half * 1.5)


def _paste_logo(rng, spec: SceneSpec, img, placed: list) -> None:
    h, w = img.shape[:2]
    ph, pw = spec.logo.size
    if h - ph <= 0 or w - pw <= 0:
        return
    logo = render_logo_patch(spec.logo,
                             int(rng.integers(0, np.iinfo(np.int64).max)))
    for _ in range(20):
        y = int(rng.integers(0, h - ph))
        x = int(rng.integers(0, w - pw))
        box = (float(x), float(y), float(pw), float(ph))
        if all(_iou(box, other) == 0.0 for other in placed):
            img[y:y + ph, x:x + pw] = logo
            return


def _draw_logo_shape(rng, img, kind: str) -> None:
    h, w = img.shape[:2]
    color = rng.uniform(0.0, 1.0, size=3)
    cx = float(rng.uniform(w * 0.2, w * 0.8))
    cy = float(rng.uniform(h * 0.2, h * 0.8))
    half = float(rng.uniform(min(h, w) * 0.12, min(h, w) * 0.4))
    dy, dx = _grids(img, cx, cy)
    if kind == "disc":
        d = half - np.sqrt(dy * dy + dx * dx)
    elif kind == "ring":
        r = np.sqrt(dy * dy + dx * dx)
        d = np.minimum(half - r, r - half * rng.uniform(0.4, 0.7))
    elif kind == "square":
        d = half - np.maximum(np.abs(dy), np.abs(dx))
    elif kind == "bar":
        angle = rng.uniform(0.0, math.pi)
        thickness = half * rng.uniform(0.25, 0.6)
        d = thickness - np.abs(dx * math.sin(angle) - dy * math.cos(angle))
    else:  # triangle
        d = _tri_dist(dx, dy, half)
    _blend(img, _aa(d), color)


def _iou(a: tuple, b: tuple) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    return inter / (aw * ah + bw * bh - inter)
