"""Backbone registry.

Every backbone maps a batch of PIL images to a float32 (batch, dim) array
and owns its full preprocessing recipe.  ``stats-1024`` is the default: a
dependency-free deterministic encoder (bilinear resize to 32x32, centered
pixels through a fixed random projection) that exists so the tool works
offline and its output shape matches the heavyweight option.
``dinov2-large`` loads the pretrained transformer and is fatal when the
weights or the deep-learning stack are missing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from .errors import ModelUnavailableError

DEFAULT_MODEL = "stats-1024"

_STATS_SIDE = 32
_STATS_DIM = 1024
_STATS_SEED = 0x51A75


@dataclass(frozen=True)
class Backbone:
    name: str
    dim: int
    encode: Callable[[Sequence[Image.Image]], np.ndarray] = field(repr=False)


_stats_projection_cache: np.ndarray | None = None


def _stats_projection() -> np.ndarray:
    global _stats_projection_cache
    if _stats_projection_cache is None:
        rng = np.random.default_rng(_STATS_SEED)
        flat = _STATS_SIDE * _STATS_SIDE * 3
        proj = rng.standard_normal((flat, _STATS_DIM)) / np.sqrt(flat)
        _stats_projection_cache = proj.astype(np.float32)
    return _stats_projection_cache


def _load_stats_1024() -> Backbone:
    proj = _stats_projection()

    def encode(images: Sequence[Image.Image]) -> np.ndarray:
        rows = np.empty((len(images), _STATS_DIM), dtype=np.float32)
        for i, img in enumerate(images):
            small = img.resize((_STATS_SIDE, _STATS_SIDE), Image.Resampling.BILINEAR)
            pixels = np.asarray(small, dtype=np.float32) / 255.0
            # row-at-a-time matvec keeps the output independent of batching
            rows[i] = (pixels.reshape(-1) - 0.5) @ proj
        return rows

    return Backbone(DEFAULT_MODEL, _STATS_DIM, encode)


def _load_dinov2_large() -> Backbone:
    try:
        import torch
        from transformers import AutoImageProcessor, AutoModel
    except ImportError as exc:
        raise ModelUnavailableError(
            f"dinov2-large needs torch and transformers installed: {exc}"
        ) from exc
    try:
        processor = AutoImageProcessor.from_pretrained("facebook/dinov2-large")
        model = AutoModel.from_pretrained("facebook/dinov2-large")
    except Exception as exc:
        raise ModelUnavailableError(f"cannot load dinov2-large: {exc}") from exc
    model.eval()

    def encode(images: Sequence[Image.Image]) -> np.ndarray:
        with torch.no_grad():
            inputs = processor(images=list(images), return_tensors="pt")
            out = model(**inputs)
        return out.pooler_output.cpu().numpy().astype(np.float32)

    return Backbone("dinov2-large", 1024, encode)


_REGISTRY: dict[str, tuple[int, Callable[[], Backbone]]] = {
    "stats-1024": (_STATS_DIM, _load_stats_1024),
    "dinov2-large": (1024, _load_dinov2_large),
}


def available_models() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def model_dim(name: str) -> int:
    try:
        return _REGISTRY[name][0]
    except KeyError:
        raise ModelUnavailableError(
            f"unknown model {name!r}; available: {', '.join(available_models())}"
        ) from None


def load_backbone(name: str) -> Backbone:
    dim, loader = _REGISTRY.get(name, (None, None))
    if loader is None:
        raise ModelUnavailableError(
            f"unknown model {name!r}; available: {', '.join(available_models())}"
        )
    backbone = loader()
    if backbone.dim != dim:
        raise ModelUnavailableError(
            f"{name} advertises dim {dim} but produced {backbone.dim}"
        )
    return backbone
