"""Text/image embedding backends and the similarity loss.

The loss steering generation is ``1 - cosine(image embedding, prompt
embedding)``: minimizing it maximizes similarity in the shared embedding
space. Backends supply the two embedding maps. The built-in toy backend
needs no external weights and is fully differentiable, which is what the
test suite and the default CLI run use. Pretrained adapters plug in
through :func:`register_backend` and must satisfy the same surface:

* ``name``            identifier string
* ``embed_dim``       embedding dimensionality E
* ``differentiable``  whether gradients w.r.t. pixels are available
* ``embed_text(prompt) -> (E,) unit vector``
* ``embed_image(img) -> (E,) unit vector``
* differentiable backends additionally provide
  ``loss_and_pixel_grad(img, text_embedding) -> (loss, (H, W, 3) grad)``

Non-differentiable adapters can only score images after the fact; the
optimizer refuses them.

Toy text embeddings are pseudo-random unit vectors seeded from a hash of
the normalized prompt (lowercased, whitespace collapsed), so rephrasings
that differ only in case or spacing score identically. Toy image
embeddings come from 18 differentiable pixel statistics (per-quadrant mean
RGB with fractional-row weighting so odd and 1-pixel dimensions stay
well-defined, global mean and variance per channel) pushed through a fixed
seeded linear map and L2-normalized. The map keeps only a sliver of the
common brightness direction (``LUMA_WEIGHT``) so the embedding responds to
color and structure rather than overall luminance.
"""

from __future__ import annotations

import numpy as np

from .codebook import ImageBuffer
from .seeds import derive_seed, rng_from

__all__ = [
    "ToyScorer",
    "similarity_loss",
    "normalize_prompt",
    "register_backend",
    "get_backend",
]

# Added to an all-zero feature vector before normalization (solid black
# images have zero means and zero variance).
ZERO_FEATURE_EPS = 1e-8

_N_FEATURES = 18

# Weight kept on the common brightness direction of the mean features.
# Overall luminance says little about content, so the projection discounts
# it heavily in favor of color contrasts, spatial structure and variance;
# without this the embedding direction is pinned by brightness and barely
# responds to what is actually in the image.
LUMA_WEIGHT = 0.05


def _luma_discount() -> np.ndarray:
    d = np.zeros(_N_FEATURES)
    d[:15] = 1.0  # the 15 mean features; variances keep full weight
    d /= np.linalg.norm(d)
    return np.eye(_N_FEATURES) - (1.0 - LUMA_WEIGHT) * np.outer(d, d)


def normalize_prompt(prompt: str) -> str:
    """Lowercase and collapse whitespace; the toy backend's text key."""
    return " ".join(prompt.lower().split())


def similarity_loss(image_emb: np.ndarray, prompt_emb: np.ndarray) -> float:
    """1 - cosine similarity for unit vectors; 0 iff identical, max 2."""
    ie = np.asarray(image_emb, dtype=np.float64)
    pe = np.asarray(prompt_emb, dtype=np.float64)
    if ie.shape != pe.shape or ie.ndim != 1:
        raise ValueError(f"embedding shapes differ: {ie.shape} vs {pe.shape}")
    for name, v in (("image", ie), ("prompt", pe)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise ValueError(f"{name} embedding is not unit-norm")
    return float(1.0 - ie @ pe)


def _half_weights(n: int) -> np.ndarray:
    """Fraction of each unit pixel row lying in the leading half of [0, n].

    Rows sum to n/2 exactly; an odd middle row (or the single row of a
    1-pixel dimension) is shared half/half between the two sides.
    """
    return np.clip(n / 2.0 - np.arange(n), 0.0, 1.0)


def _as_pixels(img) -> np.ndarray:
    if isinstance(img, ImageBuffer):
        return img.pixels
    return np.asarray(img, dtype=np.float64)


class ToyScorer:
    """Deterministic, differentiable stand-in for a pretrained text-image
    embedding model."""

    name = "toy"
    differentiable = True

    def __init__(self, embed_dim: int = 64, seed: int = 0):
        if embed_dim < 2:
            raise ValueError(f"embed_dim must be >= 2, got {embed_dim}")
        self.embed_dim = embed_dim
        self.seed = seed
        rng = rng_from("toy-scorer-proj", seed, embed_dim)
        raw = rng.normal(0.0, 1.0 / np.sqrt(_N_FEATURES), (embed_dim, _N_FEATURES))
        self._proj = raw @ _luma_discount()

    def embed_text(self, prompt: str) -> np.ndarray:
        if not prompt or not prompt.strip():
            raise ValueError("prompt must be non-empty")
        key = normalize_prompt(prompt)
        rng = np.random.default_rng(derive_seed("toy-scorer-text", self.seed, key))
        v = rng.normal(0.0, 1.0, self.embed_dim)
        return v / np.linalg.norm(v)

    def _features(self, pixels: np.ndarray):
        h, w = pixels.shape[0], pixels.shape[1]
        wt, wl = _half_weights(h), _half_weights(w)
        wb, wr = 1.0 - wt, 1.0 - wl
        quads = [
            np.outer(wt, wl),
            np.outer(wt, wr),
            np.outer(wb, wl),
            np.outer(wb, wr),
        ]
        qnorm = h * w / 4.0
        feats = np.empty(_N_FEATURES)
        for qi, q in enumerate(quads):
            feats[3 * qi : 3 * qi + 3] = (
                np.tensordot(q, pixels, axes=([0, 1], [0, 1])) / qnorm
            )
        mean = pixels.mean(axis=(0, 1))
        feats[12:15] = mean
        feats[15:18] = (pixels**2).mean(axis=(0, 1)) - mean**2
        return feats, quads, qnorm, mean

    def embed_image(self, img) -> np.ndarray:
        emb, _ = self.embed_image_and_vjp(img)
        return emb

    def embed_image_and_vjp(self, img):
        """Embedding plus a vjp closure mapping embedding-space gradients
        back to pixel-space gradients."""
        pixels = _as_pixels(img)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"image must have shape (H, W, 3), got {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("image contains non-finite pixels")
        feats, quads, qnorm, mean = self._features(pixels)
        if np.linalg.norm(feats) < 1e-12:
            feats = feats + ZERO_FEATURE_EPS
        z = self._proj @ feats
        znorm = np.linalg.norm(z)
        emb = z / znorm

        h, w = pixels.shape[0], pixels.shape[1]
        npx = h * w

        def vjp(emb_grad: np.ndarray) -> np.ndarray:
            g = np.asarray(emb_grad, dtype=np.float64)
            g_z = (g - (g @ emb) * emb) / znorm
            g_f = self._proj.T @ g_z
            out = np.zeros_like(pixels)
            for qi, q in enumerate(quads):
                out += q[:, :, None] * (g_f[3 * qi : 3 * qi + 3] / qnorm)
            out += g_f[12:15] / npx
            out += (2.0 / npx) * (pixels - mean) * g_f[15:18]
            return out

        return emb, vjp

    def loss_and_pixel_grad(self, img, text_embedding: np.ndarray):
        """Similarity loss against a prompt embedding, and its gradient
        w.r.t. every pixel."""
        emb, vjp = self.embed_image_and_vjp(img)
        loss = similarity_loss(emb, text_embedding)
        return loss, vjp(-np.asarray(text_embedding, dtype=np.float64))


_BACKENDS = {"toy": ToyScorer}


def register_backend(name: str, factory) -> None:
    """Register an adapter factory; ``factory(**kwargs)`` must return an
    object satisfying the backend surface described in the module docs."""
    _BACKENDS[name] = factory


def get_backend(name: str, **kwargs):
    try:
        factory = _BACKENDS[name]
    except KeyError:
        known = ", ".join(sorted(_BACKENDS))
        raise KeyError(
            f"unknown scorer backend {name!r} (registered: {known}); external "
            f"adapters must be registered via register_backend first"
        ) from None
    return factory(**kwargs)
