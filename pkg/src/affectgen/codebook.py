"""Patch codebook and categorical logit grid.

The optimization variable is a grid of independent categorical
distributions, one per image patch, over the entries of a codebook. This
module provides the grid primitives (Gaussian init, softmax, sampling,
argmax) and the two decode routes: ``decode_hard`` renders one selected
code per cell, ``decode_soft`` renders the probability-weighted mixture of
code vectors, which is differentiable and drives the optimization.

The built-in toy codebook decodes a code vector through a fixed seeded
linear map into patch pixels, calibrated so that every pure code (and thus
every mixture) lands strictly inside (0, 1) and the final clamp never
saturates. Clamped pixels get zero gradient.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .seeds import rng_from

__all__ = [
    "Codebook",
    "ImageBuffer",
    "toy_codebook",
    "save_codebook",
    "load_codebook",
    "init_logit_grid",
    "softmax_grid",
    "softmax_vjp",
    "sample_codes",
    "argmax_codes",
    "one_hot_grid",
    "decode_hard",
    "decode_soft",
    "soft_decode_and_vjp",
]


@dataclass(frozen=True)
class Codebook:
    """A set of code vectors plus a linear patch decoder.

    ``decode_weight`` maps a code vector (code_dim,) to the flattened
    patch_size*patch_size*3 pixel block; decoded pixels are clamped to
    [0, 1]. ``decode_seed`` records how the toy decoder was derived so a
    serialized codebook can be reconstructed; it is None for codebooks
    built from explicit decode arrays.
    """

    num_codes: int
    code_dim: int
    patch_size: int
    codes: np.ndarray
    decode_weight: np.ndarray
    decode_bias: np.ndarray
    decode_seed: int | None = field(default=None)

    def __post_init__(self):
        if self.num_codes < 2:
            raise ValueError(f"num_codes must be >= 2, got {self.num_codes}")
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.code_dim < 1:
            raise ValueError(f"code_dim must be >= 1, got {self.code_dim}")
        if self.codes.shape != (self.num_codes, self.code_dim):
            raise ValueError(
                f"codes must have shape {(self.num_codes, self.code_dim)}, "
                f"got {self.codes.shape}"
            )
        n_pix = self.patch_size * self.patch_size * 3
        if self.decode_weight.shape != (n_pix, self.code_dim):
            raise ValueError(
                f"decode_weight must have shape {(n_pix, self.code_dim)}, "
                f"got {self.decode_weight.shape}"
            )
        if self.decode_bias.shape != (n_pix,):
            raise ValueError(
                f"decode_bias must have shape {(n_pix,)}, got {self.decode_bias.shape}"
            )
        for name in ("codes", "decode_weight", "decode_bias"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def patch_pixels(self) -> int:
        return self.patch_size * self.patch_size * 3

    def decode_code_vector(self, vec: np.ndarray) -> np.ndarray:
        """Decode one code vector to a (patch, patch, 3) block in [0, 1]."""
        raw = self.decode_weight @ np.asarray(vec, dtype=np.float64) + self.decode_bias
        return np.clip(raw, 0.0, 1.0).reshape(self.patch_size, self.patch_size, 3)


@dataclass(frozen=True)
class ImageBuffer:
    """An RGB image with float pixels in [0, 1], shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must have shape (H, W, 3), got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels contain non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError(
                f"pixels must lie in [0, 1], got range [{px.min()}, {px.max()}]"
            )

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def to_png_bytes(self) -> bytes:
        """Encode as 8-bit PNG; [0,1] -> 0-255 by round-half-to-even."""
        q = np.rint(self.pixels * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(q, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_png_bytes())

    @classmethod
    def from_png(cls, path) -> "ImageBuffer":
        arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)
        return cls(arr / 255.0)


def _toy_decode_map(rng, num_codes: int, code_dim: int, patch_size: int, codes: np.ndarray):
    """Seeded linear decode map, calibrated against the given codes.

    The weight is a sum of a per-pixel texture component and a per-channel
    flat component, so distinct codes differ in overall patch color and
    not just in pixel-level detail that averages away. Rescaled so every
    pure code (hence every mixture) decodes into [0.1, 0.9], keeping the
    clamp inactive and gradients clean.
    """
    n_pix = patch_size * patch_size * 3
    texture = rng.normal(0.0, 1.0 / np.sqrt(code_dim), (n_pix, code_dim))
    flat = rng.normal(0.0, 1.0 / np.sqrt(code_dim), (3, code_dim))
    channel = np.arange(n_pix) % 3
    weight = 0.5 * texture + flat[channel]
    raw = codes @ weight.T
    lo, hi = raw.min(), raw.max()
    scale = 0.8 / (hi - lo)
    weight = weight * scale
    bias = np.full(n_pix, 0.5 - scale * (hi + lo) / 2.0)
    return weight, bias


def toy_codebook(
    num_codes: int = 1024,
    code_dim: int = 16,
    patch_size: int = 16,
    seed: int = 0,
) -> Codebook:
    """Build a reproducible synthetic codebook.

    Codes are standard-normal draws, stored at float32 precision so the
    binary serialization round-trips exactly.
    """
    rng = rng_from("toy-codebook", seed, num_codes, code_dim, patch_size)
    codes = rng.normal(0.0, 1.0, (num_codes, code_dim))
    codes = codes.astype("<f4").astype(np.float64)
    weight, bias = _toy_decode_map(rng, num_codes, code_dim, patch_size, codes)
    return Codebook(
        num_codes=num_codes,
        code_dim=code_dim,
        patch_size=patch_size,
        codes=codes,
        decode_weight=weight,
        decode_bias=bias,
        decode_seed=seed,
    )


def save_codebook(cb: Codebook, path) -> None:
    """Write a codebook: one-line JSON header, newline, little-endian
    float32 code blob in row-major order."""
    if cb.decode_seed is None:
        raise ValueError(
            "only codebooks with a decode_seed serialize; custom decode maps "
            "must be reconstructed by their adapter"
        )
    header = {
        "num_codes": cb.num_codes,
        "code_dim": cb.code_dim,
        "patch_size": cb.patch_size,
        "decode_seed": cb.decode_seed,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(cb.codes, dtype="<f4").tobytes())


def load_codebook(path) -> Codebook:
    """Read a codebook written by :func:`save_codebook`."""
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise ValueError(f"{path}: missing codebook header")
    header = json.loads(data[:nl].decode("utf-8"))
    num_codes = int(header["num_codes"])
    code_dim = int(header["code_dim"])
    patch_size = int(header["patch_size"])
    decode_seed = int(header["decode_seed"])
    blob = data[nl + 1 :]
    expected = num_codes * code_dim * 4
    if len(blob) != expected:
        raise ValueError(
            f"{path}: code blob has {len(blob)} bytes, expected {expected}"
        )
    codes = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    codes = codes.reshape(num_codes, code_dim)
    # Replay the factory's rng stream (skipping the code draws) and
    # recalibrate against the stored codes; float32 codes make this
    # bit-identical to the codebook that was saved.
    rng = rng_from("toy-codebook", decode_seed, num_codes, code_dim, patch_size)
    rng.normal(0.0, 1.0, (num_codes, code_dim))
    weight, bias = _toy_decode_map(rng, num_codes, code_dim, patch_size, codes)
    return Codebook(
        num_codes=num_codes,
        code_dim=code_dim,
        patch_size=patch_size,
        codes=codes,
        decode_weight=weight,
        decode_bias=bias,
        decode_seed=decode_seed,
    )


def init_logit_grid(
    rows: int, cols: int, num_codes: int, std: float = 1.0, seed: int = 0
) -> np.ndarray:
    """Gaussian-initialized logits, shape (rows, cols, num_codes)."""
    if rows < 1 or cols < 1 or num_codes < 1:
        raise ValueError(
            f"grid dimensions must be positive, got rows={rows} cols={cols} "
            f"num_codes={num_codes}"
        )
    if std <= 0:
        raise ValueError(f"std must be positive, got {std}")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, std, (rows, cols, num_codes))


def _check_logits(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 3:
        raise ValueError(f"logit grid must be 3-d (rows, cols, codes), got {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logit grid contains non-finite values")
    return logits


def _check_probs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3:
        raise ValueError(f"prob grid must be 3-d (rows, cols, codes), got {probs.shape}")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ValueError("prob grid entries must lie in [0, 1]")
    sums = probs.sum(axis=-1)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise ValueError("prob grid cells must sum to 1 within 1e-6")
    return probs


def softmax_grid(logits: np.ndarray) -> np.ndarray:
    """Per-cell softmax with max subtraction for overflow safety."""
    logits = _check_logits(logits)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def softmax_vjp(probs: np.ndarray, prob_grad: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. probabilities back to the logits."""
    inner = (prob_grad * probs).sum(axis=-1, keepdims=True)
    return probs * (prob_grad - inner)


def sample_codes(probs: np.ndarray, seed: int) -> np.ndarray:
    """Draw one code index per cell, independently, from its distribution."""
    probs = _check_probs(probs)
    rng = np.random.default_rng(seed)
    u = rng.random(probs.shape[:2])
    cum = probs.cumsum(axis=-1)
    idx = (cum < u[..., None]).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def argmax_codes(logits: np.ndarray) -> np.ndarray:
    """Per-cell index of the max logit; ties go to the lowest index."""
    logits = _check_logits(logits)
    return np.argmax(logits, axis=-1)


def one_hot_grid(code_grid: np.ndarray, num_codes: int) -> np.ndarray:
    """One-hot encode a code grid into a degenerate probability grid."""
    cg = np.asarray(code_grid)
    out = np.zeros(cg.shape + (num_codes,), dtype=np.float64)
    r, c = np.indices(cg.shape)
    out[r, c, cg] = 1.0
    return out


def _assemble(raw: np.ndarray, cb: Codebook) -> np.ndarray:
    """(rows, cols, patch_pixels) -> (rows*p, cols*p, 3)."""
    rows, cols, _ = raw.shape
    p = cb.patch_size
    blocks = raw.reshape(rows, cols, p, p, 3)
    return blocks.transpose(0, 2, 1, 3, 4).reshape(rows * p, cols * p, 3)


def _disassemble(pixels: np.ndarray, cb: Codebook) -> np.ndarray:
    """Inverse of :func:`_assemble`."""
    p = cb.patch_size
    rows, cols = pixels.shape[0] // p, pixels.shape[1] // p
    blocks = pixels.reshape(rows, p, cols, p, 3).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(rows, cols, p * p * 3)


def decode_hard(code_grid: np.ndarray, cb: Codebook) -> ImageBuffer:
    """Render each cell's selected code as its decoded patch."""
    cg = np.asarray(code_grid)
    if cg.ndim != 2:
        raise ValueError(f"code grid must be 2-d, got shape {cg.shape}")
    if not np.issubdtype(cg.dtype, np.integer):
        raise ValueError(f"code grid must be integer-typed, got {cg.dtype}")
    if cg.min() < 0 or cg.max() >= cb.num_codes:
        raise ValueError(
            f"code indices must lie in [0, {cb.num_codes}), "
            f"got range [{cg.min()}, {cg.max()}]"
        )
    vecs = cb.codes[cg]
    raw = vecs @ cb.decode_weight.T + cb.decode_bias
    return ImageBuffer(_assemble(np.clip(raw, 0.0, 1.0), cb))


def decode_soft(probs: np.ndarray, cb: Codebook) -> ImageBuffer:
    """Render each cell from its expected code vector (soft mixture)."""
    img, _ = soft_decode_and_vjp(probs, cb)
    return img


def soft_decode_and_vjp(probs: np.ndarray, cb: Codebook):
    """Soft decode plus a vjp closure mapping pixel grads to prob grads.

    Pixels clamped at the [0, 1] boundary contribute zero gradient.
    """
    probs = _check_probs(probs)
    if probs.shape[-1] != cb.num_codes:
        raise ValueError(
            f"prob grid has {probs.shape[-1]} codes, codebook has {cb.num_codes}"
        )
    mixed = probs @ cb.codes  # (rows, cols, code_dim)
    raw = mixed @ cb.decode_weight.T + cb.decode_bias
    pixels = np.clip(raw, 0.0, 1.0)
    pass_through = (raw > 0.0) & (raw < 1.0)

    def vjp(pixel_grad: np.ndarray) -> np.ndarray:
        g_raw = _disassemble(np.asarray(pixel_grad, dtype=np.float64), cb)
        g_raw = g_raw * pass_through
        g_mixed = g_raw @ cb.decode_weight
        return g_mixed @ cb.codes.T

    return ImageBuffer(_assemble(pixels, cb)), vjp
