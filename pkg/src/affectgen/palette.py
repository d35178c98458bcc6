"""15-bin color quantization and palette statistics.

Every pixel maps to exactly one of 15 bins: 12 hue bins centered at 0,
30, ..., 330 degrees (half-open, so a hue within 15 degrees of a center
belongs to it), plus white, black and gray for low-saturation pixels.
The monochrome split uses value thresholds: a pixel with saturation below
``sat_threshold`` is white when bright, black when dark, gray otherwise.
Thresholds are configurable; the defaults (0.15 / 0.85 / 0.15) keep the
monochrome bins well populated on sketch-like images.

Derived features group bins by everyday color words: ``monochrome`` is
white+black+gray, ``warm`` covers the red/orange/magenta bins, ``blue``
the azure/blue bins, ``green`` the green-family bins.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .codebook import ImageBuffer

__all__ = [
    "BIN_NAMES",
    "WARM_BINS",
    "BLUE_BINS",
    "GREEN_BINS",
    "MONOCHROME_BINS",
    "PaletteProfile",
    "PaletteAggregate",
    "CorrelationReport",
    "UndefinedCorrelationError",
    "quantize_pixel",
    "quantize_image",
    "palette_profile",
    "aggregate_profiles",
    "correlate_feature_ratings",
    "derived_features",
    "profiles_to_csv",
    "aggregates_to_csv",
]

BIN_NAMES = tuple(f"hue_{30 * i:03d}" for i in range(12)) + ("white", "black", "gray")

WHITE_BIN, BLACK_BIN, GRAY_BIN = 12, 13, 14
MONOCHROME_BINS = (WHITE_BIN, BLACK_BIN, GRAY_BIN)
WARM_BINS = (0, 1, 10)  # red 0, orange 30, magenta 300
BLUE_BINS = (7, 8)  # azure 210, blue 240
GREEN_BINS = (4, 5)  # green 120, spring green 150

DEFAULT_SAT_THRESHOLD = 0.15
DEFAULT_WHITE_VALUE = 0.85
DEFAULT_BLACK_VALUE = 0.15


class UndefinedCorrelationError(ValueError):
    """Pearson correlation is undefined (a variable has zero variance)."""


@dataclass(frozen=True)
class PaletteProfile:
    image_id: str
    ratios: np.ndarray  # (15,), sums to 1

    def __post_init__(self):
        r = self.ratios
        if r.shape != (15,):
            raise ValueError(f"ratios must have shape (15,), got {r.shape}")
        if r.min() < 0.0 or r.max() > 1.0 or abs(r.sum() - 1.0) > 1e-9:
            raise ValueError("ratios must lie in [0, 1] and sum to 1 within 1e-9")


@dataclass(frozen=True)
class PaletteAggregate:
    group: str
    n_images: int
    mean_ratios: np.ndarray
    monochrome: float
    warm: float
    blue: float
    green: float


@dataclass(frozen=True)
class CorrelationReport:
    feature: str
    r: float
    n: int
    p_value: float


def _rgb_to_hsv(pixels: np.ndarray):
    """Vectorized RGB -> (hue degrees, saturation, value) on [0,1] input."""
    r, g, b = pixels[..., 0], pixels[..., 1], pixels[..., 2]
    v = pixels.max(axis=-1)
    c = v - pixels.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe_c) % 6.0,
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h * 60.0, 0.0)
    return h, s, v


def quantize_image(
    pixels: np.ndarray,
    sat_threshold: float = DEFAULT_SAT_THRESHOLD,
    white_value: float = DEFAULT_WHITE_VALUE,
    black_value: float = DEFAULT_BLACK_VALUE,
) -> np.ndarray:
    """Map an (..., 3) pixel array to bin indices 0-14."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape[-1] != 3:
        raise ValueError(f"expected trailing RGB axis, got shape {pixels.shape}")
    if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
        raise ValueError("pixel channels must lie in [0, 1]")
    h, s, v = _rgb_to_hsv(pixels)
    hue_bin = np.floor(((h + 15.0) % 360.0) / 30.0).astype(np.int64)
    hue_bin = np.minimum(hue_bin, 11)
    mono = np.where(v >= white_value, WHITE_BIN, np.where(v <= black_value, BLACK_BIN, GRAY_BIN))
    return np.where(s < sat_threshold, mono, hue_bin)


def quantize_pixel(r: float, g: float, b: float, **thresholds) -> int:
    """Bin index for a single pixel; see :func:`quantize_image`."""
    return int(quantize_image(np.array([r, g, b]), **thresholds))


def palette_profile(img, image_id: str = "", **thresholds) -> PaletteProfile:
    """Per-bin pixel ratios for one image."""
    pixels = img.pixels if isinstance(img, ImageBuffer) else np.asarray(img, dtype=np.float64)
    bins = quantize_image(pixels, **thresholds)
    counts = np.bincount(bins.ravel(), minlength=15).astype(np.float64)
    return PaletteProfile(image_id=image_id, ratios=counts / bins.size)


def derived_features(ratios: np.ndarray) -> dict:
    ratios = np.asarray(ratios)
    return {
        "monochrome": float(ratios[list(MONOCHROME_BINS)].sum()),
        "warm": float(ratios[list(WARM_BINS)].sum()),
        "blue": float(ratios[list(BLUE_BINS)].sum()),
        "green": float(ratios[list(GREEN_BINS)].sum()),
    }


def aggregate_profiles(profiles, group_of, expected_groups=None) -> list[PaletteAggregate]:
    """Mean palette per group plus derived features.

    ``group_of`` maps image_id -> group key. Groups come out sorted by
    name unless ``expected_groups`` fixes an order, in which case a group
    with no member images is an error.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("no profiles to aggregate")
    members: dict[str, list[np.ndarray]] = {}
    for p in profiles:
        if p.image_id not in group_of:
            raise KeyError(f"image {p.image_id!r} has no group assignment")
        members.setdefault(group_of[p.image_id], []).append(p.ratios)
    if expected_groups is None:
        order = sorted(members)
    else:
        order = list(expected_groups)
        for g in order:
            if g not in members:
                raise ValueError(f"group {g!r} has no images")
    out = []
    for g in order:
        mean = np.mean(members[g], axis=0)
        out.append(
            PaletteAggregate(
                group=g, n_images=len(members[g]), mean_ratios=mean, **derived_features(mean)
            )
        )
    return out


def correlate_feature_ratings(values, ratings, feature: str = "") -> CorrelationReport:
    """Pearson r with a two-sided p-value from the t distribution."""
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(ratings, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"values and ratings must be equal-length 1-d, got {x.shape} vs {y.shape}")
    n = x.size
    if n < 3:
        raise ValueError(f"need at least 3 pairs, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError(
            f"correlation of {feature or 'feature'} undefined: zero variance"
        )
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    r = float(np.clip(r, -1.0, 1.0))
    if 1.0 - r * r <= 0.0:
        p = 0.0
    else:
        t = r * np.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return CorrelationReport(feature=feature, r=r, n=n, p_value=p)


_DERIVED_COLS = ("monochrome", "warm", "blue", "green")


def profiles_to_csv(profiles) -> str:
    """One row per image: 15 ratio columns then the 4 derived features."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("image_id",) + BIN_NAMES + _DERIVED_COLS)
    for p in profiles:
        d = derived_features(p.ratios)
        w.writerow(
            [p.image_id]
            + [f"{x:.9f}" for x in p.ratios]
            + [f"{d[c]:.9f}" for c in _DERIVED_COLS]
        )
    return buf.getvalue()


def aggregates_to_csv(aggregates) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("group", "n_images") + BIN_NAMES + _DERIVED_COLS)
    for a in aggregates:
        w.writerow(
            [a.group, a.n_images]
            + [f"{x:.9f}" for x in a.mean_ratios]
            + [f"{getattr(a, c):.9f}" for c in _DERIVED_COLS]
        )
    return buf.getvalue()
