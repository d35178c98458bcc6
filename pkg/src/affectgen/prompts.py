"""The experimental prompt grid: four emotions crossed with eight painting
genres.

Each emotion sits in its own quadrant of the valence/arousal plane, and
each (emotion, genre) pair renders to a natural-language prompt of the
form "A <adjective> <genre>", with "An" before a vowel-initial adjective.
The full grid is 32 prompts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AffectLabel",
    "GenreLabel",
    "PromptSpec",
    "AFFECTS",
    "GENRES",
    "affect_by_name",
    "genre_by_name",
    "build_prompt",
    "enumerate_dataset",
    "dataset_to_json",
]


@dataclass(frozen=True)
class AffectLabel:
    name: str
    adjective: str
    valence: str  # "negative" | "positive"
    arousal: str  # "low" | "high"


@dataclass(frozen=True)
class GenreLabel:
    name: str
    surface_form: str


AFFECTS = (
    AffectLabel("anger", "angry", valence="negative", arousal="high"),
    AffectLabel("calmness", "calm", valence="positive", arousal="low"),
    AffectLabel("depression", "depressed", valence="negative", arousal="low"),
    AffectLabel("happiness", "happy", valence="positive", arousal="high"),
)

GENRES = (
    GenreLabel("Abstract", "abstract painting"),
    GenreLabel("Cityscape", "cityscape"),
    GenreLabel("Genre Painting", "genre painting"),
    GenreLabel("Landscape", "landscape"),
    GenreLabel("Portrait", "portrait"),
    GenreLabel("Religious Painting", "religious painting"),
    GenreLabel("Sketch Study", "sketch and study"),
    GenreLabel("Still Life", "still life"),
)

_AFFECT_BY_NAME = {a.name: a for a in AFFECTS}
_GENRE_BY_NAME = {g.name: g for g in GENRES}


def affect_by_name(name: str) -> AffectLabel:
    try:
        return _AFFECT_BY_NAME[name.lower()]
    except KeyError:
        known = ", ".join(sorted(_AFFECT_BY_NAME))
        raise KeyError(f"unknown affect {name!r} (expected one of: {known})") from None


def genre_by_name(name: str) -> GenreLabel:
    for g in GENRES:
        if g.name.lower() == name.lower():
            return g
    known = ", ".join(g.name for g in GENRES)
    raise KeyError(f"unknown genre {name!r} (expected one of: {known})")


@dataclass(frozen=True)
class PromptSpec:
    affect: AffectLabel
    genre: GenreLabel
    text: str
    index: int


_VOWELS = "aeiou"


def build_prompt(affect: AffectLabel, genre: GenreLabel) -> str:
    """Render "A <adjective> <genre>" with the article agreeing with the
    adjective's initial vowel."""
    article = "An" if affect.adjective[0].lower() in _VOWELS else "A"
    return f"{article} {affect.adjective} {genre.surface_form}"


def enumerate_dataset(shuffle_seed: int | None = None) -> list[PromptSpec]:
    """All 32 (affect, genre) combinations.

    Stable order: genre-major, affects alphabetical inside each genre, so
    index = 4 * genre position + affect position. ``shuffle_seed``
    optionally permutes the returned list (indices stay attached to their
    pairs), mirroring the one-off randomization used for surveys.
    """
    specs = []
    for gi, genre in enumerate(GENRES):
        for ai, affect in enumerate(AFFECTS):
            specs.append(
                PromptSpec(
                    affect=affect,
                    genre=genre,
                    text=build_prompt(affect, genre),
                    index=gi * len(AFFECTS) + ai,
                )
            )
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(specs))
        specs = [specs[i] for i in order]
    return specs


def dataset_to_json(specs) -> str:
    rows = [
        {
            "index": s.index,
            "affect": s.affect.name,
            "genre": s.genre.name,
            "prompt": s.text,
        }
        for s in specs
    ]
    return json.dumps(rows, indent=2)
