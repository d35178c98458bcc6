import json
import re
from collections import Counter

import pytest

from affectgen.prompts import (
    AFFECTS,
    GENRES,
    affect_by_name,
    build_prompt,
    dataset_to_json,
    enumerate_dataset,
    genre_by_name,
)

CAPTION_PROMPTS = [
    ("happiness", "Cityscape", "A happy cityscape"),
    ("depression", "Cityscape", "A depressed cityscape"),
    ("anger", "Landscape", "An angry landscape"),
    ("depression", "Still Life", "A depressed still life"),
    ("anger", "Religious Painting", "An angry religious painting"),
    ("happiness", "Abstract", "A happy abstract painting"),
    ("happiness", "Sketch Study", "A happy sketch and study"),
    ("calmness", "Landscape", "A calm landscape"),
]


class TestBuildPrompt:
    @pytest.mark.parametrize("affect,genre,expected", CAPTION_PROMPTS)
    def test_caption_verified_strings(self, affect, genre, expected):
        assert build_prompt(affect_by_name(affect), genre_by_name(genre)) == expected

    def test_article_agreement(self):
        # "An" only before the vowel-initial adjective.
        angry = affect_by_name("anger")
        for genre in GENRES:
            assert build_prompt(angry, genre).startswith("An ")
        for name in ("calmness", "depression", "happiness"):
            for genre in GENRES:
                assert build_prompt(affect_by_name(name), genre).startswith("A ")


class TestEnumerateDataset:
    def test_cardinality_and_uniqueness(self):
        specs = enumerate_dataset()
        assert len(specs) == 32
        assert len({s.text for s in specs}) == 32
        assert sorted(s.index for s in specs) == list(range(32))
        assert Counter(s.affect.name for s in specs) == {
            a.name: 8 for a in AFFECTS
        }
        assert Counter(s.genre.name for s in specs) == {g.name: 4 for g in GENRES}

    def test_contains_caption_prompts(self):
        texts = {s.text for s in enumerate_dataset()}
        for _, _, expected in CAPTION_PROMPTS:
            assert expected in texts

    def test_prompt_pattern(self):
        pattern = re.compile(r"^(A|An) (angry|calm|depressed|happy) [a-z][a-z ]+$")
        for s in enumerate_dataset():
            assert pattern.match(s.text), s.text

    def test_stable_genre_major_order(self):
        specs = enumerate_dataset()
        assert specs[0].genre.name == "Abstract" and specs[0].affect.name == "anger"
        assert specs[3].affect.name == "happiness"
        assert specs[4].genre.name == "Cityscape"
        for s in specs:
            gi = [g.name for g in GENRES].index(s.genre.name)
            ai = [a.name for a in AFFECTS].index(s.affect.name)
            assert s.index == gi * 4 + ai

    def test_seeded_shuffle_is_permutation_with_stable_indices(self):
        base = enumerate_dataset()
        shuffled = enumerate_dataset(shuffle_seed=3)
        assert shuffled != base
        assert sorted(shuffled, key=lambda s: s.index) == base
        assert enumerate_dataset(shuffle_seed=3) == shuffled


class TestQuadrants:
    def test_bijection_over_valence_arousal(self):
        pairs = {(a.valence, a.arousal) for a in AFFECTS}
        assert pairs == {
            ("negative", "high"),
            ("positive", "low"),
            ("negative", "low"),
            ("positive", "high"),
        }
        assert affect_by_name("anger").valence == "negative"
        assert affect_by_name("anger").arousal == "high"
        assert affect_by_name("calmness").valence == "positive"
        assert affect_by_name("calmness").arousal == "low"
        assert affect_by_name("depression").valence == "negative"
        assert affect_by_name("depression").arousal == "low"
        assert affect_by_name("happiness").valence == "positive"
        assert affect_by_name("happiness").arousal == "high"

    def test_unknown_labels(self):
        with pytest.raises(KeyError):
            affect_by_name("joy")
        with pytest.raises(KeyError):
            genre_by_name("Fresco")


class TestExport:
    def test_json_round_trip(self):
        rows = json.loads(dataset_to_json(enumerate_dataset()))
        assert len(rows) == 32
        assert rows[0] == {
            "index": 0,
            "affect": "anger",
            "genre": "Abstract",
            "prompt": "An angry abstract painting",
        }
