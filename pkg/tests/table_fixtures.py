"""Synthetic survey datasets with known expected statistics.

The headline fixture reproduces the target confusion matrix. Three of the
four affect rows have integer percentages that sum to 100, so 100
responses with counts equal to the percentages recover them exactly. The
anger row's published integers sum to 101 (a rounding artifact), which no
count vector can produce exactly; 200 responses with counts
(129, 6, 20, 8, 37) give 64.5/3/10/4/18.5, which display-round (half-up)
to the published 65/3/10/4/19.
"""

import csv

from affectgen.prompts import enumerate_dataset
from affectgen.survey import SurveyDataset, SurveyResponse

ANSWER_COLUMNS = ("anger", "calmness", "depression", "happiness", "other")

TABLE1_COUNTS = {
    "anger": (129, 6, 20, 8, 37),  # of 200
    "calmness": (2, 62, 15, 8, 13),  # of 100
    "depression": (2, 11, 68, 1, 18),  # of 100
    "happiness": (4, 24, 11, 36, 25),  # of 100
}

TABLE1_ROUNDED = {
    "anger": [65, 3, 10, 4, 19],
    "calmness": [2, 62, 15, 8, 13],
    "depression": [2, 11, 68, 1, 18],
    "happiness": [4, 24, 11, 36, 25],
}

TABLE2_ACCURACY = {"anger": 65, "calmness": 62, "depression": 68, "happiness": 36}

FREEFORM_ANSWERS = ("Confusion", "Fear", "Anxiety")


def table1_rows():
    """(participant_id, image_index, answer, quality, novelty) tuples."""
    specs = enumerate_dataset()
    rows = []
    for affect, counts in TABLE1_COUNTS.items():
        images = [s.index for s in specs if s.affect.name == affect]
        answers = []
        for col, count in zip(ANSWER_COLUMNS, counts):
            for i in range(count):
                if col == "other":
                    answers.append(FREEFORM_ANSWERS[i % len(FREEFORM_ANSWERS)])
                else:
                    answers.append(col)
        for n, answer in enumerate(answers):
            rows.append(
                (f"{affect[:3]}{n:03d}", images[n % len(images)], answer, 3, 3)
            )
    return rows


def majority_match_rows(n_matched: int = 21, n_images: int = 32, raters: int = 10):
    """Fixture with exactly ``n_matched`` images majority-correct."""
    specs = enumerate_dataset()
    rows = []
    for spec in specs[:n_images]:
        correct_count = 6 if spec.index < n_matched else 4
        wrong = "calmness" if spec.affect.name != "calmness" else "anger"
        for p in range(raters):
            answer = spec.affect.name if p < correct_count else wrong
            rows.append((f"q{p:02d}", spec.index, answer, 3, 3))
    return rows


def rows_to_dataset(rows) -> SurveyDataset:
    responses = tuple(
        SurveyResponse(
            participant_id=pid,
            image_index=idx,
            emotion_answer=ans,
            quality=q,
            novelty=n,
        )
        for pid, idx, ans, q, n in rows
    )
    return SurveyDataset(responses=responses, prompts={s.index: s for s in enumerate_dataset()})


def rows_to_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["participant_id", "image_index", "emotion_answer", "quality", "novelty"])
        w.writerows(rows)


def random_dataset(rng, n_participants=12, freeform_rate=0.2) -> SurveyDataset:
    specs = enumerate_dataset()
    rows = []
    for p in range(n_participants):
        for s in specs:
            if rng.random() < freeform_rate:
                answer = f"feeling-{rng.integers(6)}"
            else:
                answer = ["anger", "calmness", "depression", "happiness"][rng.integers(4)]
            rows.append(
                (f"r{p:03d}", s.index, answer, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
            )
    return rows_to_dataset(rows)
