"""Rater-response ingestion and the derived summary tables.

Input is a UTF-8 CSV with header ``participant_id,image_index,
emotion_answer,quality,novelty``. An emotion answer matching one of the
four canonical emotions (anger, calmness, depression, happiness)
case-insensitively is canonicalized; any other text is kept as a freeform
answer and pools into the "other" column of the confusion matrix.
Freeform answers are compared after trimming, whitespace collapsing and
case folding when counting distinct answers, but originals are preserved.

Summaries per affect or per genre report: accuracy (share of responses
naming the intended affect), mean distinct answers per image, and mean
quality/novelty with symmetric 95% confidence intervals. The CI is
computed over all individual ratings in the group by default
(``ci_basis="ratings"``); ``ci_basis="image_means"`` instead treats the
per-image mean ratings as the sample.

Valence/arousal aggregation scores whether the answer lands on the
intended side of each axis. Freeform answers carry no axis position, so
they are excluded from the denominator by default;
``include_other_as_incorrect=True`` counts them as misses instead (the
rule that reproduces response-share style percentages).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .prompts import PromptSpec, affect_by_name, enumerate_dataset

__all__ = [
    "CANONICAL_EMOTIONS",
    "SurveyFormatError",
    "SurveyResponse",
    "SurveyDataset",
    "ConfusionMatrix",
    "GroupSummary",
    "ValenceArousalSummary",
    "normalize_answer",
    "canonical_answer",
    "round_half_up",
    "load_survey",
    "confusion_matrix",
    "per_group_summary",
    "valence_arousal_summary",
    "images_majority_matched",
    "overall_accuracy",
    "confusion_to_csv",
    "format_confusion_text",
    "summaries_to_csv",
    "format_summaries_text",
]

CANONICAL_EMOTIONS = ("anger", "calmness", "depression", "happiness")

EXPECTED_HEADER = ["participant_id", "image_index", "emotion_answer", "quality", "novelty"]


class SurveyFormatError(ValueError):
    """Malformed survey CSV; the message names the offending row(s)."""


def normalize_answer(answer: str) -> str:
    return " ".join(answer.split()).casefold()


def canonical_answer(answer: str) -> str | None:
    """The canonical emotion name, or None for a freeform answer."""
    norm = normalize_answer(answer)
    return norm if norm in CANONICAL_EMOTIONS else None


@dataclass(frozen=True)
class SurveyResponse:
    participant_id: str
    image_index: int
    emotion_answer: str
    quality: int
    novelty: int

    def __post_init__(self):
        if not self.emotion_answer.strip():
            raise ValueError("emotion_answer must be non-empty")
        for name in ("quality", "novelty"):
            v = getattr(self, name)
            if not 1 <= v <= 5:
                raise ValueError(f"{name} must be in 1..5, got {v}")


@dataclass(frozen=True)
class SurveyDataset:
    responses: tuple[SurveyResponse, ...]
    prompts: dict[int, PromptSpec]

    def __post_init__(self):
        seen = set()
        for r in self.responses:
            if r.image_index not in self.prompts:
                raise ValueError(f"image_index {r.image_index} not in prompt table")
            key = (r.participant_id, r.image_index)
            if key in seen:
                raise ValueError(f"duplicate response for participant/image {key}")
            seen.add(key)

    def by_image(self) -> dict[int, list[SurveyResponse]]:
        out: dict[int, list[SurveyResponse]] = {}
        for r in self.responses:
            out.setdefault(r.image_index, []).append(r)
        return out


def load_survey(path, prompts=None) -> SurveyDataset:
    """Parse and validate a survey CSV; row numbers count the header as 1."""
    if prompts is None:
        prompts = enumerate_dataset()
    prompt_table = {s.index: s for s in prompts}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SurveyFormatError(f"{path}: empty file; expected header {EXPECTED_HEADER}")
        if [h.strip() for h in header] != EXPECTED_HEADER:
            raise SurveyFormatError(
                f"{path}: bad header {header}; expected {EXPECTED_HEADER}"
            )
        responses = []
        seen: dict[tuple, int] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 5:
                raise SurveyFormatError(
                    f"{path}:{lineno}: expected 5 fields, got {len(row)}"
                )
            pid, idx_s, answer, quality_s, novelty_s = (c.strip() for c in row)
            try:
                idx = int(idx_s)
                quality = int(quality_s)
                novelty = int(novelty_s)
            except ValueError:
                raise SurveyFormatError(
                    f"{path}:{lineno}: image_index/quality/novelty must be integers"
                ) from None
            if idx not in prompt_table:
                raise SurveyFormatError(
                    f"{path}:{lineno}: unknown image_index {idx}"
                )
            for name, v in (("quality", quality), ("novelty", novelty)):
                if not 1 <= v <= 5:
                    raise SurveyFormatError(
                        f"{path}:{lineno}: {name} {v} outside 1..5"
                    )
            if not answer:
                raise SurveyFormatError(f"{path}:{lineno}: empty emotion_answer")
            key = (pid, idx)
            if key in seen:
                raise SurveyFormatError(
                    f"{path}:{lineno}: duplicate response for participant "
                    f"{pid!r} image {idx} (first at row {seen[key]})"
                )
            seen[key] = lineno
            responses.append(
                SurveyResponse(
                    participant_id=pid,
                    image_index=idx,
                    emotion_answer=answer,
                    quality=quality,
                    novelty=novelty,
                )
            )
    return SurveyDataset(responses=tuple(responses), prompts=prompt_table)


def round_half_up(x):
    """Display rounding for percentages; a rounded row may sum to 100 +/- 1."""
    return np.floor(np.asarray(x) + 0.5).astype(int)


@dataclass(frozen=True)
class ConfusionMatrix:
    row_labels: tuple[str, ...]  # intended affect
    col_labels: tuple[str, ...]  # labelled affect + "other"
    counts: np.ndarray  # (4, 5) ints
    percentages: np.ndarray  # row-normalized, sums to 100 exactly

    def rounded(self) -> np.ndarray:
        return round_half_up(self.percentages)

    def diagonal_accuracy(self) -> dict[str, float]:
        return {a: float(self.percentages[i, i]) for i, a in enumerate(self.row_labels)}


def confusion_matrix(ds: SurveyDataset) -> ConfusionMatrix:
    """Intended affect (rows) vs labelled affect (columns), row percents."""
    if not ds.responses:
        raise ValueError("dataset has no responses")
    rows = CANONICAL_EMOTIONS
    cols = CANONICAL_EMOTIONS + ("other",)
    counts = np.zeros((4, 5), dtype=np.int64)
    row_of = {a: i for i, a in enumerate(rows)}
    col_of = {a: i for i, a in enumerate(CANONICAL_EMOTIONS)}
    for r in ds.responses:
        i = row_of[ds.prompts[r.image_index].affect.name]
        canon = canonical_answer(r.emotion_answer)
        counts[i, col_of[canon] if canon is not None else 4] += 1
    totals = counts.sum(axis=1, keepdims=True)
    pct = np.divide(
        counts * 100.0, totals, out=np.zeros((4, 5)), where=totals > 0
    )
    return ConfusionMatrix(row_labels=rows, col_labels=cols, counts=counts, percentages=pct)


def _ci_halfwidth(values: np.ndarray) -> float:
    """Half-width of the symmetric two-sided 95% t interval for the mean."""
    n = values.size
    if n < 2:
        return 0.0
    sd = values.std(ddof=1)
    if sd == 0.0:
        return 0.0
    return float(stats.t.ppf(0.975, n - 1) * sd / np.sqrt(n))


@dataclass(frozen=True)
class GroupSummary:
    group: str
    n_responses: int
    n_images: int
    accuracy: float  # percent
    unique_answers: float  # mean distinct answers per image
    quality_mean: float
    quality_ci: float
    novelty_mean: float
    novelty_ci: float


def _group_key(ds: SurveyDataset, grouping: str):
    if grouping == "affect":
        return lambda idx: ds.prompts[idx].affect.name
    if grouping == "genre":
        return lambda idx: ds.prompts[idx].genre.name
    raise ValueError(f"grouping must be 'affect' or 'genre', got {grouping!r}")


def per_group_summary(
    ds: SurveyDataset, grouping: str = "affect", ci_basis: str = "ratings"
) -> list[GroupSummary]:
    """Accuracy, answer diversity and rating means per affect or genre."""
    if not ds.responses:
        raise ValueError("dataset has no responses")
    if ci_basis not in ("ratings", "image_means"):
        raise ValueError(f"ci_basis must be 'ratings' or 'image_means', got {ci_basis!r}")
    key_of = _group_key(ds, grouping)
    by_image = ds.by_image()
    if grouping == "affect":
        group_order = list(CANONICAL_EMOTIONS)
    else:
        group_order = sorted({s.genre.name for s in ds.prompts.values()})

    out = []
    for group in group_order:
        indices = [i for i in by_image if key_of(i) == group]
        if not indices:
            continue
        responses = [r for i in indices for r in by_image[i]]
        intended = {i: ds.prompts[i].affect.name for i in indices}
        correct = sum(
            1 for r in responses if canonical_answer(r.emotion_answer) == intended[r.image_index]
        )
        uniques = [
            len({normalize_answer(r.emotion_answer) for r in by_image[i]}) for i in indices
        ]
        if ci_basis == "ratings":
            quality = np.array([r.quality for r in responses], dtype=np.float64)
            novelty = np.array([r.novelty for r in responses], dtype=np.float64)
        else:
            quality = np.array(
                [np.mean([r.quality for r in by_image[i]]) for i in indices]
            )
            novelty = np.array(
                [np.mean([r.novelty for r in by_image[i]]) for i in indices]
            )
        out.append(
            GroupSummary(
                group=group,
                n_responses=len(responses),
                n_images=len(indices),
                accuracy=100.0 * correct / len(responses),
                unique_answers=float(np.mean(uniques)),
                quality_mean=float(quality.mean()),
                quality_ci=_ci_halfwidth(quality),
                novelty_mean=float(novelty.mean()),
                novelty_ci=_ci_halfwidth(novelty),
            )
        )
    return out


@dataclass(frozen=True)
class ValenceArousalSummary:
    valence: dict = field(default_factory=dict)  # negative/positive/overall -> percent
    arousal: dict = field(default_factory=dict)  # low/high/overall -> percent
    include_other_as_incorrect: bool = False


def valence_arousal_summary(
    ds: SurveyDataset, include_other_as_incorrect: bool = False
) -> ValenceArousalSummary:
    """Accuracy of classifying each affect axis rather than the emotion."""
    if not ds.responses:
        raise ValueError("dataset has no responses")

    def axis_accuracies(axis: str, sides: tuple[str, str]) -> dict:
        correct = {s: 0 for s in sides}
        total = {s: 0 for s in sides}
        for r in ds.responses:
            intended = getattr(ds.prompts[r.image_index].affect, axis)
            canon = canonical_answer(r.emotion_answer)
            if canon is None:
                if include_other_as_incorrect:
                    total[intended] += 1
                continue
            total[intended] += 1
            if getattr(affect_by_name(canon), axis) == intended:
                correct[intended] += 1
        out = {}
        for s in sides:
            out[s] = 100.0 * correct[s] / total[s] if total[s] else float("nan")
        grand = sum(total.values())
        out["overall"] = 100.0 * sum(correct.values()) / grand if grand else float("nan")
        return out

    return ValenceArousalSummary(
        valence=axis_accuracies("valence", ("negative", "positive")),
        arousal=axis_accuracies("arousal", ("low", "high")),
        include_other_as_incorrect=include_other_as_incorrect,
    )


def images_majority_matched(ds: SurveyDataset) -> float:
    """Percent of images whose responses name the intended affect at least
    half the time (inclusive)."""
    by_image = ds.by_image()
    if not by_image:
        raise ValueError("dataset has no responses")
    matched = 0
    for idx, responses in by_image.items():
        intended = ds.prompts[idx].affect.name
        correct = sum(1 for r in responses if canonical_answer(r.emotion_answer) == intended)
        if correct * 2 >= len(responses):
            matched += 1
    return 100.0 * matched / len(by_image)


def overall_accuracy(ds: SurveyDataset) -> float:
    if not ds.responses:
        raise ValueError("dataset has no responses")
    correct = sum(
        1
        for r in ds.responses
        if canonical_answer(r.emotion_answer) == ds.prompts[r.image_index].affect.name
    )
    return 100.0 * correct / len(ds.responses)


def confusion_to_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["intended"] + list(cm.col_labels))
    for i, row_label in enumerate(cm.row_labels):
        w.writerow([row_label] + [f"{x:.6f}" for x in cm.percentages[i]])
    return buf.getvalue()


def format_confusion_text(cm: ConfusionMatrix) -> str:
    """Aligned table with integer-rounded row percentages."""
    rounded = cm.rounded()
    header = ["Intended"] + [c.capitalize() for c in cm.col_labels]
    rows = [
        [r.capitalize()] + [f"{v}%" for v in rounded[i]]
        for i, r in enumerate(cm.row_labels)
    ]
    widths = [max(len(line[i]) for line in [header] + rows) for i in range(len(header))]
    lines = []
    for line in [header] + rows:
        lines.append(
            line[0].ljust(widths[0]) + "  " + "  ".join(
                cell.rjust(widths[i + 1]) for i, cell in enumerate(line[1:])
            )
        )
    return "\n".join(lines) + "\n"


def summaries_to_csv(summaries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        [
            "group",
            "n_responses",
            "n_images",
            "accuracy_pct",
            "unique_answers",
            "quality_mean",
            "quality_ci95",
            "novelty_mean",
            "novelty_ci95",
        ]
    )
    for s in summaries:
        w.writerow(
            [
                s.group,
                s.n_responses,
                s.n_images,
                f"{s.accuracy:.6f}",
                f"{s.unique_answers:.6f}",
                f"{s.quality_mean:.6f}",
                f"{s.quality_ci:.6f}",
                f"{s.novelty_mean:.6f}",
                f"{s.novelty_ci:.6f}",
            ]
        )
    return buf.getvalue()


def format_summaries_text(summaries, label: str) -> str:
    header = [label, "accuracy", "un. answers", "quality", "novelty"]
    rows = []
    for s in summaries:
        rows.append(
            [
                s.group.capitalize() if s.group in CANONICAL_EMOTIONS else s.group,
                f"{int(round_half_up(s.accuracy))}%",
                f"{s.unique_answers:.1f}",
                f"{s.quality_mean:.2f}±{s.quality_ci:.2f}",
                f"{s.novelty_mean:.2f}±{s.novelty_ci:.2f}",
            ]
        )
    widths = [max(len(line[i]) for line in [header] + rows) for i in range(len(header))]
    lines = []
    for line in [header] + rows:
        lines.append(
            line[0].ljust(widths[0]) + "  " + "  ".join(
                cell.rjust(widths[i + 1]) for i, cell in enumerate(line[1:])
            )
        )
    return "\n".join(lines) + "\n"
