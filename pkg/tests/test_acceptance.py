"""Acceptance gate: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the one-line
PASS/FAIL verdict (and elapsed time) per criterion.
"""

import functools
import json
import time

import numpy as np
from table_fixtures import (
    TABLE1_ROUNDED,
    TABLE2_ACCURACY,
    majority_match_rows,
    rows_to_csv,
    rows_to_dataset,
    table1_rows,
)

from affectgen.cli import main as cli_main
from affectgen.codebook import (
    decode_soft,
    init_logit_grid,
    sample_codes,
    soft_decode_and_vjp,
    softmax_grid,
    softmax_vjp,
    toy_codebook,
)
from affectgen.optimizer import AdamWConfig, adamw_step, init_adamw_state, run_generation
from affectgen.palette import correlate_feature_ratings, palette_profile
from affectgen.prompts import enumerate_dataset
from affectgen.scorer import ToyScorer
from affectgen.survey import images_majority_matched


def criterion(num, name, max_seconds):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.monotonic()
            try:
                fn(*args, **kwargs)
                elapsed = time.monotonic() - start
                assert elapsed < max_seconds, (
                    f"criterion {num} exceeded its {max_seconds}s budget ({elapsed:.1f}s)"
                )
            except BaseException:
                print(f"[acceptance] criterion {num} ({name}): FAIL")
                raise
            print(f"[acceptance] criterion {num} ({name}): PASS ({elapsed:.2f}s)")

        return wrapper

    return decorate


@criterion(1, "survey round-trip reproduces the published tables", max_seconds=1.0)
def test_criterion_1_survey_round_trip(tmp_path):
    csv_path = tmp_path / "survey.csv"
    rows_to_csv(table1_rows(), csv_path)
    out = tmp_path / "report"
    assert cli_main(["survey", "--csv", str(csv_path), "--out", str(out), "--no-figures"]) == 0

    confusion_lines = (out / "confusion.csv").read_text().strip().split("\n")
    affects = ("anger", "calmness", "depression", "happiness")
    for i, affect in enumerate(affects):
        fields = confusion_lines[1 + i].split(",")
        assert fields[0] == affect
        rounded = [int(np.floor(float(x) + 0.5)) for x in fields[1:]]
        assert rounded == TABLE1_ROUNDED[affect], affect

    per_affect = (out / "per_affect.csv").read_text().strip().split("\n")
    header = per_affect[0].split(",")
    acc_col = header.index("accuracy_pct")
    for line in per_affect[1:]:
        fields = line.split(",")
        assert int(np.floor(float(fields[acc_col]) + 0.5)) == TABLE2_ACCURACY[fields[0]]


@criterion(2, "majority-match statistic", max_seconds=1.0)
def test_criterion_2_majority_match():
    ds = rows_to_dataset(majority_match_rows(n_matched=21, n_images=32))
    pct = images_majority_matched(ds)
    assert abs(pct - 65.6) <= 0.1


@criterion(3, "end-to-end gradient matches finite differences", max_seconds=30.0)
def test_criterion_3_gradient_correctness():
    cb = toy_codebook(num_codes=4, code_dim=3, patch_size=4, seed=5)
    scorer = ToyScorer()
    text_emb = scorer.embed_text("A happy cityscape")
    rng = np.random.default_rng(21)
    h = 1e-6
    checked = 0
    for instance in range(10):
        logits = init_logit_grid(2, 2, 4, 1.0, seed=instance)
        probs = softmax_grid(logits)
        img, dec_vjp = soft_decode_and_vjp(probs, cb)
        _, pixel_grad = scorer.loss_and_pixel_grad(img, text_emb)
        analytic = softmax_vjp(probs, dec_vjp(pixel_grad))

        def loss_at(lg):
            im = decode_soft(softmax_grid(lg), cb)
            loss, _ = scorer.loss_and_pixel_grad(im, text_emb)
            return loss

        for _ in range(12):
            i, j, k = rng.integers(2), rng.integers(2), rng.integers(4)
            lp, lm = logits.copy(), logits.copy()
            lp[i, j, k] += h
            lm[i, j, k] -= h
            fd = (loss_at(lp) - loss_at(lm)) / (2 * h)
            an = analytic[i, j, k]
            assert abs(an - fd) <= 1e-4 * max(abs(an), abs(fd)) + 1e-10, (
                f"instance {instance} coord {(i, j, k)}: analytic {an} vs fd {fd}"
            )
            checked += 1
    assert checked >= 100


@criterion(4, "optimization makes real progress on the toy problem", max_seconds=120.0)
def test_criterion_4_optimization_progress():
    cb = toy_codebook(num_codes=8, code_dim=6, patch_size=8, seed=11)
    scorer = ToyScorer()
    cfg = AdamWConfig(steps=200)
    improved = 0
    reductions = []
    for seed in range(30):
        res = run_generation(
            "A happy cityscape", cb, scorer, cfg, grid_rows=4, grid_cols=4, seed=seed
        )
        initial, final = res.loss_trajectory[0], res.loss_trajectory[-1]
        if final < initial:
            improved += 1
        reductions.append((initial - final) / initial)
    assert improved >= 28, f"only {improved}/30 runs improved"
    median = float(np.median(reductions))
    assert median >= 0.30, f"median relative reduction {median:.3f} < 0.30"


@criterion(5, "AdamW first-step closed forms and step-size bound", max_seconds=1.0)
def test_criterion_5_adamw_correctness():
    # theta=1, g=2, lr=0.1, betas=(0.9, 0.999), eps=1e-8, wd=0.
    cfg = AdamWConfig(learning_rate=0.1)
    new, _ = adamw_step(np.array([1.0]), np.array([2.0]), init_adamw_state((1,)), cfg)
    assert abs(new[0] - (1.0 - 0.1 * 2.0 / (2.0 + 1e-8))) < 1e-10

    # wd=0.1, g=0, lr=0.1, theta=1 -> 0.99 from decay alone.
    cfg = AdamWConfig(learning_rate=0.1, weight_decay=0.1)
    new, _ = adamw_step(np.array([1.0]), np.array([0.0]), init_adamw_state((1,)), cfg)
    assert abs(new[0] - 0.99) < 1e-10

    # beta1=beta2=0, wd=0: per-coordinate |step| never exceeds lr.
    rng = np.random.default_rng(2)
    cfg = AdamWConfig(learning_rate=0.07, beta1=0.0, beta2=0.0)
    params = rng.normal(size=100)
    state = init_adamw_state(params.shape)
    for _ in range(10):
        grads = rng.normal(scale=rng.uniform(0.01, 100.0), size=100)
        new, state = adamw_step(params, grads, state, cfg)
        assert np.abs(new - params).max() <= cfg.learning_rate + 1e-15
        params = new


@criterion(6, "sampling passes chi-square goodness of fit", max_seconds=10.0)
def test_criterion_6_sampling_fidelity():
    from scipy import stats

    rng = np.random.default_rng(7)
    for trial in range(4):
        cell = rng.dirichlet(np.full(4, 5.0))
        cell = 0.9 * cell + 0.025
        probs = np.tile(cell, (250, 400, 1))  # 1e5 independent draws
        draws = sample_codes(probs, seed=300 + trial)
        counts = np.bincount(draws.ravel(), minlength=4)
        _, p = stats.chisquare(counts, f_exp=cell * draws.size)
        assert p > 0.01, f"trial {trial}: chi-square p {p:.4f}"


@criterion(7, "palette profiles are exact and normalized", max_seconds=10.0)
def test_criterion_7_palette_exactness():
    solid_red = np.tile([1.0, 0.0, 0.0], (8, 8, 1))
    ratios = palette_profile(solid_red).ratios
    assert ratios[0] == 1.0 and ratios[1:].sum() == 0.0

    half = np.tile([1.0, 0.0, 0.0], (8, 8, 1))
    half[:, 4:] = [0.0, 0.0, 1.0]
    ratios = palette_profile(half).ratios
    assert ratios[0] == 0.5 and ratios[8] == 0.5

    rng = np.random.default_rng(0)
    for _ in range(100):
        img = rng.uniform(0, 1, (rng.integers(1, 24), rng.integers(1, 24), 3))
        assert abs(palette_profile(img).ratios.sum() - 1.0) <= 1e-9


@criterion(8, "dataset protocol and bit-reproducibility", max_seconds=300.0)
def test_criterion_8_dataset_protocol(tmp_path):
    specs = enumerate_dataset()
    texts = [s.text for s in specs]
    assert len(texts) == 32 and len(set(texts)) == 32
    for required in (
        "A happy cityscape",
        "A depressed cityscape",
        "An angry landscape",
        "A depressed still life",
        "An angry religious painting",
    ):
        assert required in texts, required

    args = [
        "dataset", "--seed", "5", "--steps", "10", "--grid", "6x6",
        "--codes", "32", "--code-dim", "8", "--patch", "8", "--no-figures",
    ]
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert cli_main(args + ["--out", str(out1)]) == 0
    assert cli_main(args + ["--out", str(out2)]) == 0
    manifest1 = json.loads((out1 / "manifest.json").read_text())
    assert (out1 / "manifest.json").read_text() == (out2 / "manifest.json").read_text()
    assert len(manifest1["images"]) == 32
    for entry in manifest1["images"]:
        assert entry["status"] == "ok"
        b1 = (out1 / entry["png"]).read_bytes()
        b2 = (out2 / entry["png"]).read_bytes()
        assert b1 == b2, f"image {entry['index']} differs between reruns"
        assert (out1 / entry["sidecar"]).read_text() == (out2 / entry["sidecar"]).read_text()


@criterion(9, "correlation matches the direct-formula oracle", max_seconds=5.0)
def test_criterion_9_correlation_oracle():
    def oracle(x, y):
        n = x.size
        num = n * np.sum(x * y) - np.sum(x) * np.sum(y)
        den = np.sqrt(
            (n * np.sum(x * x) - np.sum(x) ** 2)
            * (n * np.sum(y * y) - np.sum(y) ** 2)
        )
        return num / den

    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(5, 60))
        x = rng.uniform(0, 1, n)
        y = 0.5 * x + rng.uniform(0, 1, n)
        rep = correlate_feature_ratings(x, y)
        assert abs(rep.r - oracle(x, y)) < 1e-12

    x = np.arange(12.0)
    assert correlate_feature_ratings(x, 2 * x + 1).r == 1.0
    assert correlate_feature_ratings(x, -3 * x + 4).r == -1.0
