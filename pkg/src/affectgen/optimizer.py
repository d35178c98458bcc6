"""AdamW and the iterative generation loop.

One generation run: initialize a Gaussian logit grid, then repeatedly
softmax the logits, decode an image (soft mixture by default, or a
straight-through hard sample), embed it, take the similarity loss against
the prompt embedding, backpropagate to the logits and apply an AdamW
update. The image handed back at the end always comes from the argmax of
the final logits, decoded hard, never from a sample.

Loss bookkeeping: the trajectory records the (relaxed) training loss at
initialization and after every step, so it has ``steps + 1`` entries. The
hard argmax image is scored once at the end (``final_hard_loss``), which
exposes the gap introduced by the relaxation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .codebook import (
    Codebook,
    ImageBuffer,
    argmax_codes,
    decode_hard,
    init_logit_grid,
    one_hot_grid,
    sample_codes,
    soft_decode_and_vjp,
    softmax_grid,
    softmax_vjp,
)
from .scorer import similarity_loss
from .seeds import derive_seed

__all__ = [
    "AdamWConfig",
    "AdamWState",
    "GenerationError",
    "BatchGenerationError",
    "GenerationResult",
    "init_adamw_state",
    "adamw_step",
    "run_generation",
    "batch_generate",
]

MODES = ("soft", "straight_through")


class GenerationError(RuntimeError):
    """A generation run went numerically bad or was misconfigured."""


class BatchGenerationError(RuntimeError):
    """One or more runs of a batch failed; carries the per-spec failures
    and whatever results completed."""

    def __init__(self, failures, results):
        self.failures = failures  # list of (index, prompt, exception)
        self.results = results  # index -> GenerationResult for completed runs
        detail = "; ".join(f"[{i}] {p!r}: {e}" for i, p, e in failures)
        super().__init__(f"{len(failures)} generation run(s) failed: {detail}")


@dataclass(frozen=True)
class AdamWConfig:
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    steps: int = 300

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {b}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")


@dataclass
class AdamWState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0


def init_adamw_state(shape) -> AdamWState:
    return AdamWState(np.zeros(shape), np.zeros(shape), 0)


def adamw_step(
    params: np.ndarray, grads: np.ndarray, state: AdamWState, cfg: AdamWConfig
):
    """One decoupled-weight-decay Adam update with bias correction.

    Pure: returns (new_params, new_state) without touching the inputs.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape:
        raise ValueError(
            f"gradient shape {grads.shape} does not match params {params.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise ValueError("grads contains non-finite values")
    t = state.step_count + 1
    m = cfg.beta1 * state.first_moment + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.second_moment + (1.0 - cfg.beta2) * grads * grads
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    update = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    new_params = params - update - cfg.learning_rate * cfg.weight_decay * params
    return new_params, AdamWState(m, v, t)


@dataclass(frozen=True)
class GenerationResult:
    final_image: ImageBuffer
    final_codes: np.ndarray
    loss_trajectory: list[float]
    final_hard_loss: float
    config_snapshot: dict
    seed: int
    prompt: str
    mode: str = "soft"

    def sidecar_json(self) -> str:
        """Everything needed to reproduce and inspect the run, minus the
        pixels themselves."""
        payload = {
            "prompt": self.prompt,
            "seed": self.seed,
            "mode": self.mode,
            "config": self.config_snapshot,
            "loss_trajectory": [float(x) for x in self.loss_trajectory],
            "final_hard_loss": float(self.final_hard_loss),
            "code_grid": [[int(c) for c in row] for row in self.final_codes],
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def _snapshot(prompt, cb, backend, opt, grid_rows, grid_cols, seed, mode, init_std):
    return {
        "prompt": prompt,
        "seed": seed,
        "mode": mode,
        "grid_rows": grid_rows,
        "grid_cols": grid_cols,
        "init_std": init_std,
        "steps": opt.steps,
        "learning_rate": opt.learning_rate,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "epsilon": opt.epsilon,
        "weight_decay": opt.weight_decay,
        "codebook": {
            "num_codes": cb.num_codes,
            "code_dim": cb.code_dim,
            "patch_size": cb.patch_size,
            "decode_seed": cb.decode_seed,
        },
        "backend": {"name": backend.name, "embed_dim": backend.embed_dim},
    }


def run_generation(
    prompt: str,
    cb: Codebook,
    backend,
    opt: AdamWConfig = AdamWConfig(),
    grid_rows: int = 16,
    grid_cols: int = 16,
    seed: int = 0,
    mode: str = "soft",
    init_std: float = 1.0,
) -> GenerationResult:
    """Optimize a logit grid against the prompt and decode the argmax."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not getattr(backend, "differentiable", False):
        raise GenerationError(
            f"backend {getattr(backend, 'name', backend)!r} exposes no gradients "
            f"and cannot drive optimization; use it for post-hoc scoring only"
        )
    text_emb = backend.embed_text(prompt)
    logits = init_logit_grid(grid_rows, grid_cols, cb.num_codes, init_std, seed)
    state = init_adamw_state(logits.shape)

    def evaluate(lg, step_idx):
        probs = softmax_grid(lg)
        if mode == "soft":
            img, dec_vjp = soft_decode_and_vjp(probs, cb)
            loss, pixel_grad = backend.loss_and_pixel_grad(img, text_emb)
            prob_grad = dec_vjp(pixel_grad)
        else:
            # Straight-through: hard sample forward (fresh draw each step),
            # gradients flow back as if the one-hot were the soft mixture.
            cg = sample_codes(probs, derive_seed(seed, "st-step", step_idx))
            hard = one_hot_grid(cg, cb.num_codes)
            img, dec_vjp = soft_decode_and_vjp(hard, cb)
            loss, pixel_grad = backend.loss_and_pixel_grad(img, text_emb)
            prob_grad = dec_vjp(pixel_grad)
        if not np.isfinite(loss):
            raise GenerationError(f"non-finite loss at step {step_idx}")
        return loss, softmax_vjp(probs, prob_grad)

    loss, grad = evaluate(logits, 0)
    trajectory = [loss]
    for step in range(opt.steps):
        logits, state = adamw_step(logits, grad, state, opt)
        loss, grad = evaluate(logits, step + 1)
        trajectory.append(loss)

    codes = argmax_codes(logits)
    final_image = decode_hard(codes, cb)
    final_hard_loss = similarity_loss(backend.embed_image(final_image), text_emb)
    return GenerationResult(
        final_image=final_image,
        final_codes=codes,
        loss_trajectory=trajectory,
        final_hard_loss=final_hard_loss,
        config_snapshot=_snapshot(
            prompt, cb, backend, opt, grid_rows, grid_cols, seed, mode, init_std
        ),
        seed=seed,
        prompt=prompt,
        mode=mode,
    )


def spec_seed(base_seed: int, index: int) -> int:
    """Per-prompt seed used by batch runs: stable in (base seed, index)."""
    return derive_seed(base_seed, "spec", index)


def batch_generate(
    specs,
    cb: Codebook,
    backend,
    opt: AdamWConfig = AdamWConfig(),
    grid_rows: int = 16,
    grid_cols: int = 16,
    base_seed: int = 0,
    mode: str = "soft",
    workers: int = 1,
) -> list[GenerationResult]:
    """Run generation for every prompt spec with per-spec derived seeds.

    Runs are independent, so results do not depend on execution order and
    the list lines up with the input specs. If any run fails the rest
    still complete; a BatchGenerationError then carries both the failures
    (with spec identity) and the finished results.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("specs must be non-empty")

    def run_one(spec):
        return run_generation(
            spec.text,
            cb,
            backend,
            opt,
            grid_rows,
            grid_cols,
            seed=spec_seed(base_seed, spec.index),
            mode=mode,
        )

    results: list = [None] * len(specs)
    failures = []
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_one, s): pos for pos, s in enumerate(specs)}
            for fut, pos in futures.items():
                try:
                    results[pos] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported per spec
                    failures.append((specs[pos].index, specs[pos].text, exc))
    else:
        for pos, spec in enumerate(specs):
            try:
                results[pos] = run_one(spec)
            except Exception as exc:  # noqa: BLE001 - reported per spec
                failures.append((spec.index, spec.text, exc))
    if failures:
        done = {
            specs[pos].index: r for pos, r in enumerate(results) if r is not None
        }
        raise BatchGenerationError(failures, done)
    return results
