"""Affect-driven image generation via categorical codebook optimization,
plus the palette and survey analyses used to evaluate the outputs."""

from .codebook import (
    Codebook,
    ImageBuffer,
    argmax_codes,
    decode_hard,
    decode_soft,
    init_logit_grid,
    load_codebook,
    sample_codes,
    save_codebook,
    softmax_grid,
    toy_codebook,
)
from .optimizer import (
    AdamWConfig,
    AdamWState,
    GenerationResult,
    adamw_step,
    batch_generate,
    init_adamw_state,
    run_generation,
)
from .palette import (
    PaletteProfile,
    aggregate_profiles,
    correlate_feature_ratings,
    palette_profile,
    quantize_pixel,
)
from .prompts import AFFECTS, GENRES, PromptSpec, build_prompt, enumerate_dataset
from .scorer import ToyScorer, get_backend, register_backend, similarity_loss
from .survey import (
    SurveyDataset,
    confusion_matrix,
    images_majority_matched,
    load_survey,
    per_group_summary,
    valence_arousal_summary,
)

__version__ = "0.1.0"
