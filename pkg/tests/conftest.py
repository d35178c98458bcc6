import numpy as np
import pytest

from affectgen.codebook import Codebook, toy_codebook
from affectgen.scorer import ToyScorer


@pytest.fixture(scope="session")
def small_codebook():
    """The standard small optimization fixture: 8 codes, 8px patches."""
    return toy_codebook(num_codes=8, code_dim=6, patch_size=8, seed=11)


@pytest.fixture(scope="session")
def tiny_codebook():
    """4 codes, 4px patches; cheap enough for finite-difference sweeps."""
    return toy_codebook(num_codes=4, code_dim=3, patch_size=4, seed=5)


@pytest.fixture(scope="session")
def bw_codebook():
    """Two codes decoding exactly to an all-black and an all-white patch."""
    n_pix = 4 * 4 * 3
    return Codebook(
        num_codes=2,
        code_dim=1,
        patch_size=4,
        codes=np.array([[0.0], [1.0]]),
        decode_weight=np.ones((n_pix, 1)),
        decode_bias=np.zeros(n_pix),
    )


@pytest.fixture(scope="session")
def scorer():
    return ToyScorer()
