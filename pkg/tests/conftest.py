"""Shared fixtures: small filterbanks, synthetic banks, tiny models.

Everything here is sized for speed; the acceptance suite builds the
full-size configurations itself.
"""

from __future__ import annotations

import numpy as np
import pytest

from noisebands.bank import NoiseBandBank, bake_bank
from noisebands.filterbank import FilterbankConfig, build_filterbank
from noisebands.model import ModelConfig, init_params


def make_toy_bank(num_bands: int = 8, length: int = 64, seed: int = 11) -> NoiseBandBank:
    """A synthetic bank of plain random samples (not baked from filters).

    Kernel, gradient, and protocol tests only need *some* periodic band
    signals; skipping the design/bake step keeps them fast.
    """
    rng = np.random.default_rng(seed)
    bands = rng.standard_normal((num_bands, length)).astype(np.float32)
    bands /= np.abs(bands).max()
    return NoiseBandBank(
        bands=bands,
        a_max=1.0,
        seed=seed,
        config_hash=b"\x00" * 32,
        sample_rate=8000.0,
    )


@pytest.fixture(scope="session")
def toy_bank() -> NoiseBandBank:
    return make_toy_bank()


@pytest.fixture(scope="session")
def small_fb_config() -> FilterbankConfig:
    return FilterbankConfig(sample_rate=8000.0, num_filters=16, f_min=40.0)


@pytest.fixture(scope="session")
def small_fb(small_fb_config):
    return build_filterbank(small_fb_config)


@pytest.fixture(scope="session")
def small_bank(small_fb) -> NoiseBandBank:
    return bake_bank(small_fb, seed=77)


@pytest.fixture(scope="session")
def tiny_model_config() -> ModelConfig:
    return ModelConfig(num_controls=1, hidden_size=4, num_bands=8, output_depth=3)


@pytest.fixture()
def tiny_params(tiny_model_config):
    return init_params(tiny_model_config, seed=3)
