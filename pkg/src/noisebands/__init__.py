"""Neural noise-band synthesiser: filterbank-filtered noise driven by a
control network that predicts time-varying band amplitudes."""

from .bank import NoiseBandBank, bake_bank, bake_bank_config, load_cache, save_cache
from .errors import NoiseBandsError
from .filterbank import FilterbankConfig, build_filterbank, padded_length
from .model import ModelConfig, forward, init_params, param_count, scaled_sigmoid
from .synthesis import render, render_long, upsample

__version__ = "0.1.0"

__all__ = [
    "FilterbankConfig", "ModelConfig", "NoiseBandBank", "NoiseBandsError",
    "bake_bank", "bake_bank_config", "build_filterbank", "forward",
    "init_params", "load_cache", "padded_length", "param_count", "render",
    "render_long", "save_cache", "scaled_sigmoid", "upsample", "__version__",
]
