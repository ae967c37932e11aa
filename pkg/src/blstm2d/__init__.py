"""BLSTM feature extraction with 2-D convolution and 2-D max pooling for text classification."""

from .config import RunConfig
from .model import VARIANTS, Architecture, ModelParams, forward, init_params

__all__ = ["VARIANTS", "Architecture", "ModelParams", "RunConfig", "forward", "init_params"]
__version__ = "0.1.0"
