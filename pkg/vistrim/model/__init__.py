"""Package implementing the toy vision-language transformer"""
from .models import AttentionMaps
from .models import LayerAttention
from .models import ModelConfig
from .models import TokenSequence
from .toy import LayerWeights
from .toy import PrefillHook
from .toy import ToyVLM
from .toy import extract_blocks
from .toy import init_model
from .toy import prefill
from .signal import planted_count
from .signal import planted_sequence
from .signal import random_sequence

export = [ToyVLM, init_model, prefill, extract_blocks]

__all__ = [
    "AttentionMaps",
    "LayerAttention",
    "LayerWeights",
    "ModelConfig",
    "PrefillHook",
    "TokenSequence",
    "ToyVLM",
    "extract_blocks",
    "init_model",
    "planted_count",
    "planted_sequence",
    "prefill",
    "random_sequence"
]
