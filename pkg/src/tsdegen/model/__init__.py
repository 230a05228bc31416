from .forecast import (
    ARCHITECTURES,
    ForecastModel,
    ModelConfig,
    build_model,
    posenc_similarity,
    similarity_by_distance,
)
from .layers import Block, Embedding, FeedForward, LayerNorm, Linear, Module, MultiHeadAttention
from .patching import PatchSpec, count_tokens, patch_time_spans, patchify
