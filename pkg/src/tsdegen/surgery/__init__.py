from .ops import (
    perturb_attention_model,
    perturb_ffn,
    perturb_model,
    replace_attention,
    smooth_blocks,
    zero_positional_encoding,
)
from .perturb import perturb_attention, perturb_ffn_hidden, row_noise, smooth_ffn_output
from .specs import ATTENTION_KINDS, AttentionMode, PerturbSpec, SmoothingSpec
