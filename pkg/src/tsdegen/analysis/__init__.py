from .capture import AttentionCapture, capture_attention
from .density import (
    DESK_SAMPLES,
    PAPER_SAMPLES,
    StateDensity,
    predicted_state_density,
    state_density_from_forecasts,
)
from .events import (
    EventAttentionStats,
    bootstrap_ci,
    event_attention_mass,
    event_patch_mask,
    most_recent_event_patch,
)
from .report import ExperimentReport, canonical_json, config_hash, content_hash, write_table
from .similarity import flatness, similarity_curve
from .surface import DEFAULT_ALPHAS, DEFAULT_ETAS, PerturbationSurface, asymmetry, perturbation_surface
