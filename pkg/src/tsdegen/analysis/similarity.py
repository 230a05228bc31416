"""Cosine similarity of positional encodings as a function of token distance."""

from __future__ import annotations

from ..model.forecast import posenc_similarity


def similarity_curve(model) -> list[tuple[int, float]]:
    return posenc_similarity(model)


def flatness(curve: list[tuple[int, float]]) -> float:
    """Max minus min of the curve beyond distance 0 (0.0 when fewer than two such points)."""
    values = [s for d, s in curve if d > 0]
    return max(values) - min(values) if len(values) > 1 else 0.0
