"""Fixed-length overlapping token windows for long inputs.

A window plan of 500 tokens with 50 overlapping tokens means consecutive
windows start 450 tokens apart; the step is ``window - overlap``. The final
window is kept even when short (padding is the encoder's concern).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

# Interpretation of the configured overlap: shared tokens between consecutive
# windows, i.e. step = window - overlap. Flip to `overlap` here if a raw step
# semantics is ever wanted instead.
def _step(window: int, overlap: int) -> int:
    return window - overlap


@dataclass(frozen=True)
class ChunkPlan:
    window: int = 500
    overlap: int = 50
    max_chunks: int | None = 4

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("window must be positive")
        if self.overlap < 0:
            raise ValueError("overlap must be non-negative")
        if self.overlap >= self.window:
            raise ValueError(f"overlap ({self.overlap}) must be smaller than window ({self.window})")
        if self.max_chunks is not None and self.max_chunks < 1:
            raise ValueError("max_chunks must be >= 1 when set")


# Plan used in front of the abstractive generator: wider windows, uncapped
# so every part of the text contributes to the summary.
SUMMARIZER_PLAN = ChunkPlan(window=1000, overlap=50, max_chunks=None)


@dataclass
class ChunkSet:
    """Ordered windows plus their start offsets in the source sequence."""

    chunks: list[list]
    offsets: list[int]

    def __len__(self) -> int:
        return len(self.chunks)

    def __iter__(self):
        return iter(zip(self.offsets, self.chunks))


def chunk(tokens: Sequence, plan: ChunkPlan = ChunkPlan()) -> ChunkSet:
    """Split ``tokens`` into overlapping windows according to ``plan``.

    Window i starts at ``i * (window - overlap)``; the last window ends at the
    sequence end. When ``max_chunks`` is set, only the first windows are kept
    and the tail of the sequence is discarded.
    """
    n = len(tokens)
    if n == 0:
        raise ValueError("cannot chunk an empty token sequence")
    step = _step(plan.window, plan.overlap)
    offsets: list[int] = []
    pos = 0
    while True:
        offsets.append(pos)
        if pos + plan.window >= n:
            break
        pos += step
    if plan.max_chunks is not None:
        offsets = offsets[: plan.max_chunks]
    chunks = [list(tokens[o : o + plan.window]) for o in offsets]
    return ChunkSet(chunks=chunks, offsets=offsets)


def chunk_for_summarizer(tokens: Sequence) -> ChunkSet:
    """Windows sized for a generator with a ~1024-token input limit."""
    return chunk(tokens, SUMMARIZER_PLAN)
