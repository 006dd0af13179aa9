"""Majority voting across the per-representation models."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .classifier import ModelBundle, predict
from .corpus import Document
from .summarize import REPRESENTATIONS, SummaryStore

# Marker written to prediction records when no strict majority exists.
DRAW = "DRAW"


class VotingDrawError(RuntimeError):
    def __init__(self, tied_labels):
        self.tied_labels = sorted(tied_labels)
        super().__init__(f"no strict majority: labels {self.tied_labels} are tied")


class MissingBundleError(RuntimeError):
    pass


@dataclass
class VoteResult:
    final_label: int | str
    per_model: dict[str, tuple[int, list[float]]]


def vote(labels: Sequence[int]) -> int:
    """The strictly most frequent label; a tie at the top raises."""
    if not labels:
        raise ValueError("no votes given")
    counts = Counter(labels)
    top = max(counts.values())
    tied = [label for label, count in counts.items() if count == top]
    if len(tied) > 1:
        raise VotingDrawError(tied)
    return tied[0]


def run_ensemble(
    doc: Document,
    bundles: Mapping[str, ModelBundle],
    summaries: SummaryStore,
    on_draw: str = "raise",
    use_context: bool | None = None,
    fallback_summarizers: Mapping[str, object] | None = None,
) -> VoteResult:
    """Classify one document with all three representations and vote.

    ``on_draw`` selects the tie behaviour: "raise" propagates the draw,
    "mark" records the DRAW marker, and "average" falls back to the argmax
    of the mean probability vector (off the default path on purpose).
    """
    if on_draw not in ("raise", "mark", "average"):
        raise ValueError(f"unknown on_draw mode {on_draw!r}")
    missing = [rep for rep in REPRESENTATIONS if rep not in bundles]
    if missing:
        raise MissingBundleError(f"no trained model for: {', '.join(missing)}")

    per_model: dict[str, tuple[int, list[float]]] = {}
    for rep in REPRESENTATIONS:
        bundle = bundles[rep]
        if bundle.representation != rep:
            raise MissingBundleError(
                f"bundle under key {rep!r} was trained for {bundle.representation!r}"
            )
        fallback = (fallback_summarizers or {}).get(rep)
        per_model[rep] = predict(
            bundle, doc, summaries, fallback_summarizer=fallback, use_context=use_context
        )

    try:
        final = vote([label for label, _ in per_model.values()])
    except VotingDrawError:
        if on_draw == "raise":
            raise
        if on_draw == "mark":
            return VoteResult(final_label=DRAW, per_model=per_model)
        mean_probs = np.mean([probs for _, probs in per_model.values()], axis=0)
        final = int(np.argmax(mean_probs))
    return VoteResult(final_label=final, per_model=per_model)
