"""Seeded synthetic corpora for desk-scale runs and smoke tests.

Documents are filler sentences salted with class-marker phrases, so a small
scratch-trained model can separate the classes quickly. Context bundles echo
the markers in tweet texts.
"""

from __future__ import annotations

import random

from .corpus import ContextBundle, Document, LabeledDataset

_FILLER = (
    "the council met on tuesday to discuss the budget for local schools and roads".split()
    + "officials from several agencies presented figures about housing energy and transit".split()
    + "residents asked questions during the open session before the committee adjourned".split()
)

_FAKE_MARKERS = (
    "shocking hoax exposed",
    "secret miracle cure",
    "they refuse to admit the coverup",
    "fabricated documents prove everything",
)

_REAL_MARKERS = (
    "according to official records",
    "the report was independently verified",
    "auditors confirmed the figures",
    "the spokesperson released a statement",
)

SYNTHETIC_LABEL_MAP = {"real": 0, "fake": 1}


def _sentence(rng: random.Random, markers: tuple[str, ...]) -> str:
    words = rng.choices(_FILLER, k=rng.randint(5, 9))
    marker = rng.choice(markers)
    insert_at = rng.randint(0, len(words))
    words[insert_at:insert_at] = marker.split()
    return " ".join(words).capitalize() + "."


def make_synthetic_dataset(
    n_docs: int = 500,
    seed: int = 0,
    fake_fraction: float = 0.5,
    sentences_per_doc: tuple[int, int] = (5, 8),
    with_context: bool = True,
) -> LabeledDataset:
    rng = random.Random(seed)
    n_fake = round(n_docs * fake_fraction)
    documents = []
    for i in range(n_docs):
        is_fake = i < n_fake
        markers = _FAKE_MARKERS if is_fake else _REAL_MARKERS
        n_sentences = rng.randint(*sentences_per_doc)
        body = " ".join(_sentence(rng, markers) for _ in range(n_sentences))
        title = _sentence(rng, markers).rstrip(".")
        context = None
        if with_context:
            n_tweets = rng.randint(1, 4)
            context = ContextBundle(
                author=f"writer{rng.randint(1, 20)}",
                source_url=f"https://example.org/story/{i}",
                tweet_authors=[f"user{rng.randint(1, 99)}" for _ in range(n_tweets)],
                tweet_texts=[_sentence(rng, markers) for _ in range(n_tweets)],
                retweet_count=rng.randint(0, 50),
            )
        documents.append(
            Document(
                id=f"doc-{i:05d}",
                title=title,
                body=body,
                label="fake" if is_fake else "real",
                context=context,
                domain_tag="synthetic",
            )
        )
    return LabeledDataset(documents, dict(SYNTHETIC_LABEL_MAP))
