"""Dataset ingestion, cleaning, splitting and class balancing.

Two adapters are provided: one for the per-article directory trees published
with the FakeNewsNet collection tool, and one for the CheckThat-style CSV
with four veracity classes. Cleaned datasets round-trip through JSONL.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

# Segment boundary inside content/context strings. The tokenizer emits a
# separator sentinel at every occurrence, so special tokens are never typed
# into the text itself.
SEGMENT_BREAK = "\x1f"

DEFAULT_TWEET_AUTHOR_DELIMITER = " | "

# Prefix rewrite rules applied to source URLs; first match wins.
DEFAULT_ARCHIVE_RULES: list[tuple[re.Pattern, str]] = [
    (re.compile(r"^https?://web\.archive\.org/web/[^/]+/(https?://.+)$"), r"\1"),
    (re.compile(r"^https?://web\.archive\.org/web/[^/]+/(.+)$"), r"\1"),
]


class IngestionError(RuntimeError):
    """Raised when a dataset cannot be read at all (bad path, bad schema)."""


def stable_hash(*parts) -> int:
    """Order-sensitive 31-bit hash, stable across processes and platforms."""
    joined = ":".join(str(p) for p in parts)
    digest = hashlib.blake2b(joined.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2**31)


def _dedup(items) -> list:
    seen = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


@dataclass
class ContextBundle:
    """Social/context side-information attached to one document."""

    author: str | None = None
    source_url: str | None = None
    tweet_authors: list[str] = field(default_factory=list)
    tweet_texts: list[str] = field(default_factory=list)
    retweet_count: int = 0

    def __post_init__(self):
        if self.retweet_count < 0:
            raise ValueError("retweet_count must be >= 0")
        self.tweet_texts = _dedup(self.tweet_texts)

    def to_dict(self) -> dict:
        return {
            "author": self.author,
            "source_url": self.source_url,
            "tweet_authors": list(self.tweet_authors),
            "tweet_texts": list(self.tweet_texts),
            "retweet_count": self.retweet_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContextBundle":
        return cls(
            author=d.get("author"),
            source_url=d.get("source_url"),
            tweet_authors=list(d.get("tweet_authors") or []),
            tweet_texts=list(d.get("tweet_texts") or []),
            retweet_count=int(d.get("retweet_count") or 0),
        )


@dataclass
class Document:
    """One news item: title, body, class label, optional context."""

    id: str
    title: str
    body: str
    label: str
    context: ContextBundle | None = None
    domain_tag: str = ""


@dataclass
class LabeledDataset:
    """Ordered documents plus the class-name -> integer-code mapping."""

    documents: list[Document]
    label_map: dict[str, int]

    def __post_init__(self):
        codes = sorted(self.label_map.values())
        if codes != list(range(len(codes))):
            raise ValueError(f"label codes must be contiguous from 0, got {codes}")
        for doc in self.documents:
            if doc.label not in self.label_map:
                raise ValueError(f"document {doc.id!r} has unknown label {doc.label!r}")

    def __len__(self) -> int:
        return len(self.documents)

    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in self.label_map}
        for doc in self.documents:
            counts[doc.label] += 1
        return counts

    def label_codes(self) -> list[int]:
        return [self.label_map[doc.label] for doc in self.documents]

    @property
    def num_classes(self) -> int:
        return len(self.label_map)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def strip_archive_prefix(url: str | None, rules=None) -> str | None:
    """Rewrite an archived URL back to the original one, if a rule matches."""
    if not url:
        return url
    for pattern, replacement in rules if rules is not None else DEFAULT_ARCHIVE_RULES:
        m = pattern.match(url)
        if m:
            return pattern.sub(replacement, url)
    return url


# ---------------------------------------------------------------------------
# FakeNewsNet adapter
# ---------------------------------------------------------------------------

FAKENEWSNET_LABEL_MAP = {"real": 0, "fake": 1}
_ARTICLE_FILENAMES = ("news content.json", "news_content.json", "news-content.json")


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_article_context(article_dir: Path, skipped: list) -> ContextBundle | None:
    tweet_authors: list[str] = []
    tweet_texts: list[str] = []
    retweet_count = 0
    tweets_dir = article_dir / "tweets"
    if tweets_dir.is_dir():
        for tweet_file in sorted(tweets_dir.glob("*.json")):
            try:
                tweet = _read_json(tweet_file)
            except (OSError, json.JSONDecodeError):
                skipped.append(str(tweet_file))
                continue
            text = tweet.get("text") or tweet.get("full_text")
            if text:
                tweet_texts.append(text)
            user = tweet.get("user") or {}
            name = user.get("screen_name") or user.get("name")
            if name:
                tweet_authors.append(str(name))
    retweets_dir = article_dir / "retweets"
    if retweets_dir.is_dir():
        for rt_file in sorted(retweets_dir.glob("*.json")):
            try:
                payload = _read_json(rt_file)
            except (OSError, json.JSONDecodeError):
                skipped.append(str(rt_file))
                continue
            entries = payload.get("retweets") if isinstance(payload, dict) else payload
            if isinstance(entries, list):
                retweet_count += len(entries)
    return ContextBundle(
        author=None,
        source_url=None,
        tweet_authors=tweet_authors,
        tweet_texts=tweet_texts,
        retweet_count=retweet_count,
    )


def load_fakenewsnet(root_path, domain: str) -> LabeledDataset:
    """Load one FakeNewsNet domain tree (``<root>/<domain>/{fake,real}/...``).

    Articles without body text are dropped; unreadable records are skipped
    with a warning. Labels map fake -> 1, real -> 0.
    """
    root = Path(root_path)
    domain_dir = root / domain
    if not domain_dir.is_dir():
        raise IngestionError(f"dataset directory not found: {domain_dir}")

    documents: list[Document] = []
    dropped_empty = 0
    skipped_unreadable: list[str] = []

    for label_name in ("fake", "real"):
        label_dir = domain_dir / label_name
        if not label_dir.is_dir():
            raise IngestionError(f"expected class directory missing: {label_dir}")
        for article_dir in sorted(p for p in label_dir.iterdir() if p.is_dir()):
            content_path = next(
                (article_dir / n for n in _ARTICLE_FILENAMES if (article_dir / n).is_file()),
                None,
            )
            if content_path is None:
                dropped_empty += 1
                continue
            try:
                record = _read_json(content_path)
            except (OSError, json.JSONDecodeError):
                skipped_unreadable.append(str(content_path))
                continue
            body = (record.get("text") or "").strip()
            if not body:
                dropped_empty += 1
                continue
            context = _load_article_context(article_dir, skipped_unreadable)
            authors = record.get("authors") or []
            context.author = ", ".join(a for a in authors if a) or None
            context.source_url = strip_archive_prefix(record.get("url") or None)
            documents.append(
                Document(
                    id=article_dir.name,
                    title=(record.get("title") or "").strip(),
                    body=body,
                    label=label_name,
                    context=context,
                    domain_tag=domain,
                )
            )

    dataset = LabeledDataset(documents, dict(FAKENEWSNET_LABEL_MAP))
    counts = dataset.class_counts()
    logger.info(
        "%s: kept %d (%d fake / %d real), dropped %d without article text, skipped %d unreadable files",
        domain, len(documents), counts["fake"], counts["real"],
        dropped_empty, len(skipped_unreadable),
    )
    return dataset


# ---------------------------------------------------------------------------
# Four-class CSV adapter
# ---------------------------------------------------------------------------

CTFAN_LABEL_MAP = {"False": 0, "Partially False": 1, "True": 2, "Other": 3}
_CTFAN_CANONICAL = {name.casefold(): name for name in CTFAN_LABEL_MAP}


def load_ctfan(csv_path) -> LabeledDataset:
    """Load a CheckThat-style CSV with title, text and a four-way rating."""
    import pandas as pd

    path = Path(csv_path)
    if not path.is_file():
        raise IngestionError(f"dataset file not found: {path}")
    frame = pd.read_csv(path)

    columns = {str(c).strip().casefold(): c for c in frame.columns}
    title_col = columns.get("title")
    text_col = columns.get("text")
    rating_col = columns.get("our rating") or columns.get("rating")
    id_col = columns.get("public_id") or columns.get("id")
    if title_col is None or text_col is None or rating_col is None:
        raise IngestionError(
            f"{path}: expected title/text/rating columns, found {list(frame.columns)}"
        )

    documents: list[Document] = []
    dropped_empty = 0
    for idx, row in frame.iterrows():
        rating_raw = row[rating_col]
        rating_key = " ".join(str(rating_raw).split()).casefold()
        if rating_key not in _CTFAN_CANONICAL:
            raise IngestionError(f"{path}: row {idx}: unknown rating {rating_raw!r}")
        body = row[text_col]
        body = "" if pd.isna(body) else str(body).strip()
        if not body:
            dropped_empty += 1
            continue
        title = row[title_col]
        title = "" if pd.isna(title) else str(title).strip()
        doc_id = str(row[id_col]) if id_col is not None else f"row-{idx}"
        documents.append(
            Document(
                id=doc_id,
                title=title,
                body=body,
                label=_CTFAN_CANONICAL[rating_key],
                context=None,
                domain_tag="ctfan",
            )
        )

    dataset = LabeledDataset(documents, dict(CTFAN_LABEL_MAP))
    logger.info(
        "%s: kept %d, dropped %d without text, class counts %s",
        path.name, len(documents), dropped_empty, dataset.class_counts(),
    )
    return dataset


# ---------------------------------------------------------------------------
# Split / balance
# ---------------------------------------------------------------------------


def split(dataset: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded disjoint train/validation partition with |train| = round(f*N).

    Documents are ordered by id before shuffling so the partition does not
    depend on ingestion order.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 documents to split")
    docs = sorted(dataset.documents, key=lambda d: d.id)
    rng = random.Random(spec.seed)
    rng.shuffle(docs)
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    train_docs = sorted(docs[:n_train], key=lambda d: d.id)
    val_docs = sorted(docs[n_train:], key=lambda d: d.id)
    return (
        LabeledDataset(train_docs, dict(dataset.label_map)),
        LabeledDataset(val_docs, dict(dataset.label_map)),
    )


def oversample(train: LabeledDataset, seed: int) -> LabeledDataset:
    """Duplicate minority-class documents (with replacement) up to the
    majority-class count. All original documents are retained."""
    counts = {name: c for name, c in train.class_counts().items() if c > 0}
    if len(counts) < 2:
        raise ValueError("oversampling needs at least 2 classes present")
    target = max(counts.values())
    rng = random.Random(seed)
    extra: list[Document] = []
    for name in sorted(counts):
        deficit = target - counts[name]
        if deficit == 0:
            continue
        pool = sorted((d for d in train.documents if d.label == name), key=lambda d: d.id)
        extra.extend(rng.choices(pool, k=deficit))
    return LabeledDataset(list(train.documents) + extra, dict(train.label_map))


# ---------------------------------------------------------------------------
# Model input strings
# ---------------------------------------------------------------------------


def build_content_string(doc: Document, body: str | None = None) -> str:
    """Title and body as two tokenizer segments (classification sentinel,
    title, separator sentinel, body). ``body`` overrides the document body
    when classifying a summary instead of the original text."""
    return f"{doc.title}{SEGMENT_BREAK}{doc.body if body is None else body}"


def build_context_inputs(
    ctx: ContextBundle | None,
    author_delimiter: str = DEFAULT_TWEET_AUTHOR_DELIMITER,
    log_retweets: bool = False,
) -> tuple[str, list[float]]:
    """Assemble the textual and numeric context inputs.

    Text layout: author, source URL, delimiter-joined tweet authors, then the
    deduplicated tweet texts, each tweet its own segment. Absent fields
    contribute empty segments. Numeric part is the retweet count (optionally
    log1p-transformed).
    """
    if ctx is None:
        ctx = ContextBundle()
    tweets = _dedup(ctx.tweet_texts)
    parts = [
        ctx.author or "",
        ctx.source_url or "",
        author_delimiter.join(ctx.tweet_authors),
        SEGMENT_BREAK.join(tweets),
    ]
    count = float(ctx.retweet_count)
    numeric = [math.log1p(count) if log_retweets else count]
    return SEGMENT_BREAK.join(parts), numeric


# ---------------------------------------------------------------------------
# JSONL persistence
# ---------------------------------------------------------------------------


def save_dataset_jsonl(dataset: LabeledDataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for doc in dataset.documents:
            record = {
                "id": doc.id,
                "title": doc.title,
                "body": doc.body,
                "label": doc.label,
                "label_code": dataset.label_map[doc.label],
                "domain_tag": doc.domain_tag,
                "context": doc.context.to_dict() if doc.context else None,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_dataset_jsonl(path) -> LabeledDataset:
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"dataset file not found: {path}")
    documents = []
    label_map: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            label_map.setdefault(record["label"], int(record["label_code"]))
            ctx = record.get("context")
            documents.append(
                Document(
                    id=record["id"],
                    title=record.get("title", ""),
                    body=record["body"],
                    label=record["label"],
                    context=ContextBundle.from_dict(ctx) if ctx else None,
                    domain_tag=record.get("domain_tag", ""),
                )
            )
    return LabeledDataset(documents, label_map)
