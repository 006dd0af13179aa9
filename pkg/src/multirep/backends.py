"""Pluggable model backends.

Desk-scale defaults run offline and deterministically: a hashing tokenizer,
a small trainable transformer encoder, a hashed bag-of-words sentence
embedder and an n-gram resampling generator with top-k/top-p decoding.
Adapters for pretrained encoder/generator checkpoints live at the bottom and
import their heavyweight dependency lazily.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .corpus import SEGMENT_BREAK

PAD_ID = 0
CLS_ID = 1
SEP_ID = 2

_WORD_RE = re.compile(r"[a-z0-9]+")


def _word_bucket(word: str, buckets: int, salt: str = "") -> int:
    digest = hashlib.blake2b((salt + word).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % buckets


class HashingTokenizer:
    """Vocabulary-free tokenizer: words hash into a fixed id space.

    The stream always starts with the classification sentinel; every segment
    break in the text emits a separator sentinel, even for empty segments.
    """

    def __init__(self, vocab_size: int = 4096):
        if vocab_size <= 4:
            raise ValueError("vocab_size must leave room for special ids")
        self.vocab_size = vocab_size
        self.pad_id = PAD_ID
        self.cls_id = CLS_ID
        self.sep_id = SEP_ID

    def word_ids(self, text: str) -> list[int]:
        return [
            4 + _word_bucket(w, self.vocab_size - 4)
            for w in _WORD_RE.findall(text.lower())
        ]

    def tokenize(self, text: str) -> list[int]:
        ids = [self.cls_id]
        for i, segment in enumerate(text.split(SEGMENT_BREAK)):
            if i > 0:
                ids.append(self.sep_id)
            ids.extend(self.word_ids(segment))
        return ids


class seeded_construction:
    """Context manager for deterministic module construction.

    Runs the body under a seeded copy of the global RNG and restores the
    outer state afterwards, so builds neither depend on nor disturb it while
    keeping the framework's default initializers.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._fork = None

    def __enter__(self):
        self._fork = torch.random.fork_rng()
        self._fork.__enter__()
        torch.manual_seed(self.seed)
        return self

    def __exit__(self, *exc):
        return self._fork.__exit__(*exc)


class TinyTransformerEncoder(nn.Module):
    """Small trainable transformer returning the sentinel-position embedding.

    Serves as a scratch-trained stand-in for a pretrained encoder: same
    interface (tokenize / encode / freeze), desk-scale weights.
    """

    def __init__(
        self,
        vocab_size: int = 4096,
        hidden_dim: int = 32,
        layers: int = 2,
        heads: int = 4,
        max_positions: int = 512,
        dropout: float = 0.0,
        seed: int = 0,
    ):
        super().__init__()
        if hidden_dim % heads != 0:
            raise ValueError("hidden_dim must be divisible by heads")
        self.hidden_dim = hidden_dim
        self.max_positions = max_positions
        self.tokenizer = HashingTokenizer(vocab_size)
        with seeded_construction(seed):
            self.token_embedding = nn.Embedding(vocab_size, hidden_dim, padding_idx=PAD_ID)
            self.position_embedding = nn.Embedding(max_positions, hidden_dim)
            self.input_norm = nn.LayerNorm(hidden_dim)
            layer = nn.TransformerEncoderLayer(
                d_model=hidden_dim,
                nhead=heads,
                dim_feedforward=4 * hidden_dim,
                dropout=dropout,
                batch_first=True,
            )
            self.encoder = nn.TransformerEncoder(
                layer, num_layers=layers, enable_nested_tensor=False
            )

    def tokenize(self, text: str) -> list[int]:
        return self.tokenizer.tokenize(text)

    @property
    def cls_id(self) -> int:
        return self.tokenizer.cls_id

    def set_trainable(self, flag: bool) -> None:
        self.requires_grad_(flag)

    @property
    def trainable(self) -> bool:
        return any(p.requires_grad for p in self.parameters())

    def forward(self, batch: list[list[int]]) -> torch.Tensor:
        max_len = max(len(ids) for ids in batch)
        if max_len > self.max_positions:
            raise ValueError(f"sequence length {max_len} exceeds max_positions {self.max_positions}")
        ids = torch.full((len(batch), max_len), PAD_ID, dtype=torch.long)
        for row, seq in enumerate(batch):
            ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        padding_mask = ids.eq(PAD_ID)
        positions = torch.arange(max_len).unsqueeze(0).expand_as(ids)
        hidden = self.token_embedding(ids) + self.position_embedding(positions)
        hidden = self.input_norm(hidden)
        hidden = self.encoder(hidden, src_key_padding_mask=padding_mask)
        return hidden[:, 0, :]

    def encode(self, batch: list[list[int]]) -> torch.Tensor:
        """Batch of token sequences -> (B, hidden_dim) sequence embeddings."""
        if not batch:
            raise ValueError("empty batch")
        return self(batch)


class HashingSentenceEmbedder:
    """Deterministic hashed bag-of-words sentence vectors, L2-normalised."""

    def __init__(self, dim: int = 64):
        self.dim = dim

    def embed(self, sentences: list[str]) -> np.ndarray:
        out = np.zeros((len(sentences), self.dim), dtype=np.float64)
        for i, sentence in enumerate(sentences):
            for word in _WORD_RE.findall(sentence.lower()):
                bucket = _word_bucket(word, self.dim)
                sign = 1.0 if _word_bucket(word, 2, salt="sign#") else -1.0
                out[i, bucket] += sign
            norm = np.linalg.norm(out[i])
            if norm > 0:
                out[i] /= norm
        return out


def top_k_top_p_filter(probs: np.ndarray, top_k: int, top_p: float) -> np.ndarray:
    """Zero out everything but the k most probable entries, then keep the
    smallest set of those whose cumulative probability reaches top_p.
    Returns the renormalised distribution."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if not 0 < top_p <= 1:
        raise ValueError("top_p must lie in (0, 1]")
    order = np.argsort(-probs, kind="stable")
    keep = order[:top_k]
    kept = probs[keep]
    cumulative = np.cumsum(kept / kept.sum())
    cutoff = int(np.searchsorted(cumulative, top_p)) + 1
    keep = keep[:cutoff]
    filtered = np.zeros_like(probs)
    filtered[keep] = probs[keep]
    return filtered / filtered.sum()


class NgramGenerator:
    """Offline stand-in for a seq2seq summarizer.

    Resamples the window with a bigram chain over its own tokens, decoding via
    seeded top-k/top-p sampling; length is controlled by the given bounds.
    Output quality is not the point; determinism and interface fidelity are.
    """

    max_input_tokens = 1024

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def generate(
        self,
        window: list[str],
        *,
        top_k: int,
        top_p: float,
        seed: int,
        min_tokens: int,
        max_tokens: int,
    ) -> str:
        if not window:
            raise ValueError("cannot summarize an empty window")
        if len(window) > self.max_input_tokens:
            raise ValueError(f"window of {len(window)} tokens exceeds {self.max_input_tokens}")
        vocab = sorted(set(window))
        index = {w: i for i, w in enumerate(vocab)}
        unigram = np.zeros(len(vocab))
        bigram = np.zeros((len(vocab), len(vocab)))
        for tok in window:
            unigram[index[tok]] += 1
        for prev, nxt in zip(window, window[1:]):
            bigram[index[prev], index[nxt]] += 1
        unigram = unigram / unigram.sum()

        rng = np.random.default_rng(seed)
        out: list[str] = []
        current = None
        for _ in range(max_tokens):
            if current is not None and bigram[index[current]].sum() > 0:
                probs = bigram[index[current]] / bigram[index[current]].sum()
            else:
                probs = unigram
            probs = top_k_top_p_filter(probs, top_k, top_p)
            current = vocab[int(rng.choice(len(vocab), p=probs))]
            out.append(current)
            if len(out) >= min_tokens and current[-1:] in ".!?":
                break
        return " ".join(out)


# ---------------------------------------------------------------------------
# Pretrained adapters (optional; require the `hf` extra)
# ---------------------------------------------------------------------------


def _require_transformers():
    try:
        import transformers
    except ImportError as exc:  # pragma: no cover - depends on extras
        raise ImportError(
            "pretrained backends need the 'transformers' package; "
            "install with: pip install multirep[hf]"
        ) from exc
    return transformers


class PretrainedEncoder(nn.Module):
    """Wraps a pretrained masked-LM encoder checkpoint behind the same
    tokenize/encode/freeze interface as the scratch encoder."""

    def __init__(self, model_name: str, trainable: bool = True):
        super().__init__()
        transformers = _require_transformers()
        self._tokenizer = transformers.AutoTokenizer.from_pretrained(model_name)
        self.model = transformers.AutoModel.from_pretrained(model_name)
        self.hidden_dim = self.model.config.hidden_size
        self.max_positions = self.model.config.max_position_embeddings
        self.set_trainable(trainable)

    def tokenize(self, text: str) -> list[int]:
        sep = self._tokenizer.sep_token or ""
        plain = text.replace(SEGMENT_BREAK, f" {sep} ")
        return self._tokenizer.encode(plain, add_special_tokens=True)

    @property
    def cls_id(self) -> int:
        return self._tokenizer.cls_token_id

    def set_trainable(self, flag: bool) -> None:
        self.model.requires_grad_(flag)

    @property
    def trainable(self) -> bool:
        return any(p.requires_grad for p in self.model.parameters())

    def encode(self, batch: list[list[int]]) -> torch.Tensor:
        pad = self._tokenizer.pad_token_id or 0
        max_len = max(len(ids) for ids in batch)
        ids = torch.full((len(batch), max_len), pad, dtype=torch.long)
        mask = torch.zeros((len(batch), max_len), dtype=torch.long)
        for row, seq in enumerate(batch):
            ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
            mask[row, : len(seq)] = 1
        output = self.model(input_ids=ids, attention_mask=mask)
        return output.last_hidden_state[:, 0, :]


class PretrainedSeq2SeqGenerator:
    """Wraps a pretrained seq2seq checkpoint as an abstractive backend."""

    def __init__(self, model_name: str, max_input_tokens: int = 1024):
        transformers = _require_transformers()
        self._tokenizer = transformers.AutoTokenizer.from_pretrained(model_name)
        self.model = transformers.AutoModelForSeq2SeqLM.from_pretrained(model_name)
        self.model.eval()
        self.max_input_tokens = max_input_tokens

    def tokenize(self, text: str) -> list[int]:
        return self._tokenizer.encode(text, add_special_tokens=False)

    def generate(
        self,
        window: list[int],
        *,
        top_k: int,
        top_p: float,
        seed: int,
        min_tokens: int,
        max_tokens: int,
    ) -> str:
        torch.manual_seed(seed)
        ids = torch.tensor([window[: self.max_input_tokens]], dtype=torch.long)
        with torch.no_grad():
            out = self.model.generate(
                ids,
                do_sample=True,
                top_k=top_k,
                top_p=top_p,
                min_new_tokens=min_tokens,
                max_new_tokens=max_tokens,
            )
        return self._tokenizer.decode(out[0], skip_special_tokens=True)


@dataclass
class PretrainedSentenceEmbedder:
    """Mean-pooled pretrained embeddings for extractive clustering."""

    model_name: str

    def __post_init__(self):
        transformers = _require_transformers()
        self._tokenizer = transformers.AutoTokenizer.from_pretrained(self.model_name)
        self._model = transformers.AutoModel.from_pretrained(self.model_name)
        self._model.eval()

    def embed(self, sentences: list[str]) -> np.ndarray:
        batch = self._tokenizer(
            sentences, padding=True, truncation=True, return_tensors="pt"
        )
        with torch.no_grad():
            hidden = self._model(**batch).last_hidden_state
        mask = batch["attention_mask"].unsqueeze(-1)
        pooled = (hidden * mask).sum(1) / mask.sum(1).clamp(min=1)
        return pooled.numpy().astype(np.float64)
