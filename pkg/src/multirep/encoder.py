"""Contextual feature extraction.

A trainable encoder embeds each content window; a frozen encoder embeds the
context string once. Both contribute their sentinel-position embedding, and
the pieces are concatenated with the numeric features into one fixed-width
vector: content blocks (zero-filled when a document has fewer windows), then
the context block, then the numeric tail.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import torch

from .chunker import ChunkSet


class ChunkTooLongError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    """Construction recipe for an encoder backend.

    ``vocab`` selects the backend: an integer hash-vocabulary size builds a
    scratch-trained encoder; an ``"hf:<model>"`` string wraps a pretrained
    checkpoint (requires the `hf` extra).
    """

    layers: int = 12
    hidden_dim: int = 768
    max_positions: int = 512
    vocab: int | str = 4096
    trainable: bool = True
    heads: int = 4
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.hidden_dim < 1 or self.max_positions < 1:
            raise ValueError("layers, hidden_dim and max_positions must be positive")


def build_encoder(cfg: EncoderConfig):
    if isinstance(cfg.vocab, str) and cfg.vocab.startswith("hf:"):
        from .backends import PretrainedEncoder

        return PretrainedEncoder(cfg.vocab[3:], trainable=cfg.trainable)
    from .backends import TinyTransformerEncoder

    encoder = TinyTransformerEncoder(
        vocab_size=int(cfg.vocab),
        hidden_dim=cfg.hidden_dim,
        layers=cfg.layers,
        heads=cfg.heads,
        max_positions=cfg.max_positions,
        dropout=cfg.dropout,
        seed=cfg.seed,
    )
    encoder.set_trainable(cfg.trainable)
    return encoder


@dataclass(frozen=True)
class FeatureLayout:
    """Width bookkeeping for the assembled feature vector."""

    n_blocks: int = 4
    hidden_dim: int = 768
    n_numeric: int = 1

    @property
    def dim(self) -> int:
        return self.n_blocks * self.hidden_dim + self.hidden_dim + self.n_numeric

    def content_slice(self, block: int) -> slice:
        if not 0 <= block < self.n_blocks:
            raise IndexError(f"block {block} outside 0..{self.n_blocks - 1}")
        return slice(block * self.hidden_dim, (block + 1) * self.hidden_dim)

    @property
    def context_slice(self) -> slice:
        return slice(self.n_blocks * self.hidden_dim, (self.n_blocks + 1) * self.hidden_dim)

    @property
    def numeric_slice(self) -> slice:
        return slice((self.n_blocks + 1) * self.hidden_dim, self.dim)


@contextmanager
def _evaluation_mode(backend):
    is_module = isinstance(backend, torch.nn.Module)
    was_training = backend.training if is_module else False
    if is_module:
        backend.eval()
    try:
        yield
    finally:
        if is_module and was_training:
            backend.train()


def _with_leading_sentinel(ids: list[int], cls_id: int) -> list[int]:
    return ids if ids and ids[0] == cls_id else [cls_id] + list(ids)


def encode_content(chunks: ChunkSet, backend, n_blocks: int = 4) -> list[torch.Tensor]:
    """Per-window sequence embeddings from the trainable encoder.

    Each window is prefixed with the classification sentinel when missing
    (only the first window carries one from tokenization). At most
    ``n_blocks`` windows are encoded; later ones are dropped.
    """
    batch = []
    for i, ids in enumerate(chunks.chunks[:n_blocks]):
        ids = _with_leading_sentinel(ids, backend.cls_id)
        if len(ids) > backend.max_positions:
            raise ChunkTooLongError(
                f"chunk {i} has {len(ids)} tokens after sentinel insertion, "
                f"encoder accepts at most {backend.max_positions}"
            )
        batch.append(ids)
    encoded = backend.encode(batch)
    return [encoded[i] for i in range(encoded.shape[0])]


def encode_context(context_text: str, backend) -> torch.Tensor:
    """Sequence embedding of the context string from the frozen encoder.

    Runs without gradient tracking and in evaluation mode, so for a frozen
    backend the result is identical across training steps. Input longer than
    the encoder's position budget is truncated.
    """
    ids = backend.tokenize(context_text)[: backend.max_positions]
    with _evaluation_mode(backend), torch.no_grad():
        return backend.encode([ids])[0].detach()


def assemble_features(
    content: list[torch.Tensor],
    context: torch.Tensor,
    numeric: list[float],
    layout: FeatureLayout = FeatureLayout(),
) -> torch.Tensor:
    """Concatenate content blocks (zero-padded to the layout width), the
    context block and the numeric tail into one feature vector."""
    if len(content) > layout.n_blocks:
        raise DimensionMismatchError(
            f"{len(content)} content blocks exceed layout capacity {layout.n_blocks}"
        )
    for i, block in enumerate(content):
        if block.shape != (layout.hidden_dim,):
            raise DimensionMismatchError(
                f"content block {i} has shape {tuple(block.shape)}, "
                f"expected ({layout.hidden_dim},)"
            )
    if context.shape != (layout.hidden_dim,):
        raise DimensionMismatchError(
            f"context has shape {tuple(context.shape)}, expected ({layout.hidden_dim},)"
        )
    if len(numeric) != layout.n_numeric:
        raise DimensionMismatchError(
            f"{len(numeric)} numeric features, layout expects {layout.n_numeric}"
        )
    dtype = context.dtype
    parts = list(content)
    missing = layout.n_blocks - len(content)
    if missing:
        parts.append(torch.zeros(missing * layout.hidden_dim, dtype=dtype))
    parts.append(context)
    if layout.n_numeric:
        parts.append(torch.tensor(list(numeric), dtype=dtype))
    out = torch.cat(parts)
    assert out.shape == (layout.dim,)
    return out
