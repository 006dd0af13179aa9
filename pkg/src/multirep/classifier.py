"""Feed-forward classification head and the per-representation training loop.

One model is trained per text representation: content windows go through the
trainable encoder, the context string through the frozen one, and a two-layer
head with ReLU maps the assembled feature vector to class probabilities.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from .backends import seeded_construction
from .chunker import ChunkPlan, chunk
from .corpus import (
    Document,
    LabeledDataset,
    build_content_string,
    build_context_inputs,
    stable_hash,
)
from .encoder import (
    EncoderConfig,
    FeatureLayout,
    assemble_features,
    build_encoder,
    encode_content,
    encode_context,
)
from .summarize import REPRESENTATIONS, SummaryStore, representation_text

logger = logging.getLogger(__name__)


class MissingSummaryError(RuntimeError):
    def __init__(self, representation: str, doc_ids: list[str]):
        self.doc_ids = doc_ids
        preview = ", ".join(doc_ids[:10]) + ("..." if len(doc_ids) > 10 else "")
        super().__init__(
            f"no {representation} summary for {len(doc_ids)} document(s): {preview}"
        )


@dataclass(frozen=True)
class HeadConfig:
    input_dim: int
    hidden_units: int = 512
    output_classes: int = 2

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_units < 1:
            raise ValueError("input_dim and hidden_units must be positive")
        if self.output_classes < 2:
            raise ValueError("need at least 2 output classes")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    learning_rate: float = 5e-5
    weight_decay: float = 0.01
    epochs: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be positive, weight_decay non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to build one representation's model, minus weights."""

    content_encoder: EncoderConfig = EncoderConfig()
    context_encoder: EncoderConfig = EncoderConfig(trainable=False)
    chunk_plan: ChunkPlan = ChunkPlan()
    head_hidden: int = 512
    n_content_blocks: int = 4
    n_numeric: int = 1
    use_context: bool = True

    def __post_init__(self):
        if self.content_encoder.hidden_dim != self.context_encoder.hidden_dim:
            raise ValueError("content and context encoders must share hidden_dim")
        if self.chunk_plan.window + 1 > self.content_encoder.max_positions:
            raise ValueError(
                "encoder max_positions must cover the chunk window plus sentinel"
            )

    @property
    def layout(self) -> FeatureLayout:
        return FeatureLayout(
            n_blocks=self.n_content_blocks,
            hidden_dim=self.content_encoder.hidden_dim,
            n_numeric=self.n_numeric,
        )


class ClassifierHead(nn.Module):
    """Two-layer feed-forward network with ReLU; outputs softmax probabilities."""

    def __init__(self, cfg: HeadConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        with seeded_construction(seed):
            self.fc1 = nn.Linear(cfg.input_dim, cfg.hidden_units)
            self.fc2 = nn.Linear(cfg.hidden_units, cfg.output_classes)

    def logits(self, features: torch.Tensor) -> torch.Tensor:
        if features.shape[-1] != self.cfg.input_dim:
            raise ValueError(
                f"feature dim {features.shape[-1]} does not match head input {self.cfg.input_dim}"
            )
        return self.fc2(F.relu(self.fc1(features)))

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return F.softmax(self.logits(features), dim=-1)


@dataclass
class ModelBundle:
    """A trained model for one representation plus its provenance."""

    representation: str
    content_encoder: nn.Module
    context_encoder: nn.Module
    head: ClassifierHead
    model_config: ModelConfig
    label_map: dict[str, int]
    fingerprints: dict[str, str]
    loss_log: list[float] = field(default_factory=list)


def _bundle_fingerprints(model_cfg: ModelConfig, train_cfg: TrainConfig) -> dict[str, str]:
    from .summarize import config_fingerprint

    return {
        "model": config_fingerprint(model_cfg),
        "train": config_fingerprint(train_cfg),
    }


def _document_inputs(doc: Document, text: str, cfg: ModelConfig, content_backend, context_backend):
    """Tokenised content windows plus the (precomputable) context side."""
    content = build_content_string(doc, body=text)
    tokens = content_backend.tokenize(content)
    windows = chunk(tokens, cfg.chunk_plan)
    if cfg.use_context:
        context_text, numeric = build_context_inputs(doc.context)
        context_vec = encode_context(context_text, context_backend)
        numeric = numeric[: cfg.n_numeric] + [0.0] * (cfg.n_numeric - len(numeric))
    else:
        context_vec = torch.zeros(cfg.layout.hidden_dim)
        numeric = [0.0] * cfg.n_numeric
    return windows, context_vec, numeric


def _features(windows, context_vec, numeric, cfg: ModelConfig, content_backend) -> torch.Tensor:
    blocks = encode_content(windows, content_backend, n_blocks=cfg.n_content_blocks)
    return assemble_features(blocks, context_vec, numeric, cfg.layout)


def _require_texts(representation: str, docs, summaries: SummaryStore) -> list[str]:
    texts = []
    missing = []
    for doc in docs:
        text = representation_text(doc, representation, summaries)
        if text is None:
            missing.append(doc.id)
        else:
            texts.append(text)
    if missing:
        raise MissingSummaryError(representation, missing)
    return texts


def train_one(
    representation: str,
    train: LabeledDataset,
    cfg: TrainConfig,
    summaries: SummaryStore,
    model_cfg: ModelConfig = ModelConfig(),
    content_encoder=None,
    context_encoder=None,
) -> ModelBundle:
    """Train one representation's model end to end.

    Batches are reshuffled every epoch with a seeded generator and the final
    partial batch is kept. Content-window token ids and the frozen context
    embeddings are precomputed once; only the content encoder and the head
    receive gradients (decoupled-weight-decay Adam). The returned bundle
    carries the per-epoch mean loss log.
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    if len(train) == 0:
        raise ValueError("training set is empty")

    texts = _require_texts(representation, train.documents, summaries)

    if content_encoder is None:
        content_cfg = model_cfg.content_encoder
        content_encoder = build_encoder(
            EncoderConfig(**{**asdict(content_cfg), "trainable": True,
                             "seed": stable_hash(cfg.seed, representation, "content")})
        )
    if context_encoder is None:
        context_cfg = model_cfg.context_encoder
        context_encoder = build_encoder(
            EncoderConfig(**{**asdict(context_cfg), "trainable": False,
                             "seed": stable_hash(cfg.seed, "context")})
        )

    head = ClassifierHead(
        HeadConfig(
            input_dim=model_cfg.layout.dim,
            hidden_units=model_cfg.head_hidden,
            output_classes=train.num_classes,
        ),
        seed=stable_hash(cfg.seed, representation, "head"),
    )

    prepared = [
        _document_inputs(doc, text, model_cfg, content_encoder, context_encoder)
        for doc, text in zip(train.documents, texts)
    ]
    labels = torch.tensor(train.label_codes(), dtype=torch.long)

    params = list(head.parameters())
    if content_encoder.trainable:
        params += [p for p in content_encoder.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)

    rng = random.Random(stable_hash(cfg.seed, representation, "shuffle"))
    content_encoder.train()
    head.train()
    loss_log: list[float] = []
    for epoch in range(cfg.epochs):
        order = list(range(len(prepared)))
        rng.shuffle(order)
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            features = torch.stack(
                [_features(*prepared[i], model_cfg, content_encoder) for i in batch]
            )
            loss = F.cross_entropy(head.logits(features), labels[batch])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(loss.item())
        loss_log.append(sum(epoch_losses) / len(epoch_losses))
        logger.info("%s epoch %d/%d mean loss %.4f",
                    representation, epoch + 1, cfg.epochs, loss_log[-1])

    content_encoder.eval()
    head.eval()
    return ModelBundle(
        representation=representation,
        content_encoder=content_encoder,
        context_encoder=context_encoder,
        head=head,
        model_config=model_cfg,
        label_map=dict(train.label_map),
        fingerprints=_bundle_fingerprints(model_cfg, cfg),
        loss_log=loss_log,
    )


def predict(
    bundle: ModelBundle,
    doc: Document,
    summaries: SummaryStore,
    fallback_summarizer=None,
    use_context: bool | None = None,
) -> tuple[int, list[float]]:
    """Label and class probabilities for one document under a trained bundle.

    Summaries missing from the store can be produced on the fly through
    ``fallback_summarizer(doc)``. ``use_context=False`` zeroes the context
    block and numeric tail at prediction time.
    """
    text = representation_text(doc, bundle.representation, summaries)
    if text is None:
        if fallback_summarizer is None:
            raise MissingSummaryError(bundle.representation, [doc.id])
        text = fallback_summarizer(doc)

    cfg = bundle.model_config
    if use_context is not None and use_context != cfg.use_context:
        cfg = ModelConfig(**{**asdict_shallow(cfg), "use_context": use_context})

    bundle.content_encoder.eval()
    bundle.head.eval()
    with torch.no_grad():
        inputs = _document_inputs(doc, text, cfg, bundle.content_encoder, bundle.context_encoder)
        features = _features(*inputs, cfg, bundle.content_encoder)
        probs = bundle.head(features)
    return int(torch.argmax(probs).item()), [float(p) for p in probs]


def asdict_shallow(cfg: ModelConfig) -> dict:
    """ModelConfig fields without recursing into nested dataclasses."""
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_bundle(bundle: ModelBundle, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "content_encoder": bundle.content_encoder.state_dict(),
            "context_encoder": bundle.context_encoder.state_dict(),
            "head": bundle.head.state_dict(),
        },
        directory / "weights.pt",
    )
    meta = {
        "representation": bundle.representation,
        "label_map": bundle.label_map,
        "fingerprints": bundle.fingerprints,
        "model_config": asdict(bundle.model_config),
        "head_config": asdict(bundle.head.cfg),
    }
    (directory / "bundle.json").write_text(json.dumps(meta, indent=2))
    with open(directory / "loss_log.csv", "w") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(bundle.loss_log):
            fh.write(f"{epoch},{loss}\n")


def _model_config_from_dict(raw: dict) -> ModelConfig:
    return ModelConfig(
        content_encoder=EncoderConfig(**raw["content_encoder"]),
        context_encoder=EncoderConfig(**raw["context_encoder"]),
        chunk_plan=ChunkPlan(**raw["chunk_plan"]),
        head_hidden=raw["head_hidden"],
        n_content_blocks=raw["n_content_blocks"],
        n_numeric=raw["n_numeric"],
        use_context=raw["use_context"],
    )


def load_bundle(directory) -> ModelBundle:
    directory = Path(directory)
    meta = json.loads((directory / "bundle.json").read_text())
    model_cfg = _model_config_from_dict(meta["model_config"])
    content_encoder = build_encoder(model_cfg.content_encoder)
    context_encoder = build_encoder(model_cfg.context_encoder)
    head = ClassifierHead(HeadConfig(**meta["head_config"]))
    states = torch.load(directory / "weights.pt", weights_only=True)
    content_encoder.load_state_dict(states["content_encoder"])
    context_encoder.load_state_dict(states["context_encoder"])
    head.load_state_dict(states["head"])
    context_encoder.set_trainable(False)
    content_encoder.eval()
    context_encoder.eval()
    head.eval()
    loss_path = directory / "loss_log.csv"
    loss_log = []
    if loss_path.is_file():
        for line in loss_path.read_text().splitlines()[1:]:
            loss_log.append(float(line.split(",")[1]))
    return ModelBundle(
        representation=meta["representation"],
        content_encoder=content_encoder,
        context_encoder=context_encoder,
        head=head,
        model_config=model_cfg,
        label_map={k: int(v) for k, v in meta["label_map"].items()},
        fingerprints=meta["fingerprints"],
        loss_log=loss_log,
    )
