"""Multi-representation long-document classification.

A document is classified three times, once per textual representation
(original text, extractive summary, abstractive summary); each model combines
windowed content embeddings from a trainable encoder with a frozen context
embedding and numeric side features, and a majority vote merges the three
predictions. An evaluation harness covers repeated trials and nonparametric
significance testing.
"""

from .chunker import ChunkPlan, ChunkSet, chunk, chunk_for_summarizer
from .corpus import (
    ContextBundle,
    Document,
    LabeledDataset,
    SplitSpec,
    build_content_string,
    build_context_inputs,
    load_ctfan,
    load_fakenewsnet,
    oversample,
    split,
)
from .classifier import (
    ClassifierHead,
    HeadConfig,
    ModelBundle,
    ModelConfig,
    TrainConfig,
    predict,
    train_one,
)
from .encoder import (
    EncoderConfig,
    FeatureLayout,
    assemble_features,
    build_encoder,
    encode_content,
    encode_context,
)
from .ensemble import DRAW, VoteResult, VotingDrawError, run_ensemble, vote
from .evaluation import (
    AblationToggle,
    StatReport,
    TrialResult,
    ablation_run,
    friedman,
    metrics,
    nemenyi_posthoc,
    repeat_trials,
    wilcoxon_signed_rank,
)
from .summarize import (
    AbstractiveConfig,
    ExtractiveConfig,
    SummaryRecord,
    SummaryStore,
    abstractive_summary,
    extractive_summary,
    summarize_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "AblationToggle", "AbstractiveConfig", "ChunkPlan", "ChunkSet",
    "ClassifierHead", "ContextBundle", "DRAW", "Document", "EncoderConfig",
    "ExtractiveConfig", "FeatureLayout", "HeadConfig", "LabeledDataset",
    "ModelBundle", "ModelConfig", "SplitSpec", "StatReport", "SummaryRecord",
    "SummaryStore", "TrainConfig", "TrialResult", "VoteResult",
    "VotingDrawError", "ablation_run", "abstractive_summary",
    "assemble_features", "build_content_string", "build_context_inputs",
    "build_encoder", "chunk", "chunk_for_summarizer", "encode_content",
    "encode_context", "extractive_summary", "friedman", "load_ctfan",
    "load_fakenewsnet", "metrics", "nemenyi_posthoc", "oversample", "predict",
    "repeat_trials", "run_ensemble", "split", "summarize_corpus", "train_one",
    "vote", "wilcoxon_signed_rank",
]
