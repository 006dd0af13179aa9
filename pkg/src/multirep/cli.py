"""Command-line pipeline: prepare -> summarize -> train -> evaluate -> analyze.

Every command is a function of (inputs, config, seed); artifacts land under
the configured output directory next to a fingerprint of the config that
produced them, and commands refuse to resume over mismatched fingerprints.
Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

from .chunker import ChunkPlan
from .classifier import (
    MissingSummaryError,
    ModelConfig,
    TrainConfig,
    load_bundle,
    predict,
    save_bundle,
    train_one,
)
from .corpus import (
    IngestionError,
    LabeledDataset,
    SplitSpec,
    load_ctfan,
    load_dataset_jsonl,
    load_fakenewsnet,
    oversample,
    save_dataset_jsonl,
    split,
    stable_hash,
)
from .encoder import EncoderConfig, build_encoder
from .ensemble import DRAW, MissingBundleError, run_ensemble
from .evaluation import (
    TrialResult,
    friedman,
    load_trials,
    metrics,
    nemenyi_posthoc,
    repeat_trials,
    save_trials,
    wilcoxon_signed_rank,
)
from .summarize import (
    REPRESENTATIONS,
    SUMMARY_KINDS,
    AbstractiveConfig,
    ExtractiveConfig,
    SummaryStore,
    config_fingerprint,
    summarize_corpus,
)


class UsageError(Exception):
    """Configuration or invocation problem; maps to exit status 2."""


@dataclass
class RunConfig:
    dataset: dict = field(default_factory=lambda: {"format": "synthetic", "n_docs": 200})
    output_dir: str = "runs/default"
    seed: int = 0
    train_fraction: float = 0.8
    representations: list[str] = field(default_factory=lambda: list(REPRESENTATIONS))
    use_context: bool = True
    balance_classes: bool = True
    positive_label: str = "fake"
    chunk: ChunkPlan = ChunkPlan()
    extractive: ExtractiveConfig = ExtractiveConfig()
    abstractive: AbstractiveConfig = AbstractiveConfig()
    encoder: EncoderConfig = EncoderConfig()
    head_hidden: int = 512
    n_content_blocks: int = 4
    n_numeric: int = 1
    train: TrainConfig = TrainConfig()
    trials: int = 10
    embedder: str = "hashing"
    generator: str = "ngram"

    def __post_init__(self):
        unknown = [r for r in self.representations if r not in REPRESENTATIONS]
        if unknown:
            raise UsageError(f"unknown representations {unknown}; expected {REPRESENTATIONS}")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        nested = {
            "chunk": ChunkPlan,
            "extractive": ExtractiveConfig,
            "abstractive": AbstractiveConfig,
            "encoder": EncoderConfig,
            "train": TrainConfig,
        }
        kwargs = {}
        for key, value in raw.items():
            if key in nested and isinstance(value, dict):
                try:
                    kwargs[key] = nested[key](**value)
                except (TypeError, ValueError) as exc:
                    raise UsageError(f"bad {key} config: {exc}") from exc
            else:
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad config: {exc}") from exc

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            content_encoder=replace(self.encoder, trainable=True),
            context_encoder=replace(self.encoder, trainable=False),
            chunk_plan=self.chunk,
            head_hidden=self.head_hidden,
            n_content_blocks=self.n_content_blocks,
            n_numeric=self.n_numeric,
            use_context=self.use_context,
        )

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


def load_config(path=None, **overrides) -> RunConfig:
    raw: dict = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise UsageError(f"config file not found: {config_path}")
        try:
            raw = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {config_path} is not valid JSON: {exc}") from exc
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return RunConfig.from_dict(raw)


def _embedder_backend(cfg: RunConfig):
    if cfg.embedder == "hashing":
        from .backends import HashingSentenceEmbedder

        return HashingSentenceEmbedder()
    if cfg.embedder.startswith("hf:"):
        from .backends import PretrainedSentenceEmbedder

        return PretrainedSentenceEmbedder(cfg.embedder[3:])
    raise UsageError(f"unknown embedder {cfg.embedder!r}")


def _generator_backend(cfg: RunConfig):
    if cfg.generator == "ngram":
        from .backends import NgramGenerator

        return NgramGenerator()
    if cfg.generator.startswith("hf:"):
        from .backends import PretrainedSeq2SeqGenerator

        return PretrainedSeq2SeqGenerator(cfg.generator[3:])
    raise UsageError(f"unknown generator {cfg.generator!r}")


def _load_raw_dataset(cfg: RunConfig) -> tuple[LabeledDataset, LabeledDataset | None]:
    """The raw dataset, plus a predefined validation set when the format has one."""
    spec = dict(cfg.dataset)
    fmt = spec.get("format")
    if fmt == "fakenewsnet":
        return load_fakenewsnet(spec["path"], spec.get("domain", "politifact")), None
    if fmt == "ctfan":
        train = load_ctfan(spec["path"])
        test = load_ctfan(spec["test_path"]) if spec.get("test_path") else None
        return train, test
    if fmt == "jsonl":
        return load_dataset_jsonl(spec["path"]), None
    if fmt == "synthetic":
        from .synthetic import make_synthetic_dataset

        return (
            make_synthetic_dataset(
                n_docs=int(spec.get("n_docs", 200)),
                seed=cfg.seed,
                with_context=spec.get("with_context", True),
            ),
            None,
        )
    raise UsageError(f"unknown dataset format {fmt!r}")


def _prep_fingerprint(cfg: RunConfig) -> str:
    return config_fingerprint(
        {"dataset": cfg.dataset, "seed": cfg.seed, "train_fraction": cfg.train_fraction}
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_prepare(cfg: RunConfig) -> int:
    dataset, predefined_val = _load_raw_dataset(cfg)
    if predefined_val is not None:
        train_ds, val_ds = dataset, predefined_val
    else:
        train_ds, val_ds = split(dataset, SplitSpec(cfg.train_fraction, cfg.seed))

    data_dir = cfg.out / "dataset"
    save_dataset_jsonl(train_ds, data_dir / "train.jsonl")
    save_dataset_jsonl(val_ds, data_dir / "validation.jsonl")
    manifest = {
        "label_map": train_ds.label_map,
        "kept": dataset.class_counts(),
        "train_size": len(train_ds),
        "validation_size": len(val_ds),
        "train_counts": train_ds.class_counts(),
        "validation_counts": val_ds.class_counts(),
        "seed": cfg.seed,
        "train_fraction": cfg.train_fraction,
        "fingerprint": _prep_fingerprint(cfg),
    }
    (data_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    kept = ", ".join(f"{count} {name}" for name, count in dataset.class_counts().items())
    print(f"prepared {len(dataset)} documents ({kept}) -> "
          f"{len(train_ds)} train / {len(val_ds)} validation under {data_dir}")
    return 0


def _load_prepared(cfg: RunConfig) -> tuple[LabeledDataset, LabeledDataset]:
    data_dir = cfg.out / "dataset"
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.is_file():
        raise UsageError(f"no prepared dataset under {data_dir}; run `prepare` first")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("fingerprint") != _prep_fingerprint(cfg):
        raise UsageError(
            f"prepared dataset under {data_dir} was built with a different "
            "dataset/split config; rerun `prepare` or restore that config"
        )
    return (
        load_dataset_jsonl(data_dir / "train.jsonl"),
        load_dataset_jsonl(data_dir / "validation.jsonl"),
    )


def cmd_summarize(cfg: RunConfig, only: str | None = None) -> int:
    train_ds, val_ds = _load_prepared(cfg)
    everything = LabeledDataset(
        train_ds.documents + val_ds.documents, dict(train_ds.label_map)
    )
    store = SummaryStore(cfg.out / "summaries.jsonl")
    kinds = (only,) if only else SUMMARY_KINDS
    report = summarize_corpus(
        everything,
        store,
        cfg.extractive,
        cfg.abstractive,
        _embedder_backend(cfg),
        _generator_backend(cfg),
        kinds=kinds,
    )
    print(f"{report.generated} generated, {report.skipped} skipped, "
          f"{len(report.failures)} failed")
    if report.failures:
        for doc_id, kind, message in report.failures[:20]:
            print(f"  FAILED {doc_id} ({kind}): {message}", file=sys.stderr)
        return 1
    return 0


def _train_all(
    cfg: RunConfig,
    train_ds: LabeledDataset,
    store: SummaryStore,
    seed: int,
) -> dict[str, object]:
    """Train every enabled representation, sharing one frozen context encoder."""
    if cfg.balance_classes:
        train_ds = oversample(train_ds, seed)
    model_cfg = cfg.model_config()
    context_encoder = build_encoder(
        replace(cfg.encoder, trainable=False, seed=stable_hash(seed, "context"))
    )
    bundles = {}
    for rep in cfg.representations:
        bundles[rep] = train_one(
            rep,
            train_ds,
            replace(cfg.train, seed=seed),
            store,
            model_cfg=model_cfg,
            context_encoder=context_encoder,
        )
    return bundles


def cmd_train(cfg: RunConfig, force: bool = False) -> int:
    train_ds, _ = _load_prepared(cfg)
    store = SummaryStore(cfg.out / "summaries.jsonl")
    model_cfg = cfg.model_config()
    expected = {
        "model": config_fingerprint(model_cfg),
        "train": config_fingerprint(replace(cfg.train, seed=cfg.seed)),
    }

    to_train = []
    for rep in cfg.representations:
        meta_path = cfg.out / "checkpoints" / rep / "bundle.json"
        if meta_path.is_file() and not force:
            existing = json.loads(meta_path.read_text()).get("fingerprints", {})
            if existing == expected:
                print(f"{rep}: checkpoint up to date, skipping")
                continue
            raise UsageError(
                f"checkpoint for {rep!r} was trained with a different config "
                f"(fingerprints {existing} != {expected}); pass --force to retrain"
            )
        to_train.append(rep)

    if not to_train:
        return 0
    balanced = oversample(train_ds, cfg.seed) if cfg.balance_classes else train_ds
    context_encoder = build_encoder(
        replace(cfg.encoder, trainable=False, seed=stable_hash(cfg.seed, "context"))
    )
    for rep in to_train:
        bundle = train_one(
            rep,
            balanced,
            replace(cfg.train, seed=cfg.seed),
            store,
            model_cfg=cfg.model_config(),
            context_encoder=context_encoder,
        )
        save_bundle(bundle, cfg.out / "checkpoints" / rep)
        print(f"{rep}: trained {cfg.train.epochs} epoch(s), "
              f"final mean loss {bundle.loss_log[-1]:.4f}")
    return 0


def _evaluate_bundles(
    cfg: RunConfig,
    bundles: dict,
    val_ds: LabeledDataset,
    store: SummaryStore,
    trial: int = 0,
    use_context: bool | None = None,
    predictions_path=None,
) -> tuple[list[TrialResult], int]:
    """Score every representation and, when all are present, the ensemble."""
    averaging = "binary" if val_ds.num_classes == 2 else "macro"
    positive = val_ds.label_map.get(cfg.positive_label, 1)
    gold = val_ds.label_codes()

    per_rep: dict[str, list[int]] = {rep: [] for rep in bundles}
    rows = []
    finals: list[int | str] = []
    run_vote = all(rep in bundles for rep in REPRESENTATIONS)
    for doc in val_ds.documents:
        row = {"doc_id": doc.id, "gold": val_ds.label_map[doc.label], "models": {}}
        if run_vote:
            result = run_ensemble(
                doc, bundles, store, on_draw="mark", use_context=use_context
            )
            for rep, (label, probs) in result.per_model.items():
                per_rep[rep].append(label)
                row["models"][rep] = {"label": label, "probs": probs}
            row["final"] = result.final_label
            finals.append(result.final_label)
        else:
            for rep, bundle in bundles.items():
                label, probs = predict(bundle, doc, store, use_context=use_context)
                per_rep[rep].append(label)
                row["models"][rep] = {"label": label, "probs": probs}
        rows.append(row)

    if predictions_path is not None:
        predictions_path = Path(predictions_path)
        predictions_path.parent.mkdir(parents=True, exist_ok=True)
        with open(predictions_path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")

    results = []
    for rep, labels in per_rep.items():
        scores = metrics(labels, gold, averaging=averaging, positive_class=positive)
        results.append(TrialResult(trial_index=trial, system=rep, averaging=averaging, **scores))
    draw_count = 0
    if run_vote:
        decided = [(p, g) for p, g in zip(finals, gold) if p != DRAW]
        draw_count = len(finals) - len(decided)
        if decided:
            scores = metrics(
                [p for p, _ in decided], [g for _, g in decided],
                averaging=averaging, positive_class=positive,
            )
            results.append(
                TrialResult(trial_index=trial, system="ensemble", averaging=averaging, **scores)
            )
    return results, draw_count


def cmd_evaluate(
    cfg: RunConfig, repeat: int | None = None, use_context: bool | None = None
) -> int:
    train_ds, val_ds = _load_prepared(cfg)
    store = SummaryStore(cfg.out / "summaries.jsonl")
    eval_dir = cfg.out / "eval"

    if repeat is None:
        bundles = {}
        for rep in cfg.representations:
            ckpt = cfg.out / "checkpoints" / rep
            if not (ckpt / "bundle.json").is_file():
                raise UsageError(f"no checkpoint for {rep!r} under {ckpt}; run `train` first")
            bundles[rep] = load_bundle(ckpt)
        results, draws = _evaluate_bundles(
            cfg, bundles, val_ds, store,
            use_context=use_context,
            predictions_path=eval_dir / "predictions.jsonl",
        )
        save_trials(eval_dir / "trials.csv", results)
        for r in results:
            print(f"{r.system}: accuracy {r.accuracy:.4f}  precision {r.precision:.4f}  "
                  f"recall {r.recall:.4f}  f1 {r.f1:.4f}  ({r.averaging})")
        if draws:
            print(f"ensemble draws: {draws} of {len(val_ds)} documents")
        return 0

    def one_trial(trial: int, seed: int):
        bundles = _train_all(cfg, train_ds, store, seed)
        results, _ = _evaluate_bundles(
            cfg, bundles, val_ds, store, trial=trial, use_context=use_context
        )
        return results

    results, means = repeat_trials(
        one_trial, n=repeat, base_seed=cfg.seed, results_path=eval_dir / "trials.csv"
    )
    for system, values in means.items():
        print(f"{system}: mean accuracy {values['accuracy']:.4f}  "
              f"mean f1 {values['f1']:.4f}  over {repeat} trial(s)")
    return 0


def cmd_analyze(result_files, metric: str = "f1", out_dir=None) -> int:
    by_system: dict[str, list[TrialResult]] = {}
    for path in result_files:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"results file not found: {path}")
        for result in load_trials(path):
            key = result.system
            if key in by_system and any(
                r.trial_index == result.trial_index for r in by_system[key]
            ):
                key = f"{path.stem}:{result.system}"
            by_system.setdefault(key, []).append(result)

    columns = {
        system: [getattr(r, metric) for r in sorted(rs, key=lambda r: r.trial_index)]
        for system, rs in by_system.items()
    }
    if len(columns) < 2:
        raise UsageError(f"need at least 2 result columns for comparison, got {len(columns)}")
    lengths = {len(v) for v in columns.values()}
    if len(lengths) != 1:
        raise UsageError(f"columns must be paired (equal trial counts), got {sorted(lengths)}")

    labels = list(columns)
    report: dict = {"metric": metric, "alpha": 0.05, "columns": columns, "pairwise": []}
    lines = [f"comparing {len(labels)} systems on {metric} "
             f"({lengths.pop()} paired trials)"]
    for one, two in combinations(labels, 2):
        try:
            stat = wilcoxon_signed_rank(columns[one], columns[two])
        except ValueError as exc:
            lines.append(f"  {one} vs {two}: skipped ({exc})")
            continue
        report["pairwise"].append(
            {"a": one, "b": two, "statistic": stat.statistic,
             "p_value": stat.p_value, "significant": stat.significant}
        )
        flag = "significant" if stat.significant else "not significant"
        lines.append(f"  {one} vs {two}: W+={stat.statistic:.1f} "
                     f"p={stat.p_value:.4g} ({flag})")

    if len(labels) >= 3:
        omnibus = friedman([columns[label] for label in labels])
        posthoc = nemenyi_posthoc([columns[label] for label in labels])
        report["friedman"] = {
            "chi2": omnibus.statistic, "p_value": omnibus.p_value,
            "significant": omnibus.significant,
        }
        report["nemenyi"] = {"labels": labels, "p_matrix": posthoc.pairwise.tolist()}
        flag = "significant" if omnibus.significant else "not significant"
        lines.append(f"  omnibus rank test: chi2={omnibus.statistic:.3f} "
                     f"p={omnibus.p_value:.4g} ({flag})")
        for i, one in enumerate(labels):
            for j in range(i + 1, len(labels)):
                lines.append(f"  post-hoc {one} vs {labels[j]}: "
                             f"p={posthoc.pairwise[i, j]:.4g}")

    text = "\n".join(lines)
    print(text)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2))
        (out / "report.txt").write_text(text + "\n")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multirep",
        description="Multi-representation document classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", "-c", help="JSON config file")
        p.add_argument("--output-dir", help="artifact directory (overrides config)")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")

    p = sub.add_parser("prepare", help="ingest, clean and split the dataset")
    add_common(p)

    p = sub.add_parser("summarize", help="fill the summary cache")
    add_common(p)
    p.add_argument("--only", choices=SUMMARY_KINDS, help="generate a single summary kind")

    p = sub.add_parser("train", help="train one model per representation")
    add_common(p)
    p.add_argument("--force", action="store_true",
                   help="retrain over checkpoints with mismatched fingerprints")

    p = sub.add_parser("evaluate", help="score the validation split")
    add_common(p)
    p.add_argument("--repeat", type=int, nargs="?", const=10, default=None,
                   help="repeated-trial mode: retrain and score N times (default 10)")
    p.add_argument("--no-context", action="store_true",
                   help="zero the context block at prediction time")

    p = sub.add_parser("analyze", help="significance tests over trial results")
    p.add_argument("results", nargs="+", help="trial CSV files")
    p.add_argument("--metric", default="f1",
                   choices=("accuracy", "precision", "recall", "f1"))
    p.add_argument("--out", help="directory for report.json / report.txt")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "analyze":
            return cmd_analyze(args.results, metric=args.metric, out_dir=args.out)
        cfg = load_config(args.config, output_dir=args.output_dir, seed=args.seed)
        if args.command == "prepare":
            return cmd_prepare(cfg)
        if args.command == "summarize":
            return cmd_summarize(cfg, only=args.only)
        if args.command == "train":
            return cmd_train(cfg, force=args.force)
        if args.command == "evaluate":
            use_context = False if args.no_context else None
            return cmd_evaluate(cfg, repeat=args.repeat, use_context=use_context)
        raise UsageError(f"unknown command {args.command!r}")
    except (UsageError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MissingSummaryError, MissingBundleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main(sys.argv[1:]))
