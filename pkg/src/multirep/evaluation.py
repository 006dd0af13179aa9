"""Metrics, the repeated-trial protocol and nonparametric significance tests.

The signed-rank test reports the positive-rank sum and computes its p-value
exactly (by counting over sign assignments) for small samples, falling back
to the tie-corrected normal approximation. The rank test across k >= 3 paired
systems uses within-row average ranks and the chi-square reference
distribution with k-1 degrees of freedom; its post-hoc pairwise procedure
compares rank-mean differences against the studentized range distribution.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats as st

logger = logging.getLogger(__name__)

ALPHA = 0.05


@dataclass
class TrialResult:
    """Metrics from one repeat of one system's train/predict pipeline."""

    trial_index: int
    system: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str = "binary"

    def __post_init__(self):
        for name in ("accuracy", "precision", "recall", "f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")


@dataclass
class StatReport:
    test: str
    statistic: float | None
    p_value: float
    significant: bool
    pairwise: np.ndarray | None = None


def _report(test: str, statistic, p_value: float, pairwise=None) -> StatReport:
    p_value = float(min(max(p_value, 0.0), 1.0))
    return StatReport(
        test=test,
        statistic=None if statistic is None else float(statistic),
        p_value=p_value,
        significant=bool(p_value < ALPHA),
        pairwise=pairwise,
    )


# ---------------------------------------------------------------------------
# Classification metrics
# ---------------------------------------------------------------------------


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def metrics(
    predictions: Sequence[int],
    gold: Sequence[int],
    averaging: str = "binary",
    positive_class: int = 1,
    labels: Sequence[int] | None = None,
) -> dict[str, float]:
    """Accuracy, precision, recall and F1.

    Binary averaging scores the positive class only; macro averaging takes the
    unweighted mean of per-class scores over ``labels`` (default: all labels
    seen in gold or predictions). Classes with a zero denominator score 0.
    """
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(gold)} gold")
    if not gold:
        raise ValueError("empty input")
    predictions = list(predictions)
    gold = list(gold)
    accuracy = sum(p == g for p, g in zip(predictions, gold)) / len(gold)

    if averaging == "binary":
        tp = sum(1 for p, g in zip(predictions, gold) if p == positive_class and g == positive_class)
        fp = sum(1 for p, g in zip(predictions, gold) if p == positive_class and g != positive_class)
        fn = sum(1 for p, g in zip(predictions, gold) if p != positive_class and g == positive_class)
        precision, recall, f1 = _prf(tp, fp, fn)
    elif averaging == "macro":
        if labels is None:
            labels = sorted(set(gold) | set(predictions))
        scores = []
        for cls in labels:
            tp = sum(1 for p, g in zip(predictions, gold) if p == cls and g == cls)
            fp = sum(1 for p, g in zip(predictions, gold) if p == cls and g != cls)
            fn = sum(1 for p, g in zip(predictions, gold) if p != cls and g == cls)
            scores.append(_prf(tp, fp, fn))
        precision = sum(s[0] for s in scores) / len(scores)
        recall = sum(s[1] for s in scores) / len(scores)
        f1 = sum(s[2] for s in scores) / len(scores)
    else:
        raise ValueError(f"unknown averaging {averaging!r}")

    return {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1}


# ---------------------------------------------------------------------------
# Repeated trials
# ---------------------------------------------------------------------------

TRIAL_COLUMNS = ("trial", "system", "accuracy", "precision", "recall", "f1", "averaging")


def save_trials(path, results: Sequence[TrialResult]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_COLUMNS)
        for r in results:
            writer.writerow(
                [r.trial_index, r.system, r.accuracy, r.precision, r.recall, r.f1, r.averaging]
            )


def load_trials(path) -> list[TrialResult]:
    results = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            results.append(
                TrialResult(
                    trial_index=int(row["trial"]),
                    system=row["system"],
                    accuracy=float(row["accuracy"]),
                    precision=float(row["precision"]),
                    recall=float(row["recall"]),
                    f1=float(row["f1"]),
                    averaging=row.get("averaging", "binary"),
                )
            )
    return results


def trial_means(results: Sequence[TrialResult]) -> dict[str, dict[str, float]]:
    """Per-system mean of each metric across trials."""
    by_system: dict[str, list[TrialResult]] = {}
    for r in results:
        by_system.setdefault(r.system, []).append(r)
    return {
        system: {
            metric: float(np.mean([getattr(r, metric) for r in rs]))
            for metric in ("accuracy", "precision", "recall", "f1")
        }
        for system, rs in by_system.items()
    }


def repeat_trials(
    run: Callable,
    n: int = 10,
    base_seed: int = 0,
    results_path=None,
) -> tuple[list[TrialResult], dict[str, dict[str, float]]]:
    """Run the pipeline closure n times with seeds base_seed + i.

    ``run(trial, seed)`` returns one TrialResult or a sequence of them (one
    per system). If a trial raises, completed results are persisted to
    ``results_path`` (when given) before the error propagates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    results: list[TrialResult] = []
    for i in range(n):
        try:
            out = run(trial=i, seed=base_seed + i)
        except Exception:
            if results_path is not None and results:
                save_trials(results_path, results)
                logger.error("trial %d failed; %d completed results persisted to %s",
                             i, len(results), results_path)
            raise
        batch = [out] if isinstance(out, TrialResult) else list(out)
        results.extend(replace(r, trial_index=i) for r in batch)
    if results_path is not None:
        save_trials(results_path, results)
    return results, trial_means(results)


# ---------------------------------------------------------------------------
# Signed-rank test
# ---------------------------------------------------------------------------


def _signed_rank_exact_p(doubled_ranks: np.ndarray, w_doubled: int) -> tuple[float, float]:
    """P(W+ >= w) and P(W+ <= w) by counting all sign assignments.

    Ranks are doubled so that average ranks from ties become integers; the
    count of assignments reaching each doubled sum is built by dynamic
    programming, which is equivalent to full enumeration.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    denom = 2.0 ** len(doubled_ranks)
    p_ge = counts[w_doubled:].sum() / denom
    p_le = counts[: w_doubled + 1].sum() / denom
    return p_ge, p_le


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float],
    alternative: str = "two-sided",
    zero_method: str = "drop",
    mode: str = "auto",
) -> StatReport:
    """Paired signed-rank test of ``a`` against ``b``.

    The statistic is the positive-rank sum (ranks of |a-b| where a > b).
    ``alternative="greater"`` tests whether a tends to exceed b. Zero
    differences are dropped ("drop") or ranked before being excluded from the
    sum ("pratt"). ``mode`` picks the p-value computation: "exact" counts
    sign assignments, "normal" uses the tie-corrected approximation without
    continuity correction, "auto" is exact up to 25 nonzero pairs.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    if zero_method not in ("drop", "pratt"):
        raise ValueError(f"unknown zero_method {zero_method!r}")
    if mode not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown mode {mode!r}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-d and of equal length")
    d = a - b
    nonzero = d != 0
    if not nonzero.any():
        raise ValueError("all differences are zero; the test is undefined")

    if zero_method == "drop":
        d = d[nonzero]
        ranks = st.rankdata(np.abs(d))
    else:
        ranks_all = st.rankdata(np.abs(d))
        ranks = ranks_all[nonzero]
        d = d[nonzero]
    n = len(d)
    w_plus = float(ranks[d > 0].sum())

    if mode == "exact" or (mode == "auto" and n <= 25):
        doubled = np.rint(2 * ranks).astype(int)
        p_ge, p_le = _signed_rank_exact_p(doubled, int(round(2 * w_plus)))
    else:
        mean = ranks.sum() / 2.0
        var = (ranks**2).sum() / 4.0
        if var == 0:
            raise ValueError("zero variance; the test is undefined")
        z = (w_plus - mean) / np.sqrt(var)
        p_ge = st.norm.sf(z)
        p_le = st.norm.cdf(z)

    if alternative == "greater":
        p = p_ge
    elif alternative == "less":
        p = p_le
    else:
        p = min(1.0, 2.0 * min(p_ge, p_le))
    return _report("wilcoxon-signed-rank", w_plus, p)


# ---------------------------------------------------------------------------
# k-system rank tests
# ---------------------------------------------------------------------------


def _rank_matrix(columns: Sequence[Sequence[float]]) -> tuple[np.ndarray, int, int]:
    k = len(columns)
    if k < 3:
        raise ValueError("need at least 3 paired columns")
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise ValueError(f"columns must have equal length, got {sorted(lengths)}")
    n = lengths.pop()
    if n < 1:
        raise ValueError("columns are empty")
    data = np.asarray(columns, dtype=float).T  # rows = subjects
    ranks = np.apply_along_axis(st.rankdata, 1, data)
    return ranks, n, k


def friedman(columns: Sequence[Sequence[float]]) -> StatReport:
    """Rank test across k >= 3 paired systems.

    Within-row average ranks feed the statistic
    ``12n / (k(k+1)) * sum_j (mean_rank_j - (k+1)/2)^2`` with a chi-square
    reference of k-1 degrees of freedom.
    """
    ranks, n, k = _rank_matrix(columns)
    mean_ranks = ranks.mean(axis=0)
    statistic = 12.0 * n / (k * (k + 1)) * ((mean_ranks - (k + 1) / 2.0) ** 2).sum()
    p = st.chi2.sf(statistic, df=k - 1)
    return _report("friedman", statistic, p)


def nemenyi_posthoc(columns: Sequence[Sequence[float]]) -> StatReport:
    """Pairwise post-hoc p-values after a k-system rank test.

    Rank-mean differences are referred to the studentized range distribution
    with infinite degrees of freedom. The matrix is symmetric with a unit
    diagonal; the report's scalar p-value is the smallest pairwise one.
    """
    ranks, n, k = _rank_matrix(columns)
    mean_ranks = ranks.mean(axis=0)
    scale = np.sqrt(k * (k + 1) / (12.0 * n))
    pairwise = np.ones((k, k))
    for i, j in combinations(range(k), 2):
        q = abs(mean_ranks[i] - mean_ranks[j]) / scale
        p = float(st.studentized_range.sf(q, k, np.inf))
        pairwise[i, j] = pairwise[j, i] = min(max(p, 0.0), 1.0)
    off_diag = pairwise[~np.eye(k, dtype=bool)]
    return _report("nemenyi", None, off_diag.min(), pairwise=pairwise)


# ---------------------------------------------------------------------------
# Ablation battery
# ---------------------------------------------------------------------------

TOGGLE_REPRESENTATIONS = ("original", "extractive", "abstractive", "ensemble")


@dataclass(frozen=True)
class AblationToggle:
    """One configuration under comparison: which representation, context or not."""

    representation: str
    context: bool = True

    def __post_init__(self):
        if self.representation not in TOGGLE_REPRESENTATIONS:
            raise ValueError(
                f"unknown representation {self.representation!r}; "
                f"expected one of {TOGGLE_REPRESENTATIONS}"
            )

    @property
    def label(self) -> str:
        return self.representation if self.context else f"{self.representation}-nocontext"


@dataclass
class AblationReport:
    toggles: list[AblationToggle]
    trials: dict[str, list[TrialResult]]
    columns: dict[str, list[float]]
    metric: str
    pairwise: dict[tuple[str, str], StatReport] = field(default_factory=dict)
    omnibus: StatReport | None = None
    posthoc: StatReport | None = None

    def summary(self) -> str:
        lines = [f"ablation over {len(self.toggles)} configuration(s), metric={self.metric}"]
        for label, values in self.columns.items():
            lines.append(f"  {label}: mean {np.mean(values):.4f} over {len(values)} trial(s)")
        for (one, two), rep in self.pairwise.items():
            flag = "significant" if rep.significant else "not significant"
            lines.append(
                f"  {one} vs {two}: statistic={rep.statistic:.1f} p={rep.p_value:.4g} ({flag})"
            )
        if self.omnibus is not None:
            flag = "significant" if self.omnibus.significant else "not significant"
            lines.append(
                f"  omnibus: chi2={self.omnibus.statistic:.3f} "
                f"p={self.omnibus.p_value:.4g} ({flag})"
            )
        if self.posthoc is not None:
            lines.append("  post-hoc pairwise p-values:")
            labels = list(self.columns)
            for i, one in enumerate(labels):
                for j in range(i + 1, len(labels)):
                    lines.append(
                        f"    {one} vs {labels[j]}: p={self.posthoc.pairwise[i, j]:.4g}"
                    )
        return "\n".join(lines)


def ablation_run(
    trial_runner: Callable,
    toggles: Sequence[AblationToggle],
    n_trials: int = 10,
    base_seed: int = 0,
    metric: str = "f1",
    results_dir=None,
) -> AblationReport:
    """Run every toggle configuration n times and apply the test battery.

    ``trial_runner(toggle, trial, seed)`` must return a TrialResult. All
    configurations see the same seed sequence so trials stay paired. With a
    single toggle there is nothing to compare and no significance section;
    two get the pairwise signed-rank test; three or more add the omnibus rank
    test plus the post-hoc matrix.
    """
    toggles = list(toggles)
    if not toggles:
        raise ValueError("no toggle configurations given")
    labels = [t.label for t in toggles]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate toggle configurations: {labels}")

    trials: dict[str, list[TrialResult]] = {}
    for toggle in toggles:
        path = Path(results_dir) / f"{toggle.label}.csv" if results_dir else None
        results, _ = repeat_trials(
            lambda trial, seed, t=toggle: replace(
                trial_runner(t, trial, seed), system=t.label
            ),
            n=n_trials,
            base_seed=base_seed,
            results_path=path,
        )
        trials[toggle.label] = results

    columns = {label: [getattr(r, metric) for r in trials[label]] for label in labels}
    report = AblationReport(toggles=toggles, trials=trials, columns=columns, metric=metric)

    if len(labels) >= 2:
        for one, two in combinations(labels, 2):
            try:
                report.pairwise[(one, two)] = wilcoxon_signed_rank(
                    columns[one], columns[two]
                )
            except ValueError as exc:
                logger.info("signed-rank %s vs %s skipped: %s", one, two, exc)
    if len(labels) >= 3:
        report.omnibus = friedman([columns[label] for label in labels])
        report.posthoc = nemenyi_posthoc([columns[label] for label in labels])
    return report
