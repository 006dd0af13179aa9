from itertools import product

import numpy as np
import pytest
import scipy.stats as st
from scipy.integrate import quad

from multirep.evaluation import (
    AblationToggle,
    TrialResult,
    ablation_run,
    friedman,
    load_trials,
    metrics,
    nemenyi_posthoc,
    repeat_trials,
    save_trials,
    trial_means,
    wilcoxon_signed_rank,
)

# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------


def confusion_metrics_oracle(pred, gold, averaging, positive=1):
    """Reference via sklearn's confusion-matrix based scorers."""
    from sklearn.metrics import accuracy_score, precision_recall_fscore_support

    labels = sorted(set(gold) | set(pred))
    if averaging == "binary":
        p, r, f, _ = precision_recall_fscore_support(
            gold, pred, average="binary", pos_label=positive, zero_division=0
        )
    else:
        p, r, f, _ = precision_recall_fscore_support(
            gold, pred, average="macro", labels=labels, zero_division=0
        )
    return {
        "accuracy": accuracy_score(gold, pred),
        "precision": float(p), "recall": float(r), "f1": float(f),
    }


def wilcoxon_enumeration_oracle(a, b, alternative):
    """Every sign assignment enumerated explicitly."""
    d = np.asarray(a, float) - np.asarray(b, float)
    d = d[d != 0]
    ranks = st.rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    n = len(d)
    ge = le = 0
    for signs in product([0, 1], repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        ge += w >= w_obs - 1e-9
        le += w <= w_obs + 1e-9
    p_ge, p_le = ge / 2**n, le / 2**n
    if alternative == "greater":
        return w_obs, p_ge
    if alternative == "less":
        return w_obs, p_le
    return w_obs, min(1.0, 2 * min(p_ge, p_le))


def friedman_oracle(columns):
    """Rank sums by explicit sorting, then the classic rank-sum formula."""
    k, n = len(columns), len(columns[0])
    rank_sums = [0.0] * k
    for i in range(n):
        row = [col[i] for col in columns]
        ordered = sorted(row)
        for j, value in enumerate(row):
            first = ordered.index(value) + 1
            count = ordered.count(value)
            rank_sums[j] += first + (count - 1) / 2.0
    chi2 = 12.0 / (n * k * (k + 1)) * sum(r * r for r in rank_sums) - 3.0 * n * (k + 1)
    return chi2


def studentized_range_sf_quadrature(q, k):
    """Survival function of the studentized range (infinite df) by
    numerically integrating k * phi(z) * (Phi(z) - Phi(z - q))^(k-1)."""
    if q <= 0:
        return 1.0

    def integrand(z):
        return k * st.norm.pdf(z) * (st.norm.cdf(z) - st.norm.cdf(z - q)) ** (k - 1)

    cdf, _ = quad(integrand, -np.inf, np.inf, epsabs=1e-11, epsrel=1e-11)
    return 1.0 - cdf


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


class TestMetrics:
    def test_hand_fixture(self):
        out = metrics([1, 0, 0, 0], [1, 1, 0, 0], averaging="binary", positive_class=1)
        assert out["accuracy"] == 0.75
        assert out["precision"] == 1.0
        assert out["recall"] == 0.5
        assert out["f1"] == pytest.approx(2 / 3)

    def test_perfect_prediction(self):
        gold = [0, 1, 2, 1, 0]
        out = metrics(gold, gold, averaging="macro")
        assert out == {"accuracy": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0}

    def test_macro_unweighted_mean(self):
        # per-class F1 of 1.0, 0.5 and 0.0 -> macro F1 0.5
        gold = [0, 0, 1, 1, 2]
        pred = [0, 0, 1, 2, 1]
        out = metrics(pred, gold, averaging="macro")
        assert out["f1"] == pytest.approx(0.5)

    def test_zero_denominators_score_zero(self):
        out = metrics([1, 1], [0, 0], averaging="binary", positive_class=1)
        assert (out["precision"], out["recall"], out["f1"]) == (0.0, 0.0, 0.0)
        out = metrics([0, 0], [0, 0], averaging="binary", positive_class=1)
        assert (out["precision"], out["recall"], out["f1"]) == (0.0, 0.0, 0.0)

    def test_matches_oracle_on_random_pairs(self):
        rng = np.random.default_rng(41)
        for _ in range(300):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(1, 40))
            gold = rng.integers(0, k, n).tolist()
            pred = rng.integers(0, k, n).tolist()
            modes = ("binary", "macro") if k == 2 else ("macro",)
            for averaging in modes:
                ours = metrics(pred, gold, averaging=averaging, positive_class=1)
                ref = confusion_metrics_oracle(pred, gold, averaging)
                for key in ours:
                    assert ours[key] == pytest.approx(ref[key], abs=1e-12), (
                        averaging, key, gold, pred,
                    )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            metrics([1], [1, 0])

    def test_empty(self):
        with pytest.raises(ValueError):
            metrics([], [])


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


def _result(trial, system, value):
    return TrialResult(trial, system, value, value, value, value)


class TestTrials:
    def test_round_trip(self, tmp_path):
        results = [_result(i, "sysA", 0.5 + i / 100) for i in range(4)]
        path = tmp_path / "trials.csv"
        save_trials(path, results)
        assert load_trials(path) == results

    def test_metric_range_validated(self):
        with pytest.raises(ValueError):
            _result(0, "s", 1.5)

    def test_means_match_simple_average(self):
        results = [_result(i, "s", v) for i, v in enumerate([0.2, 0.4, 0.9])]
        means = trial_means(results)
        assert means["s"]["f1"] == pytest.approx(0.5, abs=1e-12)

    def test_deterministic_stub_has_zero_variance(self):
        results, means = repeat_trials(
            lambda trial, seed: _result(trial, "stub", 0.75), n=10, base_seed=5
        )
        values = [r.f1 for r in results]
        assert len(results) == 10
        assert np.var(values) == 0.0
        assert means["stub"]["f1"] == 0.75

    def test_single_trial_mean_is_the_trial(self):
        results, means = repeat_trials(lambda trial, seed: _result(trial, "s", 0.6), n=1)
        assert means["s"]["accuracy"] == results[0].accuracy

    def test_seeds_offset_from_base(self):
        seen = []
        repeat_trials(lambda trial, seed: (seen.append(seed), _result(trial, "s", 0.5))[1],
                      n=3, base_seed=100)
        assert seen == [100, 101, 102]

    def test_multi_system_results_flattened(self):
        results, means = repeat_trials(
            lambda trial, seed: [_result(0, "a", 0.5), _result(0, "b", 0.7)], n=2
        )
        assert {r.system for r in results} == {"a", "b"}
        assert [r.trial_index for r in results] == [0, 0, 1, 1]

    def test_failure_persists_partials(self, tmp_path):
        path = tmp_path / "partial.csv"

        def flaky(trial, seed):
            if trial == 3:
                raise RuntimeError("boom")
            return _result(trial, "s", 0.5)

        with pytest.raises(RuntimeError):
            repeat_trials(flaky, n=10, results_path=path)
        assert [r.trial_index for r in load_trials(path)] == [0, 1, 2]


# ---------------------------------------------------------------------------
# Signed-rank test
# ---------------------------------------------------------------------------


class TestWilcoxon:
    def test_all_zero_differences_rejected(self):
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

    def test_strictly_greater_fixture(self):
        a = np.arange(1.0, 11.0) + 1.0
        b = np.arange(1.0, 11.0)
        report = wilcoxon_signed_rank(a, b, alternative="greater")
        assert report.statistic == 55.0
        assert report.p_value == 1 / 1024
        assert report.p_value < 0.01
        assert report.significant

    def test_exact_matches_enumeration(self):
        rng = np.random.default_rng(7)
        for n in (4, 6, 8, 10, 12):
            for _ in range(5):
                a = rng.normal(0, 1, n)
                b = a - rng.normal(0.2, 1, n)
                if np.all(a == b):
                    continue
                for alternative in ("two-sided", "greater", "less"):
                    ours = wilcoxon_signed_rank(a, b, alternative=alternative, mode="exact")
                    w_ref, p_ref = wilcoxon_enumeration_oracle(a, b, alternative)
                    assert ours.statistic == pytest.approx(w_ref)
                    assert ours.p_value == pytest.approx(p_ref, abs=1e-12)

    def test_exact_matches_enumeration_with_ties(self):
        a = np.array([3.0, 5.0, 4.0, 6.0, 2.0, 9.0, 8.0])
        b = np.array([1.0, 3.0, 6.0, 4.0, 1.0, 7.0, 9.0])  # several |d| ties
        for alternative in ("two-sided", "greater"):
            ours = wilcoxon_signed_rank(a, b, alternative=alternative, mode="exact")
            w_ref, p_ref = wilcoxon_enumeration_oracle(a, b, alternative)
            assert ours.statistic == pytest.approx(w_ref)
            assert ours.p_value == pytest.approx(p_ref, abs=1e-12)

    def test_matches_reference_implementation_exact(self):
        rng = np.random.default_rng(11)
        a = rng.normal(0.8, 0.05, 10)
        b = a - rng.normal(0.03, 0.05, 10)
        for alternative in ("two-sided", "greater", "less"):
            ours = wilcoxon_signed_rank(a, b, alternative=alternative)
            ref = st.wilcoxon(a, b, alternative=alternative, method="exact")
            if alternative != "two-sided":
                assert ours.statistic == pytest.approx(float(ref.statistic))
            assert ours.p_value == pytest.approx(float(ref.pvalue), abs=1e-12)

    def test_matches_reference_implementation_normal(self):
        rng = np.random.default_rng(13)
        a = rng.normal(0.8, 0.05, 40)
        b = a - rng.normal(0.01, 0.05, 40)
        ours = wilcoxon_signed_rank(a, b, alternative="greater", mode="normal")
        ref = st.wilcoxon(a, b, alternative="greater", method="approx", correction=False)
        assert ours.statistic == pytest.approx(float(ref.statistic))
        assert ours.p_value == pytest.approx(float(ref.pvalue), abs=1e-9)

    def test_zero_differences_dropped(self):
        a = [1.0, 2.0, 3.0, 5.0]
        b = [1.0, 1.0, 2.0, 4.0]  # first pair is a zero difference
        report = wilcoxon_signed_rank(a, b, alternative="greater")
        assert report.statistic == 6.0  # ranks 1..3, all positive

    def test_pratt_keeps_zero_ranks(self):
        a = [1.0, 2.0, 3.0, 5.0]
        b = [1.0, 1.0, 2.0, 4.0]
        report = wilcoxon_signed_rank(a, b, alternative="greater", zero_method="pratt")
        # zero difference occupies rank 1; nonzero ranks are 3, 3, 3
        assert report.statistic == 9.0

    def test_significance_flag_tracks_threshold(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            a = rng.normal(0, 1, 8)
            b = rng.normal(0, 1, 8)
            if np.all(a == b):
                continue
            report = wilcoxon_signed_rank(a, b)
            assert report.significant == (report.p_value < 0.05)


# ---------------------------------------------------------------------------
# k-system rank tests
# ---------------------------------------------------------------------------


class TestFriedman:
    def test_identical_columns(self):
        report = friedman([[0.5] * 6, [0.5] * 6, [0.5] * 6])
        assert report.statistic == 0.0
        assert report.p_value == 1.0
        assert not report.significant

    def test_perfect_ranking_closed_form(self):
        jitter = [t * 1e-4 for t in range(10)]
        columns = [
            [3.0 + j for j in jitter],
            [2.0 + j for j in jitter],
            [1.0 + j for j in jitter],
        ]
        report = friedman(columns)
        assert report.statistic == pytest.approx(20.0)
        assert report.p_value < 0.001

    def test_matches_rank_oracle(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            k = int(rng.integers(3, 6))
            n = int(rng.integers(2, 15))
            columns = [rng.normal(size=n).tolist() for _ in range(k)]
            report = friedman(columns)
            assert report.statistic == pytest.approx(friedman_oracle(columns), abs=1e-9)

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(23)
        columns = [rng.normal(size=12).tolist() for _ in range(4)]
        report = friedman(columns)
        ref = st.friedmanchisquare(*columns)
        assert report.statistic == pytest.approx(float(ref.statistic), abs=1e-9)
        assert report.p_value == pytest.approx(float(ref.pvalue), abs=1e-9)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(29)
        columns = np.exp(rng.normal(size=(3, 8)))
        base = friedman(columns.tolist())
        transformed = friedman(np.log(columns).tolist())
        assert base.statistic == pytest.approx(transformed.statistic)

    def test_needs_three_columns(self):
        with pytest.raises(ValueError):
            friedman([[1.0, 2.0], [2.0, 1.0]])

    def test_needs_equal_lengths(self):
        with pytest.raises(ValueError):
            friedman([[1.0, 2.0], [2.0], [3.0, 1.0]])


class TestNemenyi:
    def test_identical_columns_unit_matrix(self):
        report = nemenyi_posthoc([[0.4] * 5, [0.4] * 5, [0.4] * 5])
        assert np.allclose(report.pairwise, np.ones((3, 3)))

    def test_symmetric_with_unit_diagonal(self):
        rng = np.random.default_rng(31)
        columns = [rng.normal(size=10).tolist() for _ in range(4)]
        report = nemenyi_posthoc(columns)
        assert np.allclose(report.pairwise, report.pairwise.T)
        assert np.allclose(np.diag(report.pairwise), 1.0)
        assert np.all(report.pairwise >= 0) and np.all(report.pairwise <= 1)

    def test_matches_quadrature_reference(self):
        rng = np.random.default_rng(37)
        for k, n in [(3, 10), (4, 8), (5, 12)]:
            columns = [rng.normal(size=n).tolist() for _ in range(k)]
            report = nemenyi_posthoc(columns)
            ranks = np.apply_along_axis(st.rankdata, 1, np.asarray(columns).T)
            mean_ranks = ranks.mean(axis=0)
            scale = np.sqrt(k * (k + 1) / (12.0 * n))
            for i in range(k):
                for j in range(i + 1, k):
                    q = abs(mean_ranks[i] - mean_ranks[j]) / scale
                    expected = studentized_range_sf_quadrature(q, k)
                    assert report.pairwise[i, j] == pytest.approx(expected, abs=1e-6)

    def test_strong_separation_is_significant(self):
        jitter = [t * 1e-3 for t in range(10)]
        columns = [[c + j for j in jitter] for c in (1.0, 2.0, 3.0)]
        report = nemenyi_posthoc(columns)
        assert report.pairwise[0, 2] < 0.05
        assert report.significant


# ---------------------------------------------------------------------------
# Ablation battery
# ---------------------------------------------------------------------------


def graded_runner(toggle, trial, seed):
    """Deterministic metric surface: original > extractive > abstractive,
    context adds a bonus, trials add a small strictly increasing jitter."""
    base = {"original": 0.80, "extractive": 0.70, "abstractive": 0.60, "ensemble": 0.85}
    value = base[toggle.representation] + (0.0 if toggle.context else -0.05)
    value += trial * 1e-4
    return _result(trial, "x", value)


class TestAblation:
    def test_three_columns_feed_omnibus(self):
        toggles = [AblationToggle(rep) for rep in ("original", "extractive", "abstractive")]
        report = ablation_run(graded_runner, toggles, n_trials=10, base_seed=0)
        assert set(report.columns) == {"original", "extractive", "abstractive"}
        assert all(len(col) == 10 for col in report.columns.values())
        # strictly ordered columns: the perfect-ranking statistic for k=3, n=10
        assert report.omnibus.statistic == pytest.approx(20.0)
        assert report.omnibus.significant
        assert report.posthoc.pairwise.shape == (3, 3)

    def test_four_columns(self):
        toggles = [AblationToggle(rep) for rep in
                   ("original", "extractive", "abstractive", "ensemble")]
        report = ablation_run(graded_runner, toggles, n_trials=10)
        assert report.omnibus.statistic == pytest.approx(30.0)  # perfect ranking, k=4
        assert report.posthoc.pairwise.shape == (4, 4)

    def test_single_toggle_has_no_significance_section(self):
        report = ablation_run(graded_runner, [AblationToggle("original")], n_trials=3)
        assert report.pairwise == {}
        assert report.omnibus is None
        assert report.posthoc is None

    def test_two_toggles_pairwise_only(self):
        toggles = [AblationToggle("original"), AblationToggle("original", context=False)]
        report = ablation_run(graded_runner, toggles, n_trials=8)
        assert list(report.pairwise) == [("original", "original-nocontext")]
        assert report.omnibus is None

    def test_context_toggle_labels(self):
        assert AblationToggle("ensemble", context=False).label == "ensemble-nocontext"
        assert AblationToggle("ensemble").label == "ensemble"

    def test_unknown_representation_rejected(self):
        with pytest.raises(ValueError):
            AblationToggle("hybrid")

    def test_duplicate_toggles_rejected(self):
        with pytest.raises(ValueError):
            ablation_run(graded_runner, [AblationToggle("original")] * 2, n_trials=2)

    def test_empty_toggles_rejected(self):
        with pytest.raises(ValueError):
            ablation_run(graded_runner, [], n_trials=2)

    def test_summary_text(self):
        toggles = [AblationToggle(rep) for rep in ("original", "extractive", "abstractive")]
        report = ablation_run(graded_runner, toggles, n_trials=10)
        text = report.summary()
        assert "original" in text and "omnibus" in text and "post-hoc" in text
