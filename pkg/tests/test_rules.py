"""Rule induction: candidates, greedy and sparse search, scoring, round trips."""

import json
import math

import numpy as np
import pytest

from pairforge.core import Label, Task
from pairforge.errors import PairforgeError
from pairforge.metrics import classification_metrics, confusion_from_scores, \
    tune_threshold
from pairforge.rules import (
    ExclusionPolicy,
    Rule,
    RuleForm,
    RuleSet,
    SignalTable,
    SparseConfig,
    default_exclusion_policy,
    generate_candidates,
    induce_greedy,
    induce_hybrid,
    induce_sparse_logistic,
    parse_rendered_rule,
    parse_ruleset,
    render_rule,
    render_ruleset,
    rule_feature,
    ruleset_to_json,
    score_ruleset,
    score_table,
)

# shortened regularization path for tests that exercise behaviour rather
# than the default path geometry (the full path is covered separately)
FAST_SPARSE = SparseConfig(path_points=15, lambda_min_ratio=3e-2)


def table(names, matrix, labels) -> SignalTable:
    return SignalTable(matrix=np.asarray(matrix, dtype=float),
                       labels=np.asarray(labels, dtype=np.int64),
                       names=tuple(names))


def planted_and(seed: int, n: int, noise: float = 0.02) -> SignalTable:
    """Binary alpha/beta with label = (alpha > 0) and (beta < 1), plus noise.

    gamma (4 distinct values) and delta (independent binary) are distractors.
    """
    rng = np.random.default_rng(seed)
    alpha = (rng.random(n) < 0.7).astype(float)
    beta = (rng.random(n) < 0.5).astype(float)
    gamma = rng.integers(0, 4, n) / 3.0
    delta = (rng.random(n) < 0.5).astype(float)
    label = ((alpha > 0) & (beta < 1)).astype(np.int64)
    label = np.where(rng.random(n) < noise, 1 - label, label)
    return table(("alpha", "beta", "gamma", "delta"),
                 np.column_stack([alpha, beta, gamma, delta]), label)


def planted_xor(seed: int, n: int, noise: float = 0.02) -> SignalTable:
    """Label = exactly one of (alpha > 0), (beta > 0): singles carry no margin."""
    rng = np.random.default_rng(seed)
    alpha = (rng.random(n) < 0.5).astype(float)
    beta = (rng.random(n) < 0.5).astype(float)
    gamma = rng.integers(0, 4, n) / 3.0
    label = ((alpha > 0) ^ (beta > 0)).astype(np.int64)
    label = np.where(rng.random(n) < noise, 1 - label, label)
    return table(("alpha", "beta", "gamma"),
                 np.column_stack([alpha, beta, gamma]), label)


def ruleset_mcc(ruleset: RuleSet, tbl: SignalTable) -> float:
    cm = confusion_from_scores(tbl.labels, score_table(ruleset, tbl),
                               ruleset.decision_threshold)
    return classification_metrics(cm)["mcc"]


@pytest.fixture(scope="module")
def and_split():
    return planted_and(61, 1000), planted_and(62, 300), planted_and(63, 300)


@pytest.fixture(scope="module")
def and_candidates(and_split):
    return generate_candidates(and_split[0])


@pytest.fixture(scope="module")
def sparse_and_ruleset(and_split, and_candidates):
    train, val, _ = and_split
    return induce_sparse_logistic(and_candidates, train, val)


class TestRuleBasics:
    def test_indicator_and_hinge_forms(self):
        tbl = table(("s",), [[0.2], [0.8]], [0, 1])
        index = tbl.index
        cases = {
            RuleForm.GT: [0.0, 1.0],
            RuleForm.LT: [1.0, 0.0],
            RuleForm.HINGE_POS: [0.0, 0.3],
            RuleForm.HINGE_NEG: [0.3, 0.0],
            RuleForm.LINEAR: [0.2, 0.8],
        }
        for form, expected in cases.items():
            rule = Rule(signal="s", form=form, threshold=0.5)
            got = rule_feature(rule, tbl.matrix, index)
            assert got == pytest.approx(expected), form

    def test_and2_truth_table(self):
        tbl = table(("x", "y"), [[0, 0], [0, 1], [1, 0], [1, 1]], [0, 0, 0, 1])
        rule = Rule(signal="x", form=RuleForm.AND2, threshold=0.5, op_a="gt",
                    signal_b="y", threshold_b=0.5, op_b="lt")
        got = rule_feature(rule, tbl.matrix, tbl.index)
        assert got.tolist() == [0.0, 0.0, 1.0, 0.0]

    def test_and2_needs_second_signal(self):
        with pytest.raises(PairforgeError) as err:
            Rule(signal="x", form=RuleForm.AND2, threshold=0.5)
        assert err.value.code == "BAD_RULE"

    def test_and2_rejects_bad_ops(self):
        with pytest.raises(PairforgeError) as err:
            Rule(signal="x", form=RuleForm.AND2, threshold=0.5, signal_b="y",
                 threshold_b=0.5, op_a="ge")
        assert err.value.code == "BAD_RULE"

    def test_non_finite_weight_rejected(self):
        with pytest.raises(PairforgeError) as err:
            Rule(signal="x", form=RuleForm.GT, threshold=0.5, weight=math.nan)
        assert err.value.code == "BAD_RULE"

    def test_unknown_signal_in_matrix(self):
        tbl = table(("s",), [[1.0]], [1])
        with pytest.raises(PairforgeError) as err:
            rule_feature(Rule(signal="t", form=RuleForm.GT), tbl.matrix, tbl.index)
        assert err.value.code == "MISSING_SIGNAL"

    def test_decision_threshold_must_be_unit_interval(self):
        with pytest.raises(PairforgeError) as err:
            RuleSet(task=Task.HOST_HOST, strategy="greedy", bias=0.0, rules=(),
                    decision_threshold=1.5)
        assert err.value.code == "BAD_RULE"

    @pytest.mark.parametrize("cap", [0.0, 1.2, -0.5])
    def test_bad_broad_rule_cap(self, cap):
        with pytest.raises(PairforgeError) as err:
            ExclusionPolicy(broad_rule_cap=cap)
        assert err.value.code == "BAD_CAP"


class TestGenerateCandidates:
    def test_hand_counted_candidates(self):
        # "a" has 2 distinct values -> 1 midpoint; "b" has 5 -> 4 midpoints.
        # Singles: (4 rules per threshold + 1 linear) per signal = 5 + 17.
        # Indicators: 2 + 8 = 10, all within the firing cap, so C(10,2) = 45
        # conjunctions. Total 67.
        tbl = table(("a", "b"),
                    np.column_stack([[0, 1, 0, 1, 1],
                                     [0.0, 0.25, 0.5, 0.75, 1.0]]),
                    [0, 1, 0, 1, 1])
        cands = generate_candidates(tbl)
        assert len(cands) == 67
        assert sum(1 for r in cands if r.form is RuleForm.AND2) == 45
        a_thresholds = {r.threshold for r in cands
                        if r.signal == "a" and r.form is RuleForm.GT}
        assert a_thresholds == {0.5}
        b_thresholds = {r.threshold for r in cands
                        if r.signal == "b" and r.form is RuleForm.GT}
        assert b_thresholds == {0.125, 0.375, 0.625, 0.875}

    def test_deciles_above_ten_distinct(self):
        rng = np.random.default_rng(3)
        col = rng.standard_normal(200)
        tbl = table(("s",), col[:, None], rng.integers(0, 2, 200))
        cands = generate_candidates(tbl)
        # 9 decile thresholds -> 36 threshold rules + 1 linear + C(18,2) and2
        assert len(cands) == 37 + 153
        got = sorted({r.threshold for r in cands if r.form is RuleForm.GT})
        want = np.quantile(col, np.arange(1, 10) / 10.0)
        assert got == pytest.approx(sorted(want))

    def test_midpoints_exact_for_few_distinct(self):
        tbl = table(("s",), np.array([[0.0], [1.0], [2.0], [0.0], [2.0]]),
                    [0, 0, 1, 0, 1])
        thresholds = sorted({r.threshold for r in generate_candidates(tbl)
                             if r.form is RuleForm.LT})
        assert thresholds == [0.5, 1.5]

    def test_excluded_signal_produces_no_candidates(self):
        tbl = table(("keep", "drop"), [[0, 0], [1, 1], [0, 1], [1, 0]],
                    [0, 1, 0, 1])
        policy = ExclusionPolicy(excluded_signals=("drop",))
        cands = generate_candidates(tbl, policy)
        assert all(r.signal != "drop" and r.signal_b != "drop" for r in cands)
        assert any(r.signal == "keep" for r in cands)

    def test_default_policy_suppresses_missingness_proxies(self):
        policy = default_exclusion_policy(Task.HOST_HOST)
        assert "has_pfam_a" in policy.excluded_signals
        assert "has_go_bp_b" in policy.excluded_signals
        assert all(name.startswith("has_") for name in policy.excluded_signals)
        tbl = table(("cos", "has_pfam_a"), [[0.1, 0], [0.9, 1], [0.4, 1]],
                    [0, 1, 1])
        cands = generate_candidates(tbl, policy)
        assert all("has_" not in (r.signal, r.signal_b) for r in cands)

    def test_broad_indicators_dropped_by_cap(self):
        broad = np.array([1.0] * 19 + [0.0])  # fires on 95% of rows
        other = np.tile([0.0, 1.0], 10)
        labels = other.astype(np.int64)
        tbl = table(("broad", "other"), np.column_stack([broad, other]), labels)
        cands = generate_candidates(tbl)
        assert not any(r.signal == "broad" and r.form is RuleForm.GT
                       for r in cands)
        assert any(r.signal == "broad" and r.form is RuleForm.LT for r in cands)
        assert any(r.signal == "broad" and r.form is RuleForm.HINGE_POS
                   for r in cands)
        for rule in cands:
            if rule.is_indicator:
                firing = rule_feature(rule, tbl.matrix, tbl.index).mean()
                assert firing <= 0.90

    def test_constant_signal_keeps_only_linear(self):
        tbl = table(("flat", "live"), [[3.0, 0], [3.0, 1], [3.0, 0]], [0, 1, 0])
        flat_rules = [r for r in generate_candidates(tbl) if r.signal == "flat"]
        assert [r.form for r in flat_rules] == [RuleForm.LINEAR]

    def test_empty_training_rejected(self):
        tbl = table(("s",), np.empty((0, 1)), np.empty(0, dtype=np.int64))
        with pytest.raises(PairforgeError) as err:
            generate_candidates(tbl)
        assert err.value.code == "EMPTY_TRAINING"

    def test_order_is_deterministic_and_canonical(self):
        tbl = planted_and(11, 60)
        first = generate_candidates(tbl)
        second = generate_candidates(tbl)
        assert first == second
        assert first == sorted(first, key=Rule.sort_key)
        # permuting rows leaves distinct values and quantiles unchanged
        perm = np.random.default_rng(0).permutation(60)
        shuffled = table(tbl.names, tbl.matrix[perm], tbl.labels[perm])
        assert generate_candidates(shuffled) == first

    def test_and2_pairs_come_from_top_ranked_indicators(self):
        rng = np.random.default_rng(5)
        labels = rng.integers(0, 2, 40)
        strong = labels.astype(float)
        medium = np.where(rng.random(40) < 0.15, 1 - labels, labels).astype(float)
        weak = (rng.random(40) < 0.5).astype(float)
        tbl = table(("strong", "medium", "weak"),
                    np.column_stack([strong, medium, weak]), labels)
        cands = generate_candidates(tbl, top_k_and2=2)
        pairs = [(r.signal, r.op_a, r.signal_b, r.op_b) for r in cands
                 if r.form is RuleForm.AND2]
        assert pairs == [("strong", "gt", "medium", "gt")]


class TestGreedy:
    def test_recovers_planted_conjunction_exactly(self, and_split,
                                                  and_candidates):
        train, val, _ = and_split
        result = induce_greedy(and_candidates, train, val)
        found = sorted((r.signal, r.form.value, r.threshold) for r in result.rules)
        assert found == [("alpha", "gt", 0.5), ("beta", "lt", 0.5)]
        assert all(r.weight == 1.0 for r in result.rules)
        assert 0.5 < result.decision_threshold < 1.0
        assert result.metrics["validation_mcc"] >= 0.9
        assert result.strategy == "greedy"

    def test_validation_mcc_non_decreasing_over_prefixes(self, and_split,
                                                         and_candidates):
        train, val, _ = and_split
        result = induce_greedy(and_candidates, train, val)
        assert len(result.rules) >= 2
        previous = 0.0
        for k in range(len(result.rules) + 1):
            prefix = RuleSet(task=result.task, strategy="greedy", bias=0.0,
                             rules=result.rules[:k], decision_threshold=0.0)
            scores = score_table(prefix, val)
            _, value = tune_threshold(val.labels, scores, "mcc")
            assert value >= previous - 1e-12
            previous = value

    def test_tie_breaks_by_candidate_order(self):
        labels = np.tile([0, 1], 20)
        column = labels.astype(float)
        tbl = table(("aa", "bb"), np.column_stack([column, column]), labels)
        result = induce_greedy(generate_candidates(tbl), tbl, tbl)
        assert [(r.signal, r.form.value) for r in result.rules] == [("aa", "gt")]

    def test_uninformative_signals_give_empty_ruleset(self):
        tbl = table(("a",), [[1.0], [1.0], [0.0], [0.0]], [1, 0, 1, 0])
        result = induce_greedy(generate_candidates(tbl), tbl, tbl)
        assert result.rules == ()
        assert 0.0 <= result.decision_threshold <= 1.0
        score, label = score_ruleset(result, {"a": 1.0})
        assert score == 0.0
        assert label is Label.NEGATIVE

    def test_requires_indicator_candidates(self):
        only_linear = [Rule(signal="a", form=RuleForm.LINEAR)]
        tbl = table(("a",), [[0.0], [1.0]], [0, 1])
        with pytest.raises(PairforgeError) as err:
            induce_greedy(only_linear, tbl, tbl)
        assert err.value.code == "EMPTY_CANDIDATES"


class TestSparseLogistic:
    def test_fits_planted_conjunction(self, sparse_and_ruleset):
        result = sparse_and_ruleset
        assert result.strategy == "sparse_logistic"
        assert result.metrics["validation_mcc"] >= 0.9
        assert 0 < len(result.rules) <= 60
        assert all(r.weight != 0.0 for r in result.rules)
        assert all(r.scale > 0.0 for r in result.rules)

    def test_rule_count_monotone_along_path(self, sparse_and_ruleset):
        nnz = sparse_and_ruleset.metrics["nnz_path"]
        converged = sparse_and_ruleset.metrics["converged_path"]
        # the path descends from lambda_max: rule counts may only grow.
        # A solver that ran out of sweeps can carry transient near-threshold
        # weights, so only converged points are held to the invariant.
        assert len(nnz) == 50
        assert nnz[0] == 0
        for i, (a, b) in enumerate(zip(nnz, nnz[1:])):
            if converged[i]:
                assert a <= b, f"rule count dropped {a}->{b} at point {i}"

    def test_rule_count_strictly_monotone_without_collinearity(self):
        # generated candidates include exact complements (a gt column is the
        # negation of its lt twin after standardization), which lets active
        # sets swap members mid-path. On independent candidate columns the
        # raw counts must be non-decreasing with no exemption.
        rng = np.random.default_rng(35)
        cols = (rng.random((500, 6)) < 0.5).astype(float)
        logit = 2.5 * cols[:, 0] + 1.5 * cols[:, 1] - 2.0 * cols[:, 2] - 0.5
        labels = (rng.random(500) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
        names = tuple(f"s{i}" for i in range(6))
        tbl = table(names, cols, labels)
        candidates = [Rule(signal=n, form=RuleForm.GT, threshold=0.5)
                      for n in names]
        result = induce_sparse_logistic(candidates, tbl, tbl)
        assert all(result.metrics["converged_path"])
        nnz = result.metrics["nnz_path"]
        assert nnz[0] == 0
        assert all(a <= b for a, b in zip(nnz, nnz[1:]))

    def test_single_informative_feature(self):
        rng = np.random.default_rng(37)
        labels = rng.integers(0, 2, 400)
        hit = labels.astype(float)
        noise = rng.random((400, 3))
        tbl = table(("hit", "n0", "n1", "n2"),
                    np.column_stack([hit, noise]),
                    labels)
        result = induce_sparse_logistic(generate_candidates(tbl), tbl, tbl,
                                        FAST_SPARSE)
        assert result.metrics["validation_mcc"] >= 0.99
        assert any(r.signal == "hit" for r in result.rules)

    def test_constant_candidates_are_dropped(self):
        train = planted_and(41, 300)
        with_flat = table(train.names + ("flat",),
                          np.column_stack([train.matrix, np.ones(300)]),
                          train.labels)
        cands = generate_candidates(with_flat)
        assert any(r.signal == "flat" for r in cands)  # the linear term
        result = induce_sparse_logistic(cands, with_flat, with_flat, FAST_SPARSE)
        assert all("flat" not in (r.signal, r.signal_b) for r in result.rules)

    def test_constant_labels_rejected(self):
        tbl = table(("a",), [[0.0], [1.0], [0.5]], [1, 1, 1])
        with pytest.raises(PairforgeError) as err:
            induce_sparse_logistic(generate_candidates(tbl), tbl, tbl)
        assert err.value.code == "EMPTY_CANDIDATES"

    def test_infeasible_cap_raises(self):
        train = planted_and(43, 200)
        cands = generate_candidates(train)
        with pytest.raises(PairforgeError) as err:
            induce_sparse_logistic(cands, train, train,
                                   SparseConfig(max_rules=-1, path_points=3))
        assert err.value.code == "NO_FEASIBLE_LAMBDA"

    def test_empty_candidates_rejected(self):
        tbl = table(("a",), [[0.0], [1.0]], [0, 1])
        with pytest.raises(PairforgeError) as err:
            induce_sparse_logistic([], tbl, tbl)
        assert err.value.code == "EMPTY_CANDIDATES"


class TestHybrid:
    def test_keeps_better_validation_strategy(self, and_split, and_candidates):
        train, val, _ = and_split
        greedy = induce_greedy(and_candidates, train, val)
        sparse = induce_sparse_logistic(and_candidates, train, val, FAST_SPARSE)
        hybrid = induce_hybrid(and_candidates, train, val, FAST_SPARSE)
        best = max(greedy.metrics["validation_mcc"],
                   sparse.metrics["validation_mcc"])
        assert hybrid.metrics["validation_mcc"] == best

    def test_planted_conjunction_generalizes(self, and_split, and_candidates):
        train, val, test = and_split
        hybrid = induce_hybrid(and_candidates, train, val, FAST_SPARSE)
        assert ruleset_mcc(hybrid, test) >= 0.9

    def test_exclusive_or_needs_conjunctions(self):
        # no single indicator separates an exclusive-or label: the greedy
        # votes recover at most one quadrant, while the sparse path can
        # weight the two complementary conjunctions
        train = planted_xor(71, 1200)
        val = planted_xor(72, 400)
        test = planted_xor(73, 400)
        cands = generate_candidates(train)
        greedy = induce_greedy(cands, train, val)
        hybrid = induce_hybrid(cands, train, val, FAST_SPARSE)
        assert hybrid.strategy == "sparse_logistic"
        assert hybrid.metrics["validation_mcc"] >= \
            greedy.metrics["validation_mcc"] + 0.2
        assert ruleset_mcc(hybrid, test) >= 0.9

    def test_exact_tie_prefers_fewer_rules_then_greedy(self):
        labels = np.tile([0, 1], 30)
        perfect = labels.astype(float)
        noise = np.arange(60) / 59.0
        tbl = table(("hit", "drift"), np.column_stack([perfect, noise]), labels)
        result = induce_hybrid(generate_candidates(tbl), tbl, tbl, FAST_SPARSE)
        assert result.strategy == "greedy"
        assert result.metrics["validation_mcc"] == 1.0

    def test_falls_back_when_one_strategy_has_no_candidates(self, caplog):
        rng = np.random.default_rng(7)
        col = rng.standard_normal(300)
        labels = (col > 0).astype(np.int64)
        tbl = table(("s",), col[:, None], labels)
        only_linear = [Rule(signal="s", form=RuleForm.LINEAR)]
        with caplog.at_level("WARNING", logger="pairforge.rules"):
            result = induce_hybrid(only_linear, tbl, tbl, FAST_SPARSE)
        assert result.strategy == "sparse_logistic"
        assert any("hybrid induction" in rec.message for rec in caplog.records)

    def test_both_strategies_failing_raises(self):
        tbl = table(("s",), [[0.0], [1.0]], [0, 1])
        with pytest.raises(PairforgeError) as err:
            induce_hybrid([], tbl, tbl)
        assert err.value.code == "EMPTY_CANDIDATES"


class TestScoring:
    def vote_ruleset(self, threshold=0.51):
        rules = (
            Rule(signal="comp_disjoint_known", form=RuleForm.LT, threshold=0.5),
            Rule(signal="pfam_jaccard", form=RuleForm.GT, threshold=0.0),
        )
        return RuleSet(task=Task.HOST_HOST, strategy="greedy", bias=0.0,
                       rules=rules, decision_threshold=threshold)

    def test_vote_fraction_against_decision_threshold(self):
        ruleset = self.vote_ruleset()
        both = {"comp_disjoint_known": 0.0, "pfam_jaccard": 0.2}
        one = {"comp_disjoint_known": 0.0, "pfam_jaccard": 0.0}
        none = {"comp_disjoint_known": 1.0, "pfam_jaccard": 0.0}
        assert score_ruleset(ruleset, both) == (1.0, Label.POSITIVE)
        # a single vote gives 0.5, which does not clear a 0.51 threshold
        assert score_ruleset(ruleset, one) == (0.5, Label.NEGATIVE)
        assert score_ruleset(ruleset, none) == (0.0, Label.NEGATIVE)

    def test_sparse_score_hand_computed(self):
        rule = Rule(signal="s", form=RuleForm.GT, threshold=0.5, weight=2.0,
                    mean=0.25, scale=0.5)
        ruleset = RuleSet(task=Task.HOST_HOST, strategy="sparse_logistic",
                          bias=0.3, rules=(rule,), decision_threshold=0.5)
        score, label = score_ruleset(ruleset, {"s": 1.0})
        expected = 1.0 / (1.0 + math.exp(-(0.3 + 2.0 * (1.0 - 0.25) / 0.5)))
        assert score == pytest.approx(expected, abs=1e-12)
        assert label is Label.POSITIVE

    def test_empty_sparse_ruleset_scores_bias(self):
        ruleset = RuleSet(task=Task.HOST_HOST, strategy="sparse_logistic",
                          bias=-1.2, rules=(), decision_threshold=0.4)
        score, label = score_ruleset(ruleset, {})
        assert score == pytest.approx(1.0 / (1.0 + math.exp(1.2)))
        assert label is Label.NEGATIVE

    def test_rule_order_never_changes_the_score(self):
        rng = np.random.default_rng(17)
        rules = tuple(
            Rule(signal=f"s{i}", form=RuleForm.HINGE_POS,
                 threshold=float(rng.random()), weight=float(rng.normal()),
                 mean=float(rng.random()), scale=float(0.5 + rng.random()))
            for i in range(8))
        signals = {f"s{i}": float(rng.random()) for i in range(8)}
        base = RuleSet(task=Task.HOST_HOST, strategy="sparse_logistic", bias=0.2,
                       rules=rules, decision_threshold=0.5)
        expected = score_ruleset(base, signals)
        for perm_seed in range(5):
            order = np.random.default_rng(perm_seed).permutation(len(rules))
            shuffled = RuleSet(task=Task.HOST_HOST, strategy="sparse_logistic",
                               bias=0.2,
                               rules=tuple(rules[i] for i in order),
                               decision_threshold=0.5)
            assert score_ruleset(shuffled, signals) == expected

    def test_missing_signal_raises(self):
        ruleset = self.vote_ruleset()
        with pytest.raises(PairforgeError) as err:
            score_ruleset(ruleset, {"comp_disjoint_known": 0.0})
        assert err.value.code == "MISSING_SIGNAL"

    def test_score_table_matches_scalar_scoring(self, and_split, and_candidates,
                                                sparse_and_ruleset):
        train, val, _ = and_split
        greedy = induce_greedy(and_candidates, train, val)
        for ruleset in (greedy, sparse_and_ruleset):
            batch = score_table(ruleset, val)
            for i in range(0, val.matrix.shape[0], 17):
                row = dict(zip(val.names, val.matrix[i]))
                assert score_ruleset(ruleset, row)[0] == pytest.approx(
                    batch[i], abs=1e-12)


@pytest.fixture(scope="module")
def registry_ruleset():
    """A sparse induction result renamed onto registry signals."""
    train = planted_and(91, 400)
    val = planted_and(92, 200)
    induced = induce_sparse_logistic(generate_candidates(train), train, val,
                                     FAST_SPARSE)
    renames = {"alpha": "ddi_prior_hit", "beta": "comp_overlap",
               "gamma": "pfam_jaccard", "delta": "len_ratio", None: None}
    rules = tuple(
        Rule(signal=renames[r.signal], form=r.form, threshold=r.threshold,
             weight=r.weight, mean=r.mean, scale=r.scale,
             signal_b=renames[r.signal_b], threshold_b=r.threshold_b,
             op_a=r.op_a, op_b=r.op_b)
        for r in induced.rules)
    return RuleSet(task=induced.task, strategy=induced.strategy,
                   bias=induced.bias, rules=rules,
                   decision_threshold=induced.decision_threshold,
                   metrics=induced.metrics, provenance={"seed": 91})


class TestSerialization:
    def test_round_trip_is_byte_identical(self, registry_ruleset):
        text = ruleset_to_json(registry_ruleset)
        again = ruleset_to_json(parse_ruleset(text))
        assert text == again

    def test_round_trip_preserves_fields(self, registry_ruleset):
        parsed = parse_ruleset(ruleset_to_json(registry_ruleset))
        assert parsed.task is registry_ruleset.task
        assert parsed.strategy == registry_ruleset.strategy
        assert parsed.bias == registry_ruleset.bias
        assert parsed.decision_threshold == registry_ruleset.decision_threshold
        assert parsed.rules == registry_ruleset.rules
        assert parsed.provenance == {"seed": 91}

    def test_unknown_signal_rejected(self, registry_ruleset):
        payload = json.loads(ruleset_to_json(registry_ruleset))
        payload["rules"][0]["signal"] = "not_a_signal"
        with pytest.raises(PairforgeError) as err:
            parse_ruleset(json.dumps(payload))
        assert err.value.code == "UNKNOWN_SIGNAL"

    def test_unknown_form_rejected(self, registry_ruleset):
        payload = json.loads(ruleset_to_json(registry_ruleset))
        payload["rules"][0]["form"] = "between"
        with pytest.raises(PairforgeError) as err:
            parse_ruleset(json.dumps(payload))
        assert err.value.code == "UNKNOWN_FORM"

    def test_signal_registry_is_task_aware(self):
        rule = {"signal": "human_norm_emb", "form": "gt", "threshold": 7.7,
                "weight": -0.9, "mean": 0.0, "scale": 1.0, "signal_b": None,
                "threshold_b": None, "op_a": "gt", "op_b": "gt"}
        base = {"strategy": "sparse_logistic", "bias": 0.0,
                "decision_threshold": 0.4, "rules": [rule], "metrics": {},
                "provenance": {}}
        ok = dict(base, task="pathogen_host")
        parsed = parse_ruleset(json.dumps(ok))
        assert parsed.rules[0].signal == "human_norm_emb"
        bad = dict(base, task="host_host")
        with pytest.raises(PairforgeError) as err:
            parse_ruleset(json.dumps(bad))
        assert err.value.code == "UNKNOWN_SIGNAL"


class TestRendering:
    def test_binary_indicator_convention(self):
        gt = Rule(signal="ddi_prior_hit", form=RuleForm.GT, threshold=0.5)
        lt = Rule(signal="comp_disjoint_known", form=RuleForm.LT, threshold=0.5)
        assert render_rule(gt) == "ddi_prior_hit > 0"
        assert render_rule(lt) == "comp_disjoint_known < 1"

    def test_zero_threshold_renders_plainly(self):
        rule = Rule(signal="pfam_jaccard", form=RuleForm.GT, threshold=0.0)
        assert render_rule(rule) == "pfam_jaccard > 0"

    def test_fractional_thresholds_render_exactly(self):
        rule = Rule(signal="absdiff_mean", form=RuleForm.LT, threshold=0.13)
        assert render_rule(rule) == "absdiff_mean < 0.13"
        norm = Rule(signal="human_norm_emb", form=RuleForm.GT, threshold=7.7)
        assert render_rule(norm) == "human_norm_emb > 7.7"

    def test_conjunction_rendering(self):
        rule = Rule(signal="tar_in_nucleus", form=RuleForm.AND2, threshold=0.5,
                    op_a="lt", signal_b="tar_in_cytoplasm", threshold_b=0.5,
                    op_b="lt", weight=-1.1)
        assert render_rule(rule) == \
            "tar_in_nucleus < 1 and tar_in_cytoplasm < 1"

    def test_hinge_and_linear_rendering(self):
        pos = Rule(signal="cos", form=RuleForm.HINGE_POS, threshold=0.25)
        neg = Rule(signal="cos", form=RuleForm.HINGE_NEG, threshold=0.25)
        lin = Rule(signal="dot", form=RuleForm.LINEAR)
        assert render_rule(pos) == "max(0, cos - 0.25)"
        assert render_rule(neg) == "max(0, 0.25 - cos)"
        assert render_rule(lin) == "dot"

    def test_parse_rendered_indicator(self):
        rule = parse_rendered_rule("absdiff_mean < 0.13", weight=3.1)
        assert rule == Rule(signal="absdiff_mean", form=RuleForm.LT,
                            threshold=0.13, weight=3.1)

    def test_parse_rendered_conjunction(self):
        rule = parse_rendered_rule(
            "tar_in_nucleus < 1 and tar_in_cytoplasm < 1", weight=-1.1)
        assert rule.form is RuleForm.AND2
        assert (rule.signal, rule.op_a, rule.threshold) == \
            ("tar_in_nucleus", "lt", 1.0)
        assert (rule.signal_b, rule.op_b, rule.threshold_b) == \
            ("tar_in_cytoplasm", "lt", 1.0)
        assert rule.weight == -1.1

    def test_parse_rendered_hinges_and_linear(self):
        pos = parse_rendered_rule("max(0, cos - 0.25)")
        assert (pos.form, pos.signal, pos.threshold) == \
            (RuleForm.HINGE_POS, "cos", 0.25)
        neg = parse_rendered_rule("max(0, 0.25 - cos)")
        assert (neg.form, neg.signal, neg.threshold) == \
            (RuleForm.HINGE_NEG, "cos", 0.25)
        lin = parse_rendered_rule("dot", weight=0.3)
        assert (lin.form, lin.signal, lin.weight) == \
            (RuleForm.LINEAR, "dot", 0.3)

    def test_parse_rejects_garbage(self):
        with pytest.raises(PairforgeError) as err:
            parse_rendered_rule("cos >= 0.5")
        assert err.value.code == "UNKNOWN_FORM"

    def test_render_ruleset_layout(self):
        rules = (
            Rule(signal="comp_disjoint_known", form=RuleForm.LT, threshold=0.5),
            Rule(signal="pfam_jaccard", form=RuleForm.GT, threshold=0.0),
        )
        ruleset = RuleSet(task=Task.HOST_HOST, strategy="greedy", bias=0.0,
                          rules=rules, decision_threshold=0.51)
        text = render_ruleset(ruleset)
        lines = text.splitlines()
        assert "# strategy: greedy" in lines
        assert "# decision_threshold: 0.51" in lines
        assert "comp_disjoint_known < 1\t1\t-" in lines
        assert "pfam_jaccard > 0\t1\t-" in lines


class TestReportedRulesets:
    """Shapes of the published two-rule vote set and the weighted set."""

    def test_compact_vote_ruleset_behaviour(self):
        rules = (
            Rule(signal="comp_disjoint_known", form=RuleForm.LT, threshold=0.5),
            Rule(signal="pfam_jaccard", form=RuleForm.GT, threshold=0.0),
        )
        ruleset = RuleSet(task=Task.HOST_HOST, strategy="greedy", bias=0.0,
                          rules=rules, decision_threshold=0.51)
        rendered = [render_rule(r) for r in ruleset.rules]
        assert rendered == ["comp_disjoint_known < 1", "pfam_jaccard > 0"]
        # with two unit votes and threshold 0.51, both rules must fire
        signals = {"comp_disjoint_known": 0.0, "pfam_jaccard": 0.2}
        assert score_ruleset(ruleset, signals)[1] is Label.POSITIVE
        signals["pfam_jaccard"] = 0.0
        assert score_ruleset(ruleset, signals)[1] is Label.NEGATIVE
        text = ruleset_to_json(ruleset)
        assert ruleset_to_json(parse_ruleset(text)) == text

    def test_weighted_ruleset_round_trip(self):
        rules = (
            Rule(signal="absdiff_mean", form=RuleForm.LT, threshold=0.13,
                 weight=3.1),
            Rule(signal="tar_in_mitochondrion", form=RuleForm.GT, threshold=0.5,
                 weight=1.2),
            Rule(signal="tar_in_er", form=RuleForm.GT, threshold=0.5,
                 weight=0.9),
            Rule(signal="tar_in_endosome", form=RuleForm.GT, threshold=0.5,
                 weight=0.55),
            Rule(signal="tar_in_extracellular", form=RuleForm.GT, threshold=0.5,
                 weight=0.54),
            Rule(signal="tar_in_nucleus", form=RuleForm.AND2, threshold=0.5,
                 op_a="lt", signal_b="tar_in_cytoplasm", threshold_b=0.5,
                 op_b="lt", weight=-1.1),
            Rule(signal="human_norm_emb", form=RuleForm.GT, threshold=7.7,
                 weight=-0.9),
        )
        ruleset = RuleSet(task=Task.PATHOGEN_HOST, strategy="sparse_logistic",
                          bias=0.0, rules=rules, decision_threshold=0.4)
        text = ruleset_to_json(ruleset)
        parsed = parse_ruleset(text)
        assert parsed.rules == rules
        assert ruleset_to_json(parsed) == text
        rendered = render_ruleset(ruleset)
        assert "absdiff_mean < 0.13\t3.1\t-" in rendered
        assert "human_norm_emb > 7.7\t-0.9\t-" in rendered
        assert "tar_in_nucleus < 1 and tar_in_cytoplasm < 1\t-1.1\t-" in rendered
