import numpy as np
import pytest

from doeopt import cleaning
from doeopt.cleaning import (
    CleaningConfig,
    ConstraintRule,
    DroppedConstantColumn,
    DroppedCorrelatedColumn,
    DroppedOutlierRow,
    DroppedUserExcluded,
    MergedReplicateGroup,
    ReductionLedger,
    RuleBoundColumn,
    TightenedBounds,
)
from doeopt.core import ObjectiveSpec
from doeopt.errors import InsufficientDataError, RuleConflictError, ValidationError

from conftest import make_dataset


class TestDropConstantColumns:
    def test_exact_constant_dropped_and_ledgered(self, rng):
        X = np.column_stack([np.full(6, 7.0), rng.random(6)])
        ds = make_dataset(X, rng.random(6), bounds={"x1": (0, 10), "x2": (0, 1)})
        out, entries = cleaning.drop_constant_columns(ds)
        assert [e.name for e in entries] == ["x1"]
        assert entries[0].value == 7.0
        assert out.input_names == ["x2"]

    def test_varying_column_kept(self):
        ds = make_dataset([[1.0], [2.0]], [[0.0], [1.0]])
        out, entries = cleaning.drop_constant_columns(ds)
        assert entries == []
        assert out.input_names == ["x1"]

    def test_tiny_relative_spread_counts_as_constant(self, rng):
        col = 1e6 + 1e-9 * rng.random(5)
        X = np.column_stack([col, rng.random(5)])
        ds = make_dataset(X, rng.random(5), bounds={"x1": (0, 2e6), "x2": (0, 1)})
        out, entries = cleaning.drop_constant_columns(ds)
        assert [e.name for e in entries] == ["x1"]


class TestPruneCorrelated:
    def test_exact_collinearity(self, rng):
        a = rng.random(20)
        X = np.column_stack([a, 2.0 * a])
        ds = make_dataset(X, rng.random(20), bounds={"x1": (0, 1), "x2": (0, 2)})
        out, entries = cleaning.prune_correlated(ds, 0.95)
        assert len(entries) == 1
        e = entries[0]
        assert (e.name, e.kept) == ("x2", "x1")
        assert e.a == pytest.approx(2.0, abs=1e-9)
        assert e.b == pytest.approx(0.0, abs=1e-9)
        assert abs(e.r) == pytest.approx(1.0, abs=1e-12)

    def test_independent_columns_survive(self, rng):
        X = rng.random((100, 2))
        ds = make_dataset(X, rng.random(100))
        r = cleaning._pearson(X[:, 0], X[:, 1])
        assert abs(r) < 0.95
        out, entries = cleaning.prune_correlated(ds, 0.95)
        assert entries == []

    def test_transitive_chain_resolves_to_earliest(self, rng):
        a = rng.random(30)
        X = np.column_stack([a, a.copy(), a.copy()])
        ds = make_dataset(X, rng.random(30))
        out, entries = cleaning.prune_correlated(ds, 0.95)
        assert sorted(e.name for e in entries) == ["x2", "x3"]
        assert all(e.kept == "x1" for e in entries)


class TestDetectOutliers:
    def test_gross_outlier_removed(self, rng):
        X = rng.random((5, 1))
        Y = np.array([1.0, 1.0, 1.0, 1.0, 100.0])
        ds = make_dataset(X, Y)
        out, entries = cleaning.detect_outliers(ds, 3.5)
        assert len(entries) == 1
        assert entries[0].row_id == 4
        assert entries[0].zscore > 3.5
        assert len(out) == 4

    def test_identical_outputs_mad_zero_skip(self, rng):
        ds = make_dataset(rng.random((6, 1)), np.full(6, 5.0))
        out, entries = cleaning.detect_outliers(ds, 3.5)
        assert entries == []

    def test_tight_gaussian_rarely_flags(self, rng):
        Y = rng.normal(10.0, 0.5, size=200)
        ds = make_dataset(rng.random((200, 1)), Y)
        out, entries = cleaning.detect_outliers(ds, 3.5)
        assert len(entries) <= 4  # ~2 expected from normal tails at 3.5 robust z


class TestAggregateReplicates:
    def test_odd_count_median(self):
        X = np.array([[0.5], [0.5], [0.5], [0.9]])
        Y = np.array([1.0, 2.0, 9.0, 4.0])
        ds = make_dataset(X, Y, bounds={"x1": (0, 1)})
        out, entries = cleaning.aggregate_replicates(ds, 1e-9)
        assert len(entries) == 1
        assert entries[0].member_row_ids == (0, 1, 2)
        merged = out.row_by_id(0)
        assert merged.outputs[0] == 2.0

    def test_even_count_median_midpoint(self):
        X = np.array([[0.5], [0.5], [0.2]])
        Y = np.array([1.0, 3.0, 9.0])
        ds = make_dataset(X, Y, bounds={"x1": (0, 1)})
        out, entries = cleaning.aggregate_replicates(ds, 1e-9)
        assert out.row_by_id(0).outputs[0] == 2.0

    def test_no_coincident_inputs_noop(self, rng):
        ds = make_dataset(rng.random((8, 2)), rng.random(8))
        out, entries = cleaning.aggregate_replicates(ds, 1e-9)
        assert entries == []
        assert out == ds

    def test_transitive_grouping(self):
        # chain: a~b within tol, b~c within tol, a~c slightly outside
        X = np.array([[0.50], [0.50 + 4e-10], [0.50 + 8e-10], [0.9]])
        ds = make_dataset(X, np.array([1.0, 2.0, 3.0, 4.0]), bounds={"x1": (0, 1)})
        out, entries = cleaning.aggregate_replicates(ds, 5e-10)
        assert len(entries) == 1
        assert entries[0].member_row_ids == (0, 1, 2)

    def test_mean_aggregation_option(self):
        X = np.array([[0.5], [0.5], [0.1]])
        ds = make_dataset(X, np.array([1.0, 2.0, 9.0]), bounds={"x1": (0, 1)})
        out, _ = cleaning.aggregate_replicates(ds, 1e-9, aggregation="mean")
        assert out.row_by_id(0).outputs[0] == 1.5


class TestApplyRules:
    def test_ratio_rule_drops_determined_column(self, rng):
        b = rng.random(10) + 1.0
        X = np.column_stack([2.0 * b, b])
        ds = make_dataset(X, rng.random(10), bounds={"x1": (0, 5), "x2": (0, 3)})
        rule = ConstraintRule(kind="ratio", column="x1", source="x2", value=2.0, tolerance=1e-9)
        out, entries, violations = cleaning.apply_rules(ds, [rule])
        assert violations == []
        assert any(isinstance(e, RuleBoundColumn) and e.name == "x1" for e in entries)
        assert out.input_names == ["x2"]

    def test_bound_rule_tightens_spec(self, rng):
        ds = make_dataset(rng.random((5, 1)) * 0.5 + 0.2, rng.random(5), bounds={"x1": (-50, 200)})
        rule = ConstraintRule(kind="bound", column="x1", lo=0.0, hi=100.0)
        out, entries, _ = cleaning.apply_rules(ds, [rule])
        assert out.input_spec("x1").bounds == (0.0, 100.0)
        assert any(isinstance(e, TightenedBounds) for e in entries)

    def test_linear_rule_violation_reported(self, rng):
        b = rng.random(6)
        a = 3.0 * b + 1.0
        a[2] += 0.5  # perturb one row
        X = np.column_stack([a, b])
        ds = make_dataset(X, rng.random(6), bounds={"x1": (0, 5), "x2": (0, 1)})
        rule = ConstraintRule(kind="linear", column="x1", source="x2", a=3.0, b=1.0, tolerance=1e-6)
        out, entries, violations = cleaning.apply_rules(ds, [rule])
        assert [v.row_id for v in violations] == [2]

    def test_contradictory_fixed_rules(self):
        ds = make_dataset([[1.0], [2.0]], [[0.0], [1.0]])
        rules = [
            ConstraintRule(kind="fixed", column="x1", value=1.0),
            ConstraintRule(kind="fixed", column="x1", value=2.0),
        ]
        with pytest.raises(RuleConflictError):
            cleaning.apply_rules(ds, rules)

    def test_unknown_column_rejected(self):
        ds = make_dataset([[1.0], [2.0]], [[0.0], [1.0]])
        with pytest.raises(ValidationError):
            cleaning.apply_rules(ds, [ConstraintRule(kind="fixed", column="nope", value=1.0)])


def build_raw_fixture(rng, n=40):
    """Raw dataset with one constant column, one exact duplicate column, one
    gross outlier row and one replicate pair."""
    x1 = rng.random(n)
    x2 = rng.random(n)
    const = np.full(n, 3.3)
    dup = 1.5 * x1 - 0.25
    X = np.column_stack([x1, x2, const, dup])
    y = 10 * x1 + 5 * x2 + rng.normal(0, 0.1, n)
    y[7] += 500.0  # outlier
    X[12] = X[3]  # replicate pair (same inputs)
    ds = make_dataset(
        X,
        y,
        input_names=["x1", "x2", "const", "dup"],
        bounds={"x1": (0, 1), "x2": (0, 1), "const": (0, 10), "dup": (-1, 2)},
    )
    return ds


class TestCleanPipeline:
    def test_fixture_census(self, rng):
        ds = build_raw_fixture(rng)
        cleaned, ledger, _ = cleaning.clean(ds, CleaningConfig())
        kinds = [type(e).__name__ for e in ledger.entries]
        assert kinds.count("DroppedConstantColumn") == 1
        assert kinds.count("DroppedCorrelatedColumn") == 1
        assert kinds.count("DroppedOutlierRow") == 1
        assert kinds.count("MergedReplicateGroup") == 1
        assert cleaned.input_names == ["x1", "x2"]

    def test_already_clean_noop(self, rng):
        X = rng.random((20, 2))
        y = rng.normal(0, 1, 20)
        ds = make_dataset(X, y)
        cleaned, ledger, _ = cleaning.clean(ds, CleaningConfig())
        assert ledger.entries == []
        assert cleaned == ds

    def test_replay_reproduces_cleaned(self, rng):
        ds = build_raw_fixture(rng)
        cleaned, ledger, _ = cleaning.clean(ds, CleaningConfig())
        assert ledger.replay(ds) == cleaned

    def test_determinism(self, rng):
        ds = build_raw_fixture(rng)
        a = cleaning.clean(ds, CleaningConfig())
        b = cleaning.clean(ds, CleaningConfig())
        assert a[0] == b[0]
        assert a[1].entries == b[1].entries

    def test_row_conservation(self, rng):
        ds = build_raw_fixture(rng)
        cleaned, ledger, _ = cleaning.clean(ds, CleaningConfig())
        dropped_rows = sum(
            1 for e in ledger.entries if type(e).__name__ in ("DroppedOutlierRow", "DroppedMissingRow", "DroppedOutOfBoundsRow")
        )
        merged_members = sum(len(e.member_row_ids) for e in ledger.entries_of(MergedReplicateGroup))
        merged_groups = len(ledger.entries_of(MergedReplicateGroup))
        assert len(ds) == len(cleaned) + dropped_rows + (merged_members - merged_groups)

    def test_missing_objective_rows_dropped(self, rng):
        ds = build_raw_fixture(rng)
        rows = list(ds.rows)
        r0 = rows[0]
        rows[0] = type(r0)(row_id=r0.row_id, inputs=r0.inputs, outputs=(None,), source=r0.source)
        ds = ds.with_rows(rows)
        cleaned, ledger, _ = cleaning.clean(ds, CleaningConfig(), objectives=[ObjectiveSpec("y1")])
        assert any(type(e).__name__ == "DroppedMissingRow" for e in ledger.entries)

    def test_user_excluded_column(self, rng):
        ds = build_raw_fixture(rng)
        cfg = CleaningConfig(excluded_columns=[{"name": "x2", "reason": "physicist veto"}])
        cleaned, ledger, _ = cleaning.clean(ds, cfg)
        excl = ledger.entries_of(DroppedUserExcluded)
        assert len(excl) == 1
        assert excl[0].name == "x2"
        assert excl[0].default_value == pytest.approx(float(np.median(ds.numeric_input_column("x2"))))
        assert "x2" not in cleaned.input_names

    def test_insufficient_rows_error(self, rng):
        ds = make_dataset(rng.random((4, 2)), rng.normal(0, 1, 4))
        with pytest.raises(InsufficientDataError):
            cleaning.clean(ds, CleaningConfig())

    def test_ledger_jsonl_roundtrip(self, rng):
        ds = build_raw_fixture(rng)
        _, ledger, _ = cleaning.clean(ds, CleaningConfig())
        text = ledger.to_jsonl()
        assert text.splitlines()[0] == '{"schema": "ledger-v1"}'
        back = ReductionLedger.from_jsonl(text)
        assert back.entries == ledger.entries
        assert back.replay(ds) == ledger.replay(ds)
