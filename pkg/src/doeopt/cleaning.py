"""Raw-table cleaning with an invertible reduction ledger.

Every action that removes a row or a column lands in the ledger, ordered, so
that (a) replaying the ledger against the raw dataset reproduces the cleaned
dataset exactly and (b) full recipes can later be rebuilt from reduced
parameter vectors by walking the ledger backwards.

Stage order inside :func:`clean`: drop rows missing an objective output,
apply user rules, drop user-excluded columns, drop constants, remove outlier
rows, prune correlated columns, merge replicate groups. Rules run early
because they can delete columns that would otherwise distort the correlation
structure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    CATEGORICAL,
    Dataset,
    ExperimentRow,
    ObjectiveSpec,
    ParameterSpec,
    Value,
)
from .errors import ContractViolation, InsufficientDataError, RuleConflictError, ValidationError

LEDGER_SCHEMA = "ledger-v1"

# outlier consistency constants: MAD of a normal sample estimates sigma / 1.4826;
# when MAD degenerates to 0 the mean absolute deviation (x 1.253314) stands in
MAD_SIGMA = 1.4826
MEANAD_SIGMA = 1.253314


# ---------------------------------------------------------------------------
# Ledger entries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DroppedConstantColumn:
    name: str
    value: Value


@dataclass(frozen=True)
class DroppedCorrelatedColumn:
    name: str
    kept: str
    a: float  # dropped ~= a * kept + b
    b: float
    r: float


@dataclass(frozen=True)
class DroppedUserExcluded:
    name: str
    reason: str
    default_value: Value = None  # dataset median at drop time, for reconstruction


@dataclass(frozen=True)
class DroppedOutlierRow:
    row_id: int
    column: str
    zscore: float


@dataclass(frozen=True)
class DroppedMissingRow:
    row_id: int
    column: str


@dataclass(frozen=True)
class DroppedOutOfBoundsRow:
    row_id: int
    column: str
    value: Value


@dataclass(frozen=True)
class MergedReplicateGroup:
    group_id: int
    member_row_ids: tuple[int, ...]
    aggregation: str = "median"


@dataclass(frozen=True)
class RuleBoundColumn:
    name: str
    rule: dict
    sources: tuple[str, ...]


@dataclass(frozen=True)
class TightenedBounds:
    name: str
    lo: float
    hi: float


LedgerEntry = (
    DroppedConstantColumn
    | DroppedCorrelatedColumn
    | DroppedUserExcluded
    | DroppedOutlierRow
    | DroppedMissingRow
    | DroppedOutOfBoundsRow
    | MergedReplicateGroup
    | RuleBoundColumn
    | TightenedBounds
)

_ENTRY_KINDS = {
    "dropped_constant_column": DroppedConstantColumn,
    "dropped_correlated_column": DroppedCorrelatedColumn,
    "dropped_user_excluded": DroppedUserExcluded,
    "dropped_outlier_row": DroppedOutlierRow,
    "dropped_missing_row": DroppedMissingRow,
    "dropped_out_of_bounds_row": DroppedOutOfBoundsRow,
    "merged_replicate_group": MergedReplicateGroup,
    "rule_bound_column": RuleBoundColumn,
    "tightened_bounds": TightenedBounds,
}
_KIND_BY_TYPE = {cls: kind for kind, cls in _ENTRY_KINDS.items()}


@dataclass
class ReductionLedger:
    """Ordered, replayable record of every cleaning / reduction action."""

    entries: list[LedgerEntry] = field(default_factory=list)

    def append(self, entry: LedgerEntry):
        self.entries.append(entry)

    def extend(self, entries: Sequence[LedgerEntry]):
        self.entries.extend(entries)

    def dropped_columns(self) -> list[str]:
        out = []
        for e in self.entries:
            if isinstance(e, (DroppedConstantColumn, DroppedCorrelatedColumn, DroppedUserExcluded, RuleBoundColumn)):
                out.append(e.name)
        return out

    def entries_of(self, cls) -> list:
        return [e for e in self.entries if isinstance(e, cls)]

    # -- replay ---------------------------------------------------------

    def replay(self, raw: Dataset) -> Dataset:
        """Re-apply every recorded action to the raw dataset."""
        ds = raw
        for entry in self.entries:
            ds = _apply_entry(ds, entry)
        return ds

    # -- serialization ("ledger-v1": one JSON object per line) ----------

    def to_jsonl(self) -> str:
        lines = [json.dumps({"schema": LEDGER_SCHEMA})]
        for e in self.entries:
            d = {"kind": _KIND_BY_TYPE[type(e)]}
            d.update(_entry_to_dict(e))
            lines.append(json.dumps(d, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "ReductionLedger":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValidationError("empty ledger document")
        head = json.loads(lines[0])
        if head.get("schema") != LEDGER_SCHEMA:
            raise ValidationError(f"unknown ledger schema {head.get('schema')!r}")
        entries = []
        for ln in lines[1:]:
            d = json.loads(ln)
            kind = d.pop("kind")
            entry_cls = _ENTRY_KINDS.get(kind)
            if entry_cls is None:
                raise ValidationError(f"unknown ledger entry kind {kind!r}")
            entries.append(_entry_from_dict(entry_cls, d))
        return cls(entries=entries)


def _entry_to_dict(e: LedgerEntry) -> dict:
    if isinstance(e, MergedReplicateGroup):
        return {"group_id": e.group_id, "member_row_ids": list(e.member_row_ids), "aggregation": e.aggregation}
    if isinstance(e, RuleBoundColumn):
        return {"name": e.name, "rule": e.rule, "sources": list(e.sources)}
    return dict(e.__dict__)


def _entry_from_dict(entry_cls, d: dict) -> LedgerEntry:
    if entry_cls is MergedReplicateGroup:
        return MergedReplicateGroup(
            group_id=d["group_id"],
            member_row_ids=tuple(d["member_row_ids"]),
            aggregation=d.get("aggregation", "median"),
        )
    if entry_cls is RuleBoundColumn:
        return RuleBoundColumn(name=d["name"], rule=d["rule"], sources=tuple(d["sources"]))
    return entry_cls(**d)


def _apply_entry(ds: Dataset, entry: LedgerEntry) -> Dataset:
    if isinstance(entry, (DroppedConstantColumn, DroppedCorrelatedColumn, DroppedUserExcluded, RuleBoundColumn)):
        return ds.drop_input(entry.name)
    if isinstance(entry, (DroppedOutlierRow, DroppedMissingRow, DroppedOutOfBoundsRow)):
        return ds.drop_rows([entry.row_id])
    if isinstance(entry, TightenedBounds):
        spec = ds.input_spec(entry.name)
        return ds.with_input_spec(entry.name, spec.with_bounds(entry.lo, entry.hi))
    if isinstance(entry, MergedReplicateGroup):
        return _merge_group(ds, entry.member_row_ids, entry.group_id, entry.aggregation)
    raise ContractViolation(f"unknown ledger entry {entry!r}")


def _merge_group(ds: Dataset, member_ids: Sequence[int], group_id: int, aggregation: str) -> Dataset:
    members = [ds.row_by_id(rid) for rid in member_ids]
    rep = members[0]
    outs: list[Optional[float]] = []
    for j in range(len(ds.outputs)):
        vals = [m.outputs[j] for m in members if m.outputs[j] is not None]
        if not vals:
            outs.append(None)
        elif aggregation == "median":
            outs.append(float(np.median(vals)))
        elif aggregation == "mean":
            outs.append(float(np.mean(vals)))
        else:  # "drop": keep the representative row's value
            outs.append(rep.outputs[j])
    merged = ExperimentRow(
        row_id=rep.row_id,
        inputs=rep.inputs,
        outputs=tuple(outs),
        source=rep.source,
        replicate_group=group_id,
    )
    rows = []
    dead = set(member_ids)
    for r in ds.rows:
        if r.row_id == rep.row_id:
            rows.append(merged)
        elif r.row_id not in dead:
            rows.append(r)
    return ds.with_rows(rows)


# ---------------------------------------------------------------------------
# Constraint rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintRule:
    """One process/machine constraint over canonical parameter names.

    kinds:
      fixed:  column == value
      linear: column == a * source + b
      ratio:  column / source == value
      bound:  lo <= column <= hi
    """

    kind: str
    column: str
    source: Optional[str] = None
    value: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValidationError("rule tolerance must be >= 0")
        if self.kind == "fixed":
            if self.value is None:
                raise ValidationError("fixed rule needs value")
        elif self.kind == "linear":
            if self.source is None or self.a is None or self.b is None:
                raise ValidationError("linear rule needs source, a, b")
        elif self.kind == "ratio":
            if self.source is None or self.value is None:
                raise ValidationError("ratio rule needs source and value")
        elif self.kind == "bound":
            if self.lo is None and self.hi is None:
                raise ValidationError("bound rule needs lo and/or hi")
            if self.lo is not None and self.hi is not None and self.lo > self.hi:
                raise ValidationError("bound rule lo > hi")
        else:
            raise ValidationError(f"unknown rule kind {self.kind!r}")

    def referenced(self) -> list[str]:
        cols = [self.column]
        if self.source:
            cols.append(self.source)
        return cols

    def expression(self) -> str:
        if self.kind == "fixed":
            return f"{self.column} = {self.value}"
        if self.kind == "linear":
            return f"{self.column} = {self.a}*{self.source} + {self.b}"
        if self.kind == "ratio":
            return f"{self.column}/{self.source} = {self.value}"
        lo = "-inf" if self.lo is None else str(self.lo)
        hi = "+inf" if self.hi is None else str(self.hi)
        return f"{lo} <= {self.column} <= {hi}"

    def evaluate(self, values: dict[str, Value]) -> Optional[float]:
        """Absolute violation of the rule at a full assignment, or None if
        a referenced value is missing."""
        x = values.get(self.column)
        if x is None:
            return None
        x = float(x)
        if self.kind == "fixed":
            return abs(x - self.value)
        if self.kind == "bound":
            v = 0.0
            if self.lo is not None:
                v = max(v, self.lo - x)
            if self.hi is not None:
                v = max(v, x - self.hi)
            return v
        s = values.get(self.source)
        if s is None:
            return None
        s = float(s)
        if self.kind == "linear":
            return abs(x - (self.a * s + self.b))
        # ratio: compare x against value * source to avoid dividing by ~0
        return abs(x - self.value * s)

    def solve(self, values: dict[str, Value]) -> Optional[float]:
        """Value of ``column`` implied by the rule, given the other columns."""
        if self.kind == "fixed":
            return float(self.value)
        if self.kind == "linear":
            s = values.get(self.source)
            return None if s is None else self.a * float(s) + self.b
        if self.kind == "ratio":
            s = values.get(self.source)
            return None if s is None else self.value * float(s)
        return None

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "column": self.column, "tolerance": self.tolerance}
        for f in ("source", "value", "a", "b", "lo", "hi"):
            v = getattr(self, f)
            if v is not None:
                d[f] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintRule":
        allowed = {"kind", "column", "source", "value", "a", "b", "lo", "hi", "tolerance"}
        unknown = set(d) - allowed
        if unknown:
            raise ValidationError(f"unknown rule keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RuleViolation:
    row_id: int
    rule: str
    amount: float

    def to_dict(self) -> dict:
        return {"row_id": self.row_id, "rule": self.rule, "amount": self.amount}


# ---------------------------------------------------------------------------
# Cleaning configuration
# ---------------------------------------------------------------------------


@dataclass
class CleaningConfig:
    correlation_threshold: float = 0.95
    outlier_z_threshold: float = 3.5
    replicate_tolerance: float = 1e-9  # in normalized input units
    replicate_aggregation: str = "median"  # median | mean | drop
    strict_rules: bool = False  # remove rule-violating rows instead of only reporting
    min_rows: int = 5
    excluded_columns: list[dict] = field(default_factory=list)  # {name, reason}

    def validate(self):
        if not (0.0 < self.correlation_threshold <= 1.0):
            raise ValidationError("correlation threshold must be in (0, 1]")
        if self.outlier_z_threshold <= 0:
            raise ValidationError("outlier z threshold must be > 0")
        if self.replicate_tolerance < 0:
            raise ValidationError("replicate tolerance must be >= 0")
        if self.replicate_aggregation not in ("median", "mean", "drop"):
            raise ValidationError(f"unknown replicate aggregation {self.replicate_aggregation!r}")


# ---------------------------------------------------------------------------
# Cleaning stages
# ---------------------------------------------------------------------------


def _column_values(ds: Dataset, name: str) -> list[Value]:
    return ds.input_column(name)


def drop_constant_columns(ds: Dataset) -> tuple[Dataset, list[LedgerEntry]]:
    """Remove input columns whose observed spread is negligible."""
    if len(ds) < 1:
        raise ContractViolation("drop_constant_columns needs >= 1 row")
    entries: list[LedgerEntry] = []
    for spec in list(ds.inputs):
        values = [v for v in _column_values(ds, spec.name) if v is not None]
        if not values:
            continue
        if spec.is_numeric:
            arr = np.array([float(v) for v in values])
            span = float(arr.max() - arr.min())
            mean = float(arr.mean())
            if span <= 1e-12 * max(1.0, abs(mean)):
                entries.append(DroppedConstantColumn(name=spec.name, value=float(arr[0])))
        else:
            if len(set(values)) == 1:
                entries.append(DroppedConstantColumn(name=spec.name, value=values[0]))
    for e in entries:
        ds = ds.drop_input(e.name)
    return ds, entries


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pairwise-complete Pearson correlation; 0.0 when degenerate."""
    ok = ~(np.isnan(x) | np.isnan(y))
    if ok.sum() < 3:
        return 0.0
    xs, ys = x[ok], y[ok]
    sx, sy = xs.std(), ys.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.mean((xs - xs.mean()) * (ys - ys.mean())) / (sx * sy))


def prune_correlated(ds: Dataset, threshold: float) -> tuple[Dataset, list[LedgerEntry]]:
    """Drop the later of each highly-correlated numeric column pair.

    Canonical (earlier) columns win; transitive chains therefore resolve to
    the earliest kept column. The ledger stores the least-squares affine map
    from the kept column to the dropped one so recipes can restore it.
    """
    if len(ds) < 3:
        raise ContractViolation("prune_correlated needs >= 3 rows")
    numeric = [p.name for p in ds.inputs if p.is_numeric]
    cols = {n: ds.numeric_input_column(n) for n in numeric}
    kept: list[str] = []
    entries: list[LedgerEntry] = []
    for name in numeric:
        x = cols[name]
        matched = None
        for k in kept:
            r = _pearson(cols[k], x)
            if abs(r) >= threshold:
                matched = (k, r)
                break
        if matched is None:
            kept.append(name)
            continue
        k, r = matched
        xk = cols[k]
        ok = ~(np.isnan(xk) | np.isnan(x))
        a, b = np.polyfit(xk[ok], x[ok], deg=1)
        entries.append(DroppedCorrelatedColumn(name=name, kept=k, a=float(a), b=float(b), r=float(r)))
    for e in entries:
        ds = ds.drop_input(e.name)
    return ds, entries


def detect_outliers(
    ds: Dataset, z_threshold: float, objective_outputs: Optional[Sequence[str]] = None
) -> tuple[Dataset, list[LedgerEntry]]:
    """Remove rows whose robust z-score exceeds the threshold in any
    objective output. z = |x - median| / (1.4826 * MAD); a zero MAD falls
    back to the scaled mean absolute deviation, and a column whose spread is
    zero either way is skipped (nothing can be flagged honestly).
    """
    if len(ds) < 5:
        raise ContractViolation("detect_outliers needs >= 5 rows")
    names = list(objective_outputs) if objective_outputs else ds.output_names
    worst: dict[int, tuple[str, float]] = {}
    for name in names:
        col = ds.output_column(name)
        ok = ~np.isnan(col)
        if ok.sum() == 0:
            continue
        med = float(np.median(col[ok]))
        mad = float(np.median(np.abs(col[ok] - med)))
        if mad > 0.0:
            denom = MAD_SIGMA * mad
        else:
            mean_ad = float(np.mean(np.abs(col[ok] - med)))
            if mean_ad == 0.0:
                continue
            denom = MEANAD_SIGMA * mean_ad
        z = np.abs(col - med) / denom
        for i, row in enumerate(ds.rows):
            if ok[i] and z[i] > z_threshold:
                prev = worst.get(row.row_id)
                if prev is None or z[i] > prev[1]:
                    worst[row.row_id] = (name, float(z[i]))
    entries: list[LedgerEntry] = [
        DroppedOutlierRow(row_id=rid, column=col, zscore=zs)
        for rid, (col, zs) in sorted(worst.items())
    ]
    for e in entries:
        ds = ds.drop_rows([e.row_id])
    return ds, entries


def aggregate_replicates(ds: Dataset, input_tolerance: float, aggregation: str = "median") -> tuple[Dataset, list[LedgerEntry]]:
    """Merge rows whose normalized input vectors coincide within tolerance.

    Grouping is transitive (union-find over close pairs); each group becomes
    one row with the first member's inputs and per-column aggregated outputs.
    """
    n = len(ds)
    if n < 2:
        return ds, []
    # normalized coordinates per input: numeric scaled to the spec box,
    # categorical levels become distinct integers (distance >= 1 if unequal)
    coords = np.zeros((n, len(ds.inputs)))
    for j, spec in enumerate(ds.inputs):
        for i, row in enumerate(ds.rows):
            v = row.inputs[j]
            if v is None:
                coords[i, j] = math.nan
            elif spec.is_numeric:
                lo, hi = spec.bounds
                coords[i, j] = (float(v) - lo) / (hi - lo) if hi > lo else 0.0
            else:
                coords[i, j] = float(spec.levels.index(v))

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for i in range(n):
        for j in range(i + 1, n):
            diff = coords[i] - coords[j]
            if np.isnan(diff).any():
                same_missing = np.array_equal(np.isnan(coords[i]), np.isnan(coords[j]))
                if not same_missing:
                    continue
                diff = diff[~np.isnan(diff)]
            if diff.size == 0 or np.max(np.abs(diff)) <= input_tolerance:
                union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    entries: list[LedgerEntry] = []
    group_id = 0
    for root in sorted(groups):
        members = groups[root]
        if len(members) < 2:
            continue
        member_ids = tuple(ds.rows[i].row_id for i in members)
        entries.append(MergedReplicateGroup(group_id=group_id, member_row_ids=member_ids, aggregation=aggregation))
        group_id += 1
    out = ds
    for e in entries:
        out = _merge_group(out, e.member_row_ids, e.group_id, e.aggregation)
    return out, entries


def apply_rules(
    ds: Dataset, rules: Sequence[ConstraintRule], strict: bool = False
) -> tuple[Dataset, list[LedgerEntry], list[RuleViolation]]:
    """Apply constraint rules: tighten bounds, report (or drop) violating
    rows, and remove columns a rule fully determines."""
    for rule in rules:
        for col in rule.referenced():
            if col not in ds.input_names:
                raise ValidationError(f"rule {rule.expression()!r} references unknown column {col!r}")
    _check_rule_conflicts(rules)

    entries: list[LedgerEntry] = []
    violations: list[RuleViolation] = []

    # bound rules tighten the parameter box
    for rule in rules:
        if rule.kind != "bound":
            continue
        spec = ds.input_spec(rule.column)
        if not spec.is_numeric:
            raise ValidationError(f"bound rule on categorical column {rule.column!r}")
        lo, hi = spec.bounds
        new_lo = max(lo, rule.lo) if rule.lo is not None else lo
        new_hi = min(hi, rule.hi) if rule.hi is not None else hi
        if new_lo >= new_hi:
            raise RuleConflictError(f"rule {rule.expression()!r} empties bounds of {rule.column!r}")
        if (new_lo, new_hi) != (lo, hi):
            entries.append(TightenedBounds(name=rule.column, lo=new_lo, hi=new_hi))
            ds = ds.with_input_spec(rule.column, spec.with_bounds(new_lo, new_hi))

    # row validation against every rule
    names = ds.input_names
    for row in ds.rows:
        values = dict(zip(names, row.inputs))
        for rule in rules:
            v = rule.evaluate(values)
            if v is not None and v > rule.tolerance:
                violations.append(RuleViolation(row_id=row.row_id, rule=rule.expression(), amount=float(v)))
    if strict and violations:
        dead = {v.row_id for v in violations}
        for rid in sorted(dead):
            worst = max((v for v in violations if v.row_id == rid), key=lambda v: v.amount)
            entries.append(DroppedOutOfBoundsRow(row_id=rid, column=f"rule:{worst.rule}", value=worst.amount))
        ds = ds.drop_rows(dead)

    # determined columns are removed (value reconstructible from the rule)
    determined: dict[str, ConstraintRule] = {}
    for rule in rules:
        if rule.kind in ("fixed", "linear", "ratio") and rule.column not in determined:
            determined[rule.column] = rule
    for name, rule in determined.items():
        if name not in ds.input_names:
            continue
        sources = tuple(s for s in rule.referenced()[1:])
        entries.append(RuleBoundColumn(name=name, rule=rule.to_dict(), sources=sources))
        ds = ds.drop_input(name)

    return ds, entries, violations


def _check_rule_conflicts(rules: Sequence[ConstraintRule]):
    fixed: dict[str, float] = {}
    for rule in rules:
        if rule.kind != "fixed":
            continue
        prev = fixed.get(rule.column)
        if prev is not None and abs(prev - rule.value) > max(rule.tolerance, 1e-12):
            raise RuleConflictError(f"contradictory fixed rules on {rule.column!r}: {prev} vs {rule.value}")
        fixed[rule.column] = float(rule.value)


def drop_missing_objective_rows(ds: Dataset, objective_outputs: Sequence[str]) -> tuple[Dataset, list[LedgerEntry]]:
    entries: list[LedgerEntry] = []
    for row in ds.rows:
        for name in objective_outputs:
            j = ds.output_index(name)
            if row.outputs[j] is None:
                entries.append(DroppedMissingRow(row_id=row.row_id, column=name))
                break
    if entries:
        ds = ds.drop_rows([e.row_id for e in entries])
    return ds, entries


def enforce_bounds(ds: Dataset) -> tuple[Dataset, list[LedgerEntry]]:
    """Drop rows holding values outside the (possibly rule-tightened) box.

    Cleaned datasets promise in-bounds values; recordings beyond the machine
    limits are measurement artifacts, not experiments the model may learn.
    """
    entries: list[LedgerEntry] = []
    for row in ds.rows:
        for spec, v in zip(ds.inputs, row.inputs):
            if v is None:
                continue
            if not spec.contains(v):
                entries.append(DroppedOutOfBoundsRow(row_id=row.row_id, column=spec.name, value=v))
                break
    if entries:
        ds = ds.drop_rows([e.row_id for e in entries])
    return ds, entries


def clean(
    ds: Dataset,
    config: CleaningConfig,
    objectives: Optional[Sequence[ObjectiveSpec]] = None,
    rules: Sequence[ConstraintRule] = (),
) -> tuple[Dataset, ReductionLedger, list[RuleViolation]]:
    """Full cleaning pipeline; returns (cleaned dataset, ledger, violations)."""
    config.validate()
    ledger = ReductionLedger()
    objective_outputs = [o.output for o in objectives] if objectives else list(ds.output_names)

    ds, entries = drop_missing_objective_rows(ds, objective_outputs)
    ledger.extend(entries)

    ds, entries, violations = apply_rules(ds, rules, strict=config.strict_rules)
    ledger.extend(entries)

    ds, entries = enforce_bounds(ds)
    ledger.extend(entries)

    for exc in config.excluded_columns:
        name, reason = exc["name"], exc.get("reason", "user excluded")
        if name not in ds.input_names:
            raise ValidationError(f"excluded column {name!r} not in dataset")
        ledger.append(DroppedUserExcluded(name=name, reason=reason, default_value=_column_default(ds, name)))
        ds = ds.drop_input(name)

    ds, entries = drop_constant_columns(ds)
    ledger.extend(entries)

    if len(ds) >= 5:
        ds, entries = detect_outliers(ds, config.outlier_z_threshold, objective_outputs)
        ledger.extend(entries)

    if len(ds) >= 3:
        ds, entries = prune_correlated(ds, config.correlation_threshold)
        ledger.extend(entries)

    ds, entries = aggregate_replicates(ds, config.replicate_tolerance, config.replicate_aggregation)
    ledger.extend(entries)

    if len(ds) < config.min_rows:
        raise InsufficientDataError(f"only {len(ds)} rows survive cleaning (need {config.min_rows})")
    return ds, ledger, violations


def _column_default(ds: Dataset, name: str) -> Value:
    """Median (numeric) or most common level (categorical) of a column."""
    spec = ds.input_spec(name)
    values = [v for v in ds.input_column(name) if v is not None]
    if not values:
        return None
    if spec.is_numeric:
        return float(np.median([float(v) for v in values]))
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return max(sorted(counts), key=lambda k: counts[k])
