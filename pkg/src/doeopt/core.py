"""Shared domain types and deterministic numeric conventions.

Everything downstream (cleaning, selection, surrogates, the optimizer)
works on the types defined here. All floats are 64-bit; every stochastic
operation takes an explicit integer seed and derives child generators
through :func:`derive_seed`, so a (seed, config, dataset) triple pins every
artifact bit-for-bit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ContractViolation, DegenerateColumnError, DegenerateDegreesOfFreedom

ABS_TOL = 1e-9

CONTINUOUS = "continuous"
INTEGER = "integer"
CATEGORICAL = "categorical"

Value = Union[float, str, None]


def derive_seed(seed: int, *labels) -> int:
    """Derive a stable child seed from a parent seed and a label path.

    Hash-based so unrelated consumers of the same parent seed never share
    a stream; stable across processes and platforms.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big")


def rng_for(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))


# ---------------------------------------------------------------------------
# Parameter and dataset types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterSpec:
    """One input parameter: its kind, physical bounds or levels, and unit."""

    name: str
    kind: str = CONTINUOUS
    bounds: Optional[tuple[float, float]] = None
    levels: Optional[tuple[str, ...]] = None
    unit: str = ""

    def __post_init__(self):
        if not self.name:
            raise ContractViolation("parameter name must be nonempty")
        if self.kind in (CONTINUOUS, INTEGER):
            if self.bounds is None:
                raise ContractViolation(f"parameter {self.name!r}: {self.kind} kind needs bounds")
            lo, hi = self.bounds
            if not (lo < hi):
                raise ContractViolation(f"parameter {self.name!r}: bounds must satisfy lo < hi")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))
        elif self.kind == CATEGORICAL:
            if self.levels is None or len(self.levels) < 2:
                raise ContractViolation(f"parameter {self.name!r}: categorical needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise ContractViolation(f"parameter {self.name!r}: duplicate levels")
            object.__setattr__(self, "levels", tuple(self.levels))
        else:
            raise ContractViolation(f"parameter {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_numeric(self) -> bool:
        return self.kind in (CONTINUOUS, INTEGER)

    def contains(self, value: Value, tol: float = ABS_TOL) -> bool:
        if value is None:
            return True
        if self.is_numeric:
            lo, hi = self.bounds
            return lo - tol <= float(value) <= hi + tol
        return value in self.levels

    def with_bounds(self, lo: float, hi: float) -> "ParameterSpec":
        return replace(self, bounds=(lo, hi))


@dataclass(frozen=True)
class OutputSpec:
    """One measured output column."""

    name: str
    unit: str = ""


@dataclass(frozen=True)
class ObjectiveSpec:
    """Optimization target bound to an output column."""

    output: str
    direction: str = "maximize"  # or "minimize"
    target_window: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize"):
            raise ContractViolation(f"objective {self.output!r}: bad direction {self.direction!r}")
        if self.target_window is not None:
            lo, hi = self.target_window
            if lo > hi:
                raise ContractViolation(f"objective {self.output!r}: target window lo > hi")

    @property
    def sign(self) -> float:
        """+1 for maximize, -1 for minimize."""
        return 1.0 if self.direction == "maximize" else -1.0


@dataclass(frozen=True)
class ExperimentRow:
    """One experiment: input values (native units), measured outputs, provenance."""

    row_id: int
    inputs: tuple[Value, ...]
    outputs: tuple[Optional[float], ...]
    source: str = ""
    replicate_group: Optional[int] = None


@dataclass(frozen=True)
class Dataset:
    """Rectangular experiments table with named, typed columns."""

    inputs: tuple[ParameterSpec, ...]
    outputs: tuple[OutputSpec, ...]
    rows: tuple[ExperimentRow, ...]

    def __post_init__(self):
        names = [p.name for p in self.inputs]
        if len(set(names)) != len(names):
            raise ContractViolation("duplicate input parameter names")
        onames = [o.name for o in self.outputs]
        if len(set(onames)) != len(onames):
            raise ContractViolation("duplicate output names")
        for row in self.rows:
            if len(row.inputs) != len(self.inputs):
                raise ContractViolation(f"row {row.row_id}: input arity {len(row.inputs)} != {len(self.inputs)}")
            if len(row.outputs) != len(self.outputs):
                raise ContractViolation(f"row {row.row_id}: output arity {len(row.outputs)} != {len(self.outputs)}")

    # -- name lookups -------------------------------------------------

    @property
    def input_names(self) -> list[str]:
        return [p.name for p in self.inputs]

    @property
    def output_names(self) -> list[str]:
        return [o.name for o in self.outputs]

    def input_index(self, name: str) -> int:
        try:
            return self.input_names.index(name)
        except ValueError:
            raise ContractViolation(f"unknown input column {name!r}") from None

    def output_index(self, name: str) -> int:
        try:
            return self.output_names.index(name)
        except ValueError:
            raise ContractViolation(f"unknown output column {name!r}") from None

    def input_spec(self, name: str) -> ParameterSpec:
        return self.inputs[self.input_index(name)]

    # -- column access ------------------------------------------------

    def input_column(self, name: str) -> list[Value]:
        j = self.input_index(name)
        return [r.inputs[j] for r in self.rows]

    def numeric_input_column(self, name: str) -> np.ndarray:
        """Column as float64 with NaN for missing. Numeric kinds only."""
        j = self.input_index(name)
        if not self.inputs[j].is_numeric:
            raise ContractViolation(f"input {name!r} is categorical")
        return np.array(
            [math.nan if r.inputs[j] is None else float(r.inputs[j]) for r in self.rows],
            dtype=np.float64,
        )

    def output_column(self, name: str) -> np.ndarray:
        j = self.output_index(name)
        return np.array(
            [math.nan if r.outputs[j] is None else float(r.outputs[j]) for r in self.rows],
            dtype=np.float64,
        )

    def output_matrix(self) -> np.ndarray:
        return np.array(
            [[math.nan if v is None else float(v) for v in r.outputs] for r in self.rows],
            dtype=np.float64,
        )

    # -- structural edits (return new datasets; rows keep their ids) ---

    def drop_input(self, name: str) -> "Dataset":
        j = self.input_index(name)
        inputs = tuple(p for i, p in enumerate(self.inputs) if i != j)
        rows = tuple(
            replace(r, inputs=tuple(v for i, v in enumerate(r.inputs) if i != j)) for r in self.rows
        )
        return Dataset(inputs=inputs, outputs=self.outputs, rows=rows)

    def select_inputs(self, names: Sequence[str]) -> "Dataset":
        idx = [self.input_index(n) for n in names]
        inputs = tuple(self.inputs[i] for i in idx)
        rows = tuple(replace(r, inputs=tuple(r.inputs[i] for i in idx)) for r in self.rows)
        return Dataset(inputs=inputs, outputs=self.outputs, rows=rows)

    def drop_rows(self, row_ids: Iterable[int]) -> "Dataset":
        dead = set(row_ids)
        return replace(self, rows=tuple(r for r in self.rows if r.row_id not in dead))

    def with_rows(self, rows: Sequence[ExperimentRow]) -> "Dataset":
        return replace(self, rows=tuple(rows))

    def with_input_spec(self, name: str, spec: ParameterSpec) -> "Dataset":
        j = self.input_index(name)
        inputs = list(self.inputs)
        inputs[j] = spec
        return replace(self, inputs=tuple(inputs))

    def row_by_id(self, row_id: int) -> ExperimentRow:
        for r in self.rows:
            if r.row_id == row_id:
                return r
        raise ContractViolation(f"no row with id {row_id}")

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class MetricReport:
    """Train/test fit metrics for one output of one model."""

    rmse_train: float
    rmse_test: float
    r2_train: float
    r2_test: float
    adjusted_r2_test: float
    n_train: int
    n_test: int
    n_features: int


# ---------------------------------------------------------------------------
# Elementary metrics
# ---------------------------------------------------------------------------


def rmse(predictions, targets) -> float:
    """Root mean squared error between two equal-length vectors."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ContractViolation(f"rmse length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ContractViolation("rmse of empty vectors")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def r2_score(predictions, targets) -> float:
    """Coefficient of determination; 1.0 when targets have zero variance and fit is exact."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape or p.size == 0:
        raise ContractViolation("r2 needs equal nonzero lengths")
    ss_res = float(np.sum((t - p) ** 2))
    ss_tot = float(np.sum((t - np.mean(t)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def adjusted_r2(r2: float, n: int, p: int) -> float:
    """Sample-size corrected R2: 1 - (1 - r2) (n - 1) / (n - p - 1)."""
    if n <= p + 1:
        raise DegenerateDegreesOfFreedom(f"adjusted_r2 needs n > p + 1 (got n={n}, p={p})")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnCodec:
    """Affine map (numeric) or one-hot layout (categorical) for one input."""

    name: str
    kind: str
    lo: float = 0.0
    hi: float = 1.0
    levels: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        return len(self.levels) if self.kind == CATEGORICAL else 1

    def encode(self, value: Value) -> list[float]:
        if self.kind == CATEGORICAL:
            if value not in self.levels:
                raise ContractViolation(f"{self.name!r}: unknown level {value!r}")
            return [1.0 if lv == value else 0.0 for lv in self.levels]
        return [(float(value) - self.lo) / (self.hi - self.lo)]

    def decode(self, coords: Sequence[float]) -> Value:
        if self.kind == CATEGORICAL:
            return self.levels[int(np.argmax(coords))]
        x = self.lo + float(coords[0]) * (self.hi - self.lo)
        if self.kind == INTEGER:
            return float(round(x))
        return x

    def column_names(self) -> list[str]:
        if self.kind == CATEGORICAL:
            return [f"{self.name}={lv}" for lv in self.levels]
        return [self.name]


@dataclass(frozen=True)
class NormalizationRecord:
    """Everything needed to move between native units and the model box.

    Inputs map into [0, 1] per coordinate (one-hot blocks for categorical
    parameters); outputs are z-scored per column. The record inverts the
    mapping exactly up to float rounding.
    """

    codecs: tuple[ColumnCodec, ...]
    output_names: tuple[str, ...]
    output_means: tuple[float, ...]
    output_stds: tuple[float, ...]

    @property
    def n_coords(self) -> int:
        return sum(c.width for c in self.codecs)

    @property
    def input_names(self) -> list[str]:
        return [c.name for c in self.codecs]

    def coord_names(self) -> list[str]:
        out: list[str] = []
        for c in self.codecs:
            out.extend(c.column_names())
        return out

    def coord_slices(self) -> dict[str, slice]:
        """Normalized-coordinate slice occupied by each parameter."""
        out: dict[str, slice] = {}
        pos = 0
        for c in self.codecs:
            out[c.name] = slice(pos, pos + c.width)
            pos += c.width
        return out

    def encode_inputs(self, values: Sequence[Value]) -> np.ndarray:
        if len(values) != len(self.codecs):
            raise ContractViolation(f"expected {len(self.codecs)} input values, got {len(values)}")
        coords: list[float] = []
        for codec, v in zip(self.codecs, values):
            coords.extend(codec.encode(v))
        return np.array(coords, dtype=np.float64)

    def decode_inputs(self, coords: Sequence[float]) -> list[Value]:
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (self.n_coords,):
            raise ContractViolation(f"expected {self.n_coords} coordinates, got {coords.shape}")
        values: list[Value] = []
        pos = 0
        for codec in self.codecs:
            values.append(codec.decode(coords[pos : pos + codec.width]))
            pos += codec.width
        return values

    def encode_input_matrix(self, rows: Sequence[Sequence[Value]]) -> np.ndarray:
        return np.array([self.encode_inputs(r) for r in rows], dtype=np.float64)

    def encode_outputs(self, values: Sequence[float]) -> np.ndarray:
        y = np.asarray(values, dtype=np.float64)
        return (y - np.array(self.output_means)) / np.array(self.output_stds)

    def decode_outputs(self, z: Sequence[float]) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return z * np.array(self.output_stds) + np.array(self.output_means)

    def to_dict(self) -> dict:
        return {
            "codecs": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "lo": c.lo,
                    "hi": c.hi,
                    "levels": list(c.levels),
                }
                for c in self.codecs
            ],
            "output_names": list(self.output_names),
            "output_means": list(self.output_means),
            "output_stds": list(self.output_stds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationRecord":
        return cls(
            codecs=tuple(
                ColumnCodec(
                    name=c["name"], kind=c["kind"], lo=c["lo"], hi=c["hi"], levels=tuple(c["levels"])
                )
                for c in d["codecs"]
            ),
            output_names=tuple(d["output_names"]),
            output_means=tuple(d["output_means"]),
            output_stds=tuple(d["output_stds"]),
        )


def normalization_record(dataset: Dataset) -> NormalizationRecord:
    """Build the input/output normalization maps for a cleaned dataset."""
    codecs = []
    for spec in dataset.inputs:
        if spec.is_numeric:
            lo, hi = spec.bounds
            if hi - lo <= 0:
                raise DegenerateColumnError(spec.name, "zero-width bounds")
            codecs.append(ColumnCodec(name=spec.name, kind=spec.kind, lo=lo, hi=hi))
        else:
            codecs.append(ColumnCodec(name=spec.name, kind=CATEGORICAL, levels=spec.levels))
    means, stds = [], []
    for out in dataset.outputs:
        col = dataset.output_column(out.name)
        col = col[~np.isnan(col)]
        if col.size == 0:
            raise DegenerateColumnError(out.name, "no observed values")
        mean = float(np.mean(col))
        std = float(np.std(col))
        if std == 0.0:
            raise DegenerateColumnError(out.name, "zero output variance")
        means.append(mean)
        stds.append(std)
    return NormalizationRecord(
        codecs=tuple(codecs),
        output_names=tuple(dataset.output_names),
        output_means=tuple(means),
        output_stds=tuple(stds),
    )


def normalize(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, NormalizationRecord]:
    """Map a cleaned dataset to the unit input box and z-scored outputs.

    Returns (X, Y, record) where X is (n_rows, n_coords) in [0, 1] and Y is
    (n_rows, n_outputs) z-scored; rows with a missing input or output are the
    caller's problem (NaN propagates for outputs, missing inputs raise).
    """
    if len(dataset) < 2:
        raise ContractViolation("normalize needs >= 2 rows")
    record = normalization_record(dataset)
    X = record.encode_input_matrix([r.inputs for r in dataset.rows])
    Y = np.array([record.encode_outputs([math.nan if v is None else v for v in r.outputs]) for r in dataset.rows])
    return X, Y, record


# ---------------------------------------------------------------------------
# Dataset (de)serialization — shared by persistence and fixtures
# ---------------------------------------------------------------------------


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "inputs": [
            {
                "name": p.name,
                "kind": p.kind,
                "bounds": list(p.bounds) if p.bounds else None,
                "levels": list(p.levels) if p.levels else None,
                "unit": p.unit,
            }
            for p in ds.inputs
        ],
        "outputs": [{"name": o.name, "unit": o.unit} for o in ds.outputs],
        "rows": [
            {
                "row_id": r.row_id,
                "inputs": list(r.inputs),
                "outputs": list(r.outputs),
                "source": r.source,
                "replicate_group": r.replicate_group,
            }
            for r in ds.rows
        ],
    }


def dataset_from_dict(d: dict) -> Dataset:
    return Dataset(
        inputs=tuple(
            ParameterSpec(
                name=p["name"],
                kind=p["kind"],
                bounds=tuple(p["bounds"]) if p.get("bounds") else None,
                levels=tuple(p["levels"]) if p.get("levels") else None,
                unit=p.get("unit", ""),
            )
            for p in d["inputs"]
        ),
        outputs=tuple(OutputSpec(name=o["name"], unit=o.get("unit", "")) for o in d["outputs"]),
        rows=tuple(
            ExperimentRow(
                row_id=r["row_id"],
                inputs=tuple(r["inputs"]),
                outputs=tuple(r["outputs"]),
                source=r.get("source", ""),
                replicate_group=r.get("replicate_group"),
            )
            for r in d["rows"]
        ),
    )
