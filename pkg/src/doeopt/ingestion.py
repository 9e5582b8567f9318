"""Parsing of heterogeneous experiment files into one raw Dataset.

Two source shapes are supported: delimited tables (header row, configurable
delimiter / decimal separator / quote character) and key-value records
(blank-line separated "name = value" blocks, one per experiment). Header
matching is exact after trimming and case-folding; anything fuzzier risks
silently mis-mapping a process parameter. Parsing never raises on bad
content: the worst case is an IngestReport that rejects every row.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import Dataset, ExperimentRow, OutputSpec, ParameterSpec, Value
from .errors import SchemaConflictError, ValidationError

DELIMITED = "delimited-table"
KEY_VALUE = "key-value-records"


@dataclass(frozen=True)
class SourceFileDescriptor:
    """Binding of one physical file to the canonical parameter table."""

    path: str
    format: str = DELIMITED
    delimiter: str = ","
    decimal_separator: str = "."
    quote_char: str = '"'
    column_map: dict[str, str] = field(default_factory=dict)  # source header -> canonical name
    role_map: dict[str, str] = field(default_factory=dict)  # canonical name -> input|output|ignore
    source_id: str = ""

    def __post_init__(self):
        if self.format not in (DELIMITED, KEY_VALUE):
            raise ValidationError(f"unknown source format {self.format!r}")
        if self.delimiter == self.decimal_separator:
            raise ValidationError("delimiter and decimal separator must differ")
        for role in self.role_map.values():
            if role not in ("input", "output", "ignore"):
                raise ValidationError(f"unknown role {role!r}")
        # a canonical name must be claimed by at most one source header per role
        seen: dict[str, str] = {}
        for src, canon in self.column_map.items():
            if canon in seen:
                raise ValidationError(f"canonical name {canon!r} mapped from both {seen[canon]!r} and {src!r}")
            seen[canon] = src

    @property
    def id(self) -> str:
        return self.source_id or self.path


@dataclass
class IngestReport:
    """Bookkeeping for one parsed source."""

    source: str
    rows_parsed: int = 0
    rows_rejected: int = 0
    fill_rate: dict[str, float] = field(default_factory=dict)
    rejected: list[tuple[int, str]] = field(default_factory=list)  # (line number, cause)
    ignored_columns: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "rows_parsed": self.rows_parsed,
            "rows_rejected": self.rows_rejected,
            "fill_rate": self.fill_rate,
            "rejected": [{"line": ln, "cause": cause} for ln, cause in self.rejected],
            "ignored_columns": self.ignored_columns,
        }


def _norm_header(h: str) -> str:
    return h.strip().casefold()


def _parse_number(text: str, decimal: str) -> float:
    if decimal != ".":
        if "." in text:
            raise ValueError(f"unexpected '.' with declared decimal separator {decimal!r}")
        text = text.replace(decimal, ".")
    return float(text)


class _CanonicalLayout:
    """Resolved view of descriptor + parameter table used while parsing."""

    def __init__(self, descriptor: SourceFileDescriptor, inputs: Sequence[ParameterSpec], outputs: Sequence[OutputSpec]):
        self.descriptor = descriptor
        self.inputs = list(inputs)
        self.outputs = list(outputs)
        self.kind_by_name = {p.name: p.kind for p in inputs}
        self.column_map_folded = {_norm_header(k): v for k, v in descriptor.column_map.items()}
        roles = dict(descriptor.role_map)
        for canon in self.column_map_folded.values():
            roles.setdefault(canon, self._implied_role(canon))
        self.role_by_canon = roles

    def _implied_role(self, canon: str) -> str:
        if any(p.name == canon for p in self.inputs):
            return "input"
        if any(o.name == canon for o in self.outputs):
            return "output"
        return "ignore"

    def resolve(self, header: str) -> Optional[str]:
        """Canonical name for a source header, or None to ignore."""
        folded = _norm_header(header)
        canon = self.column_map_folded.get(folded)
        if canon is None:
            # unmapped headers may still match a canonical name directly
            for p in self.inputs:
                if _norm_header(p.name) == folded:
                    canon = p.name
                    break
            else:
                for o in self.outputs:
                    if _norm_header(o.name) == folded:
                        canon = o.name
                        break
        if canon is None:
            return None
        if self.role_by_canon.get(canon, "ignore") == "ignore":
            return None
        return canon

    def parse_cell(self, canon: str, raw: str) -> Value:
        text = raw.strip()
        if text == "":
            return None
        kind = self.kind_by_name.get(canon)
        if kind == "categorical":
            return text
        return _parse_number(text, self.descriptor.decimal_separator)


def parse_source(
    descriptor: SourceFileDescriptor,
    data: bytes,
    inputs: Sequence[ParameterSpec],
    outputs: Sequence[OutputSpec],
) -> tuple[list[dict[str, Value]], IngestReport]:
    """Parse one byte stream into canonical row dicts plus an IngestReport.

    Rows come back keyed by canonical column name; cells that are absent or
    unparseable under the declared decimal separator make the row a reject
    (recorded with line number and cause) without stopping the parse.
    """
    layout = _CanonicalLayout(descriptor, inputs, outputs)
    report = IngestReport(source=descriptor.id)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        text = data.decode("utf-8", errors="replace")
        report.rejected.append((0, "undecodable bytes replaced"))
    if "\x00" in text:
        text = text.replace("\x00", "")
        report.rejected.append((0, "NUL bytes stripped"))
    if descriptor.format == DELIMITED:
        rows = _parse_delimited(layout, text, report)
    else:
        rows = _parse_key_value(layout, text, report)
    _fill_rates(rows, report)
    return rows, report


def _parse_delimited(layout: _CanonicalLayout, text: str, report: IngestReport) -> list[dict[str, Value]]:
    d = layout.descriptor
    reader = csv.reader(io.StringIO(text), delimiter=d.delimiter, quotechar=d.quote_char)
    rows: list[dict[str, Value]] = []
    header: Optional[list[Optional[str]]] = None
    records = _guarded_records(reader, report)
    for line_no, record in records:
        if header is None:
            if not record or all(not c.strip() for c in record):
                report.rejected.append((line_no, "empty header row"))
                report.rows_rejected += 1
                continue
            header = []
            for h in record:
                canon = layout.resolve(h)
                header.append(canon)
                if canon is None and h.strip():
                    report.ignored_columns.append(h.strip())
            continue
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            report.rejected.append((line_no, f"wrong arity: {len(record)} cells, header has {len(header)}"))
            report.rows_rejected += 1
            continue
        row: dict[str, Value] = {}
        bad: Optional[str] = None
        for canon, cell in zip(header, record):
            if canon is None:
                continue
            try:
                row[canon] = layout.parse_cell(canon, cell)
            except ValueError:
                bad = f"non-numeric value {cell.strip()!r} in column {canon!r}"
                break
        if bad is not None:
            report.rejected.append((line_no, bad))
            report.rows_rejected += 1
            continue
        rows.append(row)
        report.rows_parsed += 1
    if header is None and not report.rejected:
        report.rejected.append((0, "no header row found"))
    return rows


def _guarded_records(reader, report: IngestReport):
    """Iterate a csv reader without letting csv-level errors escape."""
    line_no = 0
    while True:
        line_no += 1
        try:
            record = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            report.rejected.append((line_no, f"unreadable line: {exc}"))
            report.rows_rejected += 1
            continue
        yield line_no, record


def _parse_key_value(layout: _CanonicalLayout, text: str, report: IngestReport) -> list[dict[str, Value]]:
    rows: list[dict[str, Value]] = []
    block: dict[str, Value] = {}
    block_start = 1
    bad: Optional[str] = None

    def flush():
        nonlocal block, bad
        if not block and bad is None:
            return
        if bad is not None:
            report.rejected.append((block_start, bad))
            report.rows_rejected += 1
        else:
            rows.append(block)
            report.rows_parsed += 1
        block = {}
        bad = None

    lines = text.splitlines()
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            flush()
            block_start = line_no + 1
            continue
        if bad is not None:
            continue
        if "=" not in stripped:
            bad = f"malformed line {stripped!r}"
            continue
        key, _, value = stripped.partition("=")
        canon = layout.resolve(key)
        if canon is None:
            continue
        try:
            block[canon] = layout.parse_cell(canon, value)
        except ValueError:
            bad = f"non-numeric value {value.strip()!r} in column {canon!r}"
    flush()
    return rows


def _fill_rates(rows: list[dict[str, Value]], report: IngestReport):
    if not rows:
        return
    counts: dict[str, int] = {}
    for row in rows:
        for name, value in row.items():
            counts.setdefault(name, 0)
            if value is not None:
                counts[name] += 1
    report.fill_rate = {name: counts[name] / len(rows) for name in sorted(counts)}


def homogenize(
    parsed_sources: Sequence[tuple[list[dict[str, Value]], SourceFileDescriptor]],
    inputs: Sequence[ParameterSpec],
    outputs: Sequence[OutputSpec],
) -> Dataset:
    """Merge parsed sources into one Dataset in canonical column order.

    Rows from a source that lacks a canonical column carry missing values
    there; provenance records the source id. Two descriptors claiming the
    same canonical name for different roles is a schema conflict.
    """
    if not parsed_sources:
        raise ValidationError("homogenize needs at least one source")
    claimed_roles: dict[str, tuple[str, str]] = {}
    for _, desc in parsed_sources:
        for canon, role in desc.role_map.items():
            if role == "ignore":
                continue
            if canon in claimed_roles and claimed_roles[canon][0] != role:
                other = claimed_roles[canon][1]
                raise SchemaConflictError(
                    f"parameter {canon!r}: {desc.id} maps it as {role}, {other} as {claimed_roles[canon][0]}"
                )
            claimed_roles.setdefault(canon, (role, desc.id))

    rows: list[ExperimentRow] = []
    row_id = 0
    for parsed, desc in parsed_sources:
        for raw in parsed:
            ivals = tuple(raw.get(p.name) for p in inputs)
            ovals = tuple(raw.get(o.name) for o in outputs)
            rows.append(
                ExperimentRow(row_id=row_id, inputs=ivals, outputs=ovals, source=desc.id)
            )
            row_id += 1
    return Dataset(inputs=tuple(inputs), outputs=tuple(outputs), rows=tuple(rows))
