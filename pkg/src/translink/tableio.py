"""Record tables, CSV ingestion and run configuration.

Input files are comma-separated with header ``id,first_name,last_name,zip,age``
followed by any extra columns, which are carried through untouched. Field
values are normalized/validated here once so every downstream module can
assume clean data: names normalized, zips five digits or missing, ages
integers in [0, 130] or missing.
"""
from __future__ import annotations

import configparser
import csv
import re
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

from .errors import ConfigError, DataError
from .stringmetrics import normalize

__all__ = [
    "RecordTable",
    "RejectEntry",
    "RunConfig",
    "ingest",
    "load_run_config",
    "write_rejects_csv",
    "NOLINK",
]

# Sentinel written in place of an A-side id for unlinked records.
NOLINK = "NOLINK"

REQUIRED_COLUMNS = ("id", "first_name", "last_name", "zip", "age")
_ZIP_RE = re.compile(r"\d{5}\Z")
MAX_REJECT_FRACTION = 0.10


@dataclass
class RecordTable:
    """One input file, column-oriented. None marks a missing value."""

    ids: list[str]
    first_names: list[str | None]
    last_names: list[str | None]
    zips: list[str | None]
    ages: list[int | None]
    extras: dict[str, list[str]] = field(default_factory=dict)
    source: str = ""

    def __len__(self) -> int:
        return len(self.ids)

    def column(self, name: str) -> list:
        """Values for a standard field name (first_name, last_name, zip, age)."""
        attr = {
            "first_name": "first_names",
            "last_name": "last_names",
            "zip": "zips",
            "age": "ages",
        }.get(name)
        if attr is None:
            raise KeyError(f"not a standard comparison field: {name!r}")
        return getattr(self, attr)


@dataclass(frozen=True)
class RejectEntry:
    source: str
    line: int
    record_id: str
    field: str
    issue: str


def ingest(path, column_map: dict[str, str] | None = None) -> tuple[RecordTable, list[RejectEntry]]:
    """Read one record file.

    column_map optionally renames the standard columns (standard name ->
    actual header name). Per-row problems become RejectEntry items: a bad
    zip or age is set missing and the row kept; a row without an id is
    dropped. Duplicate ids and missing required columns are hard errors,
    as is a file where more than 10% of data rows have problems.
    """
    colmap = {c: c for c in REQUIRED_COLUMNS}
    if column_map:
        unknown = set(column_map) - set(REQUIRED_COLUMNS)
        if unknown:
            raise ConfigError(f"column_map has unknown standard names: {sorted(unknown)}")
        colmap.update(column_map)

    path = Path(path)
    source = str(path)
    rejects: list[RejectEntry] = []
    table = RecordTable([], [], [], [], [], {}, source=source)
    seen_ids: dict[str, int] = {}
    rows_with_issues = 0
    total_rows = 0

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{source}: empty file") from None
        header = [h.strip() for h in header]
        positions: dict[str, int] = {}
        for std in REQUIRED_COLUMNS:
            actual = colmap[std]
            if actual not in header:
                raise DataError(f"{source}: required column {actual!r} not in header {header}")
            positions[std] = header.index(actual)
        extra_cols = [
            (idx, name)
            for idx, name in enumerate(header)
            if idx not in positions.values()
        ]
        for name in (n for _, n in extra_cols):
            table.extras[name] = []

        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            total_rows += 1
            if len(row) < len(header):
                rejects.append(RejectEntry(source, lineno, "", "", "row has fewer fields than header"))
                rows_with_issues += 1
                continue
            issues_before = len(rejects)

            rid = row[positions["id"]].strip()
            if not rid:
                rejects.append(RejectEntry(source, lineno, "", "id", "empty id; row dropped"))
                rows_with_issues += 1
                continue
            if rid in seen_ids:
                raise DataError(
                    f"{source}: duplicate id {rid!r} at line {lineno} "
                    f"(first seen at line {seen_ids[rid]})"
                )
            seen_ids[rid] = lineno

            first = normalize(row[positions["first_name"]]) or None
            last = normalize(row[positions["last_name"]]) or None

            zip_raw = row[positions["zip"]].strip()
            zip_val: str | None
            if not zip_raw:
                zip_val = None
            elif _ZIP_RE.match(zip_raw):
                zip_val = zip_raw
            else:
                zip_val = None
                rejects.append(RejectEntry(source, lineno, rid, "zip", f"not a 5-digit zip: {zip_raw!r}"))

            age_raw = row[positions["age"]].strip()
            age_val: int | None
            if not age_raw:
                age_val = None
            else:
                try:
                    age_val = int(age_raw)
                except ValueError:
                    age_val = None
                    rejects.append(RejectEntry(source, lineno, rid, "age", f"not an integer: {age_raw!r}"))
                else:
                    if not 0 <= age_val <= 130:
                        rejects.append(RejectEntry(source, lineno, rid, "age", f"outside [0, 130]: {age_val}"))
                        age_val = None

            table.ids.append(rid)
            table.first_names.append(first)
            table.last_names.append(last)
            table.zips.append(zip_val)
            table.ages.append(age_val)
            for idx, name in extra_cols:
                table.extras[name].append(row[idx].strip() if idx < len(row) else "")
            if len(rejects) > issues_before:
                rows_with_issues += 1

    if total_rows == 0:
        raise DataError(f"{source}: no data rows")
    if rows_with_issues / total_rows > MAX_REJECT_FRACTION:
        raise DataError(
            f"{source}: {rows_with_issues} of {total_rows} rows had problems "
            f"(more than {MAX_REJECT_FRACTION:.0%}); first: {rejects[0].issue}"
        )
    return table, rejects


def write_rejects_csv(rejects: list[RejectEntry], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "line", "record_id", "field", "issue"])
        for r in rejects:
            w.writerow([r.source, r.line, r.record_id, r.field, r.issue])


@dataclass
class RunConfig:
    """Everything a pipeline run needs; see load_run_config for the file format."""

    file_a: str
    file_b: str
    syllable_map: str | None = None  # None -> shipped table
    jw_threshold: float = 0.9
    filter_structural: bool = False
    iterations: int = 10000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    out_dir: str = "translink-out"
    estimate: str = "joint"
    group_column: str | None = None
    trace_params: bool = False
    threads: int | None = None

    def validate(self) -> None:
        if not self.file_a or not self.file_b:
            raise ConfigError("config must name both input files (files.a, files.b)")
        if not 0.0 <= self.jw_threshold <= 1.0:
            raise ConfigError(f"jw_threshold must be in [0, 1], got {self.jw_threshold}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.estimate not in ("joint", "marginal"):
            raise ConfigError(f"estimate must be 'joint' or 'marginal', got {self.estimate!r}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")


_CONFIG_SCHEMA = {
    "files": {"a": str, "b": str, "syllable_map": str},
    "comparison": {"jw_threshold": float, "filter": bool},
    "chain": {"iterations": int, "burn_in": int, "thin": int, "seed": int},
    "output": {"dir": str, "estimate": str, "group_column": str, "trace": bool},
}

_KEY_TO_FIELD = {
    ("files", "a"): "file_a",
    ("files", "b"): "file_b",
    ("files", "syllable_map"): "syllable_map",
    ("comparison", "jw_threshold"): "jw_threshold",
    ("comparison", "filter"): "filter_structural",
    ("chain", "iterations"): "iterations",
    ("chain", "burn_in"): "burn_in",
    ("chain", "thin"): "thin",
    ("chain", "seed"): "seed",
    ("output", "dir"): "out_dir",
    ("output", "estimate"): "estimate",
    ("output", "group_column"): "group_column",
    ("output", "trace"): "trace_params",
}


def load_run_config(path, require_files: bool = True) -> RunConfig:
    """Parse a flat key=value config file with [section] headers.

    Unknown sections or keys are errors -- typos must die loudly, not be
    ignored. Values are type-checked against the schema above. With
    require_files=False the [files] entries may be omitted (the CLI fills
    them from positional arguments) and validation is deferred to the caller.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")

    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _CONFIG_SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            kind = _CONFIG_SCHEMA[section][key]
            try:
                if kind is bool:
                    val: object = parser.getboolean(section, key)
                elif kind is int:
                    val = parser.getint(section, key)
                elif kind is float:
                    val = parser.getfloat(section, key)
                else:
                    val = raw.strip()
            except ValueError as exc:
                raise ConfigError(
                    f"{path}: [{section}] {key} = {raw!r}: expected {kind.__name__}"
                ) from exc
            values[_KEY_TO_FIELD[(section, key)]] = val

    if require_files and ("file_a" not in values or "file_b" not in values):
        raise ConfigError(f"{path}: [files] must set both 'a' and 'b'")
    values.setdefault("file_a", "")
    values.setdefault("file_b", "")
    if values.get("group_column") == "":
        values["group_column"] = None
    if values.get("syllable_map") == "":
        values["syllable_map"] = None

    known = {f.name for f in dc_fields(RunConfig)}
    assert set(values) <= known
    cfg = RunConfig(**values)  # type: ignore[arg-type]
    if require_files:
        cfg.validate()
    return cfg
