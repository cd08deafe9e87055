"""Accident record ingestion.

Per-city CSV exports differ in column names, date formats, and severity
vocabularies. Each city has a schema descriptor (JSON) declaring the
lat/lon/severity/date columns, the date format, and the mapping from native
severity labels to the unified binary {slight, severe} pair. Descriptors for
london, boston, pittsburgh, and a catch-all "generic" layout ship with the
package; third-party descriptors can be loaded from a file so new cities need
no code changes.

Nothing is silently dropped: rows that fail validation land in a rejects list
with a reason, and record count + reject count always equals the row count.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime
from importlib import resources
from pathlib import Path

BUILTIN_SCHEMAS = ("london", "boston", "pittsburgh", "generic")

SLIGHT = "slight"
SEVERE = "severe"


class IngestError(Exception):
    """Unusable input file or schema: missing columns, empty file, bad descriptor."""


class UnknownSchemaError(IngestError):
    def __init__(self, name: str):
        super().__init__(f"unknown schema {name!r}; built-ins: {', '.join(BUILTIN_SCHEMAS)}")


class UnknownSeverityError(IngestError):
    """A raw severity value outside the schema's declared label set."""

    def __init__(self, schema: str, value: str):
        self.value = value
        super().__init__(f"schema {schema!r} has no severity mapping for {value!r}")


@dataclass(frozen=True)
class Schema:
    name: str
    lat_column: str
    lon_column: str
    severity_column: str
    date_column: str
    date_format: str
    labels: dict[str, str]  # normalized raw label -> "slight" | "severe"

    def unified_label(self, raw: str) -> str:
        key = raw.strip().lower()
        if key not in self.labels:
            raise UnknownSeverityError(self.name, raw)
        return self.labels[key]


@dataclass(frozen=True)
class RawAccident:
    schema: str
    row: int  # 1-based data row number in the source file
    lat: float
    lon: float
    raw_severity: str
    when: date


@dataclass(frozen=True)
class AccidentRecord:
    id: str
    lat: float
    lon: float
    severity: str  # "slight" | "severe"
    when: date
    source_city: str

    @property
    def severe(self) -> bool:
        return self.severity == SEVERE


@dataclass(frozen=True)
class Reject:
    row: int
    reason: str
    raw: dict[str, str]


def load_schema(name_or_path: str) -> Schema:
    """Resolve a built-in schema name or a descriptor file path."""
    if name_or_path in BUILTIN_SCHEMAS:
        text = resources.files("bikerisk.schemas").joinpath(f"{name_or_path}.json").read_text()
    elif Path(name_or_path).is_file():
        text = Path(name_or_path).read_text()
    else:
        raise UnknownSchemaError(name_or_path)
    return parse_schema_descriptor(json.loads(text))


def parse_schema_descriptor(doc: dict) -> Schema:
    try:
        cols = doc["columns"]
        labels = doc["labels"]
        schema = Schema(
            name=doc["name"],
            lat_column=cols["lat"],
            lon_column=cols["lon"],
            severity_column=cols["severity"],
            date_column=cols["date"],
            date_format=doc.get("date_format", "%Y-%m-%d"),
            labels={str(k).strip().lower(): v for k, v in labels.items()},
        )
    except KeyError as exc:
        raise IngestError(f"schema descriptor missing key {exc}") from None
    bad = set(schema.labels.values()) - {SLIGHT, SEVERE}
    if bad:
        raise IngestError(f"schema {schema.name!r} maps labels to unknown classes {sorted(bad)}")
    return schema


def parse_accident_file(path: str | Path, schema: Schema | str) -> tuple[list[RawAccident], list[Reject]]:
    """Parse one delimiter-separated accident file under a city schema.

    Returns (accidents, rejects). Every data row ends up in exactly one of
    the two lists; coordinate range, severity presence, and date parsing are
    checked here, severity vocabulary later in unify_severity.
    """
    if isinstance(schema, str):
        schema = load_schema(schema)
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"no such file: {path}")

    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"empty file: {path}")
        header = [h.strip() for h in reader.fieldnames]
        needed = {
            schema.lat_column: "lat",
            schema.lon_column: "lon",
            schema.severity_column: "severity",
            schema.date_column: "date",
        }
        missing = [col for col in needed if col not in header]
        if missing:
            raise IngestError(f"{path}: missing required column(s) {missing} for schema {schema.name!r}")

        accidents: list[RawAccident] = []
        rejects: list[Reject] = []
        n_rows = 0
        for i, row in enumerate(reader, start=1):
            n_rows += 1
            clean = {(k or "").strip(): (v or "").strip() for k, v in row.items()}
            reason = None
            lat = lon = 0.0
            when: date | None = None
            try:
                lat = float(clean[schema.lat_column])
                lon = float(clean[schema.lon_column])
            except (ValueError, KeyError):
                reason = "unparsable coordinates"
            if reason is None and not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                reason = "coordinate out of range"
            if reason is None and not clean.get(schema.severity_column):
                reason = "missing severity"
            if reason is None:
                try:
                    when = datetime.strptime(clean[schema.date_column], schema.date_format).date()
                except (ValueError, KeyError):
                    reason = "unparsable date"
            if reason is not None:
                rejects.append(Reject(row=i, reason=reason, raw=clean))
                continue
            accidents.append(
                RawAccident(
                    schema=schema.name,
                    row=i,
                    lat=lat,
                    lon=lon,
                    raw_severity=clean[schema.severity_column],
                    when=when,
                )
            )
    if n_rows == 0:
        raise IngestError(f"empty file: {path}")
    return accidents, rejects


def unify_severity(raw: RawAccident, schema: Schema | None = None) -> AccidentRecord:
    """Map a raw accident onto the unified binary severity label.

    Matching is case-insensitive and whitespace-trimmed. An unmapped value
    raises UnknownSeverityError carrying the offending value; it is never
    defaulted to either class.
    """
    if schema is None:
        schema = load_schema(raw.schema)
    severity = schema.unified_label(raw.raw_severity)
    return AccidentRecord(
        id=f"{raw.schema}-{raw.row}",
        lat=raw.lat,
        lon=raw.lon,
        severity=severity,
        when=raw.when,
        source_city=raw.schema,
    )


def ingest_file(path: str | Path, schema: Schema | str) -> tuple[list[AccidentRecord], list[Reject]]:
    """parse_accident_file + unify_severity with reject accounting.

    Rows whose severity value is not in the schema's label set are rejected
    (reason carries the value) rather than aborting the whole file.
    """
    if isinstance(schema, str):
        schema = load_schema(schema)
    raws, rejects = parse_accident_file(path, schema)
    records: list[AccidentRecord] = []
    for raw in raws:
        try:
            records.append(unify_severity(raw, schema))
        except UnknownSeverityError as exc:
            rejects.append(Reject(row=raw.row, reason=f"unrecognized severity {exc.value!r}", raw={}))
    rejects.sort(key=lambda r: r.row)
    return records, rejects


def filter_window(records: list[AccidentRecord], years: int) -> list[AccidentRecord]:
    """Keep records from the last `years` calendar years present in the input.

    With data spanning 2004-2017 and years=4 this keeps 2014-2017. Output is
    sorted by date (then id, for a total deterministic order).
    """
    if years < 1:
        raise ValueError(f"years must be >= 1, got {years}")
    if not records:
        raise ValueError("filter_window: empty input")
    last_year = max(r.when.year for r in records)
    cutoff = last_year - years + 1
    kept = [r for r in records if r.when.year >= cutoff]
    return sorted(kept, key=lambda r: (r.when, r.id))


def records_to_jsonl(records: list[AccidentRecord]) -> str:
    """Canonical JSON-lines serialization, one record per line.

    Keys: id, lat, lon, severity, date (ISO-8601), source_city.
    """
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "id": r.id,
                    "lat": r.lat,
                    "lon": r.lon,
                    "severity": r.severity,
                    "date": r.when.isoformat(),
                    "source_city": r.source_city,
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def records_from_jsonl(text: str) -> list[AccidentRecord]:
    records = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        records.append(
            AccidentRecord(
                id=doc["id"],
                lat=doc["lat"],
                lon=doc["lon"],
                severity=doc["severity"],
                when=date.fromisoformat(doc["date"]),
                source_city=doc["source_city"],
            )
        )
    return records
