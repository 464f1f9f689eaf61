"""Ingestion and linkage of tract-level feature tables.

A feature table is wide-format: one row per geographic unit, one numeric
column per feature. A manifest binds each retained column to a namespaced
ontology term so downstream layers can reason about what a column means.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

from .errors import (
    BadGeoCode,
    BadManifest,
    ColumnNameCollision,
    DuplicateGeoCode,
    EmptyJoin,
    LevelMismatch,
    MalformedRow,
    NonNumericCell,
    UnknownZip,
)


class GeoLevel(Enum):
    """Geographic granularity, keyed by required code length."""

    ZIP = 5
    CENSUS_TRACT = 11
    CENSUS_BLOCK_GROUP = 12
    CENSUS_BLOCK = 15

    @property
    def code_length(self) -> int:
        return self.value


class Units(str, Enum):
    PERCENT = "percent"
    COUNT = "count"
    RATE_PER_1000 = "rate_per_1000"


@dataclass(frozen=True)
class GeoUnit:
    code: str
    level: GeoLevel

    def __post_init__(self):
        if not self.code.isdigit():
            raise BadGeoCode(f"geo code {self.code!r} is not all digits")
        if len(self.code) != self.level.code_length:
            raise BadGeoCode(
                f"geo code {self.code!r} has length {len(self.code)}, "
                f"{self.level.name.lower()} requires {self.level.code_length}"
            )


@dataclass(frozen=True)
class ColumnBinding:
    """Binds a table column to an ontology term."""

    column_name: str
    term: str
    units: Units
    description: str = ""


@dataclass(frozen=True)
class FeatureTable:
    level: GeoLevel
    rows: tuple[tuple[GeoUnit, tuple[float, ...]], ...]
    bindings: tuple[ColumnBinding, ...]
    provenance: tuple[str, ...]  # source-file identifier per column

    def __post_init__(self):
        n_cols = len(self.bindings)
        if len(self.provenance) != n_cols:
            raise MalformedRow("provenance entries must match binding count")
        seen: set[str] = set()
        for unit, values in self.rows:
            if unit.level is not self.level:
                raise LevelMismatch(f"row {unit.code} is not at table level {self.level.name}")
            if len(values) != n_cols:
                raise MalformedRow(
                    f"row {unit.code} has {len(values)} values, expected {n_cols}"
                )
            if unit.code in seen:
                raise DuplicateGeoCode(f"duplicate geo code {unit.code}")
            seen.add(unit.code)
            for v in values:
                if not math.isfinite(v):
                    raise NonNumericCell(f"non-finite value in row {unit.code}")

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(b.column_name for b in self.bindings)

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(unit.code for unit, _ in self.rows)

    def column(self, name: str) -> tuple[float, ...]:
        idx = self.column_names.index(name)
        return tuple(values[idx] for _, values in self.rows)

    def row(self, code: str) -> tuple[float, ...]:
        for unit, values in self.rows:
            if unit.code == code:
                return values
        raise KeyError(code)

    def binding_for(self, name: str) -> ColumnBinding:
        for b in self.bindings:
            if b.column_name == name:
                return b
        raise KeyError(name)

    def select_columns(self, names: list[str]) -> "FeatureTable":
        idx = [self.column_names.index(n) for n in names]
        return FeatureTable(
            level=self.level,
            rows=tuple(
                (unit, tuple(values[i] for i in idx)) for unit, values in self.rows
            ),
            bindings=tuple(self.bindings[i] for i in idx),
            provenance=tuple(self.provenance[i] for i in idx),
        )

    def select_rows(self, indices: list[int]) -> "FeatureTable":
        return FeatureTable(
            level=self.level,
            rows=tuple(self.rows[i] for i in indices),
            bindings=self.bindings,
            provenance=self.provenance,
        )

    def to_csv_bytes(self) -> bytes:
        """Serialize to the canonical wide-format CSV (round-trips via parse)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["geo_code", *self.column_names])
        for unit, values in self.rows:
            writer.writerow([unit.code, *[repr(v) for v in values]])
        return buf.getvalue().encode("utf-8")


@dataclass(frozen=True)
class ZipTractCrosswalk:
    entries: tuple[tuple[GeoUnit, GeoUnit], ...]

    def __post_init__(self):
        seen = set()
        for zip_unit, tract in self.entries:
            if zip_unit.level is not GeoLevel.ZIP:
                raise LevelMismatch(f"{zip_unit.code} is not a zip code")
            if tract.level is not GeoLevel.CENSUS_TRACT:
                raise LevelMismatch(f"{tract.code} is not a census tract")
            pair = (zip_unit.code, tract.code)
            if pair in seen:
                raise DuplicateGeoCode(f"duplicate crosswalk entry {pair}")
            seen.add(pair)

    def zip_of_tract(self, tract_code: str) -> str | None:
        for zip_unit, tract in self.entries:
            if tract.code == tract_code:
                return zip_unit.code
        return None


def parse_feature_csv(
    data: bytes,
    manifest: list[ColumnBinding],
    level: GeoLevel = GeoLevel.CENSUS_TRACT,
    source: str = "",
) -> FeatureTable:
    """Parse a wide-format feature CSV.

    The first column must be named ``geo_code``; remaining columns are
    numeric. Columns without a manifest binding are dropped. Manifest
    entries without a matching column are ignored so one manifest can
    serve several extracts.
    """
    text = data.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow("empty file: missing header row")
    if not header or header[0] != "geo_code":
        raise MalformedRow("first column must be named 'geo_code'")

    by_name = {b.column_name: b for b in manifest}
    keep: list[int] = []
    bindings: list[ColumnBinding] = []
    for i, name in enumerate(header[1:], start=1):
        if name in by_name:
            keep.append(i)
            bindings.append(by_name[name])

    rows: list[tuple[GeoUnit, tuple[float, ...]]] = []
    seen: set[str] = set()
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRow(
                f"line {line_no}: expected {len(header)} cells, found {len(row)}"
            )
        code = row[0].strip()
        unit = GeoUnit(code, level)  # raises BadGeoCode
        if code in seen:
            raise DuplicateGeoCode(f"line {line_no}: duplicate geo code {code}")
        seen.add(code)
        values: list[float] = []
        for i in keep:
            cell = row[i].strip()
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(f"line {line_no}: {cell!r} is not numeric")
            if not math.isfinite(v):
                raise NonNumericCell(f"line {line_no}: non-finite value {cell!r}")
            values.append(v)
        rows.append((unit, tuple(values)))

    return FeatureTable(
        level=level,
        rows=tuple(rows),
        bindings=tuple(bindings),
        provenance=tuple(source for _ in bindings),
    )


def link_tables(tables: list[FeatureTable]) -> FeatureTable:
    """Inner-join feature tables on geographic code.

    The result keeps only codes present in every input, in the row order of
    the first table; bindings and provenance concatenate left to right.
    """
    if not tables:
        raise EmptyJoin("no tables to link")
    first = tables[0]
    for t in tables[1:]:
        if t.level is not first.level:
            raise LevelMismatch(
                f"cannot join {t.level.name} table onto {first.level.name} table"
            )
    names: set[str] = set()
    for t in tables:
        for n in t.column_names:
            if n in names:
                raise ColumnNameCollision(f"column {n!r} appears in more than one table")
            names.add(n)

    shared = set(first.codes)
    for t in tables[1:]:
        shared &= set(t.codes)
    if not shared:
        raise EmptyJoin("tables share no geographic codes")

    lookups = [{unit.code: values for unit, values in t.rows} for t in tables]
    rows = tuple(
        (unit, tuple(v for lk in lookups for v in lk[unit.code]))
        for unit, _ in first.rows
        if unit.code in shared
    )
    return FeatureTable(
        level=first.level,
        rows=rows,
        bindings=tuple(b for t in tables for b in t.bindings),
        provenance=tuple(p for t in tables for p in t.provenance),
    )


def tracts_in_zip(crosswalk: ZipTractCrosswalk, zip_unit: GeoUnit) -> list[GeoUnit]:
    """Distinct census tracts mapped to a zip code, ascending by code."""
    if zip_unit.level is not GeoLevel.ZIP:
        raise LevelMismatch(f"{zip_unit.code} is not a zip code")
    found = {tract.code: tract for z, tract in crosswalk.entries if z.code == zip_unit.code}
    if not found:
        raise UnknownZip(f"zip {zip_unit.code} is not in the crosswalk")
    return [found[c] for c in sorted(found)]


def parse_crosswalk_csv(data: bytes) -> ZipTractCrosswalk:
    """Parse a ``zip,tract_fips`` CSV into a crosswalk."""
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["zip", "tract_fips"]:
        raise MalformedRow("crosswalk header must be 'zip,tract_fips'")
    entries = []
    for row in reader:
        if not row:
            continue
        if len(row) < 2:
            raise MalformedRow(f"crosswalk row too short: {row}")
        entries.append(
            (GeoUnit(row[0].strip(), GeoLevel.ZIP), GeoUnit(row[1].strip(), GeoLevel.CENSUS_TRACT))
        )
    return ZipTractCrosswalk(entries=tuple(entries))


def parse_manifest(text: str) -> list[ColumnBinding]:
    """Parse a column manifest.

    Tab-separated lines: ``column_name<TAB>term<TAB>units<TAB>description``.
    Blank lines and ``#`` comments are skipped.
    """
    bindings: list[ColumnBinding] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise BadManifest(
                f"manifest line {line_no}: need column_name, term, units separated by tabs"
            )
        try:
            units = Units(parts[2].strip())
        except ValueError:
            raise BadManifest(f"manifest line {line_no}: unknown units {parts[2]!r}")
        bindings.append(
            ColumnBinding(
                column_name=parts[0].strip(),
                term=parts[1].strip(),
                units=units,
                description=parts[3].strip() if len(parts) > 3 else "",
            )
        )
    return bindings


def format_manifest(bindings: list[ColumnBinding]) -> str:
    lines = ["# column_name\tterm\tunits\tdescription"]
    for b in bindings:
        lines.append(f"{b.column_name}\t{b.term}\t{b.units.value}\t{b.description}")
    return "\n".join(lines) + "\n"
