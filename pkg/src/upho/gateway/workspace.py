"""Workspace: a directory holding one city's linked data and its reports.

Layout::

    <root>/
      ontology.onto     ontology DSL
      table.csv         linked wide-format feature table
      bindings.tsv      column bindings plus per-column source file
      crosswalk.csv     optional zip-to-tract crosswalk
      config            optional key=value overrides
      meta.json         level and city name
      reports/
        index.json      report ids keyed by request hash
        <id>.json       persisted analysis reports

Report writes go through a temp file and an atomic rename, so a failed
analysis never corrupts the index.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources as importlib_resources
from pathlib import Path

from ..errors import WorkspaceError
from ..ontology import Ontology, parse_ontology
from ..tabledata import (
    ColumnBinding,
    FeatureTable,
    GeoLevel,
    Units,
    ZipTractCrosswalk,
    link_tables,
    parse_crosswalk_csv,
    parse_feature_csv,
    parse_manifest,
)
from . import canonical_json

DEFAULT_GRID_C = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
DEFAULT_GRID_EPSILON = (0.01, 0.05, 0.1, 0.2)


@dataclass
class Config:
    vif_threshold: float = 10.0
    train_fraction: float = 0.85
    k: int = 5
    grid_c: tuple[float, ...] = DEFAULT_GRID_C
    grid_epsilon: tuple[float, ...] = DEFAULT_GRID_EPSILON
    r2_mode: str = "coefficient"
    importance_mode: str = "coef"
    max_path_len: int = 6
    templates_path: str | None = None
    solver_max_iter: int = 200_000
    solver_log: str | None = None  # path for the final fit's iteration log

    @classmethod
    def parse(cls, text: str) -> "Config":
        cfg = cls()
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise WorkspaceError(f"config line {line_no}: expected key=value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "vif_threshold":
                cfg.vif_threshold = float(value)
            elif key == "train_fraction":
                cfg.train_fraction = float(value)
            elif key == "k":
                cfg.k = int(value)
            elif key == "grid_c":
                cfg.grid_c = tuple(float(v) for v in value.split(","))
            elif key == "grid_epsilon":
                cfg.grid_epsilon = tuple(float(v) for v in value.split(","))
            elif key == "r2_mode":
                cfg.r2_mode = value
            elif key == "importance_mode":
                cfg.importance_mode = value
            elif key == "max_path_len":
                cfg.max_path_len = int(value)
            elif key == "templates":
                cfg.templates_path = value
            elif key == "solver_max_iter":
                cfg.solver_max_iter = int(value)
            elif key == "solver_log":
                cfg.solver_log = value
            else:
                raise WorkspaceError(f"config line {line_no}: unknown key {key!r}")
        return cfg


def bundled_ontology_text() -> str:
    return (
        importlib_resources.files("upho")
        .joinpath("resources/upho.onto")
        .read_text(encoding="utf-8")
    )


def demo_data_path(name: str) -> Path:
    return Path(str(importlib_resources.files("upho").joinpath(f"data/demo/{name}")))


def _write_bindings(path: Path, table: FeatureTable) -> None:
    lines = ["# column_name\tterm\tunits\tdescription\tsource"]
    for binding, source in zip(table.bindings, table.provenance):
        lines.append(
            f"{binding.column_name}\t{binding.term}\t{binding.units.value}"
            f"\t{binding.description}\t{source}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_bindings(path: Path) -> tuple[list[ColumnBinding], list[str]]:
    bindings: list[ColumnBinding] = []
    provenance: list[str] = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 5:
            raise WorkspaceError(f"bad bindings line: {line!r}")
        bindings.append(
            ColumnBinding(
                column_name=parts[0],
                term=parts[1],
                units=Units(parts[2]),
                description=parts[3],
            )
        )
        provenance.append(parts[4])
    return bindings, provenance


class Workspace:
    def __init__(
        self,
        root: Path,
        ontology: Ontology,
        table: FeatureTable,
        crosswalk: ZipTractCrosswalk | None,
        config: Config,
        city: str,
    ):
        self.root = Path(root)
        self.ontology = ontology
        self.table = table
        self.crosswalk = crosswalk
        self.config = config
        self.city = city

    # --- creation -------------------------------------------------------

    @classmethod
    def ingest(
        cls,
        root,
        sources: list[tuple[Path, Path]],
        crosswalk_path: Path | None = None,
        ontology_path: Path | None = None,
        city: str = "Memphis",
        level: GeoLevel = GeoLevel.CENSUS_TRACT,
    ) -> "Workspace":
        """Create a workspace from (csv, manifest) pairs."""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        (root / "reports").mkdir(exist_ok=True)

        ontology_text = (
            Path(ontology_path).read_text(encoding="utf-8")
            if ontology_path is not None
            else bundled_ontology_text()
        )
        ontology = parse_ontology(ontology_text)

        tables = []
        for csv_path, manifest_path in sources:
            manifest = parse_manifest(Path(manifest_path).read_text(encoding="utf-8"))
            for binding in manifest:
                ns = binding.term.split(":", 1)[0] if ":" in binding.term else "local"
                if ns not in ontology.prefixes:
                    raise WorkspaceError(
                        f"{manifest_path}: term {binding.term} uses undeclared namespace {ns!r}"
                    )
            tables.append(
                parse_feature_csv(
                    Path(csv_path).read_bytes(),
                    manifest,
                    level=level,
                    source=Path(csv_path).name,
                )
            )
        linked = link_tables(tables) if len(tables) > 1 else tables[0]

        crosswalk = None
        if crosswalk_path is not None:
            crosswalk = parse_crosswalk_csv(Path(crosswalk_path).read_bytes())
            (root / "crosswalk.csv").write_bytes(Path(crosswalk_path).read_bytes())

        (root / "ontology.onto").write_text(ontology_text, encoding="utf-8")
        (root / "table.csv").write_bytes(linked.to_csv_bytes())
        _write_bindings(root / "bindings.tsv", linked)
        (root / "meta.json").write_text(
            json.dumps({"city": city, "level": level.name}), encoding="utf-8"
        )
        config = Config()
        if (root / "config").exists():
            config = Config.parse((root / "config").read_text(encoding="utf-8"))
        return cls(root, ontology, linked, crosswalk, config, city)

    @classmethod
    def load(cls, root) -> "Workspace":
        root = Path(root)
        if not (root / "table.csv").exists():
            raise WorkspaceError(
                f"{root} is not an ingested workspace (missing table.csv); run ingest first"
            )
        meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
        level = GeoLevel[meta["level"]]
        ontology = parse_ontology((root / "ontology.onto").read_text(encoding="utf-8"))
        bindings, provenance = _read_bindings(root / "bindings.tsv")
        table = parse_feature_csv(
            (root / "table.csv").read_bytes(), bindings, level=level, source="table.csv"
        )
        table = FeatureTable(
            level=table.level,
            rows=table.rows,
            bindings=table.bindings,
            provenance=tuple(provenance),
        )
        crosswalk = None
        if (root / "crosswalk.csv").exists():
            crosswalk = parse_crosswalk_csv((root / "crosswalk.csv").read_bytes())
        config = Config()
        if (root / "config").exists():
            config = Config.parse((root / "config").read_text(encoding="utf-8"))
        return cls(root, ontology, table, crosswalk, config, meta["city"])

    # --- report persistence ----------------------------------------------

    @property
    def reports_dir(self) -> Path:
        path = self.root / "reports"
        path.mkdir(exist_ok=True)
        return path

    def _index_path(self) -> Path:
        return self.reports_dir / "index.json"

    def _load_index(self) -> dict:
        if self._index_path().exists():
            return json.loads(self._index_path().read_text(encoding="utf-8"))
        return {"by_request": {}, "reports": {}}

    def store_report(self, doc: dict, request_hash: str) -> None:
        """Atomically persist a finished report and update the index."""
        report_path = self.reports_dir / f"{doc['id']}.json"
        tmp = report_path.with_suffix(".tmp")
        tmp.write_text(canonical_json(doc), encoding="utf-8")
        os.replace(tmp, report_path)

        index = self._load_index()
        index["by_request"][request_hash] = doc["id"]
        index["reports"][doc["id"]] = {"request_hash": request_hash}
        tmp = self._index_path().with_suffix(".tmp")
        tmp.write_text(canonical_json(index), encoding="utf-8")
        os.replace(tmp, self._index_path())

    def report_id_for(self, request_hash: str) -> str | None:
        return self._load_index()["by_request"].get(request_hash)

    def load_report(self, report_id: str) -> dict:
        path = self.reports_dir / f"{report_id}.json"
        if not path.exists():
            raise WorkspaceError(f"no report {report_id!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def report_ids(self) -> list[str]:
        return sorted(self._load_index()["reports"])
