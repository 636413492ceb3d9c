"""Feature-table loading, validation, partitioning, and histograms.

The canonical interchange format is a UTF-8 CSV with the mandatory header

    id,smiles,MW,TPSA,molelogP,SP,IE,FE

('.' decimal separator, all floats parsed as 64-bit). Rows violating any
record invariant abort the load: downstream partitioning relies on exact
row indexing, so silently dropping rows would corrupt the "first n" subset.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hypal.errors import DataError
from hypal.units import AREA, DIMENSIONLESS, ENERGY_PER_MASS, MASS, Unit

# Column -> unit for the canonical schema. Order is the file order.
SCHEMA: dict[str, Unit] = {
    "MW": MASS,
    "TPSA": AREA,
    "molelogP": DIMENSIONLESS,
    "SP": AREA,
    "IE": ENERGY_PER_MASS,
    "FE": ENERGY_PER_MASS,
}

CSV_COLUMNS = ("id", "smiles") + tuple(SCHEMA)

TARGET_COLUMN = "FE"
FEATURE_COLUMNS = ("MW", "TPSA", "molelogP", "SP", "IE")


@dataclass(frozen=True)
class MoleculeRecord:
    """One molecule's descriptor and target values."""

    id: int
    smiles: str
    MW: float
    TPSA: float
    molelogP: float
    SP: float
    IE: float
    FE: float

    def validate(self) -> None:
        for name in SCHEMA:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DataError(f"record {self.id}: {name} is not finite ({value!r})")
        if self.MW <= 0:
            raise DataError(f"record {self.id}: MW must be > 0, got {self.MW!r}")
        if self.TPSA < 0:
            raise DataError(f"record {self.id}: TPSA must be >= 0, got {self.TPSA!r}")
        if self.SP <= 0:
            raise DataError(f"record {self.id}: SP must be > 0, got {self.SP!r}")


@dataclass(frozen=True)
class FeatureTable:
    """Immutable, row-ordered table of molecule records.

    Column arrays are cached on first access and must not be mutated;
    loading is single-threaded, after which concurrent reads are safe.
    """

    records: tuple[MoleculeRecord, ...]
    provenance: str = ""
    _columns: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> np.ndarray:
        return self.column("id")

    def column(self, name: str) -> np.ndarray:
        if name not in self._columns:
            if name == "id":
                arr = np.array([r.id for r in self.records], dtype=np.int64)
            elif name in SCHEMA:
                arr = np.array([getattr(r, name) for r in self.records], dtype=np.float64)
            else:
                raise DataError(f"unknown column {name!r}")
            arr.setflags(write=False)
            self._columns[name] = arr
        return self._columns[name]

    def unit(self, name: str) -> Unit:
        try:
            return SCHEMA[name]
        except KeyError:
            raise DataError(f"no unit declared for column {name!r}") from None

    def rows(self, indices: Sequence[int] | np.ndarray) -> dict[str, np.ndarray]:
        """Feature columns restricted to the given positional indices."""
        idx = np.asarray(indices, dtype=np.intp)
        return {name: self.column(name)[idx] for name in SCHEMA}

    def index_of(self) -> dict[int, int]:
        """Map record id -> positional row index."""
        return {r.id: i for i, r in enumerate(self.records)}


@dataclass(frozen=True)
class DatasetPartition:
    """Disjoint split into a hypothesis-generation subset and the remaining pool."""

    hypothesis_subset: tuple[int, ...]
    pool: tuple[int, ...]

    def __post_init__(self):
        overlap = set(self.hypothesis_subset) & set(self.pool)
        if overlap:
            raise DataError(f"partition overlap: {sorted(overlap)[:5]}")


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}: column {col!r} is not numeric ({text!r})") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}: column {col!r} is not finite ({text!r})")
    return value


def load_feature_table(path: str | Path, schema: Sequence[str] = CSV_COLUMNS) -> FeatureTable:
    """Load and validate the canonical CSV; row order is preserved.

    Raises DataError naming the 1-based data row for any missing column,
    non-numeric or non-finite cell, invariant violation, or duplicate id.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    records: list[MoleculeRecord] = []
    seen_ids: set[int] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header and header[0].startswith("#"):
            # provenance comment line before the header
            header = [h.strip() for h in next(reader)]
        if header != list(schema):
            raise DataError(
                f"{path}: header mismatch: expected {list(schema)}, got {header}"
            )
        for i, row in enumerate(reader, start=1):
            if len(row) != len(schema):
                raise DataError(f"row {i}: expected {len(schema)} cells, got {len(row)}")
            cells = dict(zip(schema, row))
            try:
                rid = int(cells["id"])
            except ValueError:
                raise DataError(f"row {i}: id is not an integer ({cells['id']!r})") from None
            if rid in seen_ids:
                raise DataError(f"row {i}: duplicate id {rid}")
            seen_ids.add(rid)
            values = {c: _parse_float(cells[c], i, c) for c in SCHEMA}
            record = MoleculeRecord(id=rid, smiles=cells["smiles"], **values)
            try:
                record.validate()
            except DataError as exc:
                raise DataError(f"row {i}: {exc}") from None
            records.append(record)
    return FeatureTable(records=tuple(records), provenance=str(path))


def write_feature_table(table: FeatureTable, path: str | Path) -> None:
    """Serialize a table back to the canonical CSV (round-trip exact).

    Floats use repr, which Python guarantees to round-trip bit-exactly.
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in table.records:
            writer.writerow(
                [r.id, r.smiles] + [repr(getattr(r, c)) for c in SCHEMA]
            )


def partition_first_n(table: FeatureTable, n: int) -> DatasetPartition:
    """Split ids into the first n (file order) and the remainder."""
    if not 0 < n < len(table):
        raise DataError(f"partition size {n} out of range (table has {len(table)} rows)")
    ids = [r.id for r in table.records]
    return DatasetPartition(
        hypothesis_subset=tuple(ids[:n]),
        pool=tuple(ids[n:]),
    )


def histogram(values: Sequence[float] | np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram normalized to unit integral.

    Returns (edges, densities) with len(edges) == bins + 1 and
    sum(density * width) == 1 within 1e-12. A constant input occupies a
    single bin of a synthetic unit-width range centred on the value.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DataError("histogram of empty input")
    if bins < 1:
        raise DataError(f"bins must be >= 1, got {bins}")
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    densities, edges = np.histogram(arr, bins=bins, range=(lo, hi), density=True)
    return edges, densities
