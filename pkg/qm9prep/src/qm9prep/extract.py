"""Build the canonical feature CSV from the raw QM9 distribution.

Per molecule: MW, TPSA, and logP computed from the SMILES; the per-mass
targets FE = H298/MW and IE = U298/MW (U0 behind a flag); the spatial
extent passed through in its native unit. Output is deterministic: fixed
row order (by molecule index) and shortest-round-trip float formatting, so
a rerun is byte-identical and reloaded values are bit-exact (the recovered
FE * MW reproduces the raw enthalpy to float precision).

Unparseable SMILES beyond the hypothesis-generation window are skipped and
listed in a manifest; inside the window they abort the extraction, because
downstream subset selection relies on exact row positions.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path

from qm9prep.crippen import mole_logp
from qm9prep.qm9 import RawQm9Row, iter_raw_files, parse_xyz
from qm9prep.smiles import SmilesError, parse_smiles
from qm9prep.tpsa import tpsa

CSV_COLUMNS = ("id", "smiles", "MW", "TPSA", "molelogP", "SP", "IE", "FE")

PROTECTED_PREFIX = 1000  # rows whose position downstream subsetting depends on


class ExtractError(RuntimeError):
    pass


def _fmt(value: float) -> str:
    # repr is the shortest string that parses back to the exact float
    return repr(float(value))


@dataclass(frozen=True)
class ExtractResult:
    rows_written: int
    skipped: list[tuple[int, str, str]]  # (index, smiles, reason)


def compute_row(raw: RawQm9Row, energy: str = "u298", smiles_source: str = "relaxed") -> dict:
    smiles = raw.smiles_relaxed if smiles_source == "relaxed" else raw.smiles_original
    mol = parse_smiles(smiles)
    mw = mol.molecular_weight()
    if mw <= 0:
        raise ExtractError(f"molecule {raw.index}: non-positive molecular weight")
    internal = raw.internal_energy_u298 if energy == "u298" else raw.internal_energy_u0
    return {
        "id": raw.index,
        "smiles": smiles,
        "MW": mw,
        "TPSA": tpsa(mol),
        "molelogP": mole_logp(mol),
        "SP": raw.spatial_extent,
        "IE": internal / mw,
        "FE": raw.enthalpy_h298 / mw,
    }


def extract(
    raw_dir: str | Path,
    out_path: str | Path,
    energy: str = "u298",
    smiles_source: str = "relaxed",
    protected_prefix: int = PROTECTED_PREFIX,
) -> ExtractResult:
    if energy not in ("u298", "u0"):
        raise ExtractError(f"energy must be u298 or u0, got {energy!r}")
    if smiles_source not in ("relaxed", "original"):
        raise ExtractError(f"smiles_source must be relaxed or original, got {smiles_source!r}")
    files = iter_raw_files(raw_dir)
    out_path = Path(out_path)
    skipped: list[tuple[int, str, str]] = []
    rows = 0
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for position, path in enumerate(files, start=1):
            raw = parse_xyz(path)
            try:
                row = compute_row(raw, energy=energy, smiles_source=smiles_source)
            except (SmilesError, ExtractError) as exc:
                if position <= protected_prefix:
                    raise ExtractError(
                        f"molecule {raw.index} (row {position}) failed inside the "
                        f"protected first-{protected_prefix} window: {exc}"
                    ) from exc
                skipped.append((raw.index, raw.smiles_relaxed, str(exc)))
                continue
            writer.writerow(
                [
                    row["id"],
                    row["smiles"],
                    _fmt(row["MW"]),
                    _fmt(row["TPSA"]),
                    _fmt(row["molelogP"]),
                    _fmt(row["SP"]),
                    _fmt(row["IE"]),
                    _fmt(row["FE"]),
                ]
            )
            rows += 1
    if skipped:
        manifest = out_path.with_suffix(".skipped.csv")
        with open(manifest, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "smiles", "reason"])
            writer.writerows(skipped)
    return ExtractResult(rows_written=rows, skipped=skipped)


# -- verification ----------------------------------------------------------

class VerifyError(RuntimeError):
    pass


def verify(path: str | Path, first_n: int = PROTECTED_PREFIX) -> dict:
    """Re-load the CSV with an independent parser and check every invariant.

    Returns a report dict with the FE distribution summary (overall and for
    the first first_n rows) for comparison against the full-set histogram.
    """
    path = Path(path)
    if not path.is_file():
        raise VerifyError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise VerifyError(f"bad header: expected {list(CSV_COLUMNS)}, got {header}")
        ids: set[int] = set()
        fe_all: list[float] = []
        fe_first: list[float] = []
        for line_no, cells in enumerate(reader, start=1):
            if len(cells) != len(CSV_COLUMNS):
                raise VerifyError(f"row {line_no}: expected {len(CSV_COLUMNS)} cells")
            record = dict(zip(CSV_COLUMNS, cells))
            try:
                rid = int(record["id"])
            except ValueError:
                raise VerifyError(f"row {line_no}: id is not an integer") from None
            if rid in ids:
                raise VerifyError(f"row {line_no}: duplicate id {rid}")
            ids.add(rid)
            values = {}
            for column in CSV_COLUMNS[2:]:
                try:
                    value = float(record[column])
                except ValueError:
                    raise VerifyError(f"row {line_no}: {column} is not numeric") from None
                if not math.isfinite(value):
                    raise VerifyError(f"row {line_no}: {column} is not finite")
                values[column] = value
            if values["MW"] <= 0:
                raise VerifyError(f"row {line_no}: MW must be positive")
            if values["TPSA"] < 0:
                raise VerifyError(f"row {line_no}: TPSA must be nonnegative")
            if values["SP"] <= 0:
                raise VerifyError(f"row {line_no}: SP must be positive")
            fe_all.append(values["FE"])
            if line_no <= first_n:
                fe_first.append(values["FE"])
    if not fe_all:
        raise VerifyError("no data rows")

    def summary(values: list[float]) -> dict:
        ordered = sorted(values)
        return {
            "count": len(values),
            "mean": statistics.fmean(values),
            "stdev": statistics.pstdev(values),
            "min": ordered[0],
            "median": ordered[len(ordered) // 2],
            "max": ordered[-1],
        }

    return {"rows": len(fe_all), "fe_full": summary(fe_all), "fe_first": summary(fe_first)}


def export_fe_histograms(path: str | Path, out_path: str | Path, first_n: int = PROTECTED_PREFIX, bins: int = 60) -> None:
    """Plot-ready density histograms of FE: full set vs the leading subset."""
    path = Path(path)
    fe_all: list[float] = []
    fe_first: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for line_no, record in enumerate(reader, start=1):
            value = float(record["FE"])
            fe_all.append(value)
            if line_no <= first_n:
                fe_first.append(value)

    def hist(values: list[float]):
        lo, hi = min(values), max(values)
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        width = (hi - lo) / bins
        counts = [0] * bins
        for v in values:
            k = min(int((v - lo) / width), bins - 1)
            counts[k] += 1
        return [(lo + i * width, lo + (i + 1) * width, c / (len(values) * width))
                for i, c in enumerate(counts)]

    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "bin_left", "bin_right", "density"])
        for series, values in (("full", fe_all), ("subset", fe_first)):
            for left, right, density in hist(values):
                writer.writerow([series, _fmt(left), _fmt(right), _fmt(density)])
