"""Reader for the raw QM9 per-molecule .xyz distribution files.

Layout per file: atom count; a property line ("gdb <index> A B C mu alpha
homo lumo gap r2 zpve U0 U H G Cv"); one line per atom; harmonic
frequencies; two SMILES (as enumerated, and re-canonicalized after
relaxation); two InChI. Some files carry Fortran-style exponents (1.2*^-5).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class Qm9FormatError(ValueError):
    pass


@dataclass(frozen=True)
class RawQm9Row:
    index: int
    smiles_original: str
    smiles_relaxed: str
    spatial_extent: float  # <R^2>, dataset-native unit (Bohr^2)
    internal_energy_u0: float  # U(0 K), Hartree
    internal_energy_u298: float  # U(298.15 K), Hartree
    enthalpy_h298: float  # H(298.15 K), Hartree


def _num(text: str) -> float:
    return float(text.replace("*^", "e"))


def parse_xyz(path: str | Path) -> RawQm9Row:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 5:
        raise Qm9FormatError(f"{path}: truncated file")
    try:
        n_atoms = int(lines[0].strip())
    except ValueError:
        raise Qm9FormatError(f"{path}: first line is not an atom count") from None
    fields = lines[1].split()
    if len(fields) < 17 or fields[0] != "gdb":
        raise Qm9FormatError(f"{path}: malformed property line")
    smiles_line = 2 + n_atoms + 1
    if smiles_line >= len(lines):
        raise Qm9FormatError(f"{path}: missing SMILES line")
    smiles = lines[smiles_line].split()
    if len(smiles) < 2:
        raise Qm9FormatError(f"{path}: expected two SMILES entries")
    try:
        return RawQm9Row(
            index=int(fields[1]),
            smiles_original=smiles[0],
            smiles_relaxed=smiles[1],
            spatial_extent=_num(fields[10]),
            internal_energy_u0=_num(fields[12]),
            internal_energy_u298=_num(fields[13]),
            enthalpy_h298=_num(fields[14]),
        )
    except ValueError as exc:
        raise Qm9FormatError(f"{path}: {exc}") from None


def iter_raw_files(raw_dir: str | Path) -> list[Path]:
    raw_dir = Path(raw_dir)
    if not raw_dir.is_dir():
        raise Qm9FormatError(f"raw directory not found: {raw_dir}")
    files = sorted(raw_dir.glob("*.xyz"))
    if not files:
        raise Qm9FormatError(f"no .xyz files under {raw_dir}")
    return files
