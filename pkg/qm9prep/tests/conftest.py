from pathlib import Path

import pytest


def write_xyz(
    directory: Path,
    index: int,
    smiles: str,
    n_atoms: int = 5,
    r2: float = 35.3641,
    u0: float = -40.478930,
    u298: float = -40.476062,
    h298: float = -40.475117,
    smiles_original: str | None = None,
) -> Path:
    """Write a synthetic raw file in the QM9 .xyz layout."""
    lines = [str(n_atoms)]
    lines.append(
        f"gdb {index}\t157.7\t157.7\t157.7\t0.\t13.21\t-0.38\t0.11\t0.50\t{r2}\t0.0447"
        f"\t{u0}\t{u298}\t{h298}\t-40.498597\t6.469"
    )
    for i in range(n_atoms):
        lines.append(f"C\t{0.1 * i}\t{0.2 * i}\t{0.3 * i}\t-0.5")
    lines.append("1341.307\t3132.3449")
    lines.append(f"{smiles_original or smiles}\t{smiles}")
    lines.append("InChI=1S/x\tInChI=1S/x")
    path = directory / f"dsgdb9nsd_{index:06d}.xyz"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def raw_dir(tmp_path):
    """Three-molecule synthetic raw set: methane, water, benzene."""
    directory = tmp_path / "raw"
    directory.mkdir()
    write_xyz(directory, 1, "C", n_atoms=5, r2=35.3641,
              u0=-40.478930, u298=-40.476062, h298=-40.475117)
    write_xyz(directory, 2, "O", n_atoms=3, r2=19.0002,
              u0=-76.404702, u298=-76.401867, h298=-76.400922)
    write_xyz(directory, 3, "c1ccccc1", n_atoms=12, r2=444.8,
              u0=-232.103735, u298=-232.098602, h298=-232.097658)
    return directory
