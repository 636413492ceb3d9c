"""Topological polar surface area by the atom-contribution method.

Each nitrogen and oxygen contributes a tabulated fragment area selected by
its charge, aromaticity, hydrogen count, bonding pattern, and 3-ring
membership. Unmatched N/O environments fall back to the standard linear
estimate in the degree and hydrogen count, clamped at zero. Sulfur and
phosphorus are intentionally out of scope (C/H/O/N/F chemistry).
"""

from __future__ import annotations

from qm9prep.smiles import Molecule, parse_smiles


def _bond_counts(mol: Molecule, idx: int) -> tuple[int, int, int, int]:
    atom = mol.atoms[idx]
    single = double = triple = aromatic = 0
    for order in atom.bond_orders:
        if order == 1.0:
            single += 1
        elif order == 2.0:
            double += 1
        elif order == 3.0:
            triple += 1
        else:
            aromatic += 1
    return single, double, triple, aromatic


def _in_three_ring(mol: Molecule, idx: int) -> bool:
    neighbors = mol.atoms[idx].neighbors
    for i, a in enumerate(neighbors):
        for b in neighbors[i + 1 :]:
            if mol.bond_between(a, b) is not None:
                return True
    return False


def _nitrogen(mol: Molecule, idx: int) -> float:
    atom = mol.atoms[idx]
    h = atom.hydrogens
    charge = atom.charge
    single, double, triple, aromatic = _bond_counts(mol, idx)
    if atom.aromatic:
        if charge == 0:
            if h == 0:
                if double == 1 and aromatic == 2:
                    return 8.39  # n(=*)(:*):*
                if single == 1 and aromatic == 2:
                    return 4.93  # n(-*)(:*):*
                if aromatic == 3:
                    return 4.41  # n(:*)(:*):*
                if aromatic == 2:
                    return 12.89  # n(:*):*
            if h == 1 and aromatic == 2:
                return 15.79  # [nH](:*):*
        elif charge > 0:
            if h == 0 and aromatic == 3:
                return 4.10
            if h == 0 and single == 1 and aromatic == 2:
                return 3.88
            if h == 1 and aromatic == 2:
                return 14.14
        return _nitrogen_fallback(mol, idx)
    in3 = _in_three_ring(mol, idx)
    if charge == 0:
        if h == 0:
            if single == 3:
                return 3.01 if in3 else 3.24
            if single == 1 and double == 1:
                return 12.36
            if triple == 1 and single == 0:
                return 23.79
            if single == 1 and double == 2:
                return 11.68  # nitro written without charges
            if double == 1 and triple == 1:
                return 13.60  # central azide
        elif h == 1:
            if single == 2:
                return 21.94 if in3 else 12.03
            if double == 1 and single == 0:
                return 23.85
        elif h >= 2:
            if single == 1 or single == 0:  # primary amine (ammonia treated alike)
                return 26.02
    elif charge > 0:
        if h == 0:
            if single == 4:
                return 0.0
            if single == 2 and double == 1:
                return 3.01
            if triple == 1 and single == 1:
                return 4.36
        elif h == 1:
            if single == 3:
                return 4.44
            if single == 1 and double == 1:
                return 13.97
        elif h == 2:
            if single == 2:
                return 16.61
            if double == 1:
                return 25.59
        elif h >= 3:
            return 27.64
    return _nitrogen_fallback(mol, idx)


def _nitrogen_fallback(mol: Molecule, idx: int) -> float:
    atom = mol.atoms[idx]
    connections = atom.degree() + atom.hydrogens
    return max(0.0, 30.5 - connections * 8.2 + atom.hydrogens * 1.5)


def _oxygen(mol: Molecule, idx: int) -> float:
    atom = mol.atoms[idx]
    h = atom.hydrogens
    charge = atom.charge
    single, double, triple, aromatic = _bond_counts(mol, idx)
    if atom.aromatic and aromatic == 2 and h == 0 and charge == 0:
        return 13.14  # o(:*):*
    if charge == 0:
        if h >= 1:
            return 20.23  # hydroxyl (water included)
        if single == 2:
            return 12.53 if _in_three_ring(mol, idx) else 9.23
        if double == 1:
            return 17.07
    elif charge < 0 and single == 1 and h == 0:
        return 23.06
    connections = atom.degree() + h
    return max(0.0, 28.5 - connections * 8.6 + h * 1.5)


def tpsa(mol: Molecule | str) -> float:
    """Polar surface area from N/O fragment contributions, in squared Angstrom."""
    if isinstance(mol, str):
        mol = parse_smiles(mol)
    total = 0.0
    for atom in mol.atoms:
        if atom.element == "N":
            total += _nitrogen(mol, atom.index)
        elif atom.element == "O":
            total += _oxygen(mol, atom.index)
    return round(total, 2)
