"""Minimal SMILES reader for small organic molecules (C, H, O, N, F, ...).

Supports the organic subset, bracket atoms with charge/H-count/isotope,
branches, ring closures (including %nn), bond symbols - = # : / \\ and dot
fragments. Implicit hydrogens follow the usual smallest-valence rule;
aromatic lowercase atoms count their ring system as an extra bond.

Kekulized inputs are normalized by a 4n+2 perception pass over 5- and
6-membered rings, so descriptor values do not depend on how the aromatic
system was written.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from qm9prep.elements import (
    AROMATIC_ELEMENTS,
    ATOMIC_WEIGHTS,
    DEFAULT_VALENCES,
    ORGANIC_SUBSET,
)


class SmilesError(ValueError):
    def __init__(self, message: str, text: str, position: int | None = None):
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where} in {text!r}")
        self.position = position


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    explicit_h: int | None = None  # None: derive from valence rules
    in_bracket: bool = False
    index: int = -1
    hydrogens: int = 0  # resolved implicit+explicit count
    folded_h: int = 0  # neighboring [H] atoms folded into this one
    neighbors: list[int] = field(default_factory=list)
    bond_orders: list[float] = field(default_factory=list)  # 1.5 marks aromatic

    def degree(self) -> int:
        return len(self.neighbors)


@dataclass
class Bond:
    a: int
    b: int
    order: float  # 1, 2, 3, or 1.5 for aromatic

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


class Molecule:
    def __init__(self):
        self.atoms: list[Atom] = []
        self.bonds: list[Bond] = []

    def add_atom(self, atom: Atom) -> int:
        atom.index = len(self.atoms)
        self.atoms.append(atom)
        return atom.index

    def add_bond(self, a: int, b: int, order: float) -> None:
        if a == b:
            raise SmilesError("self-bond", "")
        self.bonds.append(Bond(a, b, order))
        self.atoms[a].neighbors.append(b)
        self.atoms[a].bond_orders.append(order)
        self.atoms[b].neighbors.append(a)
        self.atoms[b].bond_orders.append(order)

    def bond_between(self, a: int, b: int) -> Bond | None:
        for bond in self.bonds:
            if {bond.a, bond.b} == {a, b}:
                return bond
        return None

    def molecular_weight(self) -> float:
        total = 0.0
        for atom in self.atoms:
            total += ATOMIC_WEIGHTS[atom.element]
            total += atom.hydrogens * ATOMIC_WEIGHTS["H"]
        return total

    def heavy_formula(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for atom in self.atoms:
            counts[atom.element] = counts.get(atom.element, 0) + 1
        return counts


_TWO_LETTER = ("Cl", "Br", "Si")


def _read_bracket(text: str, start: int) -> tuple[Atom, int]:
    """Parse a [...] atom starting at the opening bracket; return (atom, end)."""
    end = text.find("]", start)
    if end < 0:
        raise SmilesError("unterminated bracket atom", text, start)
    body = text[start + 1 : end]
    pos = 0
    while pos < len(body) and body[pos].isdigit():  # isotope label, ignored
        pos += 1
    if pos >= len(body):
        raise SmilesError("bracket atom without element", text, start)
    element = None
    for cand in _TWO_LETTER:
        if body[pos:].startswith(cand):
            element = cand
            pos += 2
            break
    if element is None:
        element = body[pos]
        pos += 1
    aromatic = element.islower()
    symbol = element.capitalize() if aromatic else element
    if symbol not in ATOMIC_WEIGHTS and symbol != "H":
        raise SmilesError(f"unsupported element {element!r}", text, start)
    if aromatic and element not in AROMATIC_ELEMENTS:
        raise SmilesError(f"element {element!r} cannot be aromatic", text, start)
    hydrogens = 0
    charge = 0
    while pos < len(body):
        ch = body[pos]
        if ch == "H":
            pos += 1
            count = ""
            while pos < len(body) and body[pos].isdigit():
                count += body[pos]
                pos += 1
            hydrogens = int(count) if count else 1
        elif ch in "+-":
            sign = 1 if ch == "+" else -1
            pos += 1
            count = ""
            while pos < len(body) and body[pos].isdigit():
                count += body[pos]
                pos += 1
            if count:
                charge += sign * int(count)
            else:
                charge += sign
                while pos < len(body) and body[pos] == ch:  # ++ / -- form
                    charge += sign
                    pos += 1
        elif ch == "@":  # chirality: irrelevant for 2-D descriptors
            pos += 1
        else:
            raise SmilesError(f"unsupported bracket token {ch!r}", text, start + 1 + pos)
    return (
        Atom(element=symbol, aromatic=aromatic, charge=charge, explicit_h=hydrogens, in_bracket=True),
        end,
    )


_BOND_ORDERS = {"-": 1.0, "=": 2.0, "#": 3.0, ":": 1.5, "/": 1.0, "\\": 1.0}


def parse_smiles(text: str) -> Molecule:
    mol = Molecule()
    stack: list[int] = []
    previous: int | None = None
    pending_bond: float | None = None
    ring_openings: dict[int, tuple[int, float | None]] = {}
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            break  # trailing title section
        if ch == "(":
            if previous is None:
                raise SmilesError("branch with no preceding atom", text, pos)
            stack.append(previous)
            pos += 1
            continue
        if ch == ")":
            if not stack:
                raise SmilesError("unbalanced ')'", text, pos)
            previous = stack.pop()
            pos += 1
            continue
        if ch in _BOND_ORDERS:
            pending_bond = _BOND_ORDERS[ch]
            pos += 1
            continue
        if ch == ".":
            previous = None
            pending_bond = None
            pos += 1
            continue
        if ch.isdigit() or ch == "%":
            if ch == "%":
                if pos + 2 >= n + 1 or not text[pos + 1 : pos + 3].isdigit():
                    raise SmilesError("malformed %nn ring closure", text, pos)
                label = int(text[pos + 1 : pos + 3])
                pos += 3
            else:
                label = int(ch)
                pos += 1
            if previous is None:
                raise SmilesError("ring closure with no preceding atom", text, pos)
            if label in ring_openings:
                partner, opening_bond = ring_openings.pop(label)
                order = pending_bond if pending_bond is not None else opening_bond
                if order is None:
                    both_aromatic = mol.atoms[partner].aromatic and mol.atoms[previous].aromatic
                    order = 1.5 if both_aromatic else 1.0
                mol.add_bond(partner, previous, order)
            else:
                ring_openings[label] = (previous, pending_bond)
            pending_bond = None
            continue
        # atom
        if ch == "[":
            atom, bracket_end = _read_bracket(text, pos)
            pos = bracket_end + 1
            if atom.element == "H":
                # explicit hydrogen atom: fold into the previous atom
                if previous is None or pending_bond not in (None, 1.0):
                    raise SmilesError("dangling explicit hydrogen", text, pos)
                mol.atoms[previous].folded_h += 1
                pending_bond = None
                continue
        else:
            element = None
            for cand in _TWO_LETTER:
                if text.startswith(cand, pos):
                    element = cand
                    pos += 2
                    break
            if element is None:
                element = ch
                pos += 1
            aromatic = element.islower()
            symbol = element.capitalize() if aromatic else element
            if aromatic and element not in AROMATIC_ELEMENTS:
                raise SmilesError(f"unknown aromatic atom {element!r}", text, pos - 1)
            if symbol not in ORGANIC_SUBSET:
                raise SmilesError(f"element {element!r} must be bracketed", text, pos - 1)
            atom = Atom(element=symbol, aromatic=aromatic)
        idx = mol.add_atom(atom)
        if previous is not None:
            order = pending_bond
            if order is None:
                both_aromatic = mol.atoms[previous].aromatic and atom.aromatic
                order = 1.5 if both_aromatic else 1.0
            mol.add_bond(previous, idx, order)
        previous = idx
        pending_bond = None
    if stack:
        raise SmilesError("unbalanced '('", text)
    if ring_openings:
        raise SmilesError(f"unclosed ring closures {sorted(ring_openings)}", text)
    if not mol.atoms:
        raise SmilesError("empty SMILES", text)
    # hydrogen counts come from the written bond orders; perception only
    # normalizes ring bonds afterwards, so both encodings agree
    _assign_hydrogens(mol)
    perceive_aromaticity(mol)
    return mol


# -- aromaticity ---------------------------------------------------------

def _ring_candidates(mol: Molecule) -> list[list[int]]:
    """All simple 5- and 6-membered rings (small molecules: plain DFS)."""
    neighbor_sets = [set(a.neighbors) for a in mol.atoms]
    rings: list[list[int]] = []
    seen: set[frozenset] = set()

    def walk(path: list[int], target: int):
        if len(path) > 6:
            return
        last = path[-1]
        for nxt in neighbor_sets[last]:
            if nxt == target and len(path) >= 5:
                key = frozenset(path)
                if key not in seen:
                    seen.add(key)
                    rings.append(list(path))
            elif nxt not in path and nxt > path[0]:
                walk(path + [nxt], target)

    for start in range(len(mol.atoms)):
        walk([start], start)
    return rings


def _pi_contribution(mol: Molecule, idx: int, ring: set[int]) -> int | None:
    """Electrons the atom donates to the ring's pi system; None = not aromatic."""
    atom = mol.atoms[idx]
    if atom.element not in ("C", "N", "O", "S"):
        return None
    double_in_system = False
    triple = False
    exocyclic_double_to_hetero = False
    for nbr, order in zip(atom.neighbors, atom.bond_orders):
        if order == 3.0:
            triple = True
        if order == 2.0:
            if nbr in ring:
                double_in_system = True
            elif mol.atoms[nbr].element != "C":
                exocyclic_double_to_hetero = True
            else:
                return None  # exocyclic C=C blocks the ring contribution
        if order == 1.5 and nbr in ring:
            double_in_system = True  # already-aromatic input
    if triple:
        return None
    if double_in_system:
        return 1
    if atom.element == "C":
        # carbonyl-like ring carbon contributes an empty p orbital
        return 0 if exocyclic_double_to_hetero else None
    # heteroatom with a lone pair (pyrrole N, furan O, thioether S)
    return 2


def perceive_aromaticity(mol: Molecule) -> None:
    """Mark 5/6-membered 4n+2 rings aromatic (covers kekulized input).

    Iterates to a fixpoint so fused systems resolve ring by ring: once the
    first ring aromatizes, its shared bond lets the neighbor ring count its
    pi electrons.
    """
    rings = _ring_candidates(mol)
    changed = True
    aromatized: set[frozenset] = set()
    while changed:
        changed = False
        for ring in rings:
            key = frozenset(ring)
            if key in aromatized:
                continue
            ring_set = set(ring)
            contributions = [_pi_contribution(mol, i, ring_set) for i in ring]
            if any(c is None for c in contributions):
                continue
            if sum(contributions) % 4 != 2:
                continue
            aromatized.add(key)
            changed = True
            for i in ring:
                mol.atoms[i].aromatic = True
            for a, b in zip(ring, ring[1:] + ring[:1]):
                bond = mol.bond_between(a, b)
                if bond is not None:
                    bond.order = 1.5
            # refresh the per-atom adjacency copies
            for i in ring:
                atom = mol.atoms[i]
                for k, nbr in enumerate(atom.neighbors):
                    bond = mol.bond_between(i, nbr)
                    atom.bond_orders[k] = bond.order


# -- hydrogens -----------------------------------------------------------

def _assign_hydrogens(mol: Molecule) -> None:
    for atom in mol.atoms:
        if atom.in_bracket:
            atom.hydrogens = (atom.explicit_h or 0) + atom.folded_h
            continue
        aromatic_bonds = sum(1 for o in atom.bond_orders if o == 1.5)
        plain_sum = sum(o for o in atom.bond_orders if o != 1.5)
        bond_sum = int(plain_sum + math.floor(1.5 * aromatic_bonds)) + atom.folded_h
        valences = DEFAULT_VALENCES.get(atom.element, (0,))
        implicit = 0
        for valence in valences:
            if valence >= bond_sum:
                implicit = valence - bond_sum
                break
        atom.hydrogens = implicit + atom.folded_h


def molecular_weight(smiles: str) -> float:
    return parse_smiles(smiles).molecular_weight()
