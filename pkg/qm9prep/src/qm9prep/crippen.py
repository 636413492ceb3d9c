"""Octanol-water logP by the Wildman-Crippen atom-contribution method.

Heavy atoms are classified into the published contribution classes by
hand-coded predicates (first matching class wins, following the published
ordering); hydrogens contribute per their host atom's environment. The
class coverage targets C/H/N/O/F chemistry; anything outside falls back to
the per-element default classes.
"""

from __future__ import annotations

from dataclasses import dataclass

from qm9prep.smiles import Atom, Molecule, parse_smiles

# contribution values per class
C1, C2, C3, C4 = 0.1441, 0.0, -0.2035, -0.2051
C5, C6, C7 = -0.2783, 0.1551, 0.00170
C8, C9, C10, C11, C12 = 0.08452, -0.1444, -0.0516, 0.1193, -0.0967
C13, C14 = -0.5443, 0.0
C18, C19, C20, C21 = 0.1581, 0.2955, 0.2713, 0.1360
C22, C23, C24, C25, C26, C27 = 0.4619, 0.5437, 0.1893, -0.8186, 0.2640, 0.2148
CS = 0.08129
H1, H2, H3, H4, HS = 0.1230, -0.2677, 0.2142, 0.2980, 0.1125
N1, N2, N3, N4, N5 = -1.0190, -0.7096, -1.0270, -0.5188, 0.08387
N6, N7, N8, N9, N10 = 0.1836, -0.3187, -0.4458, 0.01508, -1.950
N11, N12, N13, N14, NS = -0.3239, -1.119, -0.3396, 0.2887, -0.4806
O1, O2, O3, O4, O5 = 0.1552, -0.2893, -0.0684, 0.4833, 0.0335
O6, O7, O8, O9, O10 = -0.3339, -1.189, 0.1788, -0.1526, 0.1129
O11, O12, OS = 0.4833, -1.326, -0.1188
F_NEUTRAL = 0.4202
HALOGEN_ION = -2.996

HETERO = {"N", "O", "P", "S", "F", "Cl", "Br", "I"}


@dataclass
class _Env:
    """Bond-resolved neighborhood of one atom."""

    atom: Atom
    single: list[Atom]
    double: list[Atom]
    triple: list[Atom]
    aromatic: list[Atom]

    @property
    def heavy_degree(self) -> int:
        return len(self.single) + len(self.double) + len(self.triple) + len(self.aromatic)

    @property
    def sp3(self) -> bool:
        return not self.double and not self.triple and not self.aromatic

    def singles_aliphatic_carbon(self) -> int:
        return sum(1 for a in self.single if a.element == "C" and not a.aromatic)

    def singles_aliphatic_hetero(self) -> int:
        return sum(1 for a in self.single if a.element in HETERO and not a.aromatic)

    def singles_aromatic(self) -> int:
        return sum(1 for a in self.single if a.aromatic)


def _env(mol: Molecule, atom: Atom) -> _Env:
    buckets: dict[float, list[Atom]] = {1.0: [], 2.0: [], 3.0: [], 1.5: []}
    for nbr, order in zip(atom.neighbors, atom.bond_orders):
        buckets[order].append(mol.atoms[nbr])
    return _Env(atom, buckets[1.0], buckets[2.0], buckets[3.0], buckets[1.5])


def _carbon(mol: Molecule, env: _Env) -> float:
    atom = env.atom
    h = atom.hydrogens
    if atom.aromatic:
        for nbr in env.single + env.aromatic:
            if not nbr.aromatic and nbr.element not in ("C", "N", "O", "S", "F", "Cl", "Br", "I", "H"):
                return C13
        if any(a.element == "F" for a in env.single):
            return C14
        if h >= 1:
            return C18
        if len(env.aromatic) >= 3:
            return C19
        if env.singles_aromatic() >= 1:
            return C20
        if any(a.element == "C" and not a.aromatic for a in env.single):
            return C21
        if any(a.element == "N" and not a.aromatic for a in env.single):
            return C22
        if any(a.element == "O" and not a.aromatic for a in env.single):
            return C23
        if any(a.element == "S" and not a.aromatic for a in env.single):
            return C24
        if any(a.element in ("C", "N", "O") for a in env.double):
            return C25
        return CS
    # aliphatic carbon
    if env.sp3:
        all_aliphatic_c = env.heavy_degree == env.singles_aliphatic_carbon()
        if all_aliphatic_c and env.heavy_degree <= 2 and h >= 2:
            return C1  # CH4, CH3-C, CH2(C)C
        if all_aliphatic_c and env.heavy_degree >= 3:
            return C2
        if env.singles_aliphatic_hetero() >= 1:
            return C3 if h >= 2 else C4
        if any(a.aromatic for a in env.single):
            if h == 3:
                host = next(a for a in env.single if a.aromatic)
                return C8 if host.element == "C" else C9
            if h == 2:
                return C10
            if h == 1:
                return C11
            return C12
        if env.singles_aliphatic_carbon() and env.heavy_degree <= 2 and h >= 2:
            return C1
        return CS
    if env.triple:
        if env.heavy_degree + h == 2 and any(not a.aromatic for a in env.triple):
            return C7
        return CS
    # has a double bond
    if any(a.element != "C" and not a.aromatic for a in env.double):
        return C5
    aromatic_involved = (
        any(a.aromatic for a in env.single)
        or any(a.aromatic for a in env.double)
        or any(
            a.element == "C" and not a.aromatic and any(
                mol.atoms[n].aromatic for n in a.neighbors
            )
            for a in env.double
        )
    )
    if any(a.element == "C" for a in env.double):
        if aromatic_involved:
            return C26
        others_aliphatic = all(not a.aromatic for a in env.single)
        if others_aliphatic:
            return C6
        return C26
    if any(a.aromatic for a in env.double):
        return C26  # [C]=c
    return CS


def _nitrogen(mol: Molecule, env: _Env) -> float:
    atom = env.atom
    h = atom.hydrogens
    charge = atom.charge
    if atom.aromatic:
        if charge == 0:
            return N11
        if charge > 0:
            return N12
        return N14 if charge < 0 else NS
    if charge == 0:
        if h == 2 and env.heavy_degree == 1:
            return N3 if env.single and env.single[0].aromatic else N1
        if h == 1 and len(env.single) == 2 and not env.double and not env.triple:
            return N4 if env.singles_aromatic() >= 1 else N2
        if h == 1 and env.double:
            return N5
        if h == 0 and env.double and (env.single or env.aromatic):
            return N6
        if h == 0 and len(env.single) >= 3:
            return N8 if env.singles_aromatic() >= 1 else N7
        if h == 0 and env.triple:
            return N9
        return NS
    if charge > 0:
        if h >= 1:
            return N10
        if len(env.single) == 4:
            return N13
        if env.double and len(env.single) >= 1:
            return N13
        if env.double and any(a.element == "N" and a.charge < 0 for a in env.double):
            return N14
        if env.triple:
            return N14
        return NS
    return N14  # negatively charged nitrogen


def _oxygen(mol: Molecule, env: _Env) -> float:
    atom = env.atom
    h = atom.hydrogens
    charge = atom.charge
    if atom.aromatic:
        return O1
    if h >= 1 and charge == 0:
        return O2
    if charge == 0 and len(env.single) == 2:
        return O4 if env.singles_aromatic() >= 1 else O3
    if env.double and charge == 0:
        partner = env.double[0]
        if partner.element in ("N", "O"):
            return O5
        if partner.element == "S":
            return O6
        if partner.element == "C":
            if partner.aromatic:
                return O8
            return _carbonyl_oxygen(mol, env, partner)
        return OS
    if charge < 0 and len(env.single) == 1:
        partner = env.single[0]
        if partner.element == "N":
            return O5
        if partner.element == "S":
            return O6
        if partner.element == "C" and any(
            mol.atoms[n].element == "O" and order == 2.0
            for n, order in zip(partner.neighbors, partner.bond_orders)
        ):
            return O12  # carboxylate
        if partner.element != "H":
            return O7
    return OS


def _carbonyl_oxygen(mol: Molecule, env: _Env, carbon: Atom) -> float:
    """Classify O= by the carbonyl carbon's other substituents."""
    others = [
        mol.atoms[n]
        for n in carbon.neighbors
        if mol.atoms[n].index != env.atom.index
    ]
    if any(a.aromatic for a in others):
        return O10
    hetero_others = [a for a in others if a.element not in ("C", "H")]
    carbon_others = [a for a in others if a.element == "C"]
    if len(hetero_others) >= 2:
        return O11
    if carbon.hydrogens >= 1 or carbon_others:
        return O9  # aldehydes, ketones, acids, esters, formamide, CO2
    if hetero_others:
        return O9 if carbon.hydrogens else O11
    return O9 if carbon.hydrogens >= 2 else OS


def _hydrogen_type(mol: Molecule, host: Atom) -> float:
    if host.element == "C":
        return H1
    if host.element == "N":
        return H3
    if host.element == "O":
        others = [mol.atoms[n] for n, o in zip(host.neighbors, host.bond_orders) if o == 1.0]
        if not others:
            return H2  # water-like: the sibling is another hydrogen
        partner = others[0]
        if partner.element == "C":
            sp3 = all(o == 1.0 for o in partner.bond_orders)
            if partner.aromatic or sp3:
                return H2
            carbonylish = any(
                o == 2.0 and mol.atoms[n].element in ("C", "N", "O", "S")
                for n, o in zip(partner.neighbors, partner.bond_orders)
            )
            return H4 if carbonylish else HS
        if partner.element == "N":
            return H3
        if partner.element in ("O", "S"):
            return H4
        return H2  # [#1]O[!C;!N;!O;!S]
    if host.element in ("C", "N", "O"):
        return HS
    return H2  # [#1][!C;!N;!O]


def atom_contributions(mol: Molecule) -> list[float]:
    """Per-heavy-atom contributions, hydrogens folded into their hosts."""
    values: list[float] = []
    for atom in mol.atoms:
        env = _env(mol, atom)
        if atom.element == "C":
            value = _carbon(mol, env)
        elif atom.element == "N":
            value = _nitrogen(mol, env)
        elif atom.element == "O":
            value = _oxygen(mol, env)
        elif atom.element == "F":
            value = F_NEUTRAL if atom.charge == 0 else HALOGEN_ION
        else:
            value = 0.0  # out-of-scope elements contribute their class elsewhere
        value += atom.hydrogens * _hydrogen_type(mol, atom)
        values.append(value)
    return values


def mole_logp(mol: Molecule | str) -> float:
    """Crippen logP estimate (dimensionless)."""
    if isinstance(mol, str):
        mol = parse_smiles(mol)
    return round(sum(atom_contributions(mol)), 4)
