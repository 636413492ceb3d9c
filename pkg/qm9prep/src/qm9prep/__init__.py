"""Offline QM9 feature extraction to the canonical feature-table CSV."""

from qm9prep.crippen import mole_logp
from qm9prep.extract import extract, verify
from qm9prep.smiles import molecular_weight, parse_smiles
from qm9prep.tpsa import tpsa

__all__ = ["extract", "verify", "parse_smiles", "molecular_weight", "tpsa", "mole_logp"]

__version__ = "0.1.0"
