"""Regenerate the bundled 500-row sample feature table.

The target column follows the first reference model's functional form with
near-constant expensive features and 1% relative noise, so the bundled
file supports meaningful smoke runs of both forge and learn without any
external download. Deterministic: rerunning reproduces the file byte for
byte.
"""

from pathlib import Path

import numpy as np

from hypal.data import FeatureTable, MoleculeRecord, write_feature_table

N_ROWS = 500
SEED = 20240817


def build_table() -> FeatureTable:
    rng = np.random.default_rng(SEED)
    tpsa = rng.uniform(0.0, 2.5, N_ROWS)
    tpsa[rng.uniform(size=N_ROWS) < 0.15] = 0.0
    molelogp = rng.normal(0.0, 1.2, N_ROWS)
    mw = rng.uniform(16.0, 130.0, N_ROWS)
    sp = rng.normal(1.2, 0.05, N_ROWS).clip(0.9, 1.5)
    ie = rng.normal(-2.6, 0.12, N_ROWS).clip(-3.5, -1.5)
    fe = ie * (1.0 + (tpsa / sp) ** 2)
    fe = fe + rng.normal(0.0, 0.01 * fe.std(), N_ROWS)
    records = [
        MoleculeRecord(
            id=i + 1,
            smiles="",
            MW=float(mw[i]),
            TPSA=float(tpsa[i]),
            molelogP=float(molelogp[i]),
            SP=float(sp[i]),
            IE=float(ie[i]),
            FE=float(fe[i]),
        )
        for i in range(N_ROWS)
    ]
    return FeatureTable(records=tuple(records), provenance="bundled sample")


if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "src" / "hypal" / "bundled" / "sample_features.csv"
    write_feature_table(build_table(), out)
    print(f"wrote {out}")
