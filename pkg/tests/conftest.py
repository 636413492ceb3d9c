import numpy as np
import pytest

from hypal.data import FeatureTable, MoleculeRecord


def make_table(n: int, seed: int = 0, planted: str = "model1_columns") -> FeatureTable:
    """Synthetic feature table with a plantable target.

    planted:
      model1_columns  FE from the first reference form using the data columns
      model1_fixed    FE from the first reference form with fixed scalar
                      IE=-2.5, SP=1.2 (inside the bundled priors) + 1% noise
      random          FE independent of the features
    """
    rng = np.random.default_rng(seed)
    tpsa = rng.uniform(0.0, 2.5, n)
    tpsa[rng.uniform(size=n) < 0.15] = 0.0
    molelogp = rng.normal(0.0, 1.2, n)
    mw = rng.uniform(16.0, 130.0, n)
    sp = rng.normal(1.2, 0.05, n).clip(0.9, 1.5)
    ie = rng.normal(-2.6, 0.12, n).clip(-3.5, -1.5)
    if planted == "model1_columns":
        fe = ie * (1.0 + (tpsa / sp) ** 2)
        fe = fe + rng.normal(0.0, 0.01 * fe.std(), n)
    elif planted == "model1_fixed":
        fe = -2.5 * (1.0 + (tpsa / 1.2) ** 2)
        fe = fe + rng.normal(0.0, 0.01 * fe.std(), n)
    elif planted == "random":
        fe = rng.normal(-3.0, 1.0, n)
    else:
        raise ValueError(planted)
    records = tuple(
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
        for i in range(n)
    )
    return FeatureTable(records=records, provenance=f"synthetic:{planted}:{seed}")


@pytest.fixture
def small_table() -> FeatureTable:
    return make_table(60, seed=1)
