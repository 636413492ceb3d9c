"""Feature functionalization operators.

Each operator declares its numeric domain (checked over the whole column:
a single out-of-domain row invalidates the candidate), its unit rule, a
vectorized application, and the provenance subtree it contributes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from hypal import expr as ex
from hypal.errors import UnitError
from hypal.units import DIMENSIONLESS, Unit


@dataclass(frozen=True)
class UnaryOp:
    name: str
    domain: Callable[[np.ndarray], bool]
    apply: Callable[[np.ndarray], np.ndarray]
    unit_rule: Callable[[Unit], Unit]
    build: Callable[[ex.Expr], ex.Expr]

    def admits(self, values: np.ndarray) -> bool:
        return bool(self.domain(values))

    def result_unit(self, unit: Unit) -> Unit:
        return self.unit_rule(unit)


def _require_dimensionless(unit: Unit) -> Unit:
    if not unit.is_dimensionless():
        raise UnitError(f"operator requires a dimensionless input, got {unit.tag()}")
    return DIMENSIONLESS


def _all_real(_: np.ndarray) -> bool:
    return True


IDENTITY = UnaryOp(
    name="identity",
    domain=_all_real,
    apply=lambda x: x,
    unit_rule=lambda u: u,
    build=lambda e: e,
)

RECIPROCAL = UnaryOp(
    name="reciprocal",
    domain=lambda x: bool(np.all(x != 0)),
    apply=lambda x: 1.0 / x,
    unit_rule=lambda u: u ** Fraction(-1),
    build=lambda e: ex.div(ex.const(1.0), e),
)

SQRT = UnaryOp(
    name="sqrt",
    domain=lambda x: bool(np.all(x > 0)),
    apply=np.sqrt,
    unit_rule=lambda u: u.sqrt(),
    build=lambda e: ex.Unary("sqrt", e),
)

SQUARE = UnaryOp(
    name="square",
    domain=_all_real,
    apply=lambda x: x * x,
    unit_rule=lambda u: u ** Fraction(2),
    build=lambda e: ex.pow_(e, ex.const(2.0)),
)

CUBE = UnaryOp(
    name="cube",
    domain=_all_real,
    apply=lambda x: x * x * x,
    unit_rule=lambda u: u ** Fraction(3),
    build=lambda e: ex.pow_(e, ex.const(3.0)),
)

LOG = UnaryOp(
    name="log",
    domain=lambda x: bool(np.all(x > 0)),
    apply=np.log,
    unit_rule=_require_dimensionless,
    build=lambda e: ex.Unary("log", e),
)

INVLOG = UnaryOp(
    name="invlog",
    domain=lambda x: bool(np.all(x > 0) and np.all(x != 1.0)),
    apply=lambda x: 1.0 / np.log(x),
    unit_rule=_require_dimensionless,
    build=lambda e: ex.Unary("invlog", e),
)

EXP = UnaryOp(
    name="exp",
    domain=_all_real,
    apply=np.exp,
    unit_rule=_require_dimensionless,
    build=lambda e: ex.Unary("exp", e),
)

# Fixed expansion order: feature order x this op order.
ALL_OPS: tuple[UnaryOp, ...] = (IDENTITY, RECIPROCAL, SQRT, SQUARE, CUBE, LOG, INVLOG, EXP)

OPS_BY_NAME = {op.name: op for op in ALL_OPS}
