"""Built-in mechanisms packaged for the black-box harness.

Each target wires a data-access aggregation to a privacy-layer mechanism
with a throwaway unlimited accountant, and provides a `run_many` fast path
(the exact aggregate is computed once per table; only the noise is redrawn
per run, which is exactly the separation the layering exists to allow).
"""

from __future__ import annotations

import math

import numpy as np

from ..accounting import Accountant
from ..mechanisms import laplace_mechanism
from ..randomness import RandomSource, sample_laplace
from ..relational import Table
from ..transforms import aggregate
from .blackbox import MechanismUnderTest

_scope_counter = [0]


def _unlimited_scope():
    _scope_counter[0] += 1
    acct = Accountant()
    return acct.create_scope(f"audit-{_scope_counter[0]}", budget=math.inf)


def laplace_count_target() -> MechanismUnderTest:
    """COUNT(*) + Laplace(1/eps)."""

    def run(table: Table, eps: float, rng: RandomSource) -> float:
        v = aggregate(table, "count")
        return float(laplace_mechanism(v, eps, _unlimited_scope(), rng).values[0])

    def run_many(table: Table, eps: float, rng: RandomSource, n: int) -> np.ndarray:
        v = aggregate(table, "count")
        _unlimited_scope().charge(eps * n, "laplace")  # one charge per run
        return v.values[0] + sample_laplace(rng, v.l1_sensitivity / eps, size=n)

    return MechanismUnderTest("laplace_count", run, run_many)


def laplace_sum_target(column: str = "c0") -> MechanismUnderTest:
    """SUM(column) + Laplace(sensitivity/eps) with metadata-derived sensitivity."""

    def run(table: Table, eps: float, rng: RandomSource) -> float:
        v = aggregate(table, "sum", column)
        return float(laplace_mechanism(v, eps, _unlimited_scope(), rng).values[0])

    def run_many(table: Table, eps: float, rng: RandomSource, n: int) -> np.ndarray:
        v = aggregate(table, "sum", column)
        _unlimited_scope().charge(eps * n, "laplace")
        return v.values[0] + sample_laplace(rng, v.l1_sensitivity / eps, size=n)

    return MechanismUnderTest(f"laplace_sum({column})", run, run_many)


def _builtin_targets() -> dict:
    from .bugs import half_noise_laplace_count

    return {
        "laplace_count": laplace_count_target,
        "laplace_sum": laplace_sum_target,
        # The seeded-bug target is exposed so operators can verify the
        # harness's detection power from the command line.
        "bug:half_noise_laplace_count": half_noise_laplace_count,
    }


BUILTIN_TARGETS = _builtin_targets()
