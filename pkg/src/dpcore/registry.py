"""Dataset registry: the data-access boundary the service layer talks to.

The service layer holds opaque handles; only this module (and the privacy
gateway) ever touch Table values.  Plan execution optionally paces itself
against an injected clock so that every record costs exactly the timeout
budget, with slow predicates defaulting to TRUE instead of running long.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import ContractViolation
from .relational import Table, dev_log, load_csv, load_schema, make_table
from .transforms import Predicate, TransformPlan, select_where


@dataclass(frozen=True)
class PacedPredicate:
    """Predicate wrapper that bounds per-row evaluation cost.

    A row whose (simulated) evaluation cost exceeds the timeout is treated
    as satisfying the predicate; either way the row costs exactly `xi` on
    the clock, so evaluation time carries no signal.
    """

    inner: Predicate
    xi: float
    clock: object

    @property
    def conjuncts(self):
        return self.inner.conjuncts

    def columns(self):
        return self.inner.columns()

    def matches(self, row, schema) -> bool:
        cost = self.inner.simulated_cost(row) if self.inner.simulated_cost else 0.0
        self.clock.advance(self.xi)
        if cost > self.xi:
            dev_log.append("predicate timeout: defaulted to TRUE")
            return True
        return self.inner.matches(row, schema)


class DatasetRegistry:
    """Maps opaque handles to tables."""

    def __init__(self) -> None:
        self._tables: dict[str, Table] = {}
        self._counter = itertools.count(1)

    def ingest_files(self, csv_path: str, sidecar_path: str) -> str:
        schema = load_schema(sidecar_path)
        return self.register(load_csv(csv_path, schema))

    def register(self, table: Table) -> str:
        handle = f"ds{next(self._counter)}"
        while handle in self._tables:
            handle = f"ds{next(self._counter)}"
        self._tables[handle] = table
        return handle

    def register_as(self, handle: str, csv_path: str, sidecar_path: str) -> None:
        """Re-register a persisted dataset under its stable handle."""
        schema = load_schema(sidecar_path)
        self._tables[handle] = load_csv(csv_path, schema)

    def _table(self, handle: str) -> Table:
        try:
            return self._tables[handle]
        except KeyError:
            raise ContractViolation(f"unknown dataset handle: {handle}") from None

    def execute_plan(self, handle: str, plan: TransformPlan, rng=None,
                     clock=None, xi: float | None = None):
        """Run a plan against a registered table, returning its StatVector.

        When a clock and timeout are given, predicate scans are paced: each
        record costs exactly xi and overlong predicate evaluations default
        to TRUE.
        """
        table = self._table(handle)
        if clock is not None and xi is not None:
            steps = tuple(
                ("select_where", PacedPredicate(step[1], xi, clock))
                if step[0] == "select_where" else step
                for step in plan.steps
            )
            plan = TransformPlan(steps)
        return plan.execute(table, rng)
