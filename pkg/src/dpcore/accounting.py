"""Privacy accountant: budget scopes, an append-only ledger, and the
independent linear-query epsilon oracle used to validate the accounting.

The accountant is a serialization point: check-and-spend is a single
indivisible step under one lock, so concurrent charge storms can never
overspend, and replaying the ledger reproduces `spent` bit for bit.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExceededError,
    ContractViolation,
    ParameterError,
    ScopeMismatchError,
    UnknownScopeError,
)

PURE_EPS = "pure-eps"
ZCDP_RHO = "zcdp-rho"

#: Significance level used in the interpretive power-bound report.
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class PrivacyCharge:
    """One granted charge: exactly one per successful mechanism invocation."""

    seq: int
    scope_id: str
    kind: str  # PURE_EPS or ZCDP_RHO
    amount: float
    mechanism: str
    timestamp: float

    def to_line(self) -> str:
        return (
            f"seq={self.seq} scope={self.scope_id} kind={self.kind} "
            f"amount={self.amount!r} mechanism={self.mechanism} time={self.timestamp!r}"
        )

    @classmethod
    def from_line(cls, line: str) -> "PrivacyCharge":
        fields = dict(part.split("=", 1) for part in line.split())
        return cls(
            seq=int(fields["seq"]),
            scope_id=fields["scope"],
            kind=fields["kind"],
            amount=float(fields["amount"]),
            mechanism=fields["mechanism"],
            timestamp=float(fields["time"]),
        )


@dataclass
class BudgetScope:
    id: str
    kind: str
    budget: float
    spent: float = 0.0
    sharing: str = "global"  # "global" or "per-group:<group id>"

    def __post_init__(self) -> None:
        if self.kind not in (PURE_EPS, ZCDP_RHO):
            raise ContractViolation(f"unknown scope kind {self.kind!r}")
        if self.budget < 0:
            raise ContractViolation("budget must be nonnegative")


class ScopeHandle:
    """A scope-bound view of the accountant handed to mechanisms."""

    def __init__(self, accountant: "Accountant", scope_id: str) -> None:
        self._accountant = accountant
        self.scope_id = scope_id

    @property
    def kind(self) -> str:
        return self._accountant._scope(self.scope_id).kind

    def charge(self, amount: float, mechanism: str) -> PrivacyCharge:
        return self._accountant.charge(self.scope_id, amount, mechanism)

    def remaining(self) -> float:
        return self._accountant.remaining(self.scope_id)


class Accountant:
    """Tracks cumulative privacy loss per scope with atomic check-and-spend.

    If `ledger_path` is set, every granted charge is appended and flushed to
    the file before the charge call returns, so no mechanism result can be
    released ahead of its ledger record.  Denied requests are logged in
    memory (without spending) so audits can detect probing.
    """

    def __init__(self, ledger_path: str | None = None) -> None:
        self._scopes: dict[str, BudgetScope] = {}
        self._ledger: list[PrivacyCharge] = []
        self._denials: list[tuple[str, str]] = []
        self._lock = threading.Lock()
        self._seq = 0
        self._ledger_file = open(ledger_path, "a", encoding="utf-8") if ledger_path else None

    # -- scope management -----------------------------------------------

    def create_scope(
        self, scope_id: str, kind: str = PURE_EPS, budget: float = math.inf,
        sharing: str = "global",
    ) -> ScopeHandle:
        with self._lock:
            if scope_id in self._scopes:
                raise ContractViolation(f"scope {scope_id!r} already exists")
            self._scopes[scope_id] = BudgetScope(scope_id, kind, budget, sharing=sharing)
        return ScopeHandle(self, scope_id)

    def scope(self, scope_id: str) -> ScopeHandle:
        self._scope(scope_id)
        return ScopeHandle(self, scope_id)

    def _scope(self, scope_id: str) -> BudgetScope:
        try:
            return self._scopes[scope_id]
        except KeyError:
            raise UnknownScopeError(f"unknown scope: {scope_id}") from None

    # -- charging ---------------------------------------------------------

    def charge(self, scope_id: str, amount: float, mechanism: str) -> PrivacyCharge:
        """Atomically spend `amount` from the scope or deny without side
        effects.  Denial raises BudgetExceededError with a uniform message."""
        if amount < 0:
            raise ParameterError("charge amount must be nonnegative")
        with self._lock:
            scope = self._scope(scope_id)
            if scope.spent + amount > scope.budget:
                self._denials.append((scope_id, mechanism))
                raise BudgetExceededError()
            scope.spent += amount
            self._seq += 1
            record = PrivacyCharge(
                seq=self._seq,
                scope_id=scope_id,
                kind=scope.kind,
                amount=amount,
                mechanism=mechanism,
                timestamp=time.time(),
            )
            self._ledger.append(record)
            if self._ledger_file is not None:
                self._ledger_file.write(record.to_line() + "\n")
                self._ledger_file.flush()
        return record

    def remaining(self, scope_id: str) -> float:
        with self._lock:
            scope = self._scope(scope_id)
            return scope.budget - scope.spent

    def spent(self, scope_id: str) -> float:
        with self._lock:
            return self._scope(scope_id).spent

    @property
    def ledger(self) -> tuple[PrivacyCharge, ...]:
        with self._lock:
            return tuple(self._ledger)

    @property
    def denials(self) -> tuple:
        with self._lock:
            return tuple(self._denials)

    def close(self) -> None:
        if self._ledger_file is not None:
            self._ledger_file.close()
            self._ledger_file = None


def replay_spent(ledger: list[PrivacyCharge]) -> dict[str, float]:
    """Recompute per-scope spend by summing the ledger in order.

    Uses the same left-to-right float addition as the live accountant, so a
    faithful ledger reproduces `spent` exactly, not just approximately.
    """
    totals: dict[str, float] = {}
    for rec in ledger:
        totals[rec.scope_id] = totals.get(rec.scope_id, 0.0) + rec.amount
    return totals


def sequence_epsilon(charges) -> float:
    """Total epsilon of a pure-DP charge sequence: plain addition.

    Valid for parameter-adaptive sequences too (later epsilons may depend on
    earlier outputs); additivity carries over without loss.
    """
    total = 0.0
    for c in charges:
        if isinstance(c, PrivacyCharge):
            if c.kind != PURE_EPS:
                raise ScopeMismatchError("sequence_epsilon is defined for pure-DP charges only")
            total += c.amount
        else:
            total += float(c)
    return total


def linear_query_epsilon(Q, alphas) -> float:
    """Exact epsilon of answering linear queries Q with Laplace scales alphas.

    With D = diag(1/alpha_i), the release is eps-DP for eps equal to the
    largest column L1 norm of D Q, and for no smaller value.  This is the
    independent oracle the accountant is validated against.
    """
    Q = np.asarray(Q, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if Q.ndim != 2 or alphas.ndim != 1 or Q.shape[0] != alphas.shape[0]:
        raise ContractViolation("rows(Q) must equal len(alphas)")
    if np.any(alphas <= 0):
        raise ParameterError("all Laplace scales must be positive")
    scaled = np.abs(Q) / alphas[:, None]
    return float(np.max(np.sum(scaled, axis=0))) if Q.size else 0.0


def verify_accounting(claimed_epsilon: float, Q, alphas) -> bool:
    """Pass iff the accountant's claimed epsilon dominates the exact value."""
    return claimed_epsilon >= linear_query_epsilon(Q, alphas)


def power_bound(epsilon_spent: float, alpha: float = DEFAULT_ALPHA) -> float:
    """Interpretive bound e^eps * alpha on any level-alpha membership test's
    true positive rate.  Vacuous (inf) once the spend is astronomically
    large, rather than overflowing."""
    try:
        return math.exp(epsilon_spent) * alpha
    except OverflowError:
        return math.inf


def zcdp_to_pure_dp(rho: float, delta: float) -> float:
    """(eps, delta) reading of a rho-zCDP guarantee: eps = rho + 2*sqrt(rho ln(1/delta)).

    Formula from the concentrated-DP literature; used for reporting only.
    """
    if not (0 < delta < 1):
        raise ParameterError("delta must be in (0, 1)")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))
