"""Postprocessing layer and user-facing plumbing.

Nothing in this module touches raw data: functions here accept dataset
handles and MechanismResults only (the test suite asserts that no public
function in this module takes or returns a Table).  Derived statistics,
clamping and budget reporting are pure postprocessing and cost no budget.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .accounting import Accountant, DEFAULT_ALPHA, PURE_EPS, ScopeHandle, power_bound
from .errors import BudgetExceededError, ContractViolation
from .gateway import private_release
from .mechanisms import MechanismResult
from .randomness import RandomSource, derive_source
from .registry import DatasetRegistry
from .transforms import TransformPlan, parse_plan


class SystemClock:
    """Monotonic wall-time clock used in production."""

    def now(self) -> float:
        return time.monotonic()

    def advance(self, dt: float) -> None:
        time.sleep(max(dt, 0.0))

    def sleep_until(self, t: float) -> None:
        time.sleep(max(t - time.monotonic(), 0.0))


@dataclass
class ServiceConfig:
    """Runtime policy knobs; budgets and paths live in a JSON config file."""

    budgets: list = field(default_factory=list)  # [{"id", "kind", "budget"}]
    xi: float = 1.0  # per-record predicate time budget
    overhead: float = 5.0  # fixed response-schedule overhead
    startup_fraction: float = 0.01  # share of scope budget spent on n-hat
    sharing: str = "per-group"  # or "global"
    ledger_path: str | None = None
    state_dir: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if any("seed" in key.lower() for key in raw):
            raise ContractViolation(
                "config files must not carry randomness seeds")
        return cls(
            budgets=raw.get("budgets", []),
            xi=float(raw.get("xi", 1.0)),
            overhead=float(raw.get("overhead", 5.0)),
            startup_fraction=float(raw.get("startup_fraction", 0.01)),
            sharing=raw.get("sharing", "per-group"),
            ledger_path=raw.get("ledger"),
            state_dir=raw.get("state_dir"),
        )


@dataclass
class QuerySession:
    session_id: str
    dataset: str  # opaque handle
    scope: ScopeHandle
    n_hat: float  # noisy size estimate, fixed at session start
    xi: float
    rng: RandomSource


@dataclass(frozen=True)
class QueryRequest:
    plan_text: str
    mechanism: str
    eps: float


_ERROR_CODE = "request rejected"  # one code for every rejected request


@dataclass(frozen=True)
class QueryResponse:
    status: str  # "ok" or "error"
    code: str
    values: tuple
    labels: tuple
    remaining_budget: float

    def to_bytes(self) -> bytes:
        payload = {
            "status": self.status,
            "code": self.code,
            "values": list(self.values),
            "labels": list(self.labels),
            "remaining_budget": self.remaining_budget,
        }
        return json.dumps(payload, sort_keys=True).encode("utf-8")


@dataclass(frozen=True)
class BudgetStatus:
    spent: float
    remaining: float
    alpha: float
    power_bound: float


class QueryService:
    """Session management, padded query execution and budget reporting."""

    def __init__(
        self,
        registry: DatasetRegistry,
        accountant: Accountant,
        config: ServiceConfig,
        clock=None,
        rng: RandomSource | None = None,
    ) -> None:
        self._registry = registry
        self._accountant = accountant
        self._config = config
        self._clock = clock if clock is not None else SystemClock()
        self._rng = rng if rng is not None else RandomSource.from_os_entropy()
        self._sessions: dict[str, QuerySession] = {}
        self._session_counter = 0

    # -- ingestion ---------------------------------------------------------

    def ingest(self, csv_path: str, sidecar_path: str) -> str:
        """Register a dataset.  Prints/returns nothing data-derived: no row
        count, no value ranges; parse failures name file structure only."""
        return self._registry.ingest_files(csv_path, sidecar_path)

    # -- sessions ----------------------------------------------------------

    def open_session(self, dataset: str, scope_id: str,
                     startup_eps: float | None = None) -> QuerySession:
        """Create a session; spends a small startup charge on a noisy size
        estimate that is cached for the life of the session."""
        scope = self._accountant.scope(scope_id)
        if startup_eps is None:
            startup_eps = max(self._config.startup_fraction * scope.remaining(), 1e-3)
        self._session_counter += 1
        session = QuerySession(
            session_id=f"s{self._session_counter}",
            dataset=dataset,
            scope=scope,
            n_hat=0.0,
            xi=self._config.xi,
            rng=derive_source(self._rng),
        )
        session.n_hat = self._estimate_size(session, startup_eps)
        self._sessions[session.session_id] = session
        return session

    def dump_sessions(self) -> dict:
        """Persistable session state.  Randomness is never part of it:
        sources are rebuilt from OS entropy on restore, and n-hat is kept
        (it is never recomputed within a session's lifetime)."""
        return {
            "counter": self._session_counter,
            "sessions": {
                sid: {
                    "dataset": s.dataset,
                    "scope": s.scope.scope_id,
                    "n_hat": s.n_hat,
                    "xi": s.xi,
                }
                for sid, s in self._sessions.items()
            },
        }

    def restore_sessions(self, raw: dict) -> None:
        self._session_counter = int(raw.get("counter", 0))
        for sid, s in raw.get("sessions", {}).items():
            self._sessions[sid] = QuerySession(
                session_id=sid,
                dataset=s["dataset"],
                scope=self._accountant.scope(s["scope"]),
                n_hat=float(s["n_hat"]),
                xi=float(s["xi"]),
                rng=derive_source(self._rng),
            )

    def session(self, session_id: str) -> QuerySession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise ContractViolation(f"unknown session: {session_id}") from None

    def _estimate_size(self, session: QuerySession, eps: float) -> float:
        result = private_release(
            self._registry, session.dataset, parse_plan("count"),
            "laplace", eps, session.scope, derive_source(session.rng),
        )
        return float(result.values[0])

    def estimate_size(self, session: QuerySession) -> float:
        """The session's cached noisy size; never recomputed."""
        return session.n_hat

    # -- queries -----------------------------------------------------------

    def run_query(self, session: QuerySession, request: QueryRequest) -> QueryResponse:
        """Execute a request under the fixed response-time schedule.

        Every outcome, success or failure, is released at the same
        schedule: start + n_hat * xi + overhead (with one doubling step if
        the actual scan overran the prediction), so response timing carries
        no information about the data.  Budget-denied and malformed requests
        share one error shape.
        """
        clock = self._clock
        start = clock.now()
        target = start + max(self._n_hat_for_padding(session), 0.0) * session.xi \
            + self._config.overhead
        status, code, values, labels = "error", _ERROR_CODE, (), ()
        try:
            plan = parse_plan(request.plan_text)
            result = private_release(
                self._registry, session.dataset, plan, request.mechanism,
                request.eps, session.scope, derive_source(session.rng),
                clock=clock, xi=session.xi,
            )
            status, code = "ok", ""
            values = tuple(float(x) for x in result.values)
            labels = tuple(result.labels)
        except (ContractViolation, BudgetExceededError, ValueError):
            pass  # uniform error path; padding below applies either way
        if clock.now() > target:
            # Fixed-prediction schedule overran: take one doubling step.
            target = start + 2.0 * max(self._n_hat_for_padding(session), 0.0) \
                * session.xi + self._config.overhead
        clock.sleep_until(target)
        return QueryResponse(status, code, values, labels,
                             remaining_budget=session.scope.remaining())

    def _n_hat_for_padding(self, session: QuerySession) -> float:
        # Fixed-prediction schedule: round the (inflated) noisy size up to a
        # power of two, so neighboring datasets almost always land in the
        # same padding bucket and unit-level noise in n-hat never shows up
        # in the response schedule.
        inflated = max(session.n_hat, 0.0) + 16.0
        return math.ldexp(1.0, math.ceil(math.log2(inflated)))

    # -- postprocessing ----------------------------------------------------

    @staticmethod
    def derived_mean(noisy_sum: MechanismResult, noisy_count: MechanismResult) -> float:
        return derived_mean(noisy_sum, noisy_count)

    # -- reporting ---------------------------------------------------------

    def budget_status(self, session: QuerySession) -> BudgetStatus:
        spent = self._accountant.spent(session.scope.scope_id)
        return BudgetStatus(
            spent=spent,
            remaining=session.scope.remaining(),
            alpha=DEFAULT_ALPHA,
            power_bound=power_bound(spent),
        )


def derived_mean(noisy_sum: MechanismResult, noisy_count: MechanismResult) -> float:
    """sum / max(count, 1), computed purely in postprocessing.

    The denominator floor keeps the ratio defined when the noisy count is
    nonpositive; no additional privacy charge is incurred here.
    """
    s = float(noisy_sum.values[0])
    c = float(noisy_count.values[0])
    return s / max(c, 1.0)


def clamp_nonnegative(values) -> np.ndarray:
    """Coordinatewise max(., 0).  OFF by default in every pipeline: zero
    truncation biases downstream estimates, so callers must opt in."""
    return np.maximum(np.asarray(values, dtype=np.float64), 0.0)


def build_accountant(config: ServiceConfig) -> Accountant:
    """Accountant with the configured scopes, restored from the ledger file
    if one already exists."""
    existing = []
    if config.ledger_path:
        try:
            with open(config.ledger_path, "r", encoding="utf-8") as fh:
                from .accounting import PrivacyCharge
                existing = [PrivacyCharge.from_line(line) for line in fh if line.strip()]
        except FileNotFoundError:
            pass
    acct = Accountant(ledger_path=config.ledger_path)
    for spec in config.budgets:
        acct.create_scope(
            spec["id"], spec.get("kind", PURE_EPS), float(spec["budget"]),
            sharing="global" if config.sharing == "global" else f"per-group:{spec['id']}",
        )
    for record in existing:
        acct._scope(record.scope_id).spent += record.amount
        acct._ledger.append(record)
        acct._seq = max(acct._seq, record.seq)
    return acct
