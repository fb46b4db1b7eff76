"""Black-box differential privacy testing.

Protocol (two phases, always on disjoint randomness):

1. `event_search` runs the mechanism many times on both sides of a neighbor
   pair and picks the outcome event with the worst empirical probability
   ratio, considering only events with enough mass to matter.
2. `dp_hypothesis_test` re-runs the mechanism on fresh samples and tests
   H0: P(M(d1) in E) <= e^eps P(M(d2) in E) + delta with a binomial
   construction (documented below).  Small p-values are evidence of a
   violation.

The two phases each derive their own child RandomSource from the source
they are handed, so search samples and test samples can never overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from ..errors import ContractViolation
from ..randomness import RandomSource, derive_source
from ..relational import ColumnKind, Schema, Table, make_table, symmetric_difference


@dataclass
class MechanismUnderTest:
    """A black-box mechanism: (Table, eps, RandomSource) -> real outcome.

    `run_many`, when provided, returns n outcomes at once; the harness uses
    it purely as a throughput optimization and never inspects internals.
    """

    name: str
    run: Callable
    run_many: Callable | None = None
    claimed_eps_semantics: str = "pure-dp, add/remove neighbors"

    def sample(self, table: Table, eps: float, rng: RandomSource, n: int) -> np.ndarray:
        if self.run_many is not None:
            out = np.asarray(self.run_many(table, eps, rng, n), dtype=np.float64)
            if out.shape != (n,):
                raise ContractViolation("run_many returned the wrong number of outcomes")
            return out
        return np.array([float(self.run(table, eps, rng)) for _ in range(n)])


@dataclass(frozen=True)
class NeighborPair:
    d1: Table
    d2: Table
    name: str = ""

    def __post_init__(self) -> None:
        if symmetric_difference(self.d1, self.d2) != 1:
            raise ContractViolation("neighbor pair must have symmetric difference 1")


@dataclass(frozen=True)
class OutcomeEvent:
    """Closed interval event [lo, hi]; either end may be infinite.

    `swapped` records which orientation looked denser during the search
    (True means d2 had the excess); the hypothesis test checks both
    orientations regardless.
    """

    lo: float
    hi: float
    swapped: bool = False

    def count(self, outcomes: np.ndarray) -> int:
        return int(np.count_nonzero((outcomes >= self.lo) & (outcomes <= self.hi)))

    def describe(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def default_neighbor_suite(schema: Schema) -> list[NeighborPair]:
    """The standard chain of small, maximally-different databases.

    Two-column numeric schema (first in [0,100], second in [0,1]):
    DB1 = {}, DB2 = {(0,0)}, DB3 = {(100,1),(0,0)}, DB4 = {(100,1),(50,0),(0,0)},
    paired consecutively.  A three-column schema with a categorical middle
    column gets the extended variant of the same chain plus the (DB3, DB5)
    pair that perturbs the categorical value.
    """
    cols = schema.columns
    if len(cols) == 2 and cols[0].is_numeric and cols[1].is_numeric:
        if not (cols[0].lower <= 0 and cols[0].upper >= 100 and cols[1].lower <= 0 and cols[1].upper >= 1):
            raise ContractViolation("two-column suite needs domains covering [0,100] and [0,1]")
        db1 = make_table(schema, [])
        db2 = make_table(schema, [(0, 0)])
        db3 = make_table(schema, [(100, 1), (0, 0)])
        db4 = make_table(schema, [(100, 1), (50, 0), (0, 0)])
        return [
            NeighborPair(db1, db2, "DB1~DB2"),
            NeighborPair(db2, db3, "DB2~DB3"),
            NeighborPair(db3, db4, "DB3~DB4"),
        ]
    if len(cols) == 3 and cols[1].kind is ColumnKind.CATEGORICAL:
        cats = cols[1].values
        if not {"1", "c", "2.0"} <= set(cats):
            raise ContractViolation("categorical middle column must contain '1', 'c', '2.0'")
        db1 = make_table(schema, [])
        db2 = make_table(schema, [(0, "1", 0)])
        db3 = make_table(schema, [(100, "2.0", 1), (0, "1", 0)])
        db4 = make_table(schema, [(100, "2.0", 1), (0, "1", 0), (100, "1", 0)])
        db5 = make_table(schema, [(100, "2.0", 1), (0, "1", 0), (50, "c", 0)])
        return [
            NeighborPair(db1, db2, "DB1~DB2"),
            NeighborPair(db2, db3, "DB2~DB3"),
            NeighborPair(db3, db4, "DB3~DB4"),
            NeighborPair(db3, db5, "DB3~DB5"),
        ]
    raise ContractViolation("no default suite for this schema shape")


def _candidate_events(pooled: np.ndarray) -> list[tuple[float, float]]:
    """Finite, deterministic candidate set: every interval between adjacent
    empirical quantiles at 1% granularity, plus one-sided rays."""
    qs = np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, 101)))
    events: list[tuple[float, float]] = []
    for i in range(len(qs)):
        events.append((-math.inf, float(qs[i])))
        events.append((float(qs[i]), math.inf))
        for j in range(i, len(qs)):
            events.append((float(qs[i]), float(qs[j])))
    return events


def event_search(
    m: MechanismUnderTest,
    pair: NeighborPair,
    eps: float,
    n_search: int,
    rng: RandomSource,
) -> OutcomeEvent:
    """Pick the interval with the worst empirical probability ratio.

    Only intervals holding at least 0.001 * n_search * e^eps points on the
    denser side are eligible, which keeps the search away from pure noise in
    the far tails.  Degenerate outcome sets collapse to the point event.
    """
    if n_search < 10 ** 3:
        raise ContractViolation("n_search must be at least 1000")
    child = derive_source(rng)
    out1 = np.sort(m.sample(pair.d1, eps, child, n_search))
    out2 = np.sort(m.sample(pair.d2, eps, child, n_search))
    pooled = np.concatenate([out1, out2])
    if np.all(pooled == pooled[0]):
        return OutcomeEvent(float(pooled[0]), float(pooled[0]))
    min_count = 0.001 * n_search * math.exp(eps)
    e_eps = math.exp(eps)
    best: tuple[float, OutcomeEvent] | None = None
    for lo, hi in _candidate_events(pooled):
        c1 = int(np.searchsorted(out1, hi, side="right") - np.searchsorted(out1, lo, side="left"))
        c2 = int(np.searchsorted(out2, hi, side="right") - np.searchsorted(out2, lo, side="left"))
        if max(c1, c2) < min_count:
            continue
        # +1 smoothing on the sparse side keeps the score finite.
        score_fwd = c1 / (e_eps * (c2 + 1.0))
        score_rev = c2 / (e_eps * (c1 + 1.0))
        score, swapped = max((score_fwd, False), (score_rev, True))
        if best is None or score > best[0]:
            best = (score, OutcomeEvent(lo, hi, swapped))
    if best is None:
        return OutcomeEvent(-math.inf, math.inf)
    return best[1]


def _binomial_pvalue(
    c1: int, c2: int, n: int, eps: float, delta: float, np_rng: np.random.Generator,
    resamples: int = 100,
) -> float:
    """Ding-et-al.-style p-value for H0: p1 <= e^eps p2 + delta.

    The delta slack is removed by subtracting ceil(n*delta) from the side
    alleged to be too heavy; that count is then thinned by e^-eps, after
    which the null predicts the thinned count and c2 are exchangeable.  The
    one-sided exact binomial comparison P[Bin(s + c2, 1/2) >= s] gives the
    p-value; the thinning is re-sampled and the p-values averaged.
    """
    c1_adj = max(c1 - math.ceil(delta * n), 0)
    if c1_adj == 0 and c2 == 0:
        return 1.0
    s = np_rng.binomial(c1_adj, math.exp(-eps), size=resamples)
    return float(np.mean(stats.binom.sf(s - 1, s + c2, 0.5)))


def dp_hypothesis_test(
    m: MechanismUnderTest,
    pair: NeighborPair,
    event: OutcomeEvent,
    eps: float,
    delta: float,
    n_test: int,
    rng: RandomSource,
) -> float:
    """Fresh-sample hypothesis test of the DP inequality on one event.

    Both orientations (d1 excess and d2 excess) are tested and the smaller
    p-value is reported.  The event must come from samples disjoint from
    these; hand this function the same parent source as event_search and the
    derived children will not overlap.
    """
    child = derive_source(rng)
    out1 = m.sample(pair.d1, eps, child, n_test)
    out2 = m.sample(pair.d2, eps, child, n_test)
    c1 = event.count(out1)
    c2 = event.count(out2)
    if c1 == 0 and c2 == 0:
        return 1.0
    np_rng = np.random.default_rng(child.randbits(128))
    p_fwd = _binomial_pvalue(c1, c2, n_test, eps, delta, np_rng)
    p_rev = _binomial_pvalue(c2, c1, n_test, eps, delta, np_rng)
    return min(p_fwd, p_rev)


@dataclass(frozen=True)
class PValueVerdict:
    mean_p: float
    mean_pass: bool
    bonferroni_min_p: float
    bonferroni_pass: bool
    policy: str
    passed: bool

    def disagreement(self) -> bool:
        return self.mean_pass != self.bonferroni_pass


MEAN_POLICY = "mean-threshold-0.3"
BONFERRONI_POLICY = "per-test-min with Bonferroni"

#: Mean of the per-repetition p-values of a correct mechanism should clear 0.3.
MEAN_P_THRESHOLD = 0.3
BONFERRONI_ALPHA = 0.05


def aggregate_pvalues(pvalues, policy: str = MEAN_POLICY) -> PValueVerdict:
    """Combine repeated p-values into a verdict.

    Both policies are always computed and reported side by side; `policy`
    only selects which one drives the pass/fail bit.
    """
    pvalues = list(pvalues)
    if not pvalues:
        raise ContractViolation("at least one p-value required")
    mean_p = float(np.mean(pvalues))
    mean_pass = mean_p > MEAN_P_THRESHOLD
    min_p = float(np.min(pvalues))
    bonf_pass = min_p >= BONFERRONI_ALPHA / len(pvalues)
    if policy == MEAN_POLICY:
        passed = mean_pass
    elif policy == BONFERRONI_POLICY:
        passed = bonf_pass
    else:
        raise ContractViolation(f"unknown policy {policy!r}")
    return PValueVerdict(mean_p, mean_pass, min_p, bonf_pass, policy, passed)
