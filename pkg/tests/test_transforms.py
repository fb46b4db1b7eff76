import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpcore import (
    Affine,
    Clamp,
    ColumnKind,
    ColumnMeta,
    Comparison,
    ContractViolation,
    Predicate,
    RejectedOperationError,
    Schema,
    Square,
    aggregate,
    bernoulli_sample,
    distinct,
    group_by,
    linear_map,
    make_table,
    map_column,
    parse_plan,
    project,
    rejected_operation,
    select_where,
    symmetric_difference,
    union,
)
from dpcore.testing import ScriptedSource
from oracles import interval_image, multiset_distance


def _schema(upper0=100):
    return Schema((
        ColumnMeta("c0", ColumnKind.INTEGER, lower=0, upper=upper0),
        ColumnMeta("c1", ColumnKind.INTEGER, lower=0, upper=1),
    ))


# -- row/column operators ----------------------------------------------------

def test_select_where_filters_and_refines_bounds():
    t = make_table(_schema(), [(10, 0), (60, 1), (90, 1)])
    out = select_where(t, Predicate((Comparison("c0", "<=", 60),)))
    assert out.rows == ((10, 0), (60, 1))
    assert out.schema.column("c0").upper == 60  # bound refined by predicate
    assert out.stability.factor == 1


def test_select_where_unknown_column():
    t = make_table(_schema(), [])
    with pytest.raises(Exception):
        select_where(t, Predicate((Comparison("nope", "==", 1),)))


def test_project_drops_metadata():
    t = make_table(_schema(), [(10, 0), (60, 1)])
    out = project(t, ["c1"])
    assert out.schema.names == ("c1",)
    assert out.rows == ((0,), (1,))


def test_distinct_keeps_key_columns_only():
    t = make_table(_schema(), [(10, 0), (10, 1), (20, 0)])
    out = distinct(t, ["c0"])
    assert out.schema.names == ("c0",)
    assert out.rows == ((10,), (20,))
    assert out.stability.factor == 1


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), max_size=6),
       st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), max_size=6))
def test_one_stable_operators_contract(rows_a, rows_b):
    """d(op(A), op(B)) <= d(A, B) for the 1-stable operators, exhaustively
    over random small tables."""
    schema = Schema((
        ColumnMeta("c0", ColumnKind.INTEGER, lower=0, upper=5),
        ColumnMeta("c1", ColumnKind.INTEGER, lower=0, upper=1),
    ))
    a, b = make_table(schema, rows_a), make_table(schema, rows_b)
    d = symmetric_difference(a, b)
    pred = Predicate((Comparison("c0", ">=", 2),))
    assert symmetric_difference(select_where(a, pred), select_where(b, pred)) <= d
    assert multiset_distance(project(a, ["c1"]).rows, project(b, ["c1"]).rows) <= d
    assert multiset_distance(distinct(a, ["c0"]).rows, distinct(b, ["c0"]).rows) <= d


def test_union_adds_stability_and_hulls_bounds():
    a = make_table(_schema(50), [(10, 0)])
    b = make_table(_schema(100), [(90, 1)])
    out = union(a, b)
    assert out.stability.factor == 2
    assert out.schema.column("c0").upper == 100
    assert sorted(out.rows) == [(10, 0), (90, 1)]


def test_five_self_unions_reach_stability_32():
    t = make_table(_schema(), [(1, 0)])
    for _ in range(5):
        t = union(t, t)
    assert t.stability.factor == 32
    assert len(t.rows) == 32


def test_group_by_uses_full_domain_and_doubles_stability():
    schema = Schema((
        ColumnMeta("k", ColumnKind.INTEGER, lower=0, upper=2),
        ColumnMeta("v", ColumnKind.INTEGER, lower=0, upper=9),
    ))
    t = make_table(schema, [(0, 3), (0, 4)])
    g = group_by(t, ["k"])
    assert set(g.groups) == {(0,), (1,), (2,)}  # empty groups materialized
    assert g.groups[(1,)] == () and g.groups[(2,)] == ()
    assert g.stability.factor == 2


def test_group_by_rejects_real_keys():
    schema = Schema((ColumnMeta("x", ColumnKind.REAL, lower=0, upper=1),))
    with pytest.raises(ContractViolation):
        group_by(make_table(schema, []), ["x"])


def test_bernoulli_sample_keeps_stability():
    t = make_table(_schema(), [(i, 0) for i in range(10)])
    out = bernoulli_sample(t, 0.5, ScriptedSource(uniforms=(0.1, 0.9)))
    assert out.stability.factor == t.stability.factor
    assert len(out.rows) == 5  # alternating keep/drop from the script
    with pytest.raises(ContractViolation):
        bernoulli_sample(t, 1.5, ScriptedSource())


# -- column maps -------------------------------------------------------------

@pytest.mark.parametrize("f,lo,hi", [
    (Clamp(-1.0, 1.0), -3.0, 4.0),
    (Affine(-2.0, 5.0), -3.0, 4.0),
    (Square(), -3.0, 4.0),
    (Square(), 1.0, 4.0),
])
def test_map_bounds_contain_function_image(f, lo, hi):
    got_lo, got_hi = f.bounds(lo, hi)
    img_lo, img_hi = interval_image(f, lo, hi)
    assert got_lo <= img_lo + 1e-9
    assert got_hi >= img_hi - 1e-9


def test_map_column_updates_schema_bounds():
    schema = Schema((ColumnMeta("x", ColumnKind.REAL, lower=-3, upper=4),))
    t = make_table(schema, [(-2.0,), (3.0,)])
    out = map_column(t, "x", Square())
    assert out.rows == ((4.0,), (9.0,))
    assert out.schema.column("x").lower == 0.0
    assert out.schema.column("x").upper == 16.0
    assert out.stability.factor == 1


# -- aggregation and sensitivity ---------------------------------------------

def test_count_sensitivity_is_stability():
    t = make_table(_schema(), [(1, 0), (2, 1)])
    v = aggregate(t, "count")
    assert v.values.tolist() == [2.0]
    assert v.l1_sensitivity == 1.0
    assert aggregate(union(t, t), "count").l1_sensitivity == 2.0


def test_sum_sensitivity_uses_declared_bound():
    t = make_table(_schema(), [(7, 0), (8, 1)])
    v = aggregate(t, "sum", "c0")
    assert v.values.tolist() == [15.0]
    assert v.l1_sensitivity == 100.0  # max(|0|, |100|)


def test_doubled_sum_claims_doubled_sensitivity():
    schema = Schema((ColumnMeta("wage", ColumnKind.INTEGER, lower=0, upper=300_000),))
    t = make_table(schema, [(10_000,), (20_000,)])
    doubled = union(t, t)
    v = aggregate(doubled, "sum", "wage")
    assert v.l1_sensitivity == 600_000.0
    assert v.values.tolist() == [60_000.0]


def test_grouped_aggregate_has_data_independent_labels():
    schema = Schema((
        ColumnMeta("k", ColumnKind.CATEGORICAL, values=("a", "b")),
        ColumnMeta("v", ColumnKind.INTEGER, lower=0, upper=9),
    ))
    t = make_table(schema, [("a", 3)])
    empty = make_table(schema, [])
    v_full = aggregate(group_by(t, ["k"]), "count")
    v_empty = aggregate(group_by(empty, ["k"]), "count")
    assert v_full.dimension_labels == v_empty.dimension_labels
    assert sorted(v_full.dimension_labels) == ["a", "b"]
    assert v_full.l1_sensitivity == 2.0  # grouping doubled the stability


def test_aggregate_defined_on_empty_input():
    empty = make_table(_schema(), [])
    assert aggregate(empty, "count").values.tolist() == [0.0]
    assert aggregate(empty, "sum", "c0").values.tolist() == [0.0]


def test_sum_requires_bounded_numeric_column():
    schema = Schema((ColumnMeta("k", ColumnKind.CATEGORICAL, values=("a",)),))
    t = make_table(schema, [("a",)])
    with pytest.raises(ContractViolation):
        aggregate(t, "sum", "k")
    with pytest.raises(ContractViolation):
        aggregate(t, "sum")


# -- linear maps --------------------------------------------------------------

@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_linear_map_sensitivity_is_max_column_norm(nr, nc, data):
    m = np.array([[data.draw(st.integers(-3, 3)) for _ in range(nc)]
                  for _ in range(nr)], dtype=float)
    from dpcore import StatVector
    v = StatVector(np.zeros(nc), 2.0, tuple(f"g{i}" for i in range(nc)))
    out = linear_map(v, m)
    expected = 2.0 * max(float(np.abs(m[:, j]).sum()) for j in range(nc))
    assert out.l1_sensitivity == pytest.approx(expected)


def test_linear_map_shape_check():
    from dpcore import StatVector
    v = StatVector(np.zeros(2), 1.0, ("a", "b"))
    with pytest.raises(ContractViolation):
        linear_map(v, np.zeros((2, 3)))


# -- rejected operators -------------------------------------------------------

def test_rejected_operators_explain_themselves():
    with pytest.raises(RejectedOperationError, match="min\\(2k, 2m\\)"):
        rejected_operation("limit")
    with pytest.raises(RejectedOperationError, match="bernoulli_sample"):
        rejected_operation("limit")
    for name in ("order_by", "skip", "window"):
        with pytest.raises(RejectedOperationError):
            rejected_operation(name)
    with pytest.raises(ContractViolation):
        rejected_operation("whatever")


# -- plan grammar -------------------------------------------------------------

def test_parse_plan_and_execute():
    plan = parse_plan(
        "select_where c0 >= 10 and c0 <= 90\n"
        "map_column c0 clamp 0 50\n"
        "count\n"
    )
    t = make_table(_schema(), [(5, 0), (20, 1), (95, 0)])
    v = plan.execute(t)
    assert v.values.tolist() == [1.0]


def test_parse_plan_sum_and_self_union():
    plan = parse_plan("self_union\nsum c0\n")
    t = make_table(_schema(), [(10, 0)])
    v = plan.execute(t)
    assert v.values.tolist() == [20.0]
    assert v.l1_sensitivity == 200.0


def test_plan_must_end_in_aggregation():
    with pytest.raises(ContractViolation):
        parse_plan("project c0\n")
    with pytest.raises(ContractViolation):
        parse_plan("count\nproject c0\n")
    with pytest.raises(ContractViolation):
        parse_plan("")


def test_plan_rejects_limit():
    with pytest.raises(RejectedOperationError):
        parse_plan("limit 10\ncount\n")


def test_plan_bernoulli_requires_rng():
    plan = parse_plan("bernoulli_sample 0.5\ncount\n")
    t = make_table(_schema(), [(1, 0)])
    with pytest.raises(ContractViolation):
        plan.execute(t)
    assert plan.execute(t, ScriptedSource(uniforms=(0.1,))).values.tolist() == [1.0]
