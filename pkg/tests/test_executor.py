"""Plan execution: result equivalence across access paths and IO attribution."""

from collections import Counter

import pytest

from minidw.bitmap import build_bitmap_index
from minidw.errors import ExecutionError
from minidw.executor import execute, execute_count
from minidw.planner import (
    And,
    BitmapFetchPlan,
    BitmapKeyScan,
    BitmapNotNode,
    CostModelConfig,
    Eq,
    InList,
    IsNull,
    Or,
    Range,
    bitmap_plan,
    btree_plan,
    choose_plan,
    full_scan_plan,
    predicate_matches,
)
from minidw.stats import analyze_index, analyze_table
from minidw.storage import BufferPool, generate_normal

CFG = CostModelConfig()


def _key(row):
    return (row.empno, row.ename, row.sal, row.gender or "")


def _brute(table, pred):
    return sorted(
        (row for _, row in table.iter_rows_raw() if predicate_matches(pred, row)), key=_key
    )


def _istats_by_name(small_db):
    return {s.name: s for s in small_db["istats"]}


def _all_plans(pred, small_db):
    """Every applicable access path for ``pred`` over the shared table."""
    tstats = small_db["tstats"]
    by_name = _istats_by_name(small_db)
    plans = [full_scan_plan(pred, tstats, CFG)]
    for name, istats in by_name.items():
        if istats.kind == "btree":
            candidate = btree_plan(pred, istats, tstats, CFG)
            if candidate is not None:
                plans.append(candidate)
    mapped = bitmap_plan(pred, list(by_name.values()), tstats, CFG)
    if mapped is not None:
        plans.append(mapped)
    return plans


PREDICATES = [
    Range("empno", 100, 250),
    Range("empno", 100, 250, incl_lo=False, incl_hi=False),
    Eq("empno", 1234),
    Eq("empno", 99999),  # no such row
    InList("sal", (1000, 1500, 2000)),
    And((Range("sal", 2000, 2500), Eq("gender", "M"))),
    Or((Eq("gender", "F"), Range("empno", 1, 50))),
    IsNull("gender"),
    And((Range("empno", 1, 600), IsNull("gender"))),
]


class TestEquivalence:
    @pytest.mark.parametrize("pred", PREDICATES, ids=[str(p) for p in range(len(PREDICATES))])
    def test_every_path_returns_the_same_rows(self, small_db, pred):
        expected = _brute(small_db["table"], pred)
        plans = _all_plans(pred, small_db)
        assert len(plans) >= 2  # full scan plus at least one indexed path
        for plan in plans:
            rows, stats = execute(plan, small_db["table"], small_db["indexes"])
            assert sorted(rows, key=_key) == expected
            assert stats.rows_processed == len(rows)

    def test_btree_rechecks_the_full_predicate(self, small_db):
        pred = And((Range("empno", 1, 600), Eq("gender", "M")))
        istats = _istats_by_name(small_db)["test_random_empno_idx"]
        plan = btree_plan(pred, istats, small_db["tstats"], CFG)
        assert plan.driving == Range("empno", 1, 600)
        rows, stats = execute(plan, small_db["table"], small_db["indexes"])
        assert all(row.gender == "M" for row in rows)
        assert len(rows) == 300  # empnos 1..600, half are mod-6 1..3
        assert stats.rows_processed == 300  # filtered count, not the 600 probed

    def test_btree_rows_come_back_in_key_order(self, small_db):
        pred = Range("empno", 500, 700)
        istats = _istats_by_name(small_db)["test_random_empno_idx"]
        plan = btree_plan(pred, istats, small_db["tstats"], CFG)
        rows, _ = execute(plan, small_db["table"], small_db["indexes"])
        assert [row.empno for row in rows] == list(range(500, 701))

    def test_bitmap_rows_come_back_in_physical_order(self, small_db):
        ordinal_of = {row.empno: o for o, row in small_db["table"].iter_rows_raw()}
        pred = Range("empno", 500, 700)
        plan = bitmap_plan(pred, small_db["istats"], small_db["tstats"], CFG)
        rows, _ = execute(plan, small_db["table"], small_db["indexes"])
        ordinals = [ordinal_of[row.empno] for row in rows]
        assert ordinals == sorted(ordinals)

    def test_hand_built_not_node(self, small_db):
        # complement of the M bitmap: F rows plus NULL rows
        root = BitmapNotNode(BitmapKeyScan("test_random_gender_bmx", "M"))
        plan = BitmapFetchPlan("test_random", root, IsNull("gender"), 1, 1)
        rows, _ = execute(plan, small_db["table"], small_db["indexes"])
        expected = [row for _, row in small_db["table"].iter_rows_raw() if row.gender != "M"]
        assert sorted(rows, key=_key) == sorted(expected, key=_key)
        assert len(rows) == 1500


class TestCounters:
    def test_full_scan_charges_every_table_block(self, small_db):
        table = small_db["table"]
        plan = full_scan_plan(Eq("gender", "M"), small_db["tstats"], CFG)
        table.pool.flush()
        rows, stats = execute(plan, table, small_db["indexes"])
        assert stats.consistent_gets == table.block_count == 19
        assert stats.physical_reads == 19
        assert set(stats.segments) == {table.name}
        assert stats.rows_processed == len(rows) == 1500

    def test_warm_rerun_reads_nothing_physically(self, small_db):
        table = small_db["table"]
        plan = full_scan_plan(Eq("gender", "M"), small_db["tstats"], CFG)
        table.pool.flush()
        execute(plan, table, small_db["indexes"])
        _, warm = execute(plan, table, small_db["indexes"])
        assert warm.consistent_gets == 19
        assert warm.physical_reads == 0

    def test_btree_point_probe_attribution(self, small_db):
        table = small_db["table"]
        istats = _istats_by_name(small_db)["test_random_empno_idx"]
        pred = Eq("empno", 1234)
        plan = btree_plan(pred, istats, small_db["tstats"], CFG)
        rows, stats = execute(plan, table, small_db["indexes"])
        assert len(rows) == 1
        index_gets = stats.segments["test_random_empno_idx"].consistent_gets
        table_gets = stats.segments["test_random"].consistent_gets
        assert index_gets in (istats.blevel + 1, istats.blevel + 2)
        assert table_gets == 1
        assert stats.consistent_gets == index_gets + table_gets

    def test_bitmap_fetch_charges_one_get_per_block_run(self, small_db):
        table = small_db["table"]
        pred = Range("empno", 100, 250)
        plan = bitmap_plan(pred, small_db["istats"], small_db["tstats"], CFG)
        ordinals = [
            o for o, row in table.iter_rows_raw() if predicate_matches(pred, row)
        ]
        expected_blocks = len({o // table.rows_per_block for o in ordinals})
        rows, stats = execute(plan, table, small_db["indexes"])
        assert len(rows) == 151
        assert stats.segments["test_random"].consistent_gets == expected_blocks

    def test_elapsed_is_measured(self, small_db):
        plan = full_scan_plan(Eq("gender", "F"), small_db["tstats"], CFG)
        _, stats = execute(plan, small_db["table"], small_db["indexes"])
        assert stats.elapsed_seconds >= 0.0

    def test_dense_fetch_from_one_block_is_one_get(self):
        # Sequential table: the first 160 empnos all live in block 0.
        pool = BufferPool(64)
        table = generate_normal(320, 55, pool=pool)
        index = build_bitmap_index(table, "empno")
        tstats = analyze_table(table)
        istats = [analyze_index(index, table)]
        plan = bitmap_plan(Range("empno", 1, 160), istats, tstats, CFG)
        rows, stats = execute(plan, table, {index.name: index})
        assert len(rows) == 160
        assert stats.segments[table.name].consistent_gets == 1


class TestCountExecution:
    def test_count_matches_brute_force_and_skips_the_heap(self, small_db):
        table = small_db["table"]
        pred = And((InList("sal", tuple(range(1000, 5001, 500))), Eq("gender", "M")))
        plan = choose_plan(
            pred, small_db["istats"], small_db["tstats"], CFG, count_only=True
        )
        assert plan.kind == "bitmap_count"
        count, stats = execute_count(plan, small_db["indexes"])
        assert count == len(_brute(table, pred))
        assert table.name not in stats.segments
        assert stats.rows_processed == 1
        assert stats.consistent_gets >= 1

    def test_count_of_null_rows(self, small_db):
        plan = choose_plan(
            IsNull("gender"), small_db["istats"], small_db["tstats"], CFG, count_only=True
        )
        count, stats = execute_count(plan, small_db["indexes"])
        assert count == 500
        assert "test_random" not in stats.segments

    def test_counting_an_empty_result(self, small_db):
        plan = choose_plan(
            Eq("empno", 99999), small_db["istats"], small_db["tstats"], CFG, count_only=True
        )
        count, _ = execute_count(plan, small_db["indexes"])
        assert count == 0


class TestErrors:
    def test_count_plan_refused_by_execute(self, small_db):
        plan = choose_plan(
            IsNull("gender"), small_db["istats"], small_db["tstats"], CFG, count_only=True
        )
        with pytest.raises(ExecutionError):
            execute(plan, small_db["table"], small_db["indexes"])

    def test_fetch_plan_refused_by_execute_count(self, small_db):
        plan = bitmap_plan(IsNull("gender"), small_db["istats"], small_db["tstats"], CFG)
        with pytest.raises(ExecutionError):
            execute_count(plan, small_db["indexes"])

    def test_missing_index_object(self, small_db):
        plan = bitmap_plan(IsNull("gender"), small_db["istats"], small_db["tstats"], CFG)
        with pytest.raises(ExecutionError):
            execute(plan, small_db["table"], {})

    def test_wrong_index_kind_under_the_name(self, small_db):
        plan = bitmap_plan(IsNull("gender"), small_db["istats"], small_db["tstats"], CFG)
        imposter = {"test_random_gender_bmx": small_db["indexes"]["test_random_gender_idx"]}
        with pytest.raises(ExecutionError):
            execute(plan, small_db["table"], imposter)


class TestSanity:
    def test_gender_histogram_used_above(self, small_db):
        counts = Counter(row.gender for _, row in small_db["table"].iter_rows_raw())
        assert counts == {"M": 1500, "F": 1000, None: 500}
