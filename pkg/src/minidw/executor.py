"""Plan execution with per-segment IO attribution.

Results are exact regardless of which plan produced them: a full scan
filters every row, a B-tree access probes its driving conjunct and
re-checks the whole predicate on the fetched rows, and a bitmap plan
evaluates its node tree to a bitmap, converts to RowIds and fetches.
Bitmap plans emit rows in RowId order, B-tree plans in key order.

Heap fetches charge one consistent get per block run: consecutive rowids
in the same block share a single get. Count-only plans never touch the
heap segment at all; the answer is the bitmap's popcount.
"""

import time
from dataclasses import dataclass, field

from .bitmap import BitmapIndex, CompressedBitmap, bm_and, bm_not, or_all
from .btree import BTreeIndex
from .errors import ExecutionError
from .planner import (
    BitmapAndNode,
    BitmapCountPlan,
    BitmapFetchPlan,
    BitmapKeyScan,
    BitmapNotNode,
    BitmapOrNode,
    BitmapRangeScan,
    BTreeAccessPlan,
    Eq,
    FullScanPlan,
    InList,
    Range,
    predicate_matches,
)
from .storage import HeapTable, IoCounters, Row, RowId


@dataclass
class ExecStats:
    consistent_gets: int = 0
    physical_reads: int = 0
    rows_processed: int = 0
    elapsed_seconds: float = 0.0
    segments: dict[str, IoCounters] = field(default_factory=dict)


class _Meter:
    """Snapshot the pool around a plan and expose the per-segment deltas."""

    def __init__(self, pool):
        self.pool = pool
        self._before_total = pool.snapshot_counters()
        self._before_segments = pool.snapshot_segments()
        self._t0 = time.perf_counter()

    def finish(self, rows_emitted: int) -> ExecStats:
        elapsed = time.perf_counter() - self._t0
        self.pool.note_rows(rows_emitted)
        total = self.pool.snapshot_counters()
        segments: dict[str, IoCounters] = {}
        for name, after in self.pool.snapshot_segments().items():
            before = self._before_segments.get(name, IoCounters())
            delta = IoCounters(
                after.consistent_gets - before.consistent_gets,
                after.physical_reads - before.physical_reads,
            )
            if delta.consistent_gets or delta.physical_reads:
                segments[name] = delta
        return ExecStats(
            consistent_gets=total.consistent_gets - self._before_total.consistent_gets,
            physical_reads=total.physical_reads - self._before_total.physical_reads,
            rows_processed=rows_emitted,
            elapsed_seconds=elapsed,
            segments=segments,
        )


def _index_for(indexes: dict, name: str, want):
    try:
        index = indexes[name]
    except KeyError:
        raise ExecutionError(f"plan references index {name!r} that was not provided") from None
    if not isinstance(index, want):
        raise ExecutionError(f"index {name!r} is a {type(index).__name__}, expected {want.__name__}")
    return index


def _eval_bitmap_node(node, indexes: dict, length: int) -> CompressedBitmap:
    if isinstance(node, BitmapKeyScan):
        index = _index_for(indexes, node.index_name, BitmapIndex)
        return index.lookup_null() if node.is_null else index.lookup_eq(node.value)
    if isinstance(node, BitmapRangeScan):
        index = _index_for(indexes, node.index_name, BitmapIndex)
        return index.lookup_range(node.lo, node.hi, node.incl_lo, node.incl_hi)
    if isinstance(node, BitmapAndNode):
        result = None
        for child in node.children:
            bitmap = _eval_bitmap_node(child, indexes, length)
            result = bitmap if result is None else bm_and(result, bitmap)
        return result
    if isinstance(node, BitmapOrNode):
        return or_all(
            [_eval_bitmap_node(child, indexes, length) for child in node.children], length
        )
    if isinstance(node, BitmapNotNode):
        return bm_not(_eval_bitmap_node(node.child, indexes, length))
    raise ExecutionError(f"cannot evaluate bitmap node {node!r}")


def _fetch_runs(table: HeapTable, rowids) -> list[Row]:
    """Fetch rows charging one get per consecutive same-block run."""
    rows: list[Row] = []
    last_block = None
    for rowid in rowids:
        if rowid.block_no != last_block:
            table.pool.access(table.name, rowid.block_no)
            last_block = rowid.block_no
        rows.append(table.fetch_slot_unmetered(rowid.block_no, rowid.slot))
    return rows


def _probe_btree(index: BTreeIndex, driving) -> list[RowId]:
    if isinstance(driving, Eq):
        return index.search_eq(driving.value)
    if isinstance(driving, Range):
        return [rid for _, rid in index.scan_range(driving.lo, driving.hi, driving.incl_lo, driving.incl_hi)]
    if isinstance(driving, InList):
        out: list[RowId] = []
        for value in sorted(driving.values):
            out.extend(index.search_eq(value))
        return out
    raise ExecutionError(f"B-tree cannot drive predicate {driving!r}")


def execute(plan, table: HeapTable, indexes: dict | None = None):
    """Run ``plan`` against ``table``; returns (rows, ExecStats)."""
    indexes = indexes or {}
    meter = _Meter(table.pool)

    if isinstance(plan, FullScanPlan):
        rows = [row for row in table.full_scan() if predicate_matches(plan.predicate, row)]
    elif isinstance(plan, BTreeAccessPlan):
        index = _index_for(indexes, plan.index_name, BTreeIndex)
        rowids = _probe_btree(index, plan.driving)
        fetched = _fetch_runs(table, rowids)
        rows = [row for row in fetched if predicate_matches(plan.predicate, row)]
    elif isinstance(plan, BitmapFetchPlan):
        bitmap = _eval_bitmap_node(plan.root, indexes, table.row_count)
        first = _first_bitmap_index(plan.root, indexes)
        rows = _fetch_runs(table, first.to_rowids(bitmap))
    elif isinstance(plan, BitmapCountPlan):
        raise ExecutionError("count-only plans go through execute_count")
    else:
        raise ExecutionError(f"cannot execute plan {plan!r}")

    return rows, meter.finish(len(rows))


def execute_count(plan: BitmapCountPlan, indexes: dict):
    """Run a count-only plan; returns (count, ExecStats). Zero heap gets."""
    if not isinstance(plan, BitmapCountPlan):
        raise ExecutionError(f"execute_count needs a count-only plan, got {type(plan).__name__}")
    first = _first_bitmap_index(plan.root, indexes)
    meter = _Meter(first.pool)
    bitmap = _eval_bitmap_node(plan.root, indexes, first.length)
    # one aggregate row comes back to the client
    return bitmap.popcount, meter.finish(1)


def _first_bitmap_index(node, indexes: dict) -> BitmapIndex:
    if isinstance(node, (BitmapKeyScan, BitmapRangeScan)):
        return _index_for(indexes, node.index_name, BitmapIndex)
    if isinstance(node, (BitmapAndNode, BitmapOrNode)):
        return _first_bitmap_index(node.children[0], indexes)
    if isinstance(node, BitmapNotNode):
        return _first_bitmap_index(node.child, indexes)
    raise ExecutionError(f"no bitmap index under node {node!r}")
