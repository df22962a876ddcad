"""Command line front end.

    minidw gen     --rows 100000 --seed 1234 [--data-dir DIR]
    minidw index   --table test_normal --column empno --kind bitmap
    minidw analyze --table test_normal
    minidw query   --table test_normal --where "empno = 1000" [--count]
    minidw bench   --scenario step4a --scale 100000 --format md
    minidw report  --all --scale 100000 --format md

Tables live as block files plus text sidecars under the data directory;
indexes are recorded in a small catalog file and rebuilt deterministically
when a table is opened. ``--where`` takes one structured term per
occurrence (terms are ANDed): ``col = value``, ``col between LO and HI``,
``col in v1,v2,...`` or ``col is null``. This is a flag grammar, not SQL.
"""

import argparse
import re
import sys
from pathlib import Path

from . import bench
from .bitmap import build_bitmap_index
from .btree import build_btree_index
from .errors import CatalogError, EngineError, ScenarioError, UsageError
from .executor import execute, execute_count
from .planner import (
    And,
    BitmapCountPlan,
    Eq,
    InList,
    IsNull,
    Range,
    choose_plan,
    explain,
)
from .stats import analyze_index, analyze_table
from .storage import BufferPool, HeapTable, assign_gender, generate_normal, generate_random

DATA_DIR_DEFAULT = "./minidw_data"
CATALOG_FILE = "catalog.txt"


# -- data directory helpers ----------------------------------------------------


def _table_path(data_dir: Path, name: str) -> Path:
    return data_dir / f"{name}.tbl"


def _load_table(data_dir: Path, name: str, pool: BufferPool) -> HeapTable:
    path = _table_path(data_dir, name)
    if not path.exists():
        raise CatalogError(f"no table {name!r} under {data_dir} (run 'minidw gen' first)")
    return HeapTable.load(path, pool)


def _catalog_entries(data_dir: Path) -> list[dict]:
    path = data_dir / CATALOG_FILE
    if not path.exists():
        return []
    entries = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        table, column, kind, name, fanout = line.split()
        entries.append(
            {"table": table, "column": column, "kind": kind, "name": name, "fanout": int(fanout)}
        )
    return entries


def _append_catalog(data_dir: Path, entry: dict) -> None:
    path = data_dir / CATALOG_FILE
    line = f"{entry['table']} {entry['column']} {entry['kind']} {entry['name']} {entry['fanout']}\n"
    with open(path, "a") as fh:
        fh.write(line)


def _build_catalog_indexes(data_dir: Path, table: HeapTable) -> dict:
    indexes = {}
    for entry in _catalog_entries(data_dir):
        if entry["table"] != table.name:
            continue
        if entry["kind"] == "bitmap":
            index = build_bitmap_index(table, entry["column"], entry["name"])
        else:
            index = build_btree_index(table, entry["column"], entry["fanout"], entry["name"])
        indexes[index.name] = index
    return indexes


# -- predicate flag grammar -------------------------------------------------------

_BETWEEN_RE = re.compile(r"^(\w+)\s+between\s+(\S+)\s+and\s+(\S+)$", re.IGNORECASE)
_IN_RE = re.compile(r"^(\w+)\s+in\s*\(?([^()]+)\)?$", re.IGNORECASE)
_NULL_RE = re.compile(r"^(\w+)\s+is\s+null$", re.IGNORECASE)
_EQ_RE = re.compile(r"^(\w+)\s*=\s*(\S+)$")


def _parse_value(text: str):
    text = text.strip().strip("'\"")
    try:
        return int(text)
    except ValueError:
        return text


def parse_where_term(text: str):
    """One --where occurrence -> predicate; terms are ANDed by the caller."""
    text = text.strip()
    if m := _NULL_RE.match(text):
        return IsNull(m.group(1))
    if m := _BETWEEN_RE.match(text):
        lo, hi = _parse_value(m.group(2)), _parse_value(m.group(3))
        if not isinstance(lo, int) or not isinstance(hi, int):
            raise UsageError(f"between needs integer bounds: {text!r}")
        return Range(m.group(1), lo, hi)
    if m := _IN_RE.match(text):
        values = tuple(_parse_value(v) for v in m.group(2).split(","))
        return InList(m.group(1), values)
    if m := _EQ_RE.match(text):
        return Eq(m.group(1), _parse_value(m.group(2)))
    raise UsageError(
        f"cannot parse --where term {text!r}; use 'col = v', 'col between lo and hi', "
        "'col in v1,v2', or 'col is null'"
    )


def parse_where(terms: list[str]):
    preds = [parse_where_term(t) for t in terms]
    return preds[0] if len(preds) == 1 else And(tuple(preds))


# -- commands ------------------------------------------------------------------


def _cmd_gen(args) -> int:
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    pool = BufferPool(args.pool_blocks)
    normal = generate_normal(args.rows, args.seed, "test_normal", args.page_size, pool)
    if args.with_gender:
        counts = assign_gender(normal)
        print(f"gender counts: M={counts.m} F={counts.f} null={counts.null}")
    normal.save(_table_path(data_dir, normal.name))
    print(f"wrote {normal.name}: {normal.row_count} rows, {normal.block_count} blocks")
    if args.tables == "both":
        random_ = generate_random(normal, args.seed + 1, "test_random", pool)
        random_.save(_table_path(data_dir, random_.name))
        print(f"wrote {random_.name}: {random_.row_count} rows, {random_.block_count} blocks")
    return 0


def _cmd_index(args) -> int:
    data_dir = Path(args.data_dir)
    pool = BufferPool(args.pool_blocks)
    table = _load_table(data_dir, args.table, pool)
    name = args.name or f"{args.table}_{args.column}_{'bmx' if args.kind == 'bitmap' else 'idx'}"
    for entry in _catalog_entries(data_dir):
        if entry["name"] == name:
            raise CatalogError(f"index {name!r} already in the catalog")
    if args.kind == "bitmap":
        index = build_bitmap_index(table, args.column, name)
    else:
        index = build_btree_index(table, args.column, args.fanout, name)
    _append_catalog(
        data_dir,
        {
            "table": args.table,
            "column": args.column,
            "kind": args.kind,
            "name": name,
            "fanout": args.fanout,
        },
    )
    meta = analyze_index(index, table)
    print(
        f"built {meta.kind} index {meta.name} on {args.table}.{args.column}: "
        f"size_bytes={meta.size_bytes} clustering_factor={meta.clustering_factor}"
    )
    return 0


def _cmd_analyze(args) -> int:
    data_dir = Path(args.data_dir)
    pool = BufferPool(args.pool_blocks)
    table = _load_table(data_dir, args.table, pool)
    tstats = analyze_table(table)
    print(f"table {tstats.name}: rows={tstats.row_count} blocks={tstats.block_count}")
    for column, cs in tstats.columns.items():
        print(
            f"  column {column}: ndv={cs.ndv} min={cs.min!r} max={cs.max!r} "
            f"nulls={cs.null_count}"
        )
    for name, index in sorted(_build_catalog_indexes(data_dir, table).items()):
        meta = analyze_index(index, table)
        extra = (
            f"blevel={meta.blevel} leaf_blocks={meta.leaf_blocks}"
            if meta.kind == "btree"
            else f"segment_blocks={meta.segment_blocks}"
        )
        print(
            f"  index {name} ({meta.kind} on {meta.column}): size_bytes={meta.size_bytes} "
            f"clustering_factor={meta.clustering_factor} {extra}"
        )
    return 0


def _cmd_query(args) -> int:
    data_dir = Path(args.data_dir)
    pool = BufferPool(args.pool_blocks)
    table = _load_table(data_dir, args.table, pool)
    indexes = _build_catalog_indexes(data_dir, table)
    tstats = analyze_table(table)
    index_stats = [analyze_index(ix, table) for ix in indexes.values()]
    pred = parse_where(args.where)
    pool.flush()
    pool.reset_counters()
    plan = choose_plan(pred, index_stats, tstats, count_only=args.count)
    if isinstance(plan, BitmapCountPlan):
        count, xstats = execute_count(plan, indexes)
        result_line = f"COUNT = {count}"
    else:
        rows, xstats = execute(plan, table, indexes)
        if args.count:
            result_line = f"COUNT = {len(rows)}"
        else:
            result_line = f"{len(rows)} rows selected"
            if args.print_rows:
                for row in rows[: args.print_rows]:
                    print(row)
    print("Execution Plan")
    print("-" * 14)
    print(explain(plan))
    print()
    print("Statistics")
    print("-" * 14)
    print(f"{xstats.consistent_gets:>11}  consistent gets")
    print(f"{xstats.physical_reads:>11}  physical reads")
    print(f"{xstats.rows_processed:>11}  rows processed")
    print(f"{xstats.elapsed_seconds:>11.5f}  elapsed seconds")
    for segment, counters in sorted(xstats.segments.items()):
        print(
            f"    segment {segment}: gets={counters.consistent_gets} "
            f"reads={counters.physical_reads}"
        )
    print()
    print(result_line)
    return 0


def _cmd_bench(args) -> int:
    config = bench.load_config(args.config) if args.config else bench.BenchConfig()
    report = bench.run_scenario(args.scenario, args.scale, args.seed, config=config)
    sys.stdout.write(bench.render_report(report, args.format))
    return 0


def _cmd_report(args) -> int:
    config = bench.load_config(args.config) if args.config else bench.BenchConfig()
    reports = bench.run_all(args.scale, args.seed, config=config)
    sys.stdout.write(bench.render_all(reports, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minidw", description="bitmap vs B-tree index workbench"
    )
    parser.add_argument("--data-dir", default=DATA_DIR_DEFAULT, help="table/catalog directory")
    parser.add_argument("--page-size", type=int, default=8192, dest="page_size")
    parser.add_argument("--pool-blocks", type=int, default=2000, dest="pool_blocks")
    parser.add_argument("--config", help="key=value cost model configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate the ordered and shuffled tables")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=int, default=bench.DEFAULT_SEED)
    p.add_argument("--tables", choices=("normal", "both"), default="both")
    p.add_argument("--with-gender", action="store_true", help="backfill gender immediately")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("index", help="build an index and record it in the catalog")
    p.add_argument("--table", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--kind", choices=("bitmap", "btree"), required=True)
    p.add_argument("--name")
    p.add_argument("--fanout", type=int, default=400)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("analyze", help="print table and index statistics")
    p.add_argument("--table", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("query", help="plan, execute and meter one query")
    p.add_argument("--table", required=True)
    p.add_argument("--where", action="append", required=True, help="structured term; repeatable")
    p.add_argument("--count", action="store_true", help="count matching rows only")
    p.add_argument("--print-rows", type=int, default=0, help="echo up to N matching rows")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("bench", help="run one benchmark scenario")
    p.add_argument("--scenario", choices=bench.SCENARIO_ORDER, required=True)
    p.add_argument("--scale", type=int, default=bench.DEFAULT_SCALE)
    p.add_argument("--seed", type=int, default=bench.DEFAULT_SEED)
    p.add_argument("--format", choices=("md", "csv", "txt"), default="md")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="run every scenario and render the full report")
    p.add_argument("--all", action="store_true", help="accepted for clarity; always implied")
    p.add_argument("--scale", type=int, default=bench.DEFAULT_SCALE)
    p.add_argument("--seed", type=int, default=bench.DEFAULT_SEED)
    p.add_argument("--format", choices=("md", "csv", "txt"), default="md")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"minidw: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"minidw: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
