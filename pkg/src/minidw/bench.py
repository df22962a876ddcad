"""Benchmark scenarios comparing bitmap and B-tree access paths.

The registry replays a fixed experimental procedure over two tables that
hold the same million-row-style data set at a chosen scale: ``test_normal``
loaded in empno order and ``test_random`` loaded in a seeded random
permutation of the same rows. Steps 1-4 probe a unique column (equality,
then ranges) on both tables, step 5 moves to a low-cardinality-ish salary
column, step 6 backfills the three-valued gender column and builds both
index kinds on it, steps 7-8 query it, and ``conclusion`` runs the
multi-predicate decision-support query under each index family.

Scenario names: step1a..step5b ('a' = bitmap arm, 'b' = B-tree arm),
step6, step7, step8, conclusion. Probe values and range endpoints on the
unique column are the canonical million-row values multiplied by
scale/1e6 and rounded, which preserves their selectivities; salary and
gender values are scale-free. Every query is measured cold: the pool is
flushed and the counters reset before each execution. A report is fully
determined by (scenario, scale, seed, config).
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .bitmap import build_bitmap_index
from .btree import build_btree_index
from .errors import ConfigError, ScenarioError
from .executor import execute
from .planner import (
    And,
    CostModelConfig,
    Eq,
    InList,
    IsNull,
    Range,
    choose_plan,
    render_predicate,
)
from .stats import analyze_index, analyze_table
from .storage import (
    PAGE_SIZE_DEFAULT,
    POOL_BLOCKS_DEFAULT,
    BufferPool,
    assign_gender,
    generate_normal,
    generate_random,
)

BASE_SCALE = 1_000_000
MIN_SCALE = 1_000
DEFAULT_SCALE = 100_000
DEFAULT_SEED = 1234

# canonical probe values at the million-row scale
EMPNO_PROBES = (1000, 2398, 8545, 98008, 85342, 128444, 858)
EMPNO_RANGES = (
    (1, 2300),
    (8, 1980),
    (1850, 4250),
    (28888, 31850),
    (82900, 85478),
    (984888, 1_000_000),
)
SAL_PROBES = (1869, 3548, 6500, 7000, 2500)
SAL_RANGES = ((1500, 2000), (2000, 2500), (2500, 3000), (3000, 4000), (4000, 7000))
SAL_INLIST = (1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000)


@dataclass(frozen=True)
class BenchConfig:
    page_size: int = PAGE_SIZE_DEFAULT
    pool_blocks: int = POOL_BLOCKS_DEFAULT
    multiblock_divisor: float = 10.33
    bitmap_per_row_cost: float = 0.2
    fanout: int = 400

    def cost_model(self) -> CostModelConfig:
        return CostModelConfig(
            multiblock_divisor=self.multiblock_divisor,
            bitmap_per_row_cost=self.bitmap_per_row_cost,
        )


_CONFIG_PARSERS = {
    "page_size": int,
    "pool_blocks": int,
    "multiblock_divisor": float,
    "bitmap_per_row_cost": float,
    "fanout": int,
}


def load_config(path) -> BenchConfig:
    """Parse a flat key=value file; '#' starts a comment, blanks ignored."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or key not in _CONFIG_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](raw)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {raw!r}") from None
    return BenchConfig(**values)


def scale_value(value: int, scale: int) -> int:
    return max(1, round(value * scale / BASE_SCALE))


def scale_range(bounds: tuple[int, int], scale: int) -> tuple[int, int]:
    lo, hi = (scale_value(b, scale) for b in bounds)
    if hi < lo:
        raise ScenarioError(f"range {bounds} collapses at scale {scale}")
    return lo, hi


# -- reports -------------------------------------------------------------------

CSV_COLUMNS = (
    "scenario",
    "query_id",
    "predicate",
    "index_kind",
    "plan_kind",
    "cost_est",
    "card_est",
    "rows",
    "consistent_gets",
    "physical_reads",
)


@dataclass
class ReportRow:
    scenario: str
    query_id: str
    predicate: str
    index_kind: str
    plan_kind: str
    cost_est: int
    card_est: int
    rows: int
    consistent_gets: int
    physical_reads: int


@dataclass
class Report:
    scenario: str
    scale: int
    seed: int
    rows: list[ReportRow] = field(default_factory=list)
    indexes: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def report_to_csv(reports) -> str:
    """Stable CSV; identical inputs produce byte-identical output."""
    if isinstance(reports, Report):
        reports = [reports]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        for row in report.rows:
            writer.writerow([getattr(row, col) for col in CSV_COLUMNS])
    return out.getvalue()


_MD_QUERY_HEADER = (
    "| query | predicate | index | plan | cost | card | rows | gets | phys |\n"
    "|---|---|---|---|---:|---:|---:|---:|---:|\n"
)


def report_to_markdown(report: Report) -> str:
    parts = [f"## {report.scenario} (scale={report.scale}, seed={report.seed})\n"]
    if report.rows:
        lines = [_MD_QUERY_HEADER]
        for r in report.rows:
            lines.append(
                f"| {r.query_id} | {r.predicate} | {r.index_kind} | {r.plan_kind} "
                f"| {r.cost_est} | {r.card_est} | {r.rows} | {r.consistent_gets} "
                f"| {r.physical_reads} |\n"
            )
        parts.append("".join(lines))
    if report.indexes:
        parts.append(
            "\n| index | kind | column | size_bytes | clustering_factor | blevel "
            "| leaf_blocks | segment_blocks |\n|---|---|---|---:|---:|---:|---:|---:|\n"
            + "".join(
                f"| {m['name']} | {m['kind']} | {m['column']} | {m['size_bytes']} "
                f"| {m['clustering_factor']} | {m['blevel']} | {m['leaf_blocks']} "
                f"| {m['segment_blocks']} |\n"
                for m in report.indexes
            )
        )
    for note in report.notes:
        parts.append(f"\n- {note}\n")
    return "".join(parts)


def report_to_text(report: Report) -> str:
    head = f"=== {report.scenario} (scale={report.scale}, seed={report.seed}) ===\n"
    lines = [head]
    if report.rows:
        fmt = "{:<6} {:<44} {:<7} {:<11} {:>7} {:>8} {:>8} {:>8} {:>8}\n"
        lines.append(
            fmt.format("query", "predicate", "index", "plan", "cost", "card", "rows", "gets", "phys")
        )
        for r in report.rows:
            lines.append(
                fmt.format(
                    r.query_id,
                    r.predicate[:44],
                    r.index_kind,
                    r.plan_kind,
                    r.cost_est,
                    r.card_est,
                    r.rows,
                    r.consistent_gets,
                    r.physical_reads,
                )
            )
    for m in report.indexes:
        lines.append(
            f"index {m['name']} kind={m['kind']} column={m['column']} "
            f"size_bytes={m['size_bytes']} clustering_factor={m['clustering_factor']}\n"
        )
    for note in report.notes:
        lines.append(f"note: {note}\n")
    return "".join(lines)


def comparison_markdown(title: str, bitmap_report: Report, btree_report: Report) -> str:
    """Side-by-side gets/reads for two arms that ran the same query list."""
    by_qid = {r.query_id: r for r in btree_report.rows}
    lines = [
        f"## comparison: {title}\n",
        "| query | predicate | bitmap plan | bitmap gets | bitmap phys "
        "| btree plan | btree gets | btree phys |\n"
        "|---|---|---|---:|---:|---|---:|---:|\n",
    ]
    for a in bitmap_report.rows:
        b = by_qid.get(a.query_id)
        if b is None:
            continue
        lines.append(
            f"| {a.query_id} | {a.predicate} | {a.plan_kind} | {a.consistent_gets} "
            f"| {a.physical_reads} | {b.plan_kind} | {b.consistent_gets} "
            f"| {b.physical_reads} |\n"
        )
    return "".join(lines)


# -- workspace ------------------------------------------------------------------


class Workspace:
    """Caches generated tables, indexes and statistics for one config.

    Keyed by (scale, seed) so repeated scenario runs in one process reuse
    the expensive setup. Counters are reset before every measurement, so
    sharing a pool across scenarios cannot leak IO between queries.
    """

    def __init__(self, config: BenchConfig | None = None):
        self.config = config or BenchConfig()
        self._tables: dict = {}
        self._indexes: dict = {}
        self._table_stats: dict = {}
        self._index_stats: dict = {}

    def tables(self, scale: int, seed: int):
        key = (scale, seed)
        if key not in self._tables:
            pool = BufferPool(self.config.pool_blocks)
            normal = generate_normal(scale, seed, "test_normal", self.config.page_size, pool)
            assign_gender(normal)
            # the permutation draws from its own stream one past the data seed
            random_ = generate_random(normal, seed + 1, "test_random", pool)
            self._tables[key] = {"normal": normal, "random": random_}
        return self._tables[key]

    def table(self, scale: int, seed: int, which: str):
        return self.tables(scale, seed)[which]

    def index(self, scale: int, seed: int, which: str, column: str, kind: str):
        key = (scale, seed, which, column, kind)
        if key not in self._indexes:
            table = self.table(scale, seed, which)
            if kind == "bitmap":
                self._indexes[key] = build_bitmap_index(table, column)
            else:
                self._indexes[key] = build_btree_index(table, column, self.config.fanout)
        return self._indexes[key]

    def table_stats(self, scale: int, seed: int, which: str):
        key = (scale, seed, which)
        if key not in self._table_stats:
            self._table_stats[key] = analyze_table(self.table(scale, seed, which))
        return self._table_stats[key]

    def index_stats(self, scale: int, seed: int, which: str, column: str, kind: str):
        key = (scale, seed, which, column, kind)
        if key not in self._index_stats:
            index = self.index(scale, seed, which, column, kind)
            table = self.table(scale, seed, which)
            self._index_stats[key] = analyze_index(index, table)
        return self._index_stats[key]


_WORKSPACES: dict[BenchConfig, Workspace] = {}


def default_workspace(config: BenchConfig | None = None) -> Workspace:
    config = config or BenchConfig()
    if config not in _WORKSPACES:
        _WORKSPACES[config] = Workspace(config)
    return _WORKSPACES[config]


# -- scenario definitions ----------------------------------------------------------


@dataclass(frozen=True)
class _Arm:
    index_kind: str  # "bitmap" | "btree"
    table: str  # "normal" | "random"
    columns: tuple  # indexed columns made visible to the planner


def _eq_probes(column, values):
    def build(scale):
        scaled = [scale_value(v, scale) for v in values] if column == "empno" else list(values)
        return [(f"q{i}", Eq(column, v)) for i, v in enumerate(scaled, 1)]

    return build


def _range_probes(column, bounds_list, scaled: bool):
    def build(scale):
        out = []
        for i, bounds in enumerate(bounds_list, 1):
            lo, hi = scale_range(bounds, scale) if scaled else bounds
            out.append((f"q{i}", Range(column, lo, hi)))
        return out

    return build


def _sal_mixed(scale):
    out = [(f"q{i}", Eq("sal", v)) for i, v in enumerate(SAL_PROBES, 1)]
    out += [
        (f"q{i}", Range("sal", lo, hi))
        for i, (lo, hi) in enumerate(SAL_RANGES, len(SAL_PROBES) + 1)
    ]
    return out


def _gender_probes(scale):
    return [("q1", IsNull("gender")), ("q2", Eq("gender", "M")), ("q3", Eq("gender", "F"))]


def _conclusion_query(scale):
    return [("q1", And((InList("sal", SAL_INLIST), Eq("gender", "M"))))]


@dataclass(frozen=True)
class Scenario:
    name: str
    arms: tuple  # (_Arm, ...)
    queries: object  # callable(scale) -> [(query_id, predicate)]
    description: str


SCENARIOS: dict[str, Scenario] = {}


def _register(name, arms, queries, description):
    SCENARIOS[name] = Scenario(name, tuple(arms), queries, description)


_register(
    "step1a",
    [_Arm("bitmap", "normal", ("empno",))],
    _eq_probes("empno", EMPNO_PROBES),
    "equality probes on the unique column, ordered table, bitmap index",
)
_register(
    "step1b",
    [_Arm("btree", "normal", ("empno",))],
    _eq_probes("empno", EMPNO_PROBES),
    "equality probes on the unique column, ordered table, B-tree index",
)
_register(
    "step2a",
    [_Arm("bitmap", "random", ("empno",))],
    _eq_probes("empno", EMPNO_PROBES),
    "equality probes on the unique column, shuffled table, bitmap index",
)
_register(
    "step2b",
    [_Arm("btree", "random", ("empno",))],
    _eq_probes("empno", EMPNO_PROBES),
    "equality probes on the unique column, shuffled table, B-tree index",
)
_register(
    "step3a",
    [_Arm("bitmap", "normal", ("empno",))],
    _range_probes("empno", EMPNO_RANGES, scaled=True),
    "range scans on the unique column, ordered table, bitmap index",
)
_register(
    "step3b",
    [_Arm("btree", "normal", ("empno",))],
    _range_probes("empno", EMPNO_RANGES, scaled=True),
    "range scans on the unique column, ordered table, B-tree index",
)
_register(
    "step4a",
    [_Arm("bitmap", "random", ("empno",))],
    _range_probes("empno", EMPNO_RANGES, scaled=True),
    "range scans on the unique column, shuffled table, bitmap index",
)
_register(
    "step4b",
    [_Arm("btree", "random", ("empno",))],
    _range_probes("empno", EMPNO_RANGES, scaled=True),
    "range scans on the unique column, shuffled table, B-tree index",
)
_register(
    "step5a",
    [_Arm("bitmap", "normal", ("sal",))],
    _sal_mixed,
    "salary equality and ranges, bitmap index",
)
_register(
    "step5b",
    [_Arm("btree", "normal", ("sal",))],
    _sal_mixed,
    "salary equality and ranges, B-tree index",
)
_register(
    "step6",
    [_Arm("bitmap", "normal", ("gender",)), _Arm("btree", "normal", ("gender",))],
    lambda scale: [],
    "gender backfill plus both gender indexes; sizes and clustering only",
)
_register(
    "step7",
    [_Arm("bitmap", "normal", ("gender",))],
    _gender_probes,
    "gender probes including IS NULL, bitmap index",
)
_register(
    "step8",
    [_Arm("btree", "normal", ("gender",))],
    _gender_probes,
    "gender probes including IS NULL, B-tree index",
)
_register(
    "conclusion",
    [
        _Arm("bitmap", "normal", ("sal", "gender")),
        _Arm("btree", "normal", ("sal", "gender")),
    ],
    _conclusion_query,
    "salary IN-list AND gender equality under each index family",
)


def run_scenario(
    name: str,
    scale: int = DEFAULT_SCALE,
    seed: int = DEFAULT_SEED,
    config: BenchConfig | None = None,
    workspace: Workspace | None = None,
) -> Report:
    """Build (or reuse) the tables and indexes a step needs, run its query
    list cold, and return the populated report."""
    if name not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {name!r}; valid: {', '.join(sorted(SCENARIOS))}")
    if scale < MIN_SCALE:
        raise ScenarioError(f"scale must be >= {MIN_SCALE}, got {scale}")
    scenario = SCENARIOS[name]
    ws = workspace or default_workspace(config)
    if config is not None and ws.config != config:
        raise ScenarioError("workspace was built with a different config")
    cost_cfg = ws.config.cost_model()
    report = Report(name, scale, seed)

    if name == "step6":
        counts = assign_gender(ws.table(scale, seed, "normal"))
        report.notes.append(f"gender counts: M={counts.m} F={counts.f} null={counts.null}")

    for arm in scenario.arms:
        table = ws.table(scale, seed, arm.table)
        tstats = ws.table_stats(scale, seed, arm.table)
        index_objects = {}
        index_stats = []
        for column in arm.columns:
            index = ws.index(scale, seed, arm.table, column, arm.index_kind)
            index_objects[index.name] = index
            index_stats.append(ws.index_stats(scale, seed, arm.table, column, arm.index_kind))
        report.indexes.extend(m.to_dict() for m in index_stats)

        for query_id, pred in scenario.queries(scale):
            table.pool.flush()
            table.pool.reset_counters()
            plan = choose_plan(pred, index_stats, tstats, cost_cfg)
            rows, xstats = execute(plan, table, index_objects)
            report.rows.append(
                ReportRow(
                    scenario=name,
                    query_id=query_id,
                    predicate=render_predicate(pred),
                    index_kind=arm.index_kind,
                    plan_kind=plan.kind,
                    cost_est=plan.cost,
                    card_est=plan.cardinality,
                    rows=len(rows),
                    consistent_gets=xstats.consistent_gets,
                    physical_reads=xstats.physical_reads,
                )
            )
    return report


SCENARIO_ORDER = (
    "step1a",
    "step1b",
    "step2a",
    "step2b",
    "step3a",
    "step3b",
    "step4a",
    "step4b",
    "step5a",
    "step5b",
    "step6",
    "step7",
    "step8",
    "conclusion",
)

_COMPARISON_PAIRS = (
    ("unique column equality, ordered table", "step1a", "step1b"),
    ("unique column equality, shuffled table", "step2a", "step2b"),
    ("unique column ranges, ordered table", "step3a", "step3b"),
    ("unique column ranges, shuffled table", "step4a", "step4b"),
    ("salary probes", "step5a", "step5b"),
    ("gender probes", "step7", "step8"),
)


def run_all(
    scale: int = DEFAULT_SCALE,
    seed: int = DEFAULT_SEED,
    config: BenchConfig | None = None,
    workspace: Workspace | None = None,
) -> list[Report]:
    ws = workspace or default_workspace(config)
    return [run_scenario(name, scale, seed, workspace=ws) for name in SCENARIO_ORDER]


def render_all(reports: list[Report], fmt: str) -> str:
    if fmt == "csv":
        return report_to_csv(reports)
    by_name = {r.scenario: r for r in reports}
    if fmt == "md":
        parts = [report_to_markdown(r) + "\n" for r in reports]
        for title, a, b in _COMPARISON_PAIRS:
            if a in by_name and b in by_name:
                parts.append(comparison_markdown(title, by_name[a], by_name[b]) + "\n")
        return "".join(parts)
    if fmt == "txt":
        return "".join(report_to_text(r) + "\n" for r in reports)
    raise ConfigError(f"unknown report format {fmt!r}; use md, csv or txt")


def render_report(report: Report, fmt: str) -> str:
    if fmt == "csv":
        return report_to_csv(report)
    if fmt == "md":
        return report_to_markdown(report)
    if fmt == "txt":
        return report_to_text(report)
    raise ConfigError(f"unknown report format {fmt!r}; use md, csv or txt")
