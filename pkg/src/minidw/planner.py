"""Cost-based access-path selection.

Selectivity rules (uniformity assumed throughout):

    Eq          1 / ndv
    Range       (hi - lo) / (max - min), clipped to the column's domain,
                minus 1/(max - min) per exclusive bound (integer columns)
    InList(k)   min(1, k / ndv)
    IsNull      null_count / row_count
    And         product of child selectivities
    Or          s1 + s2 - s1*s2, folded pairwise

Estimated cardinality is round(sel * row_count), never below 1 while the
predicate is satisfiable. Costs are block counts:

    full scan   ceil(block_count / multiblock_divisor)
    B-tree      blevel + ceil(sel * leaf_blocks) + ceil(sel * clustering_factor)
    bitmap      bitmap blocks holding the touched keys (>= 1)
                + ceil(cardinality * bitmap_per_row_cost)

The bitmap formula deliberately ignores the clustering factor, so bitmap
plans keep their cost on shuffled tables where B-tree plans blow up; that
asymmetry is the whole point of the decision matrix this engine reproduces.

``choose_plan`` enumerates a full scan (always available), one candidate
per B-tree with a sargable conjunct (Eq/Range/InList; never IsNull, since
B-trees do not index NULLs), and a bitmap plan when every referenced
column has a bitmap index. Lowest cost wins; ties prefer bitmap, then
B-tree, then full scan, then index name.
"""

import math
from dataclasses import dataclass

from .errors import ConfigError, PlanningError
from .stats import IndexStats, TableStats

# -- predicates ---------------------------------------------------------------


@dataclass(frozen=True)
class Eq:
    column: str
    value: object


@dataclass(frozen=True)
class Range:
    column: str
    lo: int
    hi: int
    incl_lo: bool = True
    incl_hi: bool = True


@dataclass(frozen=True)
class InList:
    column: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise PlanningError("IN list must not be empty")
        if len(set(self.values)) != len(self.values):
            raise PlanningError("IN list values must be distinct")


@dataclass(frozen=True)
class IsNull:
    column: str


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise PlanningError("And needs at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise PlanningError("Or needs at least two children")


Predicate = Eq | Range | InList | IsNull | And | Or


def columns_of(pred: Predicate) -> set[str]:
    if isinstance(pred, (And, Or)):
        out: set[str] = set()
        for child in pred.children:
            out |= columns_of(child)
        return out
    return {pred.column}


def _fmt_value(value) -> str:
    return repr(value) if isinstance(value, str) else str(value)


def render_predicate(pred: Predicate, parens: bool = False) -> str:
    """Stable human-readable form used in reports and CSV output."""
    if isinstance(pred, Eq):
        return f"{pred.column} = {_fmt_value(pred.value)}"
    if isinstance(pred, IsNull):
        return f"{pred.column} is null"
    if isinstance(pred, InList):
        return f"{pred.column} in ({', '.join(_fmt_value(v) for v in pred.values)})"
    if isinstance(pred, Range):
        if pred.incl_lo and pred.incl_hi:
            return f"{pred.column} between {pred.lo} and {pred.hi}"
        lo_op = ">=" if pred.incl_lo else ">"
        hi_op = "<=" if pred.incl_hi else "<"
        return f"{pred.column} {lo_op} {pred.lo} and {pred.column} {hi_op} {pred.hi}"
    if isinstance(pred, (And, Or)):
        sep = " and " if isinstance(pred, And) else " or "
        text = sep.join(render_predicate(c, parens=True) for c in pred.children)
        return f"({text})" if parens else text
    raise PlanningError(f"cannot render {pred!r}")


def predicate_matches(pred: Predicate, row) -> bool:
    """Row-at-a-time evaluation with SQL-ish NULL handling: any comparison
    against a NULL column value is false; only IsNull sees NULLs."""
    if isinstance(pred, Eq):
        return getattr(row, pred.column) == pred.value
    if isinstance(pred, IsNull):
        return getattr(row, pred.column) is None
    if isinstance(pred, InList):
        value = getattr(row, pred.column)
        return value is not None and value in pred.values
    if isinstance(pred, Range):
        value = getattr(row, pred.column)
        if value is None:
            return False
        above = value >= pred.lo if pred.incl_lo else value > pred.lo
        below = value <= pred.hi if pred.incl_hi else value < pred.hi
        return above and below
    if isinstance(pred, And):
        return all(predicate_matches(c, row) for c in pred.children)
    if isinstance(pred, Or):
        return any(predicate_matches(c, row) for c in pred.children)
    raise PlanningError(f"cannot evaluate {pred!r}")


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class CostModelConfig:
    multiblock_divisor: float = 10.33
    bitmap_per_row_cost: float = 0.2
    btree_probe_base: int = 1

    def __post_init__(self):
        if self.multiblock_divisor <= 0 or self.bitmap_per_row_cost <= 0:
            raise ConfigError("cost model constants must be positive")
        if self.btree_probe_base < 1:
            raise ConfigError("btree_probe_base must be >= 1")


# -- selectivity ----------------------------------------------------------------


def _column_stats(stats: TableStats, column: str):
    try:
        return stats.columns[column]
    except KeyError:
        raise PlanningError(f"no statistics for column {column!r} of {stats.name!r}") from None


def estimate_selectivity(pred: Predicate, stats: TableStats) -> float:
    if stats.row_count == 0:
        return 0.0
    if isinstance(pred, Eq):
        cs = _column_stats(stats, pred.column)
        return 1.0 / cs.ndv if cs.ndv else 0.0
    if isinstance(pred, InList):
        cs = _column_stats(stats, pred.column)
        return min(1.0, len(pred.values) / cs.ndv) if cs.ndv else 0.0
    if isinstance(pred, IsNull):
        cs = _column_stats(stats, pred.column)
        return cs.null_count / stats.row_count
    if isinstance(pred, Range):
        cs = _column_stats(stats, pred.column)
        if cs.min is None or cs.max is None:
            return 0.0
        if not isinstance(cs.min, int) or not isinstance(cs.max, int):
            raise PlanningError(f"range predicate on non-numeric column {pred.column!r}")
        lo = max(pred.lo, cs.min)
        hi = min(pred.hi, cs.max)
        if hi < lo:
            return 0.0
        domain = cs.max - cs.min
        if domain == 0:
            return 1.0
        span = hi - lo
        if not pred.incl_lo:
            span -= 1
        if not pred.incl_hi:
            span -= 1
        return min(1.0, max(0.0, span / domain))
    if isinstance(pred, And):
        sel = 1.0
        for child in pred.children:
            sel *= estimate_selectivity(child, stats)
        return sel
    if isinstance(pred, Or):
        sel = 0.0
        for child in pred.children:
            s = estimate_selectivity(child, stats)
            sel = sel + s - sel * s
        return sel
    raise PlanningError(f"cannot estimate selectivity of {pred!r}")


def estimate_cardinality(pred: Predicate, stats: TableStats) -> int:
    sel = estimate_selectivity(pred, stats)
    if sel <= 0.0:
        return 0
    return max(1, round(sel * stats.row_count))


# -- cost functions ---------------------------------------------------------------


def cost_full_scan(stats: TableStats, cfg: CostModelConfig) -> int:
    return math.ceil(stats.block_count / cfg.multiblock_divisor)


def cost_btree(
    pred: Predicate, istats: IndexStats, tstats: TableStats, cfg: CostModelConfig
) -> int:
    """Descent plus leaf walk plus one heap visit per clustering transition."""
    sel = estimate_selectivity(pred, tstats)
    leaf_term = max(cfg.btree_probe_base, math.ceil(sel * istats.leaf_blocks))
    return istats.blevel + leaf_term + math.ceil(sel * istats.clustering_factor)


def _bitmap_leaf_blocks(pred: Predicate, istats: IndexStats, tstats: TableStats) -> int:
    """Estimated index blocks a bitmap leaf scan touches (>= 1 per lookup)."""
    per_key = max(1, math.ceil(istats.segment_blocks / istats.key_count)) if istats.key_count else 1
    if isinstance(pred, Eq):
        return per_key
    if isinstance(pred, InList):
        return len(pred.values) * per_key
    if isinstance(pred, IsNull):
        frac = estimate_selectivity(pred, tstats)
        return max(1, math.ceil(istats.segment_blocks * frac))
    if isinstance(pred, Range):
        frac = estimate_selectivity(pred, tstats)
        return max(1, math.ceil(istats.segment_blocks * frac))
    raise PlanningError(f"{pred!r} is not a bitmap leaf predicate")


def cost_bitmap(
    pred: Predicate, istats: IndexStats, tstats: TableStats, cfg: CostModelConfig
) -> int:
    """Index blocks for the touched key range plus a per-fetched-row charge.

    Note what is absent: the clustering factor. Bitmap access pays per row,
    not per heap transition, so the estimate is placement-independent.
    """
    card = estimate_cardinality(pred, tstats)
    return _bitmap_leaf_blocks(pred, istats, tstats) + math.ceil(card * cfg.bitmap_per_row_cost)


# -- plan types --------------------------------------------------------------------

FULL_SCAN = "full_scan"
BTREE_ACCESS = "btree"
BITMAP_PLAN = "bitmap"
BITMAP_COUNT = "bitmap_count"


@dataclass(frozen=True)
class BitmapKeyScan:
    index_name: str
    value: object = None
    is_null: bool = False


@dataclass(frozen=True)
class BitmapRangeScan:
    index_name: str
    lo: int
    hi: int
    incl_lo: bool = True
    incl_hi: bool = True


@dataclass(frozen=True)
class BitmapAndNode:
    children: tuple


@dataclass(frozen=True)
class BitmapOrNode:
    children: tuple


@dataclass(frozen=True)
class BitmapNotNode:
    child: object


@dataclass(frozen=True)
class FullScanPlan:
    kind = FULL_SCAN
    table: str
    predicate: Predicate
    cost: int
    cardinality: int


@dataclass(frozen=True)
class BTreeAccessPlan:
    kind = BTREE_ACCESS
    table: str
    index_name: str
    driving: Predicate  # conjunct the index probes
    predicate: Predicate  # full predicate, re-checked on fetched rows
    cost: int
    cardinality: int
    index_cost: int  # descent + leaf walk share, shown on the index line


@dataclass(frozen=True)
class BitmapFetchPlan:
    kind = BITMAP_PLAN
    table: str
    root: object  # bitmap node tree
    predicate: Predicate
    cost: int
    cardinality: int


@dataclass(frozen=True)
class BitmapCountPlan:
    kind = BITMAP_COUNT
    table: str
    root: object
    predicate: Predicate
    cost: int
    cardinality: int


Plan = FullScanPlan | BTreeAccessPlan | BitmapFetchPlan | BitmapCountPlan


# -- candidate construction -----------------------------------------------------------


def full_scan_plan(pred: Predicate, tstats: TableStats, cfg: CostModelConfig) -> FullScanPlan:
    return FullScanPlan(
        table=tstats.name,
        predicate=pred,
        cost=cost_full_scan(tstats, cfg),
        cardinality=estimate_cardinality(pred, tstats),
    )


def _conjuncts(pred: Predicate) -> tuple:
    return pred.children if isinstance(pred, And) else (pred,)


def _sargable(pred: Predicate, column: str) -> bool:
    # IsNull is deliberately excluded: the keys are simply not in the tree.
    return isinstance(pred, (Eq, Range, InList)) and pred.column == column


def btree_plan(
    pred: Predicate, istats: IndexStats, tstats: TableStats, cfg: CostModelConfig
) -> BTreeAccessPlan | None:
    """Candidate driving ``istats``'s column, or None when nothing is sargable."""
    if istats.kind != "btree":
        raise PlanningError(f"{istats.name!r} is not a btree index")
    driving = next((c for c in _conjuncts(pred) if _sargable(c, istats.column)), None)
    if driving is None:
        return None
    sel = estimate_selectivity(driving, tstats)
    index_cost = istats.blevel + max(cfg.btree_probe_base, math.ceil(sel * istats.leaf_blocks))
    return BTreeAccessPlan(
        table=tstats.name,
        index_name=istats.name,
        driving=driving,
        predicate=pred,
        cost=cost_btree(driving, istats, tstats, cfg),
        cardinality=estimate_cardinality(pred, tstats),
        index_cost=index_cost,
    )


def _bitmap_tree(pred: Predicate, by_column: dict[str, IndexStats], tstats: TableStats):
    """Map a predicate onto bitmap plan nodes; returns (node, leaf_blocks)."""
    if isinstance(pred, Eq):
        istats = by_column[pred.column]
        return BitmapKeyScan(istats.name, pred.value), _bitmap_leaf_blocks(pred, istats, tstats)
    if isinstance(pred, IsNull):
        istats = by_column[pred.column]
        node = BitmapKeyScan(istats.name, None, is_null=True)
        return node, _bitmap_leaf_blocks(pred, istats, tstats)
    if isinstance(pred, Range):
        istats = by_column[pred.column]
        node = BitmapRangeScan(istats.name, pred.lo, pred.hi, pred.incl_lo, pred.incl_hi)
        return node, _bitmap_leaf_blocks(pred, istats, tstats)
    if isinstance(pred, InList):
        istats = by_column[pred.column]
        scans = tuple(BitmapKeyScan(istats.name, v) for v in pred.values)
        return BitmapOrNode(scans), _bitmap_leaf_blocks(pred, istats, tstats)
    if isinstance(pred, (And, Or)):
        nodes = []
        blocks = 0
        for child in pred.children:
            node, b = _bitmap_tree(child, by_column, tstats)
            nodes.append(node)
            blocks += b
        wrap = BitmapAndNode if isinstance(pred, And) else BitmapOrNode
        return wrap(tuple(nodes)), blocks
    raise PlanningError(f"cannot map {pred!r} onto bitmap operations")


def bitmap_plan(
    pred: Predicate,
    indexes: list[IndexStats],
    tstats: TableStats,
    cfg: CostModelConfig,
    count_only: bool = False,
) -> BitmapFetchPlan | BitmapCountPlan | None:
    """Whole-predicate bitmap plan, or None if some column lacks a bitmap."""
    by_column: dict[str, IndexStats] = {}
    for istats in sorted(indexes, key=lambda i: i.name):
        if istats.kind == "bitmap":
            by_column.setdefault(istats.column, istats)
    if not columns_of(pred) <= set(by_column):
        return None
    root, leaf_blocks = _bitmap_tree(pred, by_column, tstats)
    card = estimate_cardinality(pred, tstats)
    if count_only:
        # the count is read off the bitmap: no conversion, no heap visit
        return BitmapCountPlan(tstats.name, root, pred, leaf_blocks, card)
    cost = leaf_blocks + math.ceil(card * cfg.bitmap_per_row_cost)
    return BitmapFetchPlan(tstats.name, root, pred, cost, card)


_KIND_RANK = {BITMAP_PLAN: 0, BITMAP_COUNT: 0, BTREE_ACCESS: 1, FULL_SCAN: 2}


def choose_plan(
    pred: Predicate,
    indexes: list[IndexStats],
    tstats: TableStats,
    cfg: CostModelConfig = CostModelConfig(),
    count_only: bool = False,
) -> Plan:
    """Pick the cheapest candidate; pure function of its inputs."""
    for column in columns_of(pred):
        _column_stats(tstats, column)  # fail fast on unknown columns
    if count_only:
        counted = bitmap_plan(pred, indexes, tstats, cfg, count_only=True)
        if counted is not None:
            return counted
    candidates: list[tuple[tuple, Plan]] = []
    plan = full_scan_plan(pred, tstats, cfg)
    candidates.append(((plan.cost, _KIND_RANK[plan.kind], ""), plan))
    for istats in sorted(indexes, key=lambda i: i.name):
        if istats.kind != "btree":
            continue
        candidate = btree_plan(pred, istats, tstats, cfg)
        if candidate is not None:
            candidates.append(
                ((candidate.cost, _KIND_RANK[candidate.kind], candidate.index_name), candidate)
            )
    mapped = bitmap_plan(pred, indexes, tstats, cfg)
    if mapped is not None:
        candidates.append(((mapped.cost, _KIND_RANK[mapped.kind], ""), mapped))
    return min(candidates, key=lambda pair: pair[0])[1]


# -- explain -----------------------------------------------------------------------


def _explain_bitmap_node(node, lines: list[str], depth: int) -> None:
    pad = "  " * depth
    if isinstance(node, BitmapKeyScan):
        lines.append(f"{pad}BITMAP INDEX (SINGLE VALUE) OF '{node.index_name.upper()}'")
    elif isinstance(node, BitmapRangeScan):
        lines.append(f"{pad}BITMAP INDEX (RANGE SCAN) OF '{node.index_name.upper()}'")
    elif isinstance(node, BitmapAndNode):
        lines.append(f"{pad}BITMAP AND")
        for child in node.children:
            _explain_bitmap_node(child, lines, depth + 1)
    elif isinstance(node, BitmapOrNode):
        lines.append(f"{pad}BITMAP OR")
        for child in node.children:
            _explain_bitmap_node(child, lines, depth + 1)
    elif isinstance(node, BitmapNotNode):
        lines.append(f"{pad}BITMAP NOT")
        _explain_bitmap_node(node.child, lines, depth + 1)
    else:
        raise PlanningError(f"cannot explain node {node!r}")


def explain(plan: Plan) -> str:
    """Indented access-path tree, one operator per line."""
    lines: list[str] = []
    if isinstance(plan, FullScanPlan):
        lines.append(
            f"TABLE ACCESS (FULL) OF '{plan.table.upper()}'"
            f" (Cost={plan.cost} Card={plan.cardinality})"
        )
    elif isinstance(plan, BTreeAccessPlan):
        lines.append(
            f"TABLE ACCESS (BY INDEX ROWID) OF '{plan.table.upper()}'"
            f" (Cost={plan.cost} Card={plan.cardinality})"
        )
        lines.append(
            f"  INDEX (RANGE SCAN) OF '{plan.index_name.upper()}'"
            f" (Cost={plan.index_cost} Card={plan.cardinality})"
        )
    elif isinstance(plan, BitmapFetchPlan):
        lines.append(
            f"TABLE ACCESS (BY INDEX ROWID) OF '{plan.table.upper()}'"
            f" (Cost={plan.cost} Card={plan.cardinality})"
        )
        lines.append("  BITMAP CONVERSION (TO ROWIDS)")
        _explain_bitmap_node(plan.root, lines, 2)
    elif isinstance(plan, BitmapCountPlan):
        lines.append(f"BITMAP CONVERSION (COUNT) (Cost={plan.cost} Card={plan.cardinality})")
        _explain_bitmap_node(plan.root, lines, 1)
    else:
        raise PlanningError(f"cannot explain plan {plan!r}")
    return "\n".join(lines)
