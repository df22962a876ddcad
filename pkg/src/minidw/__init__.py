"""minidw: a miniature analytics storage engine for studying index trade-offs.

Heap tables with fixed-width rows, compressed bitmap and B-tree indexes,
a metering buffer pool, a cost-based planner whose bitmap costing ignores
row placement, an executor with per-segment IO attribution, and a
benchmark CLI that replays a fixed bitmap-versus-B-tree procedure.
"""

from .bench import BenchConfig, Report, run_all, run_scenario
from .bitmap import (
    BitmapIndex,
    CompressedBitmap,
    bm_and,
    bm_count,
    bm_not,
    bm_or,
    bm_xor,
    build_bitmap_index,
    or_all,
)
from .btree import BTreeIndex, build_btree_index
from .errors import (
    AddressError,
    CatalogError,
    ConfigError,
    EngineError,
    ExecutionError,
    PlanningError,
    ScenarioError,
    UsageError,
    ValidationError,
)
from .executor import ExecStats, execute, execute_count
from .planner import (
    And,
    CostModelConfig,
    Eq,
    InList,
    IsNull,
    Or,
    Range,
    choose_plan,
    cost_bitmap,
    cost_btree,
    cost_full_scan,
    estimate_cardinality,
    estimate_selectivity,
    explain,
    render_predicate,
)
from .stats import IndexStats, TableStats, analyze_index, analyze_table, clustering_factor
from .storage import (
    BufferPool,
    HeapTable,
    IoCounters,
    Row,
    RowId,
    assign_gender,
    generate_normal,
    generate_random,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
