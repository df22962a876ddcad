"""Bulk-loaded B-tree index mapping (key, RowId) pairs, NULL keys excluded.

The tree is built bottom-up from the sorted pair list: leaves are filled
left to right, then each upper level indexes the first entry of every node
below it, until a single root remains. ``blevel`` counts the levels above
the leaves, so a probe touches blevel + 1 index blocks before reaching the
first qualifying leaf and one more block per additional leaf walked.

Every node occupies one logical block of the index segment (leaves first,
then the branch levels, root last). Sizes are modeled as a 32-byte node
header plus 16 bytes per entry (8-byte key slot + 8-byte payload), which
is also how leaf entries are counted for the clustering statistics.
"""

from bisect import bisect_left, bisect_right
from dataclasses import dataclass

from .errors import CatalogError, UsageError
from .storage import BufferPool, HeapTable, RowId

FANOUT_DEFAULT = 400
NODE_HEADER_BYTES = 32
ENTRY_BYTES = 16

_RID_LOW = (-1, -1)
_RID_HIGH = (1 << 62, 1 << 62)


@dataclass
class _Leaf:
    entries: list  # (key, (block_no, slot)) tuples, sorted
    block_no: int = -1
    next: "_Leaf | None" = None

    @property
    def first(self):
        return self.entries[0]


@dataclass
class _Branch:
    seps: list  # first entry of children[1:], so len(seps) == len(children) - 1
    children: list
    block_no: int = -1

    @property
    def first(self):
        return self.children[0].first


def _chunk_sizes(n: int, cap: int) -> list[int]:
    """Split n entries into chunks of at most cap, none below ceil(cap / 2)
    except when a single chunk holds everything (the root is exempt)."""
    if n == 0:
        return []
    min_occ = (cap + 1) // 2
    full, rem = divmod(n, cap)
    sizes = [cap] * full
    if rem:
        sizes.append(rem)
    if len(sizes) >= 2 and sizes[-1] < min_occ:
        pooled = sizes[-2] + sizes[-1]
        high = (pooled + 1) // 2
        sizes[-2:] = [high, pooled - high]
    return sizes


class BTreeIndex:
    """Read-only B-tree over one column, built in one shot from a table scan."""

    kind = "btree"

    def __init__(self, name: str, column: str, table: HeapTable, fanout: int):
        if fanout < 2:
            raise UsageError(f"fanout must be >= 2, got {fanout}")
        self.name = name
        self.column = column
        self.table_name = table.name
        self.fanout = fanout
        self.pool: BufferPool = table.pool
        self.root = None
        self.blevel = 0
        self.leaf_blocks = 0
        self.entry_count = 0
        self.node_count = 0
        self._first_leaf: _Leaf | None = None

    # -- build ---------------------------------------------------------------

    def _bulk_load(self, pairs: list) -> None:
        """pairs: sorted list of (key, (block_no, slot))."""
        self.entry_count = len(pairs)
        if not pairs:
            return
        leaves: list[_Leaf] = []
        pos = 0
        for size in _chunk_sizes(len(pairs), self.fanout):
            leaves.append(_Leaf(pairs[pos : pos + size]))
            pos += size
        for prev, nxt in zip(leaves, leaves[1:]):
            prev.next = nxt
        self._first_leaf = leaves[0]
        self.leaf_blocks = len(leaves)
        block_no = 0
        for leaf in leaves:
            leaf.block_no = block_no
            block_no += 1

        level: list = leaves
        while len(level) > 1:
            upper: list = []
            pos = 0
            for size in _chunk_sizes(len(level), self.fanout):
                children = level[pos : pos + size]
                node = _Branch([child.first for child in children[1:]], children)
                upper.append(node)
                pos += size
            for node in upper:
                node.block_no = block_no
                block_no += 1
            level = upper
            self.blevel += 1
        self.root = level[0]
        self.node_count = block_no

    # -- metered probes --------------------------------------------------------

    def _descend(self, probe) -> _Leaf:
        """Walk root to leaf charging one get per node; blevel + 1 in total."""
        node = self.root
        self.pool.access(self.name, node.block_no)
        while isinstance(node, _Branch):
            node = node.children[bisect_right(node.seps, probe)]
            self.pool.access(self.name, node.block_no)
        return node

    def search_eq(self, key) -> list[RowId]:
        """All RowIds stored under ``key``, in (key, RowId) order."""
        if self.root is None:
            return []
        leaf = self._descend((key, _RID_LOW))
        out: list[RowId] = []
        idx = bisect_left(leaf.entries, (key, _RID_LOW))
        while True:
            while idx < len(leaf.entries):
                entry_key, rid = leaf.entries[idx]
                if entry_key != key:
                    return out
                out.append(RowId(*rid))
                idx += 1
            if leaf.next is None:
                return out
            leaf = leaf.next
            self.pool.access(self.name, leaf.block_no)
            idx = 0

    def scan_range(self, lo, hi, incl_lo: bool = True, incl_hi: bool = True) -> list:
        """(key, RowId) pairs with lo..hi, walking leaves left to right."""
        if self.root is None or lo > hi:
            return []
        probe = (lo, _RID_LOW) if incl_lo else (lo, _RID_HIGH)
        leaf = self._descend(probe)
        out: list = []
        idx = bisect_left(leaf.entries, probe) if incl_lo else bisect_right(leaf.entries, probe)
        while True:
            while idx < len(leaf.entries):
                entry_key, rid = leaf.entries[idx]
                if entry_key > hi or (entry_key == hi and not incl_hi):
                    return out
                out.append((entry_key, RowId(*rid)))
                idx += 1
            if leaf.next is None:
                return out
            leaf = leaf.next
            self.pool.access(self.name, leaf.block_no)
            idx = 0

    # -- raw access (no metering) ----------------------------------------------

    def iter_entries(self):
        """Yield every (key, RowId) in key order without touching the pool."""
        leaf = self._first_leaf
        while leaf is not None:
            for key, rid in leaf.entries:
                yield key, RowId(*rid)
            leaf = leaf.next

    @property
    def size_bytes(self) -> int:
        # node headers + leaf entries + branch separators, 16 bytes an entry
        return (
            self.node_count * NODE_HEADER_BYTES
            + self.entry_count * ENTRY_BYTES
            + self._sep_count() * ENTRY_BYTES
        )

    def _sep_count(self) -> int:
        total = 0
        stack = [self.root] if isinstance(self.root, _Branch) else []
        while stack:
            node = stack.pop()
            total += len(node.seps)
            stack.extend(c for c in node.children if isinstance(c, _Branch))
        return total


def build_btree_index(
    table: HeapTable, column: str, fanout: int = FANOUT_DEFAULT, name: str | None = None
) -> BTreeIndex:
    """Sort the column's non-NULL (key, RowId) pairs and bulk load the tree."""
    if not table.has_column(column):
        raise CatalogError(f"table {table.name!r} has no column {column!r}")
    index = BTreeIndex(name or f"{table.name}_{column}_idx", column, table, fanout)
    rows_per_block = table.rows_per_block
    pairs = []
    for ordinal, row in table.iter_rows_raw():
        value = getattr(row, column)
        if value is None:
            continue  # NULL keys are not indexed
        pairs.append((value, (ordinal // rows_per_block, ordinal % rows_per_block)))
    pairs.sort()
    index._bulk_load(pairs)
    return index


def btree_index_size_bytes(index: BTreeIndex) -> int:
    return index.size_bytes


def btree_stats(index: BTreeIndex) -> dict:
    return {
        "blevel": index.blevel,
        "leaf_blocks": index.leaf_blocks,
        "entry_count": index.entry_count,
    }
