"""Value-indexed compressed bitmaps over row ordinals.

One bitmap per distinct value: bit i is set iff the row with ordinal i
holds that value. A separate bitmap marks NULL rows, so the per-value
bitmaps plus the NULL bitmap partition the ordinal space. Because the
table is append-only, ordinal i maps arithmetically to
RowId(i // rows_per_block, i % rows_per_block).

Compression is a byte-aligned run-length encoding: a bitmap is the bit of
its first run plus a sequence of strictly positive run lengths with
alternating bit values. Boolean algebra (AND, OR, XOR, NOT) walks the run
sequences directly; no per-bit array is ever materialized.

Size accounting uses a concrete record format so that index sizes can be
compared honestly against B-trees:

    segment := header (64 bytes) | null record | one record per key, ascending
    record  := uvarint(body length) | body
    body    := key slot | flags (1) | uvarint(#runs) | uvarint per run
               | uvarint(popcount)

Integer keys and strings of at most 8 bytes occupy a fixed 8-byte slot
(longer strings are length-prefixed); the null record has no key slot.
Records are packed into page_size blocks; each bitmap remembers which
block range holds it, and lookups charge those blocks (at least one) to
the buffer pool.
"""

from bisect import bisect_left, bisect_right
from dataclasses import dataclass

from .errors import AddressError, CatalogError, UsageError
from .storage import BufferPool, HeapTable, RowId

HEADER_BYTES = 64
KEY_SLOT_BYTES = 8


def _uvarint_len(value: int) -> int:
    """Bytes a LEB128 encoding of ``value`` occupies (>= 1)."""
    if value < 0:
        raise ValueError(f"uvarint cannot encode negative value {value}")
    return max(1, (value.bit_length() + 6) // 7)


@dataclass(frozen=True)
class CompressedBitmap:
    """Immutable run-length encoded bit vector.

    ``first`` is the bit value of ``runs[0]``; runs alternate from there.
    Canonical form: no zero-length runs, an all-zero bitmap has first=0,
    and the empty bitmap is (length=0, first=0, runs=()).
    """

    length: int
    first: int
    runs: tuple[int, ...]
    popcount: int

    def __repr__(self):
        return f"CompressedBitmap(length={self.length}, popcount={self.popcount}, runs={len(self.runs)})"

    def check(self) -> None:
        """Assert the structural invariants; used by tests."""
        assert self.first in (0, 1)
        assert all(r > 0 for r in self.runs), "zero-length run"
        assert sum(self.runs) == self.length
        if self.length == 0:
            assert self.runs == () and self.first == 0
        pop = sum(r for i, r in enumerate(self.runs) if (self.first + i) % 2 == 1)
        assert pop == self.popcount
        if self.popcount == 0 and self.length > 0:
            assert self.first == 0 and self.runs == (self.length,)

    # -- constructors --------------------------------------------------------

    @classmethod
    def zeros(cls, length: int) -> "CompressedBitmap":
        if length == 0:
            return cls(0, 0, (), 0)
        return cls(length, 0, (length,), 0)

    @classmethod
    def from_intervals(cls, length: int, intervals) -> "CompressedBitmap":
        """Build from sorted, disjoint, non-adjacent [start, stop) 1-intervals."""
        runs: list[int] = []
        first = 0
        pos = 0
        pop = 0
        for start, stop in intervals:
            if not 0 <= start < stop <= length:
                raise UsageError(f"interval [{start}, {stop}) outside bitmap of length {length}")
            if start < pos or (runs and start == pos):
                raise UsageError("intervals must be sorted, disjoint and non-adjacent")
            if start == 0:
                first = 1
            else:
                runs.append(start - pos)
            runs.append(stop - start)
            pop += stop - start
            pos = stop
        if pos < length:
            runs.append(length - pos)
        return cls(length, first, tuple(runs), pop)

    @classmethod
    def from_sorted_ordinals(cls, length: int, ordinals) -> "CompressedBitmap":
        """Build from strictly increasing set-bit positions."""
        intervals = []
        start = prev = None
        for o in ordinals:
            if prev is not None and o == prev + 1:
                prev = o
                continue
            if start is not None:
                intervals.append((start, prev + 1))
            start = prev = o
        if start is not None:
            intervals.append((start, prev + 1))
        return cls.from_intervals(length, intervals)

    @classmethod
    def from_bits(cls, bits) -> "CompressedBitmap":
        """Build from an iterable of 0/1; convenient in tests."""
        bits = [int(b) for b in bits]
        return cls.from_sorted_ordinals(len(bits), [i for i, b in enumerate(bits) if b])

    # -- inspection ----------------------------------------------------------

    def iter_runs(self):
        """Yield (bit, run_length) pairs."""
        bit = self.first
        for run in self.runs:
            yield bit, run
            bit ^= 1

    def set_intervals(self) -> list[tuple[int, int]]:
        """Return the 1-runs as [start, stop) intervals."""
        out = []
        pos = 0
        for bit, run in self.iter_runs():
            if bit:
                out.append((pos, pos + run))
            pos += run
        return out

    def ordinals(self):
        """Yield set-bit positions in ascending order."""
        for start, stop in self.set_intervals():
            yield from range(start, stop)

    def to_bitstring(self) -> str:
        """'0'/'1' rendering, ordinal 0 leftmost; for small bitmaps only."""
        return "".join(str(bit) * run for bit, run in self.iter_runs())

    def encoded_run_bytes(self) -> int:
        return sum(_uvarint_len(r) for r in self.runs)


def _require_same_length(a: CompressedBitmap, b: CompressedBitmap) -> None:
    if a.length != b.length:
        raise UsageError(f"bitmap length mismatch: {a.length} vs {b.length}")


def _combine(a: CompressedBitmap, b: CompressedBitmap, op) -> CompressedBitmap:
    """Merge two run sequences through a boolean operator on bits."""
    _require_same_length(a, b)
    if a.length == 0:
        return CompressedBitmap(0, 0, (), 0)
    ita, itb = a.iter_runs(), b.iter_runs()
    bita, lena = next(ita)
    bitb, lenb = next(itb)
    runs: list[int] = []
    first = -1
    cur_bit = -1
    cur_len = 0
    pop = 0
    remaining = a.length
    while remaining:
        take = min(lena, lenb)
        bit = op(bita, bitb)
        if bit == cur_bit:
            cur_len += take
        else:
            if cur_len:
                runs.append(cur_len)
            else:
                first = bit
            cur_bit = bit
            cur_len = take
        if bit:
            pop += take
        remaining -= take
        lena -= take
        lenb -= take
        if remaining:
            if lena == 0:
                bita, lena = next(ita)
            if lenb == 0:
                bitb, lenb = next(itb)
    runs.append(cur_len)
    return CompressedBitmap(a.length, first, tuple(runs), pop)


def bm_and(a: CompressedBitmap, b: CompressedBitmap) -> CompressedBitmap:
    return _combine(a, b, lambda x, y: x & y)


def bm_or(a: CompressedBitmap, b: CompressedBitmap) -> CompressedBitmap:
    return _combine(a, b, lambda x, y: x | y)


def bm_xor(a: CompressedBitmap, b: CompressedBitmap) -> CompressedBitmap:
    return _combine(a, b, lambda x, y: x ^ y)


def bm_not(a: CompressedBitmap) -> CompressedBitmap:
    if a.length == 0:
        return a
    return CompressedBitmap(a.length, a.first ^ 1, a.runs, a.length - a.popcount)


def bm_count(a: CompressedBitmap) -> int:
    """Set-bit count; answered from the encoding, no table blocks touched."""
    return a.popcount


def or_all(bitmaps, length: int | None = None) -> CompressedBitmap:
    """Union of many bitmaps via one interval merge (avoids a quadratic fold)."""
    bitmaps = list(bitmaps)
    if not bitmaps:
        if length is None:
            raise UsageError("or_all of no bitmaps needs an explicit length")
        return CompressedBitmap.zeros(length)
    n = bitmaps[0].length
    for b in bitmaps[1:]:
        _require_same_length(bitmaps[0], b)
    if length is not None and length != n:
        raise UsageError(f"bitmap length mismatch: {n} vs {length}")
    intervals: list[tuple[int, int]] = []
    for b in bitmaps:
        intervals.extend(b.set_intervals())
    intervals.sort()
    merged: list[tuple[int, int]] = []
    for start, stop in intervals:
        if merged and start <= merged[-1][1]:
            if stop > merged[-1][1]:
                merged[-1] = (merged[-1][0], stop)
        else:
            merged.append((start, stop))
    return CompressedBitmap.from_intervals(n, merged)


# -- ordinal <-> RowId -------------------------------------------------------


@dataclass(frozen=True)
class OrdinalMap:
    """Arithmetic bijection between row ordinals and RowIds."""

    rows_per_block: int
    count: int

    def to_rowid(self, ordinal: int) -> RowId:
        if not 0 <= ordinal < self.count:
            raise AddressError(f"ordinal {ordinal} out of range [0, {self.count})")
        return RowId(ordinal // self.rows_per_block, ordinal % self.rows_per_block)

    def to_ordinal(self, rowid: RowId) -> int:
        ordinal = rowid.block_no * self.rows_per_block + rowid.slot
        if not 0 <= rowid.slot < self.rows_per_block or not 0 <= ordinal < self.count:
            raise AddressError(f"{rowid} outside table of {self.count} rows")
        return ordinal


# -- the index ----------------------------------------------------------------


def _key_slot_bytes(key) -> int:
    if isinstance(key, int):
        return KEY_SLOT_BYTES
    raw = key.encode("utf-8")
    if len(raw) <= KEY_SLOT_BYTES:
        return KEY_SLOT_BYTES
    return _uvarint_len(len(raw)) + len(raw)


def _record_bytes(bitmap: CompressedBitmap, key=None) -> int:
    body = (
        (0 if key is None else _key_slot_bytes(key))
        + 1  # flags
        + _uvarint_len(len(bitmap.runs))
        + bitmap.encoded_run_bytes()
        + _uvarint_len(bitmap.popcount)
    )
    return _uvarint_len(body) + body


class BitmapIndex:
    """Per-value compressed bitmaps over one column of a heap table."""

    kind = "bitmap"

    def __init__(self, name: str, column: str, table: HeapTable):
        self.name = name
        self.column = column
        self.table_name = table.name
        self.length = table.row_count
        self.page_size = table.page_size
        self.pool: BufferPool = table.pool
        self.ordinal_map = OrdinalMap(table.rows_per_block, table.row_count)
        self.keys: list = []
        self.bitmaps: dict = {}
        self.null_bitmap = CompressedBitmap.zeros(table.row_count)
        self._spans: dict = {}
        self._null_span = (0, 0)
        self.size_bytes = HEADER_BYTES
        self.segment_blocks = 1

    @property
    def key_count(self) -> int:
        return len(self.keys)

    def _layout(self) -> None:
        """Assign every record a byte range, then derive block spans."""
        offset = HEADER_BYTES
        end = offset + _record_bytes(self.null_bitmap)
        self._null_span = (offset // self.page_size, (end - 1) // self.page_size)
        offset = end
        for key in self.keys:
            end = offset + _record_bytes(self.bitmaps[key], key)
            self._spans[key] = (offset // self.page_size, (end - 1) // self.page_size)
            offset = end
        self.size_bytes = offset
        self.segment_blocks = max(1, -(-offset // self.page_size))

    def _charge(self, first_block: int, last_block: int) -> None:
        for block_no in range(first_block, last_block + 1):
            self.pool.access(self.name, block_no)

    # -- lookups (metered) ---------------------------------------------------

    def lookup_eq(self, value) -> CompressedBitmap:
        """Bitmap of rows equal to ``value``; absent keys cost one get."""
        span = self._spans.get(value)
        if span is None:
            self.pool.access(self.name, 0)
            return CompressedBitmap.zeros(self.length)
        self._charge(*span)
        return self.bitmaps[value]

    def lookup_null(self) -> CompressedBitmap:
        self._charge(*self._null_span)
        return self.null_bitmap

    def lookup_range(self, lo, hi, incl_lo: bool = True, incl_hi: bool = True) -> CompressedBitmap:
        """Union of the bitmaps for every key in the range; lo > hi is empty."""
        left = bisect_left(self.keys, lo) if incl_lo else bisect_right(self.keys, lo)
        right = bisect_right(self.keys, hi) if incl_hi else bisect_left(self.keys, hi)
        if left >= right:
            self.pool.access(self.name, 0)
            return CompressedBitmap.zeros(self.length)
        selected = self.keys[left:right]
        self._charge(self._spans[selected[0]][0], self._spans[selected[-1]][1])
        return or_all([self.bitmaps[k] for k in selected], self.length)

    def to_rowids(self, bitmap: CompressedBitmap) -> list[RowId]:
        """Set ordinals as RowIds, ascending. Conversion itself is CPU only."""
        if bitmap.length != self.length:
            raise UsageError(f"bitmap length {bitmap.length} does not fit table of {self.length}")
        to_rowid = self.ordinal_map.to_rowid
        return [to_rowid(o) for o in bitmap.ordinals()]


def build_bitmap_index(table: HeapTable, column: str, name: str | None = None) -> BitmapIndex:
    """Scan the table once and build per-value bitmaps for ``column``."""
    if not table.has_column(column):
        raise CatalogError(f"table {table.name!r} has no column {column!r}")
    index = BitmapIndex(name or f"{table.name}_{column}_bmx", column, table)
    by_value: dict = {}
    nulls: list[int] = []
    for ordinal, row in table.iter_rows_raw():
        value = getattr(row, column)
        if value is None:
            nulls.append(ordinal)
        else:
            by_value.setdefault(value, []).append(ordinal)
    index.keys = sorted(by_value)
    n = table.row_count
    index.bitmaps = {
        key: CompressedBitmap.from_sorted_ordinals(n, by_value[key]) for key in index.keys
    }
    index.null_bitmap = CompressedBitmap.from_sorted_ordinals(n, nulls)
    index._layout()
    return index


def bitmap_index_size_bytes(index: BitmapIndex) -> int:
    return index.size_bytes
