"""Heap storage: fixed-width rows in fixed-size blocks behind a metering pool.

Physical layout
---------------
A table is an append-only sequence of blocks. Every block is exactly
``page_size`` bytes:

    [ header: 192 bytes | row 0 | row 1 | ... | unused tail ]

The header carries a magic, format version, block number and the number of
rows currently stored; the remaining header bytes are reserved and zero.
Rows are packed back to back, 50 bytes each, big-endian:

    empno   int64      8 bytes
    ename   ASCII      30 bytes (exactly 30 upper-case letters)
    sal     int64      8 bytes
    gender  tag        1 byte   (0 = NULL, 1 = 'M', 2 = 'F')
    pad     zeros      3 bytes

``rows_per_block = (page_size - 192) // 50``; with the default 8192-byte
page that is 160 rows, so a million-row table occupies 6250 blocks.

Addressing
----------
``RowId(block_no, slot)`` names a row physically. Tables are append-only,
so the row ordinal (0-based insertion rank) and the RowId are two spellings
of the same position: ordinal = block_no * rows_per_block + slot.

IO accounting
-------------
All metered reads go through a BufferPool shared by a table and its
indexes. Each block access counts one consistent get; a miss in the
resident set additionally counts one physical read and evicts the least
recently used entry when the pool is full. ``physical_reads <=
consistent_gets`` always holds. Generators and index builds read the table
raw (no metering): measurements are about query execution, not setup.

Persistence
-----------
``save`` writes the blocks verbatim to one file plus a small ``key=value``
text sidecar (schema, row count, page size) so a table survives a process
restart byte for byte.
"""

import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AddressError, CatalogError, ConfigError, ValidationError

PAGE_SIZE_DEFAULT = 8192
POOL_BLOCKS_DEFAULT = 2000
BLOCK_HEADER_BYTES = 192
ROW_WIDTH = 50

_ROW_STRUCT = struct.Struct(">q30sqB3x")
assert _ROW_STRUCT.size == ROW_WIDTH

_BLOCK_MAGIC = b"MDWB"
_BLOCK_VERSION = 1
# magic, version, block_no, nrows
_HEADER_STRUCT = struct.Struct(">4sHIH")

_GENDER_TO_TAG = {None: 0, "M": 1, "F": 2}
_TAG_TO_GENDER = {0: None, 1: "M", 2: "F"}

META_SUFFIX = ".meta"


@dataclass(frozen=True, order=True)
class RowId:
    """Physical row address: block number plus slot within the block."""

    block_no: int
    slot: int


@dataclass(slots=True)
class Row:
    empno: int
    ename: str
    sal: int
    gender: str | None = None

    def validate(self) -> None:
        if not isinstance(self.empno, int):
            raise ValidationError(f"empno must be an int, got {type(self.empno).__name__}")
        if len(self.ename) != 30 or not self.ename.isascii() or not self.ename.isupper():
            raise ValidationError("ename must be exactly 30 upper-case ASCII letters")
        if not isinstance(self.sal, int) or not 1000 <= self.sal <= 7000:
            raise ValidationError(f"sal out of range [1000, 7000]: {self.sal!r}")
        if self.gender not in _GENDER_TO_TAG:
            raise ValidationError(f"gender must be 'M', 'F' or None, got {self.gender!r}")


@dataclass
class IoCounters:
    consistent_gets: int = 0
    physical_reads: int = 0
    rows_processed: int = 0

    def copy(self) -> "IoCounters":
        return IoCounters(self.consistent_gets, self.physical_reads, self.rows_processed)


class BufferPool:
    """LRU resident set that meters block accesses, globally and per segment.

    The pool does not hold data (blocks live in their table); it only decides
    whether an access is a cache hit or a physical read and keeps counters.
    """

    def __init__(self, capacity_blocks: int = POOL_BLOCKS_DEFAULT):
        if capacity_blocks < 1:
            raise ConfigError(f"pool capacity must be >= 1 block, got {capacity_blocks}")
        self.capacity_blocks = capacity_blocks
        self._resident: OrderedDict[tuple[str, int], None] = OrderedDict()
        self.counters = IoCounters()
        self._segments: dict[str, IoCounters] = {}

    def access(self, segment: str, block_no: int) -> None:
        """Count one consistent get; count a physical read on a miss."""
        self.counters.consistent_gets += 1
        seg = self._segments.get(segment)
        if seg is None:
            seg = self._segments[segment] = IoCounters()
        seg.consistent_gets += 1
        key = (segment, block_no)
        if key in self._resident:
            self._resident.move_to_end(key)
            return
        self.counters.physical_reads += 1
        seg.physical_reads += 1
        self._resident[key] = None
        if len(self._resident) > self.capacity_blocks:
            self._resident.popitem(last=False)

    def note_rows(self, n: int) -> None:
        self.counters.rows_processed += n

    def reset_counters(self) -> None:
        """Zero all counters; the resident set is left untouched."""
        self.counters = IoCounters()
        self._segments = {}

    def flush(self) -> None:
        """Empty the resident set so the next accesses are all cold."""
        self._resident.clear()

    def snapshot_counters(self) -> IoCounters:
        return self.counters.copy()

    def snapshot_segments(self) -> dict[str, IoCounters]:
        return {name: c.copy() for name, c in self._segments.items()}

    def resident_blocks(self) -> int:
        return len(self._resident)


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "int", "str30" or "gender"


DEFAULT_SCHEMA = (
    Column("empno", "int"),
    Column("ename", "str30"),
    Column("sal", "int"),
    Column("gender", "gender"),
)


class HeapTable:
    """Append-only heap of fixed-width rows with metered block reads."""

    def __init__(
        self,
        name: str,
        schema: tuple[Column, ...] = DEFAULT_SCHEMA,
        page_size: int = PAGE_SIZE_DEFAULT,
        pool: BufferPool | None = None,
    ):
        if page_size < BLOCK_HEADER_BYTES + ROW_WIDTH:
            raise ConfigError(
                f"page_size {page_size} cannot hold the header plus one {ROW_WIDTH}-byte row"
            )
        self.name = name
        self.schema = tuple(schema)
        self.page_size = page_size
        self.rows_per_block = (page_size - BLOCK_HEADER_BYTES) // ROW_WIDTH
        self.pool = pool if pool is not None else BufferPool()
        self._blocks: list[bytearray] = []
        self.row_count = 0

    # -- geometry ----------------------------------------------------------

    @property
    def block_count(self) -> int:
        return len(self._blocks)

    @property
    def size_bytes(self) -> int:
        return self.block_count * self.page_size

    def rows_in_block(self, block_no: int) -> int:
        self._check_block(block_no)
        if block_no < self.block_count - 1:
            return self.rows_per_block
        return self.row_count - self.rows_per_block * (self.block_count - 1)

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.schema)

    def column(self, name: str) -> Column:
        for c in self.schema:
            if c.name == name:
                return c
        raise CatalogError(f"table {self.name!r} has no column {name!r}")

    def _check_block(self, block_no: int) -> None:
        if not 0 <= block_no < self.block_count:
            raise AddressError(
                f"block {block_no} out of range [0, {self.block_count}) in {self.name!r}"
            )

    # -- writes ------------------------------------------------------------

    def insert(self, row: Row) -> RowId:
        """Validate and append one row; returns its physical address."""
        row.validate()
        record = _ROW_STRUCT.pack(
            row.empno, row.ename.encode("ascii"), row.sal, _GENDER_TO_TAG[row.gender]
        )
        return self._append_record(record)

    def _append_record(self, record: bytes) -> RowId:
        slot = self.row_count % self.rows_per_block
        if slot == 0:
            block = bytearray(self.page_size)
            _HEADER_STRUCT.pack_into(block, 0, _BLOCK_MAGIC, _BLOCK_VERSION, self.block_count, 0)
            self._blocks.append(block)
        block_no = self.block_count - 1
        block = self._blocks[block_no]
        off = BLOCK_HEADER_BYTES + slot * ROW_WIDTH
        block[off : off + ROW_WIDTH] = record
        struct.pack_into(">H", block, 10, slot + 1)  # nrows field of the header
        self.row_count += 1
        return RowId(block_no, slot)

    # -- metered reads -----------------------------------------------------

    def read_block(self, block_no: int) -> list[Row]:
        """Decode one block through the pool (one consistent get)."""
        self._check_block(block_no)
        self.pool.access(self.name, block_no)
        return self._decode_block(block_no)

    def full_scan(self):
        """Yield every row in physical order, charging one get per block."""
        for block_no in range(self.block_count):
            self.pool.access(self.name, block_no)
            yield from self._decode_block(block_no)

    def fetch_row(self, rowid: RowId) -> Row:
        """Read a single row through the pool (one consistent get)."""
        self._check_block(rowid.block_no)
        if not 0 <= rowid.slot < self.rows_in_block(rowid.block_no):
            raise AddressError(f"slot {rowid.slot} out of range in block {rowid.block_no}")
        self.pool.access(self.name, rowid.block_no)
        return self._decode_slot(rowid.block_no, rowid.slot)

    def fetch_slot_unmetered(self, block_no: int, slot: int) -> Row:
        """Decode one row without touching the pool. The executor meters
        block accesses itself so that consecutive same-block fetches share
        a single consistent get."""
        return self._decode_slot(block_no, slot)

    # -- raw reads (no metering) --------------------------------------------

    def iter_rows_raw(self):
        """Yield (ordinal, Row) without metering; for builds and statistics."""
        ordinal = 0
        for block_no in range(self.block_count):
            for row in self._decode_block(block_no):
                yield ordinal, row
                ordinal += 1

    def _iter_records_raw(self):
        for block_no in range(self.block_count):
            block = self._blocks[block_no]
            for slot in range(self.rows_in_block(block_no)):
                off = BLOCK_HEADER_BYTES + slot * ROW_WIDTH
                yield bytes(block[off : off + ROW_WIDTH])

    def _decode_block(self, block_no: int) -> list[Row]:
        block = self._blocks[block_no]
        n = self.rows_in_block(block_no)
        out = []
        for empno, ename, sal, tag in _ROW_STRUCT.iter_unpack(
            bytes(block[BLOCK_HEADER_BYTES : BLOCK_HEADER_BYTES + n * ROW_WIDTH])
        ):
            out.append(Row(empno, ename.decode("ascii"), sal, _TAG_TO_GENDER[tag]))
        return out

    def _decode_slot(self, block_no: int, slot: int) -> Row:
        off = BLOCK_HEADER_BYTES + slot * ROW_WIDTH
        empno, ename, sal, tag = _ROW_STRUCT.unpack_from(self._blocks[block_no], off)
        return Row(empno, ename.decode("ascii"), sal, _TAG_TO_GENDER[tag])

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "wb") as fh:
            for block in self._blocks:
                fh.write(block)
        columns = ",".join(f"{c.name}:{c.kind}" for c in self.schema)
        meta = (
            "# minidw table metadata v1\n"
            f"name={self.name}\n"
            f"row_count={self.row_count}\n"
            f"page_size={self.page_size}\n"
            f"row_width={ROW_WIDTH}\n"
            f"columns={columns}\n"
        )
        Path(str(path) + META_SUFFIX).write_text(meta)

    @classmethod
    def load(cls, path: str | Path, pool: BufferPool | None = None) -> "HeapTable":
        path = Path(path)
        meta_path = Path(str(path) + META_SUFFIX)
        if not meta_path.exists():
            raise CatalogError(f"missing metadata sidecar {meta_path}")
        meta: dict[str, str] = {}
        for line in meta_path.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            meta[key] = value
        if int(meta.get("row_width", ROW_WIDTH)) != ROW_WIDTH:
            raise ConfigError(f"unsupported row width {meta['row_width']}")
        schema = tuple(
            Column(*part.split(":", 1)) for part in meta["columns"].split(",") if part
        )
        table = cls(meta["name"], schema, int(meta["page_size"]), pool)
        raw = path.read_bytes()
        if len(raw) % table.page_size:
            raise ConfigError(f"{path} is not a whole number of {table.page_size}-byte blocks")
        for i in range(0, len(raw), table.page_size):
            block = bytearray(raw[i : i + table.page_size])
            magic, version, block_no, _ = _HEADER_STRUCT.unpack_from(block, 0)
            if magic != _BLOCK_MAGIC or version != _BLOCK_VERSION:
                raise ConfigError(f"bad block header at offset {i} in {path}")
            if block_no != i // table.page_size:
                raise ConfigError(f"block {block_no} stored out of place in {path}")
            table._blocks.append(block)
        table.row_count = int(meta["row_count"])
        expected = 0 if table.row_count == 0 else (table.row_count - 1) // table.rows_per_block + 1
        if table.block_count != expected:
            raise ConfigError(
                f"{path}: {table.block_count} blocks inconsistent with row_count {table.row_count}"
            )
        return table


# -- data generation ---------------------------------------------------------


@dataclass
class GenderCounts:
    m: int = 0
    f: int = 0
    null: int = 0


def _gender_for_empno(empno: int) -> str | None:
    # Deterministic stand-in for a value-based backfill: roughly half the
    # rows male, a third female, a sixth left NULL.
    mod = empno % 6
    if mod == 0:
        return None
    return "M" if mod <= 3 else "F"


def generate_normal(
    n: int,
    seed: int,
    name: str = "test_normal",
    page_size: int = PAGE_SIZE_DEFAULT,
    pool: BufferPool | None = None,
) -> HeapTable:
    """Build a table of n rows: empno 1..n in order, random 30-letter names,
    uniform integer salaries in [1000, 7000], gender NULL until assigned.

    Fully determined by (n, seed): two calls produce byte-identical blocks.
    """
    if n < 0:
        raise ValidationError(f"row count must be >= 0, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    names = rng.integers(65, 91, size=(n, 30), dtype=np.uint8).tobytes()
    sals = rng.integers(1000, 7001, size=n, dtype=np.int64)
    table = HeapTable(name, DEFAULT_SCHEMA, page_size, pool)
    pack = _ROW_STRUCT.pack
    append = table._append_record
    for i in range(n):
        append(pack(i + 1, names[i * 30 : (i + 1) * 30], int(sals[i]), 0))
    return table


def generate_random(
    source: HeapTable,
    seed: int,
    name: str = "test_random",
    pool: BufferPool | None = None,
) -> HeapTable:
    """Copy of ``source`` holding the same multiset of rows inserted in a
    seeded uniform random permutation order."""
    rng = np.random.Generator(np.random.PCG64(seed))
    records = list(source._iter_records_raw())
    table = HeapTable(name, source.schema, source.page_size, pool)
    append = table._append_record
    for i in rng.permutation(len(records)):
        append(records[i])
    return table


def assign_gender(table: HeapTable) -> GenderCounts:
    """Backfill the gender column in place from each row's empno; idempotent.

    Returns how many rows were set to M, F and NULL.
    """
    counts = GenderCounts()
    for block_no in range(table.block_count):
        block = table._blocks[block_no]
        for slot in range(table.rows_in_block(block_no)):
            off = BLOCK_HEADER_BYTES + slot * ROW_WIDTH
            (empno,) = struct.unpack_from(">q", block, off)
            gender = _gender_for_empno(empno)
            block[off + 46] = _GENDER_TO_TAG[gender]
            if gender == "M":
                counts.m += 1
            elif gender == "F":
                counts.f += 1
            else:
                counts.null += 1
    return counts
