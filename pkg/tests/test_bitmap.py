"""Compressed bitmaps: encoding, algebra, lookups, ordinal mapping."""

import random
from functools import reduce

import pytest
from hypothesis import given
from hypothesis import strategies as st

from minidw.bitmap import (
    CompressedBitmap,
    OrdinalMap,
    bitmap_index_size_bytes,
    bm_and,
    bm_count,
    bm_not,
    bm_or,
    bm_xor,
    build_bitmap_index,
    or_all,
)
from minidw.errors import AddressError, CatalogError, UsageError
from minidw.storage import BufferPool, HeapTable, Row, RowId, assign_gender, generate_normal

# Nine rows over four distinct values; every bitmap below is hand-checked
# against this list (bit i set iff VALUES[i] == key).
VALUES = [2, 1, 3, 0, 3, 1, 0, 0, 2]
EXPECTED_BITSTRINGS = {
    0: "000100110",
    1: "010001000",
    2: "100000001",
    3: "001010000",
}


def _bits_of(value):
    return [1 if v == value else 0 for v in VALUES]


def _naive(op, a_bits, b_bits):
    return [op(x, y) for x, y in zip(a_bits, b_bits)]


class TestFrozenExample:
    def test_per_value_bitmaps(self):
        for value, expected in EXPECTED_BITSTRINGS.items():
            bm = CompressedBitmap.from_bits(_bits_of(value))
            bm.check()
            assert bm.to_bitstring() == expected
            assert bm.popcount == expected.count("1")

    def test_union_of_two_values(self):
        b0 = CompressedBitmap.from_bits(_bits_of(0))
        b1 = CompressedBitmap.from_bits(_bits_of(1))
        union = bm_or(b0, b1)
        assert list(union.ordinals()) == [1, 3, 5, 6, 7]
        assert bm_count(union) == 5

    def test_values_partition_the_ordinal_space(self):
        bitmaps = [CompressedBitmap.from_bits(_bits_of(v)) for v in range(4)]
        assert or_all(bitmaps).to_bitstring() == "1" * len(VALUES)
        for i in range(4):
            for j in range(i + 1, 4):
                assert bm_and(bitmaps[i], bitmaps[j]).popcount == 0

    def test_built_index_matches_hand_bitmaps(self):
        # Same value list carried on the sal column (1000 + 500 * value),
        # so ascending key order is value order.
        table = HeapTable("mini")
        for v in VALUES:
            table.insert(Row(1, "A" * 30, 1000 + 500 * v))
        index = build_bitmap_index(table, "sal")
        assert index.keys == [1000, 1500, 2000, 2500]
        for value, key in enumerate(index.keys):
            assert index.bitmaps[key].to_bitstring() == EXPECTED_BITSTRINGS[value]


class TestEncoding:
    def test_canonical_forms(self):
        assert CompressedBitmap.zeros(0) == CompressedBitmap(0, 0, (), 0)
        assert CompressedBitmap.zeros(5) == CompressedBitmap(5, 0, (5,), 0)
        assert CompressedBitmap.from_bits([1, 1, 1]) == CompressedBitmap(3, 1, (3,), 3)

    def test_from_intervals_rejects_bad_input(self):
        with pytest.raises(UsageError):
            CompressedBitmap.from_intervals(10, [(0, 3), (2, 5)])  # overlap
        with pytest.raises(UsageError):
            CompressedBitmap.from_intervals(10, [(0, 3), (3, 5)])  # adjacent
        with pytest.raises(UsageError):
            CompressedBitmap.from_intervals(10, [(5, 12)])  # past the end
        with pytest.raises(UsageError):
            CompressedBitmap.from_intervals(10, [(4, 4)])  # empty interval

    def test_long_runs_stay_small(self):
        # A single set bit in a million rows is two or three runs, a few bytes.
        bm = CompressedBitmap.from_sorted_ordinals(1_000_000, [499_999])
        assert len(bm.runs) == 3
        assert bm.encoded_run_bytes() <= 9

    def test_bitstring_roundtrip(self):
        rng = random.Random(4)
        for _ in range(50):
            bits = [rng.randint(0, 1) for _ in range(rng.randint(0, 64))]
            bm = CompressedBitmap.from_bits(bits)
            bm.check()
            assert bm.to_bitstring() == "".join(map(str, bits))
            assert list(bm.ordinals()) == [i for i, b in enumerate(bits) if b]


class TestAlgebra:
    OPS = [
        (bm_and, lambda x, y: x & y),
        (bm_or, lambda x, y: x | y),
        (bm_xor, lambda x, y: x ^ y),
    ]

    def test_against_naive_arrays(self):
        rng = random.Random(17)
        for _ in range(200):
            n = rng.randint(0, 96)
            a_bits = [rng.randint(0, 1) for _ in range(n)]
            b_bits = [rng.randint(0, 1) for _ in range(n)]
            a = CompressedBitmap.from_bits(a_bits)
            b = CompressedBitmap.from_bits(b_bits)
            for fast, ref in self.OPS:
                out = fast(a, b)
                out.check()
                assert out == CompressedBitmap.from_bits(_naive(ref, a_bits, b_bits))
            flipped = bm_not(a)
            flipped.check()
            assert flipped == CompressedBitmap.from_bits([1 - x for x in a_bits])

    def test_length_mismatch_rejected(self):
        a = CompressedBitmap.zeros(4)
        b = CompressedBitmap.zeros(5)
        for fast, _ in self.OPS:
            with pytest.raises(UsageError):
                fast(a, b)

    def test_not_is_involutive(self):
        bm = CompressedBitmap.from_bits([0, 1, 1, 0, 0, 0, 1])
        assert bm_not(bm_not(bm)) == bm
        assert bm_not(bm).popcount == bm.length - bm.popcount

    def test_or_all_empty_needs_length(self):
        assert or_all([], length=7) == CompressedBitmap.zeros(7)
        with pytest.raises(UsageError):
            or_all([])

    def test_or_all_matches_pairwise_fold(self):
        rng = random.Random(23)
        for _ in range(40):
            n = rng.randint(1, 80)
            group = [
                CompressedBitmap.from_bits([rng.randint(0, 1) for _ in range(n)])
                for _ in range(rng.randint(1, 6))
            ]
            assert or_all(group) == reduce(bm_or, group)


@st.composite
def _bit_pair(draw):
    n = draw(st.integers(min_value=0, max_value=128))
    bits = st.lists(st.integers(0, 1), min_size=n, max_size=n)
    return draw(bits), draw(bits)


class TestAlgebraProperties:
    @given(_bit_pair())
    def test_de_morgan(self, pair):
        a = CompressedBitmap.from_bits(pair[0])
        b = CompressedBitmap.from_bits(pair[1])
        assert bm_not(bm_and(a, b)) == bm_or(bm_not(a), bm_not(b))

    @given(_bit_pair())
    def test_xor_is_or_minus_and(self, pair):
        a = CompressedBitmap.from_bits(pair[0])
        b = CompressedBitmap.from_bits(pair[1])
        assert bm_xor(a, b).popcount == bm_or(a, b).popcount - bm_and(a, b).popcount

    @given(st.lists(st.integers(0, 1), max_size=128))
    def test_count_equals_ones(self, bits):
        bm = CompressedBitmap.from_bits(bits)
        bm.check()
        assert bm_count(bm) == sum(bits)


class TestOrdinalMap:
    def test_bijection(self):
        m = OrdinalMap(rows_per_block=160, count=500)
        assert m.to_rowid(0) == RowId(0, 0)
        assert m.to_rowid(160) == RowId(1, 0)
        assert m.to_rowid(499) == RowId(3, 19)
        for o in range(0, 500, 7):
            assert m.to_ordinal(m.to_rowid(o)) == o

    def test_bounds_enforced(self):
        m = OrdinalMap(rows_per_block=160, count=500)
        with pytest.raises(AddressError):
            m.to_rowid(500)
        with pytest.raises(AddressError):
            m.to_rowid(-1)
        with pytest.raises(AddressError):
            m.to_ordinal(RowId(0, 160))  # slot past rows_per_block
        with pytest.raises(AddressError):
            m.to_ordinal(RowId(3, 20))  # ordinal 500


@pytest.fixture(scope="module")
def db():
    pool = BufferPool(256)
    table = generate_normal(1200, 31, pool=pool)
    assign_gender(table)
    return {
        "pool": pool,
        "table": table,
        "gender_idx": build_bitmap_index(table, "gender"),
        "empno_idx": build_bitmap_index(table, "empno"),
    }


class TestIndexLookups:
    def test_build_rejects_unknown_column(self, small_db):
        with pytest.raises(CatalogError):
            build_bitmap_index(small_db["table"], "salary")

    def test_gender_partition_and_counts(self, db):
        idx = db["gender_idx"]
        assert idx.keys == ["F", "M"]
        m, f, null = idx.bitmaps["M"], idx.bitmaps["F"], idx.null_bitmap
        assert m.popcount == 600 and f.popcount == 400 and null.popcount == 200
        assert or_all([m, f, null]).popcount == 1200

    def test_lookup_eq_known_key(self, db):
        db["pool"].reset_counters()
        bm = db["gender_idx"].lookup_eq("M")
        assert bm.popcount == 600
        counters = db["pool"].snapshot_counters()
        assert counters.consistent_gets >= 1
        assert db["pool"].snapshot_segments().keys() == {db["gender_idx"].name}

    def test_lookup_eq_absent_key_costs_one_get(self, db):
        db["pool"].reset_counters()
        bm = db["gender_idx"].lookup_eq("X")
        assert bm.popcount == 0 and bm.length == 1200
        assert db["pool"].snapshot_counters().consistent_gets == 1

    def test_lookup_null(self, db):
        nulls = db["gender_idx"].lookup_null()
        assert [o % 6 for o in nulls.ordinals()] == [5] * 200  # empno multiple of 6

    def test_lookup_range_matches_brute_force(self, db):
        idx = db["empno_idx"]
        got = idx.lookup_range(100, 250)
        assert list(got.ordinals()) == list(range(99, 250))
        half_open = idx.lookup_range(100, 250, incl_lo=False, incl_hi=False)
        assert list(half_open.ordinals()) == list(range(100, 249))

    def test_lookup_range_empty_costs_one_get(self, db):
        db["pool"].reset_counters()
        bm = db["empno_idx"].lookup_range(400, 300)
        assert bm.popcount == 0
        assert db["pool"].snapshot_counters().consistent_gets == 1

    def test_range_charges_the_contiguous_span(self, db):
        idx = db["empno_idx"]
        assert idx.segment_blocks > 1  # 1200 distinct keys spill past one page
        db["pool"].flush()
        db["pool"].reset_counters()
        idx.lookup_range(1, 1200)
        counters = db["pool"].snapshot_counters()
        assert counters.consistent_gets == idx.segment_blocks
        assert counters.physical_reads == idx.segment_blocks

    def test_eq_touches_at_most_a_block_boundary(self, db):
        db["pool"].reset_counters()
        db["empno_idx"].lookup_eq(617)
        assert db["pool"].snapshot_counters().consistent_gets in (1, 2)

    def test_to_rowids_ascending_and_exact(self, db):
        idx = db["empno_idx"]
        rowids = idx.to_rowids(idx.lookup_range(155, 170))
        assert rowids == sorted(rowids)
        fetched = [db["table"].fetch_row(r).empno for r in rowids]
        assert fetched == list(range(155, 171))

    def test_to_rowids_length_guard(self, db):
        with pytest.raises(UsageError):
            db["empno_idx"].to_rowids(CompressedBitmap.zeros(7))


class TestSizeModel:
    def test_size_equals_summed_records(self, small_db):
        idx = small_db["indexes"]["test_random_gender_bmx"]
        assert bitmap_index_size_bytes(idx) == idx.size_bytes
        assert idx.size_bytes > 64  # header plus at least the null record
        assert idx.segment_blocks == -(-idx.size_bytes // idx.page_size)

    def test_more_keys_cost_more_bytes(self, small_db):
        gender = small_db["indexes"]["test_random_gender_bmx"]
        empno = small_db["indexes"]["test_random_empno_bmx"]
        assert empno.key_count > gender.key_count
        assert empno.size_bytes > 10 * gender.size_bytes
