import pytest

from minidw.bitmap import build_bitmap_index
from minidw.btree import build_btree_index
from minidw.stats import analyze_index, analyze_table
from minidw.storage import BufferPool, assign_gender, generate_normal, generate_random

SMALL_N = 3000
SMALL_SEED = 90125


@pytest.fixture(scope="session")
def small_db():
    """One shuffled 3000-row table with gender assigned, plus every index
    kind on every column and the matching statistics. Shared read-only."""
    pool = BufferPool(512)
    normal = generate_normal(SMALL_N, SMALL_SEED, pool=pool)
    assign_gender(normal)
    table = generate_random(normal, SMALL_SEED + 1, pool=pool)
    indexes = {}
    for column in ("empno", "sal", "gender"):
        for kind, build in (("bitmap", build_bitmap_index), ("btree", build_btree_index)):
            index = build(table, column)
            indexes[index.name] = index
    tstats = analyze_table(table)
    istats = [analyze_index(ix, table) for ix in indexes.values()]
    return {"table": table, "indexes": indexes, "tstats": tstats, "istats": istats}
