import random
import tempfile

import pytest
from hypothesis import given, settings, strategies as st

from chainads.chain.intra_index import build_intra_index
from chainads.chain.objects import TemporalObject
from chainads.chain.tree import iter_bfs
from chainads.crypto.accumulator import Construction
from chainads.crypto.encoding import ElementEncoder
from chainads.crypto.multiset import Multiset
from chainads.profiler import TimeContext
from chainads.query.processor import (
    QueryError, QueryOptions, QueryProcessor, UnprovableMismatchError, mismatch_clauses, provable_mismatch_clause,
    query_intra, query_single, refine_range_clause
)
from chainads.query.vo import BatchMember, InternalDigest, MatchedObject, SubtreeMismatch
from chainads.transform.condition import CNFCondition, Domain, parse_query, transform_object, transform_query
from chainads.transform.prefix import PrefixElement, trans_value
from chainads.verify.verifier import Verifier
from tests.helpers import (
    build_chain, expected_results, random_objects, random_query_text, result_counter, transparent_accumulator
)


QUERIES = [
    'window=[110,170] bool="Sedan" AND ("Benz" OR "BMW")',
    'window=[100,200] range=[(2,0),(9,12)] bool="Van"',
    'window=[130,150] range=[(0,0),(7,7)]',
    'window=[0,1000] bool="Truck" AND "Ford"',
    'window=[0,1000] range=[(15,15),(15,15)]',
    'window=[5000,6000] bool="Van"',
]

OPTIONS = [
    QueryOptions(),
    QueryOptions(use_skips=False),
    QueryOptions(batch=True),
    QueryOptions(batch=True, use_skips=False, workers=3),
]


def vehicles():
    return [
        TemporalObject(1, (), ("Sedan", "Benz")),
        TemporalObject(2, (), ("Sedan", "Audi")),
        TemporalObject(3, (), ("Van", "Benz")),
        TemporalObject(4, (), ("Van", "BMW")),
    ]


def test_worked_example(accumulator):
    domain = Domain(())
    o1, o2, o3, o4 = vehicles()
    root = build_intra_index([o1, o2, o3, o4], accumulator, domain)
    condition = CNFCondition([["Sedan"], ["Benz", "BMW"]])

    matched, entries = query_intra(root, condition, accumulator)

    assert matched == [o1]
    assert [type(entry) for entry in entries] == [
        InternalDigest, InternalDigest, SubtreeMismatch, MatchedObject, SubtreeMismatch
    ]
    assert entries[0].digest == root.digest
    assert entries[2].child_hash == root.right.child_hash
    assert entries[2].clause == frozenset(["Sedan"])
    assert entries[3] == MatchedObject(o1.canonical_bytes)
    assert entries[4].clause == frozenset(["Benz", "BMW"])
    for entry in (entries[2], entries[4]):
        assert accumulator.verify_disjoint(entry.digest, accumulator.setup(Multiset(entry.clause)), entry.proof)


def test_query_single(acc2):
    domain = Domain(())
    condition = CNFCondition([["Sedan"], ["Benz", "BMW"]])
    o1, o2, o3, o4 = vehicles()

    obj, entry = query_single(o1, condition, acc2, domain)
    assert obj == o1 and entry == MatchedObject(o1.canonical_bytes)

    for other, clause in ((o2, {"Benz", "BMW"}), (o3, {"Sedan"}), (o4, {"Sedan"})):
        obj, entry = query_single(other, condition, acc2, domain)
        assert obj is None
        assert entry.clause == frozenset(clause)
        assert entry.digest == acc2.setup(transform_object(other, domain))
        assert acc2.verify_disjoint(entry.digest, acc2.setup(Multiset(clause)), entry.proof)


@pytest.mark.parametrize("text", QUERIES)
@pytest.mark.parametrize("options", OPTIONS)
def test_results_match_oracle(random_chain, text, options):
    store, objects = random_chain
    query = parse_query(text)
    processor = QueryProcessor(store, options)

    results, vo = processor.process(query)

    assert result_counter(results) == expected_results(objects, query, store.domain)
    assert vo.query_text == str(query)
    assert processor.counters.get("proofs") == vo.mismatch_count()


@pytest.mark.parametrize("text", QUERIES[:4])
def test_acc1_results_match_oracle(acc1_chain, text):
    store, objects = acc1_chain
    query = parse_query(text)

    results, vo = QueryProcessor(store, QueryOptions(batch=True)).process(query)

    assert result_counter(results) == expected_results(objects, query, store.domain)
    # batching needs an aggregatable construction
    assert vo.batches == []


def test_skips_shorten_sparse_queries(sparse_chain):
    store, objects = sparse_chain
    query = parse_query('window=[0,1000000] bool="Sedan"')

    results, vo = QueryProcessor(store, QueryOptions()).process(query)
    plain_results, plain_vo = QueryProcessor(store, QueryOptions(use_skips=False)).process(query)

    assert result_counter(results) == result_counter(plain_results) == expected_results(objects, query, store.domain)
    assert len(results) == 2
    assert [segment.height for segment in vo.block_segments()] == [40, 31, 30, 13, 10, 9]
    assert [(skip.height, skip.distance) for skip in vo.skip_segments()] == [(40, 8), (30, 16), (13, 2), (9, 8)]
    assert len(plain_vo.block_segments()) == 40
    assert vo.mismatch_count() < plain_vo.mismatch_count()
    assert len(vo) < len(plain_vo)


def test_skips_stay_inside_window(sparse_chain):
    store, objects = sparse_chain
    # blocks 13 .. 38 intersect the window, only 14 .. 37 lie fully inside it
    query = parse_query('window=[225,475] bool="Sedan"')

    results, vo = QueryProcessor(store).process(query)

    assert result_counter(results) == expected_results(objects, query, store.domain)
    heights = [segment.height for segment in vo.block_segments()]
    assert max(heights) == 38
    for skip in vo.skip_segments():
        assert skip.height - skip.distance >= 14 and skip.height - 1 <= 37


def test_batching_reduces_proofs(sparse_chain):
    store, objects = sparse_chain
    query = parse_query('window=[0,1000000] bool="Sedan"')

    results, vo = QueryProcessor(store, QueryOptions(batch=True, use_skips=False)).process(query)
    _, plain_vo = QueryProcessor(store, QueryOptions(use_skips=False)).process(query)

    assert result_counter(results) == expected_results(objects, query, store.domain)
    assert len(vo.batches) == 1
    assert vo.mismatch_count() == 1
    assert plain_vo.mismatch_count() >= 40
    members = [entry for segment in vo.block_segments() for entry in segment.entries if isinstance(entry, BatchMember)]
    assert len(members) == len(vo.batches[0].members) == plain_vo.mismatch_count()


def test_workers_do_not_change_the_vo(random_chain):
    store, _ = random_chain
    query = parse_query(QUERIES[1])

    _, sequential = QueryProcessor(store, QueryOptions(workers=1)).process(query)
    _, parallel = QueryProcessor(store, QueryOptions(workers=4)).process(query)

    assert sequential.to_bytes() == parallel.to_bytes()


def test_query_needs_window(random_chain):
    store, _ = random_chain
    with pytest.raises(QueryError):
        QueryProcessor(store).process(parse_query('bool="Van"'))


def test_time(random_chain):
    store, _ = random_chain
    timer = TimeContext()

    with timer:
        for text in QUERIES:
            QueryProcessor(store).process(parse_query(text))

    assert timer.time.total_seconds() < 30


class CollidingEncoder(ElementEncoder):
    """
    Encodes every attribute of `collisions` like the attribute it maps to.
    """
    def __init__(self, universe, collisions):
        super(CollidingEncoder, self).__init__(universe)
        self.collisions = collisions

    def encode(self, attribute):
        return super(CollidingEncoder, self).encode(self.collisions.get(attribute, attribute))


def colliding_accumulator(collisions):
    accumulator = transparent_accumulator(Construction.ACC2)
    accumulator.encoder = CollidingEncoder(accumulator.encoder.universe, collisions)
    return accumulator


def test_refine_range_clause():
    # value 7 on a 3 bits dimension: {1*, 11*, 111}
    multiset = Multiset(trans_value(7, 3))
    low_half, single, free = PrefixElement(0, "0", 3), PrefixElement(0, "100", 3), PrefixElement(0, "01", 3)
    encoder = CollidingEncoder(2 ** 40, {low_half: PrefixElement(0, "1", 3), single: PrefixElement(0, "111", 3)})

    assert refine_range_clause(frozenset({low_half}), multiset, encoder) == frozenset(low_half.children())
    assert refine_range_clause(frozenset({single}), multiset, encoder) == frozenset({PrefixElement(0, "10", 3)})
    assert refine_range_clause(frozenset({free}), multiset, encoder) == frozenset({free})
    assert refine_range_clause(frozenset({"Sedan"}), multiset, encoder) is None

    # 100 and its only free ancestor 10* both collide
    collisions = {single: PrefixElement(0, "111", 3), PrefixElement(0, "10", 3): PrefixElement(0, "11", 3)}
    encoder = CollidingEncoder(2 ** 40, collisions)
    assert refine_range_clause(frozenset({single}), multiset, encoder) is None


def test_provable_mismatch_clause_skips_colliding_clauses():
    multiset = Multiset(list(trans_value(7, 3)) + ["Van"])
    single = PrefixElement(0, "100", 3)
    condition = CNFCondition([[single], ["Sedan", "Truck"]])
    accumulator = colliding_accumulator({single: PrefixElement(0, "111", 3)})

    assert mismatch_clauses(condition, multiset) == [frozenset({single}), frozenset({"Sedan", "Truck"})]
    assert provable_mismatch_clause(condition, multiset, accumulator) == frozenset({"Sedan", "Truck"})

    range_only = CNFCondition([[single]])
    assert provable_mismatch_clause(range_only, multiset, accumulator) is None
    refined = provable_mismatch_clause(range_only, multiset, accumulator, leaf=True)
    assert refined == frozenset({PrefixElement(0, "10", 3)})


def test_unprovable_object_raises():
    single, parent = PrefixElement(0, "100", 3), PrefixElement(0, "10", 3)
    accumulator = colliding_accumulator({single: PrefixElement(0, "111", 3), parent: PrefixElement(0, "11", 3)})
    obj = TemporalObject(1, (7,), ("Van",))

    with pytest.raises(UnprovableMismatchError) as error:
        query_single(obj, CNFCondition([[single]]), accumulator, Domain((3,)))

    assert error.value.obj == obj
    assert isinstance(error.value, QueryError)


def test_small_capacity_collisions(tmp_path):
    widths = (32, 32)
    objects = random_objects(64, seed=11, widths=widths)
    store = build_chain(tmp_path, objects, capacity=2 ** 16, widths=widths, block_policy="count:8")
    verifier = Verifier(store.headers, store.accumulator, store.domain)
    rng = random.Random(5)

    collided = 0
    for _ in range(20):
        lower, upper = zip(*(sorted(rng.randint(0, 2 ** width - 1) for _ in range(2)) for width in widths))
        query = parse_query(f"window=[0,100000] range=[({lower[0]},{lower[1]}),({upper[0]},{upper[1]})]")
        condition = transform_query(query, store.domain)
        for block in store.blocks():
            for node in iter_bfs(block.root):
                if node.digest is None or condition.matches(node.multiset):
                    continue
                head = mismatch_clauses(condition, node.multiset)[0]
                collided += not store.accumulator.can_prove_disjoint(node.multiset, Multiset(head))

        results, vo = QueryProcessor(store).process(query)

        assert result_counter(results) == expected_results(objects, query, store.domain)
        assert verifier.verify_window(query, results, vo).accepted

    # encodings in [1, 2^16 - 1] collide on most indexes of 32 bits objects
    assert collided > 0


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2 ** 32),
    index_mode=st.sampled_from(["nil", "intra", "both"]),
    construction=st.sampled_from(["acc1", "acc2"]),
    batch=st.booleans(),
    blocks=st.integers(min_value=1, max_value=16),
    per_block=st.integers(min_value=1, max_value=8),
)
def test_random_chains_match_oracle(seed, index_mode, construction, batch, blocks, per_block):
    rng = random.Random(seed)
    objects = random_objects(blocks * per_block, seed=seed)

    with tempfile.TemporaryDirectory() as directory:
        store = build_chain(
            directory, objects, construction=construction, index_mode=index_mode, block_policy=f"count:{per_block}"
        )
        verifier = Verifier(store.headers, store.accumulator, store.domain)
        processor = QueryProcessor(store, QueryOptions(batch=batch))

        for _ in range(20):
            query = parse_query(random_query_text(rng))
            results, vo = processor.process(query)

            assert result_counter(results) == expected_results(objects, query, store.domain)
            assert verifier.verify_window(query, results, vo).accepted, str(query)


def test_vo_size_trend(trend_chains):
    chains, objects = trend_chains
    query = parse_query('window=[0,1000000] bool="Sedan"')

    sizes = dict()
    for index_mode, store in chains.items():
        results, vo = QueryProcessor(store).process(query)
        assert result_counter(results) == expected_results(objects, query, store.domain)
        sizes[index_mode] = len(vo.to_bytes())

    assert sizes["both"] < sizes["intra"] < sizes["nil"]
