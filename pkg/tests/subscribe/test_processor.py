import pytest

from chainads.chain.objects import TemporalObject
from chainads.query.processor import query_intra
from chainads.query.vo import MatchedObject, SubtreeMismatch, VerificationObject
from chainads.subscribe.ip_tree import build_ip_tree
from chainads.subscribe.processor import (
    ProofCache, SubscriptionState, UnsupportedModeError, process_block_ip, process_block_lazy
)
from chainads.transform.condition import parse_query, transform_query
from chainads.transform.prefix import PrefixElement
from chainads.verify.verifier import Verifier
from tests.helpers import build_chain, expected_results, result_counter


SUBSCRIPTIONS = {
    1: parse_query('range=[(0,0),(7,15)] bool="Van"'),
    2: parse_query('range=[(4,4),(11,11)] bool="Sedan" AND ("Benz" OR "BMW")'),
    3: parse_query('bool="Truck"'),
    4: parse_query('range=[(8,0),(15,7)]'),
    5: parse_query('range=[(0,0),(15,15)] bool="Audi" OR "Ford"'),
    6: parse_query('range=[(0,0),(15,15)] bool="Truck"'),
}


def shape(entries):
    return [(type(entry), entry.digest) for entry in entries if not isinstance(entry, MatchedObject)]


def test_ip_processing_matches_single_queries(random_chain):
    store, _ = random_chain
    tree = build_ip_tree(SUBSCRIPTIONS, store.domain)

    for block in store.blocks():
        processed = process_block_ip(tree, block, store.accumulator)
        assert set(processed) == set(SUBSCRIPTIONS)

        for query_id, (results, segment) in processed.items():
            matched, entries = query_intra(block.root, tree.conditions[query_id], store.accumulator)
            assert results == matched
            assert segment.height == block.height
            # same nodes opened and pruned, the clauses proving them out may be the shared ones
            assert shape(segment.entries) == shape(entries)


def test_ip_results_verify(random_chain):
    store, objects = random_chain
    tree = build_ip_tree(SUBSCRIPTIONS, store.domain)
    verifier = Verifier(store.headers, store.accumulator, store.domain)

    collected = {query_id: list() for query_id in SUBSCRIPTIONS}
    for block in store.blocks():
        for query_id, (results, segment) in process_block_ip(tree, block, store.accumulator).items():
            vo = VerificationObject(str(SUBSCRIPTIONS[query_id]), [segment], span=(block.height, block.height))
            assert verifier.verify_span(SUBSCRIPTIONS[query_id], results, vo).accepted
            collected[query_id].extend(results)

    for query_id, query in SUBSCRIPTIONS.items():
        assert result_counter(collected[query_id]) == expected_results(objects, query, store.domain)


def test_proofs_are_shared(random_chain):
    store, _ = random_chain
    # both queries refute their mismatching nodes with the {"Truck"} clause
    tree = build_ip_tree({3: SUBSCRIPTIONS[3], 6: SUBSCRIPTIONS[6]}, store.domain)
    block = next(block for block in store.blocks() if any("Truck" not in obj.keywords for obj in block.objects))

    cache = ProofCache(store.accumulator)
    with store.accumulator.counters.scope() as delta:
        processed = process_block_ip(tree, block, store.accumulator, cache)

    mismatches = [
        entry for _, segment in processed.values() for entry in segment.entries if isinstance(entry, SubtreeMismatch)
    ]
    assert mismatches
    assert len(cache) == delta.get("prove_disjoint", 0) == len(mismatches) // 2


def test_ip_without_queries(random_chain):
    store, _ = random_chain
    assert process_block_ip(build_ip_tree({}, store.domain), store.block(1), store.accumulator) == {}


def lazy_run(store, text, flush_threshold=16):
    query = parse_query(text)
    state = SubscriptionState(query, transform_query(query, store.domain))
    flushed = [process_block_lazy(state, block, store.accumulator, flush_threshold) for block in store.blocks()]
    flushed.append(state.flush())

    return query, [message for message in flushed if message is not None]


def test_lazy_folds_runs_into_skips(sparse_chain):
    store, _ = sparse_chain
    query, messages = lazy_run(store, 'bool="Sedan"')

    results, vo = messages[0]
    assert vo.span == (1, 9)
    assert len(results) == 1
    assert [(skip.height, skip.distance) for skip in vo.skip_segments()] == [(5, 4), (8, 2)]
    assert [segment.height for segment in vo.block_segments()] == [5, 8, 9]


def test_lazy_messages_verify(sparse_chain):
    store, objects = sparse_chain
    query, messages = lazy_run(store, 'bool="Sedan"')
    verifier = Verifier(store.headers, store.accumulator, store.domain)

    spans = [vo.span for _, vo in messages]
    assert spans[0][0] == 1 and spans[-1][1] == store.height
    assert all(previous[1] + 1 == current[0] for previous, current in zip(spans, spans[1:]))
    for results, vo in messages:
        decoded = VerificationObject.from_bytes(vo.to_bytes(), store.accumulator)
        assert verifier.verify_span(query, results, decoded).accepted

    collected = [obj for results, _ in messages for obj in results]
    assert result_counter(collected) == expected_results(objects, query, store.domain)
    assert any(vo.skip_segments() for _, vo in messages)


def test_lazy_flush_threshold(sparse_chain):
    store, _ = sparse_chain
    _, messages = lazy_run(store, 'bool="Sedan"', flush_threshold=4)

    assert all(vo.span[1] - vo.span[0] + 1 <= 4 for _, vo in messages)


def test_lazy_on_random_chain(random_chain):
    store, objects = random_chain
    query, messages = lazy_run(store, 'range=[(0,0),(7,7)] bool="Truck" AND "Ford"')
    verifier = Verifier(store.headers, store.accumulator, store.domain)

    for results, vo in messages:
        assert verifier.verify_span(query, results, vo).accepted
    collected = [obj for results, _ in messages for obj in results]
    assert result_counter(collected) == expected_results(objects, query, store.domain)


def test_lazy_needs_aggregation(acc1_chain):
    store, _ = acc1_chain
    query = parse_query('bool="Van"')
    state = SubscriptionState(query, transform_query(query, store.domain))

    with pytest.raises(UnsupportedModeError):
        process_block_lazy(state, store.block(1), store.accumulator)



def test_neighbouring_ranges_share_cell_proofs(tmp_path):
    objects = [TemporalObject(100 + i, (8 + i % 8, i), ("Van", "Benz")) for i in range(16)]
    store = build_chain(tmp_path, objects)
    queries = {1: parse_query('range=[(0,0),(3,15)]'), 2: parse_query('range=[(1,0),(2,15)]')}
    tree = build_ip_tree(queries, store.domain)
    block = store.block(1)

    cache = ProofCache(store.accumulator)
    with store.accumulator.counters.scope() as delta:
        processed = process_block_ip(tree, block, store.accumulator, cache)

    low_half = frozenset({PrefixElement(0, "0", 4)})
    assert len(cache) == delta.get("prove_disjoint", 0) == 1
    verifier = Verifier(store.headers, store.accumulator, store.domain)
    for query_id, (results, segment) in processed.items():
        assert results == []
        assert segment.entries[0].clause == low_half
        vo = VerificationObject(str(queries[query_id]), [segment], span=(1, 1))
        assert verifier.verify_span(queries[query_id], results, vo).accepted

    # on their own, the two queries prove the block out with different clauses
    own = [query_intra(block.root, tree.conditions[query_id], store.accumulator)[1][0].clause for query_id in queries]
    assert own[0] != own[1]
    assert low_half not in own
