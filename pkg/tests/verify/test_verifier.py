import json

import pytest

from chainads.chain.objects import TemporalObject
from chainads.chain.tree import iter_bfs
from chainads.crypto.groups import GroupKind
from chainads.crypto.multiset import Multiset
from chainads.query.processor import QueryOptions, QueryProcessor, query_window
from chainads.query.vo import InternalDigest, MatchedObject, SkipMismatch, SubtreeMismatch, VerificationObject
from chainads.transform.condition import parse_query
from chainads.verify.verifier import RejectReason, Verifier, verify_span, verify_window
from tests.helpers import build_chain, random_objects


SEDAN_QUERY = 'window=[0,1000] bool="Sedan" AND ("Benz" OR "BMW")'

HONEST_QUERIES = [
    SEDAN_QUERY,
    'window=[110,170] range=[(2,0),(9,12)] bool="Van"',
    'window=[130,150] range=[(0,0),(7,7)]',
    'window=[0,1000] bool="Truck" AND "Ford"',
    'window=[5000,6000] bool="Van"',
]

OPTIONS = [
    QueryOptions(),
    QueryOptions(use_skips=False),
    QueryOptions(batch=True),
    QueryOptions(batch=True, use_skips=False, workers=2),
]


def light_client(store):
    return Verifier(store.headers, store.accumulator, store.domain)


def answer(store, text, options=None):
    """
    Honest results and a decoded copy of the VO, safe to tamper with.
    """
    query = parse_query(text)
    results, vo = QueryProcessor(store, options or QueryOptions()).process(query)
    return query, results, VerificationObject.from_bytes(vo.to_bytes(), store.accumulator)


def entries_of(vo, kind):
    """
    (segment, entry index) of every entry of the given kind.
    """
    return [
        (segment, index)
        for segment in vo.block_segments()
        for index, entry in enumerate(segment.entries)
        if isinstance(entry, kind)
    ]


@pytest.mark.parametrize("text", HONEST_QUERIES)
@pytest.mark.parametrize("options", OPTIONS)
def test_honest_answers_accepted(random_chain, text, options):
    store, _ = random_chain
    query, results, vo = answer(store, text, options)

    report = light_client(store).verify_window(query, results, vo)

    assert report.accepted, report.to_text()
    assert report.proofs_checked == vo.mismatch_count()
    assert report.results == len(results)


@pytest.mark.parametrize("text", HONEST_QUERIES[:4])
def test_honest_acc1_answers_accepted(acc1_chain, text):
    store, _ = acc1_chain
    query, results, vo = answer(store, text)

    assert light_client(store).verify_window(query, results, vo).accepted


@pytest.mark.parametrize("text", HONEST_QUERIES[:4])
def test_honest_plain_index_answers_accepted(tmp_path, text):
    store = build_chain(tmp_path, random_objects(40, seed=12), index_mode="nil")
    query, results, vo = answer(store, text)

    assert light_client(store).verify_window(query, results, vo).accepted


@pytest.mark.parametrize("options", OPTIONS)
def test_honest_sparse_answers_accepted(sparse_chain, options):
    store, _ = sparse_chain
    for text in ('window=[0,1000000] bool="Sedan"', 'window=[225,475] bool="Sedan"'):
        query, results, vo = answer(store, text, options)
        assert light_client(store).verify_window(query, results, vo).accepted


def test_report(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)

    report = light_client(store).verify_window(query, results, vo)
    assert report and report.to_text().startswith("ACCEPT")
    assert report.pairings > 0
    assert json.loads(report.to_json())["accepted"] is True

    rejected = light_client(store).verify_window(query, results[1:], vo)
    assert not rejected
    assert rejected.to_text().startswith("REJECT: gap")
    assert json.loads(rejected.to_json())["reason"] == "GAP"


def test_dropped_result(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    assert results

    assert light_client(store).verify_window(query, results[1:], vo).reason == RejectReason.GAP


def test_added_result(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    forged = TemporalObject(150, (1, 1), ("Sedan", "Benz"))

    assert light_client(store).verify_window(query, results + [forged], vo).reason == RejectReason.FOREIGN_OBJECT


def test_non_matching_object(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    segment, index = entries_of(vo, MatchedObject)[0]
    original = TemporalObject.from_bytes(segment.entries[index].object_bytes)

    segment.entries[index] = MatchedObject(TemporalObject(original.t, original.vector, ("Van", "Audi")).canonical_bytes)
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.NON_MATCHING


def test_object_outside_its_block(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    segment, index = entries_of(vo, MatchedObject)[0]

    segment.entries[index] = MatchedObject(TemporalObject(10 ** 6, (0, 0), ("Sedan", "Benz")).canonical_bytes)
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.FOREIGN_OBJECT


def test_perturbed_proof(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    segment, index = entries_of(vo, SubtreeMismatch)[0]
    entry = segment.entries[index]
    generator = store.accumulator.group.generator(GroupKind.G1)

    segment.entries[index] = entry._replace(proof=entry.proof._replace(f1=entry.proof.f1 * generator))
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.BAD_PROOF


def test_swapped_proofs(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    (first_segment, first), (second_segment, second) = entries_of(vo, SubtreeMismatch)[:2]
    first_entry, second_entry = first_segment.entries[first], second_segment.entries[second]

    first_segment.entries[first] = first_entry._replace(proof=second_entry.proof)
    second_segment.entries[second] = second_entry._replace(proof=first_entry.proof)
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.BAD_PROOF


def test_foreign_clause(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    segment, index = entries_of(vo, SubtreeMismatch)[0]
    entry = segment.entries[index]

    # a genuine proof, but against a clause the query does not contain
    node = next(node for node in iter_bfs(store.block(segment.height).root) if node.child_hash == entry.child_hash)
    clause = frozenset(["Zeppelin"])
    proof = store.accumulator.prove_disjoint(node.multiset, Multiset(clause))
    segment.entries[index] = entry._replace(clause=clause, proof=proof)

    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.CLAUSE_FORGERY


def test_dropped_segment(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY, QueryOptions(use_skips=False))
    del vo.segments[1]

    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.GAP


def test_duplicated_segment(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY, QueryOptions(use_skips=False))
    vo.segments.append(vo.segments[0])

    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.MALFORMED


def test_tampered_internal_digest(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    segment, index = next(
        (segment, index) for segment, index in entries_of(vo, InternalDigest)
        if segment.entries[index].digest is not None
    )

    segment.entries[index] = InternalDigest(store.accumulator.setup(Multiset(["Zeppelin"])))
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.ROOT_MISMATCH


def test_wrong_query(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)

    other = parse_query('window=[0,1000] bool="Sedan" AND "Benz"')
    assert light_client(store).verify_window(other, results, vo).reason == RejectReason.MALFORMED


def test_tampered_skip(sparse_chain):
    store, _ = sparse_chain
    query, results, vo = answer(store, 'window=[0,1000000] bool="Sedan"')
    position, skip = next(
        (position, segment) for position, segment in enumerate(vo.segments) if isinstance(segment, SkipMismatch)
    )

    vo.segments[position] = skip._replace(pre_skipped_hash=bytes(32))
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.ROOT_MISMATCH

    vo.segments[position] = skip._replace(digest=store.accumulator.setup(Multiset(["Van"])))
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.ROOT_MISMATCH

    vo.segments[position] = skip._replace(distance=skip.distance * 2)
    assert not light_client(store).verify_window(query, results, vo).accepted


def test_tampered_batch_digest(sparse_chain):
    store, _ = sparse_chain
    query, results, vo = answer(store, 'window=[0,1000000] bool="Sedan"', QueryOptions(batch=True, use_skips=False))
    assert vo.batches

    vo.batches[0] = vo.batches[0]._replace(digest=store.accumulator.setup(Multiset(["Van"])))
    assert light_client(store).verify_window(query, results, vo).reason == RejectReason.BAD_PROOF


def test_span_and_window_misuse(random_chain):
    store, _ = random_chain
    query, results, vo = answer(store, SEDAN_QUERY)
    verifier = light_client(store)

    assert verifier.verify_span(query, results, vo).reason == RejectReason.MALFORMED
    assert verifier.verify_window(parse_query('bool="Sedan"'), results, vo).reason == RejectReason.MALFORMED

    empty_query = parse_query('window=[5000,6000] bool="Sedan" AND ("Benz" OR "BMW")')
    vo.query_text = str(empty_query)
    assert verifier.verify_window(empty_query, [], vo).reason == RejectReason.MALFORMED



def test_module_helpers(random_chain):
    store, _ = random_chain
    query = parse_query(SEDAN_QUERY)
    results, vo = query_window(store, query, QueryOptions(batch=True))

    assert verify_window(store.headers, query, results, vo, store.accumulator, store.domain).accepted
    assert verify_span(store.headers, query, results, vo, store.accumulator, store.domain).reason == RejectReason.MALFORMED


def test_batching_saves_pairings(trend_chains):
    chains, _ = trend_chains
    store = chains["intra"]
    verifier = light_client(store)

    pairings = dict()
    for batch in (False, True):
        query, results, vo = answer(store, 'window=[0,1000000] bool="Sedan"', QueryOptions(batch=batch))
        report = verifier.verify_window(query, results, vo)
        assert report.accepted
        pairings[batch] = report.pairings

    assert pairings[True] <= 0.75 * pairings[False]
