import logging
import math
from collections import deque, namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from chainads.chain.block import span_inside_window, window_heights
from chainads.crypto.multiset import Multiset
from chainads.errors import ChainAdsError
from chainads.profiler import Counters
from chainads.query.vo import (
    BatchMember, BatchMismatch, BlockSegment, InternalDigest, MatchedObject, SkipMismatch, SubtreeMismatch,
    VerificationObject
)
from chainads.transform.condition import clause_key, transform_object, transform_query
from chainads.transform.prefix import PrefixElement


logger = logging.getLogger(__name__)

# A disjointness proof still to compute for the entry at segments[segment].entries[entry]
# (entry is None for a skip segment)
PendingProof = namedtuple("PendingProof", ["segment", "entry", "multiset", "clause"])


@dataclass(frozen=True)
class QueryOptions:
    """
    :param batch: aggregate the subtree mismatches sharing a clause (aggregatable constructions only)
    :param use_skips: jump over mismatching runs of blocks with the skip entries
    :param workers: threads computing the disjointness proofs
    """
    batch: bool = False
    use_skips: bool = True
    workers: int = 1


def mismatch_clauses(condition, multiset):
    """
    Every clause of the condition disjoint from the multiset, smallest first and ties by the clause order
    (the head is `find_mismatch_clause`'s choice).

    :rtype: list[frozenset]
    """
    return sorted((clause for clause in condition.clauses if multiset.isdisjoint(clause)), key=len)


def refine_range_clause(clause, multiset, encoder):
    """
    Rework a range clause whose element encodings collide with the multiset's: a colliding prefix is
    replaced by its two halves, a colliding single value by its closest enclosing prefix held neither
    by the multiset nor by its encodings. The result still covers every value of the clause.

    Only sound for a multiset describing a single object (an index leaf), whose prefixes all lie on
    one value per dimension.

    :type clause: frozenset
    :type multiset: Multiset
    :type encoder: chainads.crypto.encoding.ElementEncoder
    :return: the reworked clause, None when no collision free cover was found
    :rtype: frozenset | None
    """
    if not clause or not all(isinstance(element, PrefixElement) for element in clause):
        return None

    taken = encoder.encode_multiset(multiset).keys()

    def clear(element):
        return element not in multiset and encoder.encode(element).value not in taken

    refined = set()
    pending = list(clause)
    while pending:
        element = pending.pop()
        if clear(element):
            refined.add(element)
        elif element.wildcard:
            pending.extend(element.children())
        else:
            widened = next((ancestor for ancestor in element.ancestors() if clear(ancestor)), None)
            if widened is None:
                return None
            refined.add(widened)

    return frozenset(refined)


def provable_mismatch_clause(condition, multiset, accumulator, leaf=False):
    """
    The clause proving a mismatching multiset out of the condition.

    `find_mismatch_clause`'s choice unless its encodings collide with the multiset's (small Acc2
    capacities), then the next mismatching clause. A leaf finally retries its range clauses reworked
    around the colliding prefixes.

    :type condition: chainads.transform.condition.CNFCondition
    :type multiset: Multiset
    :type accumulator: chainads.crypto.accumulator.Accumulator
    :param leaf: the multiset is the one of a single object
    :return: the clause, None when every candidate collides
    :rtype: frozenset | None
    """
    candidates = mismatch_clauses(condition, multiset)
    for clause in candidates:
        if accumulator.can_prove_disjoint(multiset, Multiset(clause)):
            return clause

    if leaf:
        for clause in candidates:
            refined = refine_range_clause(clause, multiset, accumulator.encoder)
            if refined is not None:
                return refined

    return None


def query_single(obj, condition, accumulator, domain):
    """
    Verifiable query on a single object: the object itself when it matches,
    otherwise a disjointness proof against the smallest mismatching clause.

    :type obj: chainads.chain.objects.TemporalObject
    :type condition: chainads.transform.condition.CNFCondition
    :type accumulator: chainads.crypto.accumulator.Accumulator
    :type domain: chainads.transform.condition.Domain
    :return: (the object or None, VO entry)
    """
    multiset = transform_object(obj, domain)
    if condition.matches(multiset):
        return obj, MatchedObject(obj.canonical_bytes)

    clause = provable_mismatch_clause(condition, multiset, accumulator, leaf=True)
    if clause is None:
        raise UnprovableMismatchError(obj)

    return None, SubtreeMismatch(
        child_hash=obj.object_id,
        digest=accumulator.setup(multiset),
        clause=clause,
        proof=accumulator.prove_disjoint(multiset, Multiset(clause))
    )


def traverse_index(root, condition, accumulator):
    """
    Breadth first traversal of an intra-block index, pruning every mismatching subtree.
    A mismatching internal node without any provable clause is opened like a matching one.
    Proofs are left empty, the returned jobs describe them.

    :type root: chainads.chain.tree.IntraNode
    :type condition: chainads.transform.condition.CNFCondition
    :type accumulator: chainads.crypto.accumulator.Accumulator
    :return: (matched objects, entries, [(entry index, multiset, clause)])
    """
    matched, entries, jobs = list(), list(), list()

    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node.digest is None:
            entries.append(InternalDigest(None))
            queue.extend(node.children)
            continue

        if condition.matches(node.multiset):
            if node.is_leaf:
                matched.append(node.obj)
                entries.append(MatchedObject(node.obj.canonical_bytes))
            else:
                entries.append(InternalDigest(node.digest))
                queue.extend(node.children)
            continue

        clause = provable_mismatch_clause(condition, node.multiset, accumulator, leaf=node.is_leaf)
        if clause is None:
            if node.is_leaf:
                raise UnprovableMismatchError(node.obj)
            entries.append(InternalDigest(node.digest))
            queue.extend(node.children)
            continue

        jobs.append((len(entries), node.multiset, clause))
        entries.append(SubtreeMismatch(node.child_hash, node.digest, clause, None))

    return matched, entries, jobs


def query_intra(root, condition, accumulator):
    """
    Query one block through its intra index.

    :return: (matched objects, VO entries in breadth first order)
    """
    matched, entries, jobs = traverse_index(root, condition, accumulator)
    for index, multiset, clause in jobs:
        entries[index] = entries[index]._replace(proof=accumulator.prove_disjoint(multiset, Multiset(clause)))

    return matched, entries


def prove_pending(accumulator, pending, workers=1):
    """
    Compute the proofs of the pending jobs, in order.

    :type pending: list[PendingProof]
    :rtype: list[chainads.crypto.accumulator.DisjointProof]
    """
    def prove(job):
        return accumulator.prove_disjoint(job.multiset, Multiset(job.clause))

    if workers <= 1 or len(pending) < 2:
        return [prove(job) for job in pending]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(prove, pending))


def fill_proofs(segments, pending, proofs):
    for job, proof in zip(pending, proofs):
        segment = segments[job.segment]
        if job.entry is None:
            segments[job.segment] = segment._replace(proof=proof)
        else:
            segment.entries[job.entry] = segment.entries[job.entry]._replace(proof=proof)


def batch_compact(segments, pending, accumulator):
    """
    Group the pending subtree mismatches sharing the same clause (within and across blocks) into one
    aggregated mismatch each. Groups of a single entry and skip mismatches are left as they are.

    :type segments: list
    :type pending: list[PendingProof]
    :return: (batches, jobs still to prove)
    :rtype: tuple[list[BatchMismatch], list[PendingProof]]
    """
    if not accumulator.supports_aggregation:
        return [], pending

    groups = dict()
    for job in pending:
        if job.entry is not None:
            groups.setdefault(clause_key(job.clause), list()).append(job)

    batched = set()
    batches = list()
    for group in groups.values():
        if len(group) < 2:
            continue

        batch_id = len(batches)
        digests = list()
        for job in group:
            entry = segments[job.segment].entries[job.entry]
            segments[job.segment].entries[job.entry] = BatchMember(entry.child_hash, entry.digest, batch_id)
            digests.append(entry.digest)
            batched.add(id(job))

        clause = group[0].clause
        batches.append(BatchMismatch(
            members=[(segments[job.segment].height, job.entry) for job in group],
            digest=accumulator.sum(digests),
            clause=clause,
            proof=accumulator.prove_disjoint(Multiset.sum(job.multiset for job in group), Multiset(clause))
        ))

    return batches, [job for job in pending if id(job) not in batched]


def skip_siblings(block, distance):
    """
    Entry hashes of the block's skip list other than the one of `distance`, by increasing distance.
    """
    return [entry.entry_hash for entry in block.skip_entries if entry.distance != distance]


def skip_position(distance):
    """
    Index of a distance in a skip list (2 -> 0, 4 -> 1, ...).
    """
    return int(math.log2(distance)) - 1


class QueryProcessor:
    """
    Service provider side of time window queries over a chain store.

    Blocks are walked from the newest one in the window backwards. Every visited block is traversed
    through its intra index, then its skip entries are scanned from the largest distance down and the
    first one spanning only blocks inside the window and mismatching the query lets the walk jump
    past the skipped blocks.

    Usage:
        processor = QueryProcessor(store, QueryOptions(batch=True))
        results, vo = processor.process(parse_query('window=[0,100] bool="Van"'))
    """
    def __init__(self, store, options=None):
        """
        :type store: chainads.chain.storage.ChainStore
        :type options: QueryOptions
        """
        self.store = store
        self.options = options or QueryOptions(workers=store.config.workers)
        self.accumulator = store.accumulator
        self.domain = store.domain
        self.counters = Counters()

    def process(self, query):
        """
        :type query: chainads.transform.condition.Query
        :return: (results in processing order, verification object)
        :rtype: tuple[list[TemporalObject], VerificationObject]
        """
        if query.is_subscription:
            raise QueryError("a time window query needs a window")

        condition = transform_query(query, self.domain)
        headers = self.store.headers
        heights = window_heights(headers, query.window)

        segments, pending, results = list(), list(), list()
        if heights is not None:
            low, high = heights
            height = high
            while height >= low:
                block = self.store.block(height)
                matched, entries, jobs = traverse_index(block.root, condition, self.accumulator)
                pending.extend(PendingProof(len(segments), index, multiset, clause) for index, multiset, clause in jobs)
                segments.append(BlockSegment(height, entries))
                results.extend(obj for obj in matched if query.in_window(obj.t))
                self.counters.increment("blocks")

                height -= 1
                if self.options.use_skips:
                    skip = self._find_skip(block, condition, headers, low, query.window)
                    if skip is not None:
                        pending.append(PendingProof(len(segments), None, skip.multiset, skip.clause))
                        segments.append(skip.segment)
                        self.counters.increment("skips")
                        height = block.height - skip.segment.distance - 1

        batches = list()
        if self.options.batch:
            batches, pending = batch_compact(segments, pending, self.accumulator)

        fill_proofs(segments, pending, prove_pending(self.accumulator, pending, self.options.workers))
        self.counters.increment("proofs", len(pending) + len(batches))

        vo = VerificationObject(str(query), segments, batches)
        logger.info("query %s: %d results, %d segments, %d batches", query, len(results), len(segments), len(batches))
        return results, vo

    def _find_skip(self, block, condition, headers, low, window):
        for entry in sorted(block.skip_entries, key=lambda skip: skip.distance, reverse=True):
            lowest, highest = entry.covered_heights(block.height)
            if lowest < low or not span_inside_window(headers, lowest, highest, window):
                continue
            if condition.matches(entry.multiset):
                continue

            clause = provable_mismatch_clause(condition, entry.multiset, self.accumulator)
            if clause is None:
                logger.debug("skip of %d at block %d collides with every clause", entry.distance, block.height)
                continue

            segment = SkipMismatch(
                height=block.height,
                distance=entry.distance,
                pre_skipped_hash=entry.pre_skipped_hash,
                digest=entry.digest,
                clause=clause,
                proof=None,
                siblings=skip_siblings(block, entry.distance)
            )
            logger.debug("block %d skips %d blocks", block.height, entry.distance)
            return _Skip(segment, entry.multiset, clause)

        return None


_Skip = namedtuple("_Skip", ["segment", "multiset", "clause"])


def query_window(store, query, options=None):
    """
    :rtype: tuple[list[TemporalObject], VerificationObject]
    """
    return QueryProcessor(store, options).process(query)


class QueryError(ChainAdsError):
    pass


class UnprovableMismatchError(QueryError):
    """
    A mismatching object whose every clause collides with its element encodings: the chain's salt
    (or capacity) has to change for the object to be proven out.
    """
    def __init__(self, obj):
        super(UnprovableMismatchError, self).__init__(
            f"object {obj.object_id.hex()[:12]} cannot be proven out, its element encodings collide with "
            f"every mismatching clause under this salt"
        )
        self.obj = obj
