import logging
from collections import deque, namedtuple

from chainads.crypto.multiset import Multiset
from chainads.errors import ChainAdsError
from chainads.query.processor import (
    UnprovableMismatchError, mismatch_clauses, provable_mismatch_clause, query_intra, skip_siblings
)
from chainads.query.vo import (
    BlockSegment, InternalDigest, MatchedObject, SkipMismatch, SubtreeMismatch, VerificationObject
)
from chainads.transform.condition import clause_key


logger = logging.getLogger(__name__)

# Buffered run of mismatching blocks: heights height - distance + 1 .. height, the VO fragment proving it
# and the aggregated proof of its summed root multisets
LazyEntry = namedtuple("LazyEntry", ["height", "distance", "fragment", "proof"])


class ProofCache:
    """
    Disjointness proofs shared between queries: at most one proof per (index node, clause).
    """
    def __init__(self, accumulator):
        self.accumulator = accumulator
        self._proofs = dict()

    def prove(self, node, clause):
        key = (node.node_hash, clause_key(clause))
        proof = self._proofs.get(key)
        if proof is None:
            proof = self._proofs[key] = self.accumulator.prove_disjoint(node.multiset, Multiset(clause))

        return proof

    def holds(self, node, clause):
        return (node.node_hash, clause_key(clause)) in self._proofs

    def __len__(self):
        return len(self._proofs)


def shared_mismatch_clause(tree, query_id, node, cache):
    """
    Clause proving a node out of a registered query, picked for sharing.

    A query whose range misses the node is proven out with the cells its range crosses on one dimension
    (`crossed_cells`), a query failing on a keyword clause with that clause, which every query holding it
    in a BCIF shares. Among the candidates, a clause the cache already proved on the node comes first.

    :type tree: chainads.subscribe.ip_tree.IPTree
    :type node: chainads.chain.tree.IntraNode
    :type cache: ProofCache
    :return: the clause, None when every candidate collides under the element encoding
    """
    multiset, accumulator = node.multiset, cache.accumulator
    candidates = [clause for clause in tree.cell_clauses[query_id] if multiset.isdisjoint(clause)]
    candidates.extend(mismatch_clauses(tree.conditions[query_id], multiset))

    held = next((clause for clause in candidates if cache.holds(node, clause)), None)
    if held is not None:
        return held

    for clause in candidates:
        if accumulator.can_prove_disjoint(multiset, Multiset(clause)):
            return clause

    if node.is_leaf:
        return provable_mismatch_clause(tree.conditions[query_id], multiset, accumulator, leaf=True)

    return None


def process_block_ip(tree, block, accumulator, cache=None):
    """
    Evaluate every query registered in the IP-Tree on a new block, in a single breadth first walk of the
    block's index. Each index node is classified for all the queries still alive at it at once, and the
    mismatching queries are proven out with shared clauses (`shared_mismatch_clause`), one proof per
    (node, clause) whatever the number of queries.

    A query sees the same index nodes, hence the same results, as its own intra index traversal.

    :type tree: chainads.subscribe.ip_tree.IPTree
    :type block: chainads.chain.block.Block
    :type accumulator: chainads.crypto.accumulator.Accumulator
    :type cache: ProofCache
    :return: query id -> (matched objects, block segment)
    :rtype: dict[int, tuple[list[TemporalObject], BlockSegment]]
    """
    if block.root is None or not tree.queries:
        return dict()

    cache = cache or ProofCache(accumulator)
    results = {query_id: list() for query_id in tree.queries}
    entries = {query_id: list() for query_id in tree.queries}

    queue = deque([(block.root, frozenset(tree.queries))])
    while queue:
        node, alive = queue.popleft()
        if node.digest is None:
            for query_id in alive:
                entries[query_id].append(InternalDigest(None))
            queue.extend((child, alive) for child in node.children)
            continue

        matching = tree.matching_queries(node.multiset, alive)
        opened = set(matching)
        for query_id in sorted(alive):
            if query_id in matching:
                if node.is_leaf:
                    results[query_id].append(node.obj)
                    entries[query_id].append(MatchedObject(node.obj.canonical_bytes))
                else:
                    entries[query_id].append(InternalDigest(node.digest))
                continue

            clause = shared_mismatch_clause(tree, query_id, node, cache)
            if clause is not None:
                proof = cache.prove(node, clause)
                entries[query_id].append(SubtreeMismatch(node.child_hash, node.digest, clause, proof))
            elif node.is_leaf:
                raise UnprovableMismatchError(node.obj)
            else:
                entries[query_id].append(InternalDigest(node.digest))
                opened.add(query_id)

        if opened and not node.is_leaf:
            queue.extend((child, frozenset(opened)) for child in node.children)

    logger.debug("block %d: %d queries, %d shared proofs", block.height, len(tree.queries), len(cache))
    return {query_id: (results[query_id], BlockSegment(block.height, entries[query_id])) for query_id in tree.queries}


class SubscriptionState:
    """
    Per query buffer of a lazily authenticated subscription.

    `committed` holds the fragments of the buffered span that can no longer be rewritten, `stack` the
    consecutive mismatching runs sharing `clause` whose proofs may still be folded into a skip.
    """
    def __init__(self, query, condition):
        """
        :type query: chainads.transform.condition.Query
        :type condition: chainads.transform.condition.CNFCondition
        """
        self.query = query
        self.condition = condition
        self.committed = list()
        self.stack = list()
        self.clause = None
        self.results = list()
        self.low = None
        self.high = None

    @property
    def buffered_blocks(self):
        return 0 if self.low is None else self.high - self.low + 1

    def reset_stack(self):
        for entry in self.stack:
            self.committed.extend(entry.fragment)
        self.stack = list()
        self.clause = None

    def flush(self):
        """
        :return: (results, VO) of the buffered span, None when nothing is buffered
        """
        if self.low is None:
            return None

        self.reset_stack()
        vo = VerificationObject(str(self.query), self.committed, span=(self.low, self.high))
        flushed = (self.results, vo)
        logger.info("flushed %s over blocks %d..%d: %d results", self.query, self.low, self.high, len(self.results))

        self.committed, self.results = list(), list()
        self.low = self.high = None
        return flushed


def process_block_lazy(state, block, accumulator, flush_threshold=16):
    """
    Lazy authentication of one subscription on a new block.

    A block whose root mismatches with the same clause as the buffered run is pushed on the stack, folding
    the top runs into the block's largest skip whose distance they add up to exactly: their fragments are
    rewound and replaced by the skip, proven by the aggregate of their proofs.
    Results, or `flush_threshold` buffered blocks, flush the buffer.

    :type state: SubscriptionState
    :type block: chainads.chain.block.Block
    :return: flushed (results, VO) or None
    """
    if not accumulator.supports_aggregation:
        raise UnsupportedModeError(
            f"lazy authentication needs an aggregatable construction, not {accumulator.construction.label}"
        )

    root = block.root
    if root is None:
        return None

    if state.low is None:
        state.low = block.height
    state.high = block.height

    clause = None
    if root.digest is not None and not state.condition.matches(root.multiset):
        clause = provable_mismatch_clause(state.condition, root.multiset, accumulator, leaf=root.is_leaf)

    if clause is None:
        # a matching root, or one whose encodings collide with every clause, is walked as a whole block
        matched, entries = query_intra(root, state.condition, accumulator)
        state.reset_stack()
        state.committed.append(BlockSegment(block.height, entries))
        if matched:
            state.results.extend(matched)
            return state.flush()
    else:
        proof = accumulator.prove_disjoint(root.multiset, Multiset(clause))
        segment = BlockSegment(block.height, [SubtreeMismatch(root.child_hash, root.digest, clause, proof)])

        consecutive = bool(state.stack) and state.stack[-1].height == block.height - 1
        if not consecutive or clause_key(clause) != clause_key(state.clause):
            state.reset_stack()
            state.clause = clause
        state.stack.append(_fold(state.stack, block, clause, segment, proof, accumulator))

    if state.buffered_blocks >= flush_threshold:
        return state.flush()

    return None


def _fold(stack, block, clause, segment, proof, accumulator):
    for skip in sorted(block.skip_entries, key=lambda entry: entry.distance, reverse=True):
        covered, count = 0, 0
        for entry in reversed(stack):
            if covered >= skip.distance:
                break
            covered += entry.distance
            count += 1
        if covered != skip.distance:
            continue

        popped = stack[-count:]
        del stack[-count:]
        skip_proof = accumulator.proof_sum([entry.proof for entry in popped])
        skip_segment = SkipMismatch(
            height=block.height,
            distance=skip.distance,
            pre_skipped_hash=skip.pre_skipped_hash,
            digest=skip.digest,
            clause=clause,
            proof=skip_proof,
            siblings=skip_siblings(block, skip.distance)
        )
        logger.debug("block %d folds %d buffered runs into a skip of %d", block.height, count, skip.distance)
        folded_proof = accumulator.proof_sum([skip_proof, proof])
        return LazyEntry(block.height, skip.distance + 1, [segment, skip_segment], folded_proof)

    return LazyEntry(block.height, 1, [segment], proof)


class UnsupportedModeError(ChainAdsError):
    pass
