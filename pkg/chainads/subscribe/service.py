import itertools
import logging
import threading
from collections import deque

from chainads.query.vo import VerificationObject
from chainads.subscribe.ip_tree import IPTree, QueryNotFoundError
from chainads.subscribe.processor import (
    ProofCache, SubscriptionState, UnsupportedModeError, process_block_ip, process_block_lazy
)
from chainads.transform.condition import QuerySyntaxError, parse_query, transform_query


logger = logging.getLogger(__name__)

REALTIME = "realtime"
LAZY = "lazy"


class SubscriptionService:
    """
    Subscription side of the service provider.

    Realtime queries live in a shared IP-Tree and receive a (results, VO) message for every new block,
    lazy queries buffer their evidence until a result shows up or the flush threshold is reached.
    Messages are queued per query until polled.

    Usage:
        service = SubscriptionService(store.accumulator, store.domain)
        query_id = service.register('range=[(0,0),(1,3)] bool="Van"')
        service.on_block(store.append(objects))
        for results, vo in service.poll(query_id):
            ...
    """
    def __init__(self, accumulator, domain, max_depth=8, flush_threshold=16):
        """
        :type accumulator: chainads.crypto.accumulator.Accumulator
        :type domain: chainads.transform.condition.Domain
        """
        self.accumulator = accumulator
        self.domain = domain
        self.flush_threshold = flush_threshold
        self.tree = IPTree(domain, max_depth)

        self._lock = threading.RLock()
        self._ids = itertools.count(1)
        self._modes = dict()
        self._lazy_states = dict()
        self._outboxes = dict()

    def register(self, text, mode=REALTIME):
        """
        :param text: query text without a window
        :param mode: "realtime" or "lazy"
        :return: the query id
        :rtype: int
        """
        query = parse_query(text)
        if not query.is_subscription:
            raise QuerySyntaxError("a subscription query has no window")
        if mode not in (REALTIME, LAZY):
            raise UnsupportedModeError(f"unknown subscription mode {mode!r}")
        if mode == LAZY and not self.accumulator.supports_aggregation:
            raise UnsupportedModeError("lazy authentication needs an aggregatable construction")

        with self._lock:
            query_id = next(self._ids)
            if mode == REALTIME:
                self.tree.register(query_id, query)
            else:
                self._lazy_states[query_id] = SubscriptionState(query, transform_query(query, self.domain))
            self._modes[query_id] = mode
            self._outboxes[query_id] = deque()

        logger.info("registered %s subscription %d: %s", mode, query_id, query)
        return query_id

    def deregister(self, query_id):
        with self._lock:
            mode = self._modes.pop(query_id, None)
            if mode is None:
                raise QueryNotFoundError(query_id)

            if mode == REALTIME:
                self.tree.deregister(query_id)
            else:
                del self._lazy_states[query_id]
            del self._outboxes[query_id]

        logger.info("deregistered subscription %d", query_id)

    def on_block(self, block):
        """
        Process a newly appended block for every subscription.

        :type block: chainads.chain.block.Block
        :return: number of messages queued
        :rtype: int
        """
        queued = 0
        with self._lock:
            cache = ProofCache(self.accumulator)
            for query_id, (results, segment) in process_block_ip(self.tree, block, self.accumulator, cache).items():
                query = self.tree.queries[query_id]
                vo = VerificationObject(str(query), [segment], span=(block.height, block.height))
                self._outboxes[query_id].append((results, vo))
                queued += 1

            for query_id, state in self._lazy_states.items():
                flushed = process_block_lazy(state, block, self.accumulator, self.flush_threshold)
                if flushed is not None:
                    self._outboxes[query_id].append(flushed)
                    queued += 1

        logger.debug("block %d queued %d subscription messages", block.height, queued)
        return queued

    def flush(self, query_id):
        """
        Force out the buffered evidence of a lazy subscription.

        :return: whether a message was queued
        """
        with self._lock:
            state = self._state(query_id)
            flushed = state.flush() if state is not None else None
            if flushed is not None:
                self._outboxes[query_id].append(flushed)

        return flushed is not None

    def poll(self, query_id):
        """
        Drain the pending messages of a subscription.

        :rtype: list[tuple[list[TemporalObject], VerificationObject]]
        """
        with self._lock:
            outbox = self._outboxes.get(query_id)
            if outbox is None:
                raise QueryNotFoundError(query_id)

            messages = list(outbox)
            outbox.clear()

        return messages

    def mode(self, query_id):
        with self._lock:
            if query_id not in self._modes:
                raise QueryNotFoundError(query_id)
            return self._modes[query_id]

    def query(self, query_id):
        """
        :rtype: chainads.transform.condition.Query
        """
        with self._lock:
            if query_id in self.tree.queries:
                return self.tree.queries[query_id]
            state = self._state(query_id)
            return state.query if state is not None else None

    def _state(self, query_id):
        if query_id not in self._modes:
            raise QueryNotFoundError(query_id)

        return self._lazy_states.get(query_id)

    def __len__(self):
        with self._lock:
            return len(self._modes)
