import json
import logging
from collections import Counter
from enum import Enum

from chainads.chain.block import window_heights
from chainads.chain.objects import TemporalObject
from chainads.chain.skip_list import pre_skipped_hash, skip_entry_hash, skip_list_root
from chainads.chain.tree import hash_concat, digest_bytes
from chainads.crypto.multiset import Multiset
from chainads.errors import ChainAdsError
from chainads.profiler import TimeContext
from chainads.query.processor import skip_position
from chainads.query.vo import BatchMember, BlockSegment, InternalDigest, MatchedObject, SubtreeMismatch
from chainads.transform.condition import certifies_mismatch, transform_object, transform_query


logger = logging.getLogger(__name__)


class RejectReason(Enum):
    BAD_PROOF = "bad proof"
    ROOT_MISMATCH = "root mismatch"
    GAP = "gap"
    NON_MATCHING = "non-matching object"
    FOREIGN_OBJECT = "foreign object"
    CLAUSE_FORGERY = "clause forgery"
    MALFORMED = "malformed"


class VerifyReport:
    """
    Outcome of a verification: accepted, or the first violation found.
    """
    def __init__(self, reason=None, detail="", timings=None, pairings=0, proofs_checked=0, results=0):
        self.reason = reason
        self.detail = detail
        self.timings = timings or dict()
        self.pairings = pairings
        self.proofs_checked = proofs_checked
        self.results = results

    @property
    def accepted(self):
        return self.reason is None

    def to_dict(self):
        return {
            "accepted": self.accepted,
            "reason": self.reason.name if self.reason else None,
            "detail": self.detail,
            "results": self.results,
            "proofs_checked": self.proofs_checked,
            "pairings": self.pairings,
            "timings": self.timings,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_text(self):
        verdict = "ACCEPT" if self.accepted else f"REJECT: {self.reason.value}"
        lines = [verdict]
        if self.detail:
            lines.append(f"  detail: {self.detail}")
        lines.append(f"  results: {self.results}")
        lines.append(f"  proofs checked: {self.proofs_checked} ({self.pairings} pairings)")
        for name, seconds in sorted(self.timings.items()):
            lines.append(f"  {name}: {seconds:.6f}s")

        return "\n".join(lines)

    def __bool__(self):
        return self.accepted

    def __repr__(self):
        return f"<VerifyReport {'ACCEPT' if self.accepted else self.reason.name}>"


class _Rejection(Exception):
    def __init__(self, reason, detail):
        super(_Rejection, self).__init__(detail)
        self.reason = reason
        self.detail = detail


def verify_disjoint_batch(batch, member_digests, accumulator):
    """
    An aggregated mismatch holds iff its digest is the sum of the members' digests and the single
    pairing check on the aggregated proof passes.

    :type batch: chainads.query.vo.BatchMismatch
    :type member_digests: list[AccValue]
    :rtype: bool
    """
    if not member_digests or not accumulator.supports_aggregation:
        return False
    if accumulator.sum(member_digests) != batch.digest:
        return False

    return accumulator.verify_disjoint(batch.digest, accumulator.setup(Multiset(batch.clause)), batch.proof)


class Verifier:
    """
    Light client side: checks a result set and its VO against the block headers only.

    Every block segment is rebuilt into its Merkle root, every mismatch is checked for a genuine clause
    of the query and a valid proof, the covered heights must tile the queried span and the results must
    be exactly the matched objects inside the window.
    """
    def __init__(self, headers, accumulator, domain):
        """
        :type headers: list[chainads.chain.block.BlockHeader]
        :type accumulator: chainads.crypto.accumulator.Accumulator
        :type domain: chainads.transform.condition.Domain
        """
        self.headers = headers
        self.accumulator = accumulator
        self.domain = domain
        self._clause_digests = dict()
        self._query = None
        self._condition = None
        self._proofs = 0

    def verify_window(self, query, results, vo):
        """
        :type query: chainads.transform.condition.Query
        :type results: list[TemporalObject]
        :type vo: chainads.query.vo.VerificationObject
        :rtype: VerifyReport
        """
        if query.is_subscription:
            return VerifyReport(RejectReason.MALFORMED, "a time window query needs a window")

        return self._verify(query, results, vo, window_heights(self.headers, query.window))

    def verify_span(self, query, results, vo):
        """
        Subscription results: the VO declares the span of heights it covers.

        :rtype: VerifyReport
        """
        if vo.span is None:
            return VerifyReport(RejectReason.MALFORMED, "a subscription VO must declare its span")

        low, high = vo.span
        if not 1 <= low <= high < len(self.headers):
            return VerifyReport(RejectReason.MALFORMED, f"span [{low}, {high}] is outside the chain")

        return self._verify(query, results, vo, (low, high))

    def _verify(self, query, results, vo, heights):
        group = self.accumulator.group
        pairings_before = group.pairings
        self._proofs = 0

        report = None
        with TimeContext() as timer:
            try:
                if vo.query_text != str(query):
                    raise _Rejection(RejectReason.MALFORMED, "the VO answers another query")

                self._query = query
                self._condition = transform_query(query, self.domain)
                expected = self._check_segments(vo, heights)
                self._check_results(expected, results)
            except _Rejection as rejection:
                report = VerifyReport(rejection.reason, rejection.detail)
            except ChainAdsError as e:
                report = VerifyReport(RejectReason.MALFORMED, str(e))

        if report is None:
            report = VerifyReport(results=len(results))
        report.timings["verify"] = timer.seconds
        report.pairings = group.pairings - pairings_before
        report.proofs_checked = self._proofs

        if report.accepted:
            logger.info("accepted %d results for %s", len(results), query)
        else:
            logger.info("rejected results for %s: %s (%s)", query, report.reason.value, report.detail)

        return report

    def _check_segments(self, vo, heights):
        """
        :return: counter of the canonical bytes of the matched objects inside the window
        """
        if heights is None:
            if vo.segments or vo.batches:
                raise _Rejection(RejectReason.MALFORMED, "the window holds no block")
            return Counter()

        covered = list()
        members = dict()
        expected = Counter()
        for segment in vo.segments:
            if isinstance(segment, BlockSegment):
                covered.append((segment.height, segment.height))
                expected.update(self._check_block(segment, members))
            else:
                covered.append(self._check_skip(segment))

        self._check_batches(vo.batches, members)
        self._check_tiling(covered, heights)

        return expected

    def _check_block(self, segment, members):
        height, entries = segment.height, segment.entries
        if not 1 <= height < len(self.headers):
            raise _Rejection(RejectReason.MALFORMED, f"block {height} is outside the chain")
        if not entries:
            raise _Rejection(RejectReason.MALFORMED, f"block {height} has no entries")

        # Breadth first: the i-th internal entry owns the next two unclaimed entries
        children = dict()
        cursor = 1
        for index, entry in enumerate(entries):
            if index >= cursor:
                raise _Rejection(RejectReason.MALFORMED, f"block {height} has an unreachable entry")
            if isinstance(entry, InternalDigest):
                if cursor + 2 > len(entries):
                    raise _Rejection(RejectReason.MALFORMED, f"block {height} index is truncated")
                children[index] = (cursor, cursor + 1)
                cursor += 2
        if cursor != len(entries):
            raise _Rejection(RejectReason.MALFORMED, f"block {height} index does not close")

        matched = Counter()
        hashes = [None] * len(entries)
        for index in reversed(range(len(entries))):
            entry = entries[index]
            if isinstance(entry, InternalDigest):
                left, right = children[index]
                child_hash = hash_concat(hashes[left], hashes[right])
                hashes[index] = hash_concat(child_hash, digest_bytes(entry.digest))
            elif isinstance(entry, MatchedObject):
                obj, digest = self._check_matched(height, entry)
                hashes[index] = hash_concat(obj.object_id, digest_bytes(digest))
                if self._query.in_window(obj.t):
                    matched[entry.object_bytes] += 1
            elif isinstance(entry, SubtreeMismatch):
                self._check_mismatch(entry.digest, entry.clause, entry.proof, f"block {height} entry {index}")
                hashes[index] = hash_concat(entry.child_hash, digest_bytes(entry.digest))
            elif isinstance(entry, BatchMember):
                members[(height, index)] = entry
                hashes[index] = hash_concat(entry.child_hash, digest_bytes(entry.digest))
            else:
                raise _Rejection(RejectReason.MALFORMED, f"unexpected entry {type(entry).__name__}")

        if hashes[0] != self.headers[height].merkle_root:
            raise _Rejection(RejectReason.ROOT_MISMATCH, f"block {height} merkle root")

        return matched

    def _check_matched(self, height, entry):
        obj = TemporalObject.from_bytes(entry.object_bytes)
        if not self.headers[height - 1].ts <= obj.t <= self.headers[height].ts:
            raise _Rejection(RejectReason.FOREIGN_OBJECT, f"object at {obj.t} cannot belong to block {height}")

        multiset = transform_object(obj, self.domain)
        if not self._condition.matches(multiset):
            raise _Rejection(RejectReason.NON_MATCHING, f"object {obj.object_id.hex()[:12]} fails the query")

        return obj, self.accumulator.setup(multiset)

    def _check_clause(self, clause, where):
        if not clause or not certifies_mismatch(clause, self._query, self.domain):
            raise _Rejection(RejectReason.CLAUSE_FORGERY, f"{where}: clause does not refute the query")

    def _check_mismatch(self, digest, clause, proof, where):
        self._check_clause(clause, where)
        self._proofs += 1
        if not self.accumulator.verify_disjoint(digest, self._clause_digest(clause), proof):
            raise _Rejection(RejectReason.BAD_PROOF, f"{where}: disjointness proof")

    def _clause_digest(self, clause):
        digest = self._clause_digests.get(clause)
        if digest is None:
            digest = self._clause_digests[clause] = self.accumulator.setup(Multiset(clause))

        return digest

    def _check_skip(self, segment):
        height, distance = segment.height, segment.distance
        if distance < 2 or distance & (distance - 1) or not 1 <= height - distance < height < len(self.headers):
            raise _Rejection(RejectReason.MALFORMED, f"skip of {distance} at block {height}")

        position = skip_position(distance)
        if position > len(segment.siblings):
            raise _Rejection(RejectReason.MALFORMED, f"skip of {distance} at block {height} lacks siblings")

        skipped = [self.headers[index].block_hash for index in range(height - 1, height - distance - 1, -1)]
        if segment.pre_skipped_hash != pre_skipped_hash(skipped):
            raise _Rejection(RejectReason.ROOT_MISMATCH, f"skip of {distance} at block {height} skipped hashes")

        entry_hashes = list(segment.siblings)
        entry_hashes.insert(position, skip_entry_hash(segment.pre_skipped_hash, segment.digest))
        if skip_list_root(entry_hashes) != self.headers[height].skip_list_root:
            raise _Rejection(RejectReason.ROOT_MISMATCH, f"block {height} skip list root")

        self._check_mismatch(segment.digest, segment.clause, segment.proof, f"skip of {distance} at {height}")
        return height - distance, height - 1

    def _check_batches(self, batches, members):
        if batches and not self.accumulator.supports_aggregation:
            raise _Rejection(RejectReason.MALFORMED, "batched proofs need an aggregatable construction")

        referenced = set()
        for batch_id, batch in enumerate(batches):
            digests = list()
            for location in batch.members:
                location = tuple(location)
                member = members.get(location)
                if member is None or member.batch_id != batch_id or location in referenced:
                    raise _Rejection(RejectReason.MALFORMED, f"batch {batch_id} references {location}")
                referenced.add(location)
                digests.append(member.digest)

            self._check_clause(batch.clause, f"batch {batch_id}")
            self._proofs += 1
            if not verify_disjoint_batch(batch, digests, self.accumulator):
                raise _Rejection(RejectReason.BAD_PROOF, f"batch {batch_id} does not prove its members out")

        if referenced != set(members):
            raise _Rejection(RejectReason.MALFORMED, "batch members without a batch")

    def _check_tiling(self, covered, heights):
        low, high = heights
        expected = low
        for lowest, highest in sorted(covered):
            if lowest < expected:
                raise _Rejection(RejectReason.MALFORMED, f"heights {lowest}..{highest} overlap the covered span")
            if lowest > expected:
                raise _Rejection(RejectReason.GAP, f"heights {expected}..{lowest - 1} are not covered")
            expected = highest + 1

        if expected <= high:
            raise _Rejection(RejectReason.GAP, f"heights {expected}..{high} are not covered")
        if expected > high + 1:
            raise _Rejection(RejectReason.MALFORMED, f"heights past {high} are outside the queried span")

    @staticmethod
    def _check_results(expected, results):
        returned = Counter(obj.canonical_bytes for obj in results)
        if returned - expected:
            raise _Rejection(RejectReason.FOREIGN_OBJECT, f"{sum((returned - expected).values())} unproven results")
        if expected - returned:
            raise _Rejection(RejectReason.GAP, f"{sum((expected - returned).values())} matching objects are missing")


def verify_window(headers, query, results, vo, accumulator, domain):
    """
    :rtype: VerifyReport
    """
    return Verifier(headers, accumulator, domain).verify_window(query, results, vo)


def verify_span(headers, query, results, vo, accumulator, domain):
    """
    :rtype: VerifyReport
    """
    return Verifier(headers, accumulator, domain).verify_span(query, results, vo)
