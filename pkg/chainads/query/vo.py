from collections import namedtuple

from chainads.chain.tree import HASH_SIZE, digest_bytes
from chainads.codec import Reader, Writer
from chainads.errors import ChainAdsError
from chainads.transform.prefix import PrefixElement


VO_MAGIC = b"CADS-VO\x01"

# VOEntry variants, listed in breadth first order inside a block segment
MatchedObject = namedtuple("MatchedObject", ["object_bytes"])
SubtreeMismatch = namedtuple("SubtreeMismatch", ["child_hash", "digest", "clause", "proof"])
InternalDigest = namedtuple("InternalDigest", ["digest"])
BatchMember = namedtuple("BatchMember", ["child_hash", "digest", "batch_id"])

# Segments
BlockSegment = namedtuple("BlockSegment", ["height", "entries"])
SkipMismatch = namedtuple(
    "SkipMismatch", ["height", "distance", "pre_skipped_hash", "digest", "clause", "proof", "siblings"]
)
BatchMismatch = namedtuple("BatchMismatch", ["members", "digest", "clause", "proof"])

_MATCHED_TAG = 1
_MISMATCH_TAG = 2
_INTERNAL_TAG = 3
_MEMBER_TAG = 4

_BLOCK_SEGMENT_TAG = 1
_SKIP_SEGMENT_TAG = 2

_KEYWORD_KIND = 0
_PREFIX_KIND = 1


class VerificationObject:
    """
    Evidence returned with the results of a query.

    `segments` are listed in processing order (newest block first), a `BlockSegment` holds the
    breadth first entries of one block's index and a `SkipMismatch` proves a run of blocks out.
    `batches` hold the aggregated proofs referenced by `BatchMember` entries.
    `span` is the (lowest, highest) covered height of subscription VOs, None for time windows.
    """
    def __init__(self, query_text, segments=None, batches=None, span=None):
        self.query_text = query_text
        self.segments = list(segments or [])
        self.batches = list(batches or [])
        self.span = span

    def block_segments(self):
        return [segment for segment in self.segments if isinstance(segment, BlockSegment)]

    def skip_segments(self):
        return [segment for segment in self.segments if isinstance(segment, SkipMismatch)]

    def mismatch_count(self):
        """
        Number of disjointness proofs carried by the VO.
        """
        subtree = sum(
            1 for segment in self.block_segments() for entry in segment.entries if isinstance(entry, SubtreeMismatch)
        )
        return subtree + len(self.skip_segments()) + len(self.batches)

    def to_bytes(self):
        """
        magic | query text | span flag (u8) [low u64, high u64] | segments (u32 count) | batches (u32 count)

        block segment: tag 1 | height u64 | u32 count | entries
            matched:  1 | object blob
            mismatch: 2 | child hash | digest blob | clause | proof blob
            internal: 3 | digest blob (empty for plain nodes)
            member:   4 | child hash | digest blob | batch id u32
        skip segment:  tag 2 | height u64 | distance u32 | pre skipped hash | digest blob | clause | proof blob |
                       u8 count | sibling hashes
        batch: u32 count | (height u64, entry index u32) members | digest blob | clause | proof blob
        clause: u16 count | elements (keyword: 0 | text, prefix: 1 | dimension u8 | width u8 | bits text),
                sorted by their encoding
        """
        writer = Writer().raw(VO_MAGIC).text(self.query_text)
        if self.span is None:
            writer.u8(0)
        else:
            writer.u8(1).u64(self.span[0]).u64(self.span[1])

        writer.u32(len(self.segments))
        for segment in self.segments:
            if isinstance(segment, BlockSegment):
                _write_block_segment(writer, segment)
            else:
                _write_skip_segment(writer, segment)

        writer.u32(len(self.batches))
        for batch in self.batches:
            writer.u32(len(batch.members))
            for height, index in batch.members:
                writer.u64(height).u32(index)
            writer.blob(digest_bytes(batch.digest))
            write_clause(writer, batch.clause)
            writer.blob(batch.proof.to_bytes())

        return writer.getvalue()

    @classmethod
    def from_bytes(cls, data, accumulator):
        """
        :type data: bytes
        :param accumulator: decodes digests and proofs
        :rtype: VerificationObject
        """
        try:
            reader = Reader(data)
            reader.expect_magic(VO_MAGIC)
            query_text = reader.text()
            span = (reader.u64(), reader.u64()) if reader.u8() else None

            segments = list()
            for _ in range(reader.u32()):
                tag = reader.u8()
                if tag == _BLOCK_SEGMENT_TAG:
                    segments.append(_read_block_segment(reader, accumulator))
                elif tag == _SKIP_SEGMENT_TAG:
                    segments.append(_read_skip_segment(reader, accumulator))
                else:
                    raise VOFormatError(f"unknown segment tag {tag}")

            batches = list()
            for _ in range(reader.u32()):
                members = [(reader.u64(), reader.u32()) for _ in range(reader.u32())]
                digest = accumulator.value_from_bytes(reader.blob())
                clause = read_clause(reader)
                proof = accumulator.proof_from_bytes(reader.blob(), right=None)
                batches.append(BatchMismatch(members, digest, clause, proof))
            reader.expect_end()
        except VOFormatError:
            raise
        except ChainAdsError as e:
            raise VOFormatError(f"malformed verification object: {e}") from e

        return cls(query_text, segments, batches, span)

    def __len__(self):
        return len(self.to_bytes())


def write_clause(writer, clause):
    elements = sorted(clause, key=_element_sort_key)
    writer.u16(len(elements))
    for element in elements:
        if isinstance(element, PrefixElement):
            writer.u8(_PREFIX_KIND).u8(element.dimension).u8(element.width).text(element.bits)
        else:
            writer.u8(_KEYWORD_KIND).text(element)


def read_clause(reader):
    """
    :rtype: frozenset
    """
    elements = list()
    for _ in range(reader.u16()):
        kind = reader.u8()
        if kind == _KEYWORD_KIND:
            elements.append(reader.text())
        elif kind == _PREFIX_KIND:
            dimension, width = reader.u8(), reader.u8()
            elements.append(PrefixElement(dimension, reader.text(), width))
        else:
            raise VOFormatError(f"unknown clause element kind {kind}")

    return frozenset(elements)


def _element_sort_key(element):
    if isinstance(element, PrefixElement):
        return _PREFIX_KIND, element.dimension, element.width, element.bits

    return _KEYWORD_KIND, 0, 0, element


def _write_block_segment(writer, segment):
    writer.u8(_BLOCK_SEGMENT_TAG).u64(segment.height).u32(len(segment.entries))
    for entry in segment.entries:
        if isinstance(entry, MatchedObject):
            writer.u8(_MATCHED_TAG).blob(entry.object_bytes)
        elif isinstance(entry, SubtreeMismatch):
            writer.u8(_MISMATCH_TAG).raw(entry.child_hash).blob(digest_bytes(entry.digest))
            write_clause(writer, entry.clause)
            writer.blob(entry.proof.to_bytes())
        elif isinstance(entry, InternalDigest):
            writer.u8(_INTERNAL_TAG).blob(digest_bytes(entry.digest))
        elif isinstance(entry, BatchMember):
            writer.u8(_MEMBER_TAG).raw(entry.child_hash).blob(digest_bytes(entry.digest)).u32(entry.batch_id)
        else:
            raise VOFormatError(f"unknown entry {type(entry).__name__}")


def _read_block_segment(reader, accumulator):
    height = reader.u64()
    entries = list()
    for _ in range(reader.u32()):
        tag = reader.u8()
        if tag == _MATCHED_TAG:
            entries.append(MatchedObject(reader.blob()))
        elif tag == _MISMATCH_TAG:
            child_hash = reader.raw(HASH_SIZE)
            digest = accumulator.value_from_bytes(reader.blob())
            clause = read_clause(reader)
            entries.append(SubtreeMismatch(child_hash, digest, clause, accumulator.proof_from_bytes(reader.blob())))
        elif tag == _INTERNAL_TAG:
            raw_digest = reader.blob()
            entries.append(InternalDigest(accumulator.value_from_bytes(raw_digest) if raw_digest else None))
        elif tag == _MEMBER_TAG:
            child_hash = reader.raw(HASH_SIZE)
            digest = accumulator.value_from_bytes(reader.blob())
            entries.append(BatchMember(child_hash, digest, reader.u32()))
        else:
            raise VOFormatError(f"unknown entry tag {tag}")

    return BlockSegment(height, entries)


def _write_skip_segment(writer, segment):
    writer.u8(_SKIP_SEGMENT_TAG).u64(segment.height).u32(segment.distance).raw(segment.pre_skipped_hash)
    writer.blob(digest_bytes(segment.digest))
    write_clause(writer, segment.clause)
    writer.blob(segment.proof.to_bytes())
    writer.u8(len(segment.siblings))
    for sibling in segment.siblings:
        writer.raw(sibling)


def _read_skip_segment(reader, accumulator):
    height, distance = reader.u64(), reader.u32()
    pre_skipped_hash = reader.raw(HASH_SIZE)
    digest = accumulator.value_from_bytes(reader.blob())
    clause = read_clause(reader)
    proof = accumulator.proof_from_bytes(reader.blob())
    siblings = [reader.raw(HASH_SIZE) for _ in range(reader.u8())]

    return SkipMismatch(height, distance, pre_skipped_hash, digest, clause, proof, siblings)


class VOFormatError(ChainAdsError):
    pass
