import logging
import struct
from bisect import bisect_left, bisect_right
from collections import namedtuple

from chainads.chain.intra_index import BuildError, build_index
from chainads.chain.objects import TemporalObject
from chainads.chain.skip_list import SkipEntry, build_skip_list, skip_list_root
from chainads.chain.tree import HASH_SIZE, ZERO_HASH, IntraNode, hash_concat, digest_bytes, iter_bfs
from chainads.codec import Reader, Writer
from chainads.crypto.multiset import Multiset
from chainads.errors import ChainAdsError
from chainads.transform.condition import transform_object


logger = logging.getLogger(__name__)

BLOCK_MAGIC = b"CADS-BK\x01"
HEADER_SIZE = 3 * HASH_SIZE + 16

_LEAF_TAG = 0
_NODE_TAG = 1


class BlockHeader(namedtuple("BlockHeader", ["prev_hash", "ts", "nonce", "merkle_root", "skip_list_root"])):
    """
    PreBkHash | TS | ConsProof (nonce) | MerkleRoot | SkipListRoot, integers little endian.
    """
    __slots__ = ()

    def to_bytes(self):
        return self.prev_hash + struct.pack("<QQ", self.ts, self.nonce) + self.merkle_root + self.skip_list_root

    @classmethod
    def from_bytes(cls, data):
        if len(data) != HEADER_SIZE:
            raise BlockFormatError(f"a header is {HEADER_SIZE} bytes, got {len(data)}")

        ts, nonce = struct.unpack("<QQ", data[HASH_SIZE:HASH_SIZE + 16])
        return cls(
            prev_hash=data[:HASH_SIZE],
            ts=ts,
            nonce=nonce,
            merkle_root=data[HASH_SIZE + 16:2 * HASH_SIZE + 16],
            skip_list_root=data[2 * HASH_SIZE + 16:]
        )

    @property
    def block_hash(self):
        return hash_concat(self.to_bytes())


class Block:
    """
    A mined block: header, objects, intra-block index and skip entries.
    Height 0 is the empty genesis block.
    """
    def __init__(self, height, header, objects, root, skip_entries):
        """
        :type height: int
        :type header: BlockHeader
        :type objects: list[TemporalObject]
        :type root: IntraNode | None
        :type skip_entries: list[SkipEntry]
        """
        self.height = height
        self.header = header
        self.objects = objects
        self.root = root
        self.skip_entries = skip_entries

    @property
    def block_hash(self):
        return self.header.block_hash

    @property
    def root_multiset(self):
        return self.root.multiset if self.root is not None else Multiset()

    @property
    def is_genesis(self):
        return self.height == 0

    def intra_ads_size(self):
        """
        Bytes of hashes and digests stored by the intra-block index.
        """
        return sum(HASH_SIZE + len(digest_bytes(node.digest)) for node in iter_bfs(self.root))

    def skip_ads_size(self):
        return sum(2 * HASH_SIZE + len(digest_bytes(entry.digest)) for entry in self.skip_entries)

    def to_bytes(self):
        """
        magic | height (u64) | header | objects (u32 count, blobs) | index in pre-order | skip entries
        Every index node is a tag (leaf: object index) followed by its digest blob.
        """
        writer = Writer().raw(BLOCK_MAGIC).u64(self.height).raw(self.header.to_bytes())
        writer.u32(len(self.objects))
        for obj in self.objects:
            writer.blob(obj.canonical_bytes)

        positions = {id(obj): index for index, obj in enumerate(self.objects)}
        writer.u8(0 if self.root is None else 1)
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            if node.is_leaf:
                writer.u8(_LEAF_TAG).u32(positions[id(node.obj)])
            else:
                writer.u8(_NODE_TAG)
                stack.append(node.right)
                stack.append(node.left)
            writer.blob(digest_bytes(node.digest))

        writer.u8(len(self.skip_entries))
        for entry in self.skip_entries:
            writer.u32(entry.distance).raw(entry.pre_skipped_hash).blob(digest_bytes(entry.digest))

        return writer.getvalue()

    @classmethod
    def from_bytes(cls, data, accumulator, domain, skipped_multiset=None):
        """
        :param accumulator: decodes the stored digests
        :param domain: recomputes the leaves' transformed multisets
        :param skipped_multiset: callable (lowest height, highest height) -> summed root multiset,
            required to restore the multisets of skip entries
        :rtype: Block
        """
        try:
            reader = Reader(data)
            reader.expect_magic(BLOCK_MAGIC)
            height = reader.u64()
            header = BlockHeader.from_bytes(reader.raw(HEADER_SIZE))
            objects = [TemporalObject.from_bytes(reader.blob()) for _ in range(reader.u32())]

            root = _read_node(reader, objects, accumulator, domain) if reader.u8() else None

            skip_entries = list()
            for _ in range(reader.u8()):
                distance = reader.u32()
                pre_hash = reader.raw(HASH_SIZE)
                digest = accumulator.value_from_bytes(reader.blob())
                multiset = skipped_multiset(height - distance, height - 1) if skipped_multiset else None
                skip_entries.append(SkipEntry(distance, pre_hash, multiset, digest))
            reader.expect_end()
        except BlockFormatError:
            raise
        except ChainAdsError as e:
            raise BlockFormatError(f"malformed block: {e}") from e

        return cls(height, header, objects, root, skip_entries)

    def __repr__(self):
        return f"<Block {self.height} {self.block_hash.hex()[:12]} objects={len(self.objects)}>"


def _read_node(reader, objects, accumulator, domain):
    tag = reader.u8()
    if tag == _LEAF_TAG:
        obj = objects[reader.u32()]
        digest = accumulator.value_from_bytes(reader.blob())
        return IntraNode.create_leaf(obj, transform_object(obj, domain), digest)
    if tag != _NODE_TAG:
        raise BlockFormatError(f"unknown index node tag {tag}")

    raw_digest = reader.blob()
    left = _read_node(reader, objects, accumulator, domain)
    right = _read_node(reader, objects, accumulator, domain)
    digest = accumulator.value_from_bytes(raw_digest) if raw_digest else None
    return IntraNode.create_node(left, right, digest)


def leading_zero_bits(data):
    value = int.from_bytes(data, "big")
    return len(data) * 8 - value.bit_length()


def mine_header(prev_hash, ts, merkle_root, skip_root, difficulty):
    """
    Toy proof of work: the first nonce whose header hash starts with `difficulty` zero bits.

    :rtype: BlockHeader
    """
    nonce = 0
    while True:
        header = BlockHeader(prev_hash, ts, nonce, merkle_root, skip_root)
        if leading_zero_bits(header.block_hash) >= difficulty:
            return header
        nonce += 1


def build_genesis(difficulty=0, ts=0):
    """
    :rtype: Block
    """
    header = mine_header(ZERO_HASH, ts, ZERO_HASH, skip_list_root([]), difficulty)
    return Block(0, header, [], None, [])


def build_block(objects, prev_block, predecessors, accumulator, config):
    """
    Mine the block following `prev_block`.

    :type objects: list[TemporalObject]
    :type prev_block: Block
    :param predecessors: (block hash, root multiset) of the previous blocks, newest first,
        at least 2^skip_list_length of them when available
    :type accumulator: chainads.crypto.accumulator.Accumulator
    :type config: chainads.config.ChainConfig
    :rtype: Block
    """
    if not objects:
        raise BuildError("a block needs at least one object")
    if any(later.t < earlier.t for earlier, later in zip(objects, objects[1:])):
        raise BuildError("objects must be ordered by timestamp")
    if objects[0].t < prev_block.header.ts:
        raise BuildError(f"object timestamp {objects[0].t} precedes the previous block ({prev_block.header.ts})")

    height = prev_block.height + 1
    root = build_index(objects, accumulator, config.domain, config.index_mode)
    skip_entries = build_skip_list(height, predecessors, accumulator, config.effective_skip_list_length)

    header = mine_header(
        prev_hash=prev_block.block_hash,
        ts=objects[-1].t,
        merkle_root=root.node_hash,
        skip_root=skip_list_root([entry.entry_hash for entry in skip_entries]),
        difficulty=config.difficulty
    )
    logger.debug("mined block %d with %d objects and %d skips", height, len(objects), len(skip_entries))

    return Block(height, header, objects, root, skip_entries)


def window_heights(headers, window):
    """
    Heights of the data blocks whose time span [ts(h-1), ts(h)] intersects the window.
    Timestamps are monotone so those heights are contiguous.

    :type headers: list[BlockHeader]
    :param window: (t_s, t_e)
    :return: (lowest, highest) or None when no block intersects the window
    :rtype: tuple[int, int] | None
    """
    timestamps = [header.ts for header in headers]
    low = bisect_left(timestamps, window[0], 1)
    high = min(bisect_right(timestamps, window[1]), len(headers) - 1)

    return (low, high) if low <= high else None


def span_inside_window(headers, low, high, window):
    """
    Whether the blocks low .. high lie entirely inside the window.
    """
    return window[0] <= headers[low - 1].ts and headers[high].ts <= window[1]


def first_invalid_header(headers, difficulty=0):
    """
    Light client sync step: prev-hash linkage, timestamp monotonicity and proof of work.

    :type headers: list[BlockHeader]
    :return: index of the first failing header, None when the whole list is valid
    :rtype: int | None
    """
    for index, header in enumerate(headers):
        if leading_zero_bits(header.block_hash) < difficulty:
            return index

        if index == 0:
            if header.prev_hash != ZERO_HASH:
                return index
            continue

        previous = headers[index - 1]
        if header.prev_hash != previous.block_hash or header.ts < previous.ts:
            return index

    return None


def validate_headers(headers, difficulty=0):
    """
    :type headers: list[BlockHeader]
    :rtype: bool
    """
    return first_invalid_header(headers, difficulty) is None


def check_headers(headers, difficulty=0):
    """
    :raise HeaderValidationError: carrying the first failing index
    """
    index = first_invalid_header(headers, difficulty)
    if index is not None:
        raise HeaderValidationError(index)


class BlockFormatError(ChainAdsError):
    pass


class HeaderValidationError(ChainAdsError):
    def __init__(self, index):
        super(HeaderValidationError, self).__init__(f"header {index} is invalid")
        self.index = index
