import logging
import os
import threading
from collections import OrderedDict

from chainads.chain.block import HEADER_SIZE, Block, BlockHeader, BlockFormatError, build_block, build_genesis
from chainads.chain.objects import cut_blocks
from chainads.codec import Reader, Writer
from chainads.config import ChainConfig
from chainads.crypto.accumulator import PublicParams, create_accumulator
from chainads.crypto.multiset import Multiset
from chainads.errors import ChainAdsError


logger = logging.getLogger(__name__)

PARAMS_FILE = "params.bin"
META_FILE = "chain.meta"
HEADERS_FILE = "headers.bin"
BLOCKS_DIR = "blocks"
HEADERS_MAGIC = b"CADS-HD\x01"
BLOCK_CACHE_SIZE = 256


def atomic_write(path, data):
    """
    Write to a temporary sibling and rename it over the target, readers see either the old or the new file.
    """
    temporary = f"{path}.tmp"
    with open(temporary, "wb") as stream:
        stream.write(data)
        stream.flush()
        os.fsync(stream.fileno())
    os.replace(temporary, path)


def block_path(directory, height):
    return os.path.join(directory, BLOCKS_DIR, f"{height:08d}.blk")


def encode_headers(headers):
    writer = Writer().raw(HEADERS_MAGIC).u64(len(headers))
    for header in headers:
        writer.raw(header.to_bytes())

    return writer.getvalue()


def decode_headers(data):
    """
    :rtype: list[BlockHeader]
    """
    try:
        reader = Reader(data)
        reader.expect_magic(HEADERS_MAGIC)
        headers = [BlockHeader.from_bytes(reader.raw(HEADER_SIZE)) for _ in range(reader.u64())]
        reader.expect_end()
    except ChainAdsError as e:
        raise StorageError(f"malformed headers file: {e}") from e

    return headers


def load_headers(directory):
    """
    Light client view of a chain: the header list only.

    :rtype: list[BlockHeader]
    """
    path = os.path.join(directory, HEADERS_FILE)
    if not os.path.isfile(path):
        raise StorageError(f"no headers file at {path}")

    with open(path, "rb") as stream:
        return decode_headers(stream.read())


def load_config(directory):
    """
    :rtype: ChainConfig
    """
    meta_path = os.path.join(directory, META_FILE)
    if not os.path.isfile(meta_path):
        raise StorageError(f"{directory} is not a chain directory")

    with open(meta_path, "r", encoding="utf-8") as stream:
        return ChainConfig.from_meta(stream.read())


def load_params(path):
    """
    :rtype: PublicParams
    """
    with open(path, "rb") as stream:
        return PublicParams.from_bytes(stream.read())


class ChainStore:
    """
    Append-only block store of one chain directory:
        params.bin            public params
        chain.meta            key=value configuration
        blocks/NNNNNNNN.blk   one file per block, genesis included
        headers.bin           every header, for light clients

    A single writer appends blocks, readers may run concurrently: a block becomes visible once
    the headers file listing it has been renamed into place.
    """
    def __init__(self, directory, params, config, trapdoor_shortcut=True):
        """
        :type directory: str
        :type params: PublicParams
        :type config: ChainConfig
        """
        if params.construction != config.construction_kind:
            raise StorageError(
                f"params are {params.construction.label}, the configuration expects {config.construction}"
            )

        self.directory = directory
        self.params = params
        self.config = config
        self.domain = config.domain
        self.accumulator = create_accumulator(params, salt=config.salt, trapdoor_shortcut=trapdoor_shortcut)

        self._lock = threading.RLock()
        self._headers = list()
        self._cache = OrderedDict()
        self._root_multisets = dict()

    @classmethod
    def create(cls, directory, params, config, trapdoor_shortcut=True):
        """
        Initialize a new chain directory holding the genesis block.

        :rtype: ChainStore
        """
        config.validate()
        if os.path.exists(os.path.join(directory, META_FILE)):
            raise StorageError(f"{directory} already holds a chain")

        os.makedirs(os.path.join(directory, BLOCKS_DIR), exist_ok=True)
        atomic_write(os.path.join(directory, PARAMS_FILE), params.to_bytes())
        atomic_write(os.path.join(directory, META_FILE), config.to_meta().encode("utf-8"))

        store = cls(directory, params, config, trapdoor_shortcut=trapdoor_shortcut)
        store._persist(build_genesis(config.difficulty))
        logger.info("created %s chain at %s (index mode %s)", config.construction, directory, config.index_mode)

        return store

    @classmethod
    def open(cls, directory, trapdoor_shortcut=True):
        """
        :rtype: ChainStore
        """
        config = load_config(directory)
        store = cls(directory, load_params(os.path.join(directory, PARAMS_FILE)), config, trapdoor_shortcut)
        store._headers = load_headers(directory)
        if not store._headers:
            raise StorageError(f"{directory} has no genesis block")

        logger.info("opened chain at %s, height %d", directory, store.height)
        return store

    @property
    def height(self):
        with self._lock:
            return len(self._headers) - 1

    @property
    def headers(self):
        """
        :rtype: list[BlockHeader]
        """
        with self._lock:
            return list(self._headers)

    def header(self, height):
        with self._lock:
            return self._headers[height]

    def block(self, height):
        """
        :rtype: Block
        """
        with self._lock:
            if not 0 <= height < len(self._headers):
                raise StorageError(f"no block at height {height}")

            block = self._cache.get(height)
            if block is not None:
                self._cache.move_to_end(height)
                return block

        with open(block_path(self.directory, height), "rb") as stream:
            data = stream.read()

        try:
            block = Block.from_bytes(data, self.accumulator, self.domain, self.skipped_multiset)
        except BlockFormatError as e:
            raise StorageError(f"block {height}: {e}") from e

        if block.header != self.header(height):
            raise StorageError(f"block {height} does not match its header")

        with self._lock:
            self._remember(block)

        return block

    def blocks(self, low=1, high=None):
        """
        :rtype: iterator[Block]
        """
        high = self.height if high is None else high
        for height in range(low, high + 1):
            yield self.block(height)

    def root_multiset(self, height):
        """
        :rtype: Multiset
        """
        with self._lock:
            multiset = self._root_multisets.get(height)
        if multiset is None:
            multiset = self.block(height).root_multiset
            with self._lock:
                self._root_multisets[height] = multiset

        return multiset

    def skipped_multiset(self, low, high):
        """
        Multiset sum of the roots of heights low .. high.
        """
        return Multiset.sum(self.root_multiset(height) for height in range(low, high + 1))

    def append(self, objects):
        """
        Mine and persist one block.

        :type objects: list[TemporalObject]
        :rtype: Block
        """
        with self._lock:
            prev_block = self.block(self.height)
            reach = 2 ** self.config.effective_skip_list_length if self.config.uses_skip_list else 0
            predecessors = [
                (self._headers[height].block_hash, self.root_multiset(height))
                for height in range(self.height, max(0, self.height - reach), -1)
            ]

            block = build_block(objects, prev_block, predecessors, self.accumulator, self.config)
            self._persist(block)

        logger.info("appended block %d (%d objects, %d skips)", block.height, len(objects), len(block.skip_entries))
        return block

    def ingest(self, objects):
        """
        Cut the objects into blocks with the configured policy and append them.

        :rtype: list[Block]
        """
        return [self.append(body) for body in cut_blocks(objects, self.config.parsed_block_policy())]

    def stats(self):
        """
        Per block ADS sizes.

        :rtype: list[dict]
        """
        rows = list()
        for block in self.blocks(1):
            rows.append({
                "height": block.height,
                "objects": len(block.objects),
                "intra_bytes": block.intra_ads_size(),
                "skip_bytes": block.skip_ads_size(),
                "skips": len(block.skip_entries),
            })

        return rows

    def _persist(self, block):
        if block.height != len(self._headers):
            raise StorageError(f"expected block {len(self._headers)}, got {block.height}")

        atomic_write(block_path(self.directory, block.height), block.to_bytes())
        atomic_write(os.path.join(self.directory, HEADERS_FILE), encode_headers(self._headers + [block.header]))
        self._headers.append(block.header)
        self._root_multisets[block.height] = block.root_multiset
        self._remember(block)

    def _remember(self, block):
        self._cache[block.height] = block
        self._cache.move_to_end(block.height)
        while len(self._cache) > BLOCK_CACHE_SIZE:
            self._cache.popitem(last=False)


class StorageError(ChainAdsError):
    pass
