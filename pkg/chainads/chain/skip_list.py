from chainads.chain.tree import hash_concat, digest_bytes
from chainads.crypto.multiset import Multiset


def skip_distances(length):
    """
    :return: k = 2, 4, ..., 2^length
    :rtype: list[int]
    """
    return [2 ** exponent for exponent in range(1, length + 1)]


def pre_skipped_hash(block_hashes):
    """
    :param block_hashes: hashes of the skipped blocks, newest first
    :rtype: bytes
    """
    return hash_concat(*block_hashes)


def skip_entry_hash(pre_hash, digest):
    return hash_concat(pre_hash, digest_bytes(digest))


def skip_list_root(entry_hashes):
    """
    H(hash_L2 | hash_L4 | ...), H of the empty string for an empty list.
    """
    return hash_concat(*entry_hashes)


class SkipEntry:
    """
    Skip of distance k stored in block i: it summarizes the k blocks i-k .. i-1.
        W_Lk = SIGMA{W_j} over the skipped blocks' roots
        hash_Lk = H(PreSkippedHash | AttDigest_Lk)
    """
    __slots__ = ("distance", "pre_skipped_hash", "multiset", "digest", "entry_hash")

    def __init__(self, distance, pre_skipped_hash, multiset, digest):
        self.distance = distance
        self.pre_skipped_hash = pre_skipped_hash
        self.multiset = multiset
        self.digest = digest
        self.entry_hash = skip_entry_hash(pre_skipped_hash, digest)

    def covered_heights(self, height):
        """
        :param height: height of the block owning the entry
        :return: (lowest, highest) skipped heights
        """
        return height - self.distance, height - 1

    def __repr__(self):
        return f"<SkipEntry k={self.distance} {self.entry_hash.hex()[:12]}>"


def build_skip_list(height, predecessors, accumulator, length):
    """
    Build the skip entries of the block at `height`.
    Distances reaching the genesis block are omitted.

    :param height: height of the new block
    :param predecessors: (block hash, root multiset) of heights height-1, height-2, ... (newest first)
    :type predecessors: list[tuple[bytes, Multiset]]
    :type accumulator: chainads.crypto.accumulator.Accumulator
    :param length: number of distances
    :rtype: list[SkipEntry]
    """
    entries = list()
    for distance in skip_distances(length):
        if height - distance < 1 or len(predecessors) < distance:
            break

        skipped = predecessors[:distance]
        multiset = Multiset.sum(root_multiset for _, root_multiset in skipped)
        entries.append(SkipEntry(
            distance=distance,
            pre_skipped_hash=pre_skipped_hash([block_hash for block_hash, _ in skipped]),
            multiset=multiset,
            digest=accumulator.setup(multiset)
        ))

    return entries
