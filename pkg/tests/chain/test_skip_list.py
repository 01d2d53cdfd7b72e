from chainads.chain.skip_list import build_skip_list, pre_skipped_hash, skip_distances, skip_list_root
from chainads.chain.tree import hash_concat
from chainads.crypto.multiset import Multiset


def predecessors(count):
    return [(bytes([height]) * 32, Multiset([f"k{height}"])) for height in range(count, 0, -1)]


def test_skip_distances():
    assert skip_distances(3) == [2, 4, 8]
    assert skip_distances(0) == []


def test_distances_reaching_genesis_are_omitted(acc2):
    assert [entry.distance for entry in build_skip_list(5, predecessors(4), acc2, 3)] == [2, 4]
    assert [entry.distance for entry in build_skip_list(3, predecessors(2), acc2, 3)] == [2]
    assert build_skip_list(2, predecessors(1), acc2, 3) == []
    assert [entry.distance for entry in build_skip_list(9, predecessors(8), acc2, 3)] == [2, 4, 8]


def test_skip_entry(acc2):
    preds = predecessors(4)
    entry = build_skip_list(5, preds, acc2, 2)[1]

    assert entry.covered_heights(5) == (1, 4)
    assert entry.multiset == Multiset(["k1", "k2", "k3", "k4"])
    assert entry.digest == acc2.setup(entry.multiset)
    assert entry.pre_skipped_hash == pre_skipped_hash([block_hash for block_hash, _ in preds])
    assert entry.entry_hash == hash_concat(entry.pre_skipped_hash, entry.digest.to_bytes())


def test_chain_skip_entries(random_chain):
    store, _ = random_chain
    block = store.block(15)

    assert [entry.distance for entry in block.skip_entries] == [2, 4, 8]
    for entry in block.skip_entries:
        low, high = entry.covered_heights(15)
        assert entry.multiset == store.skipped_multiset(low, high)
        assert entry.pre_skipped_hash == pre_skipped_hash(
            [store.header(height).block_hash for height in range(high, low - 1, -1)]
        )
    assert block.header.skip_list_root == skip_list_root([entry.entry_hash for entry in block.skip_entries])
    assert store.block(2).skip_entries == []
