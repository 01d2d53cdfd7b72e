import os

import pytest

from chainads.chain.block import validate_headers
from chainads.chain.storage import ChainStore, StorageError, block_path, load_headers
from chainads.crypto.accumulator import Construction
from tests.helpers import build_chain, chain_config, random_objects, transparent_params


def test_reopen(tmp_path):
    objects = random_objects(20, seed=8)
    store = build_chain(tmp_path, objects)
    reopened = ChainStore.open(str(tmp_path))

    assert reopened.height == store.height == 5
    assert reopened.headers == store.headers
    assert load_headers(str(tmp_path)) == store.headers
    for height in range(1, 6):
        assert reopened.block(height).root.node_hash == store.block(height).root.node_hash
        assert reopened.block(height).objects == store.block(height).objects
    assert [obj for block in reopened.blocks() for obj in block.objects] == objects


def test_append_after_reopen(tmp_path):
    objects = random_objects(24, seed=9)
    build_chain(tmp_path, objects[:12])
    reopened = ChainStore.open(str(tmp_path))
    reopened.ingest(objects[12:])

    assert reopened.height == 6
    assert validate_headers(reopened.headers)
    assert [entry.distance for entry in reopened.block(6).skip_entries] == [2, 4]


def test_create_errors(tmp_path):
    build_chain(tmp_path, random_objects(4))

    with pytest.raises(StorageError):
        ChainStore.create(str(tmp_path), transparent_params(Construction.ACC2), chain_config())
    with pytest.raises(StorageError):
        ChainStore.create(str(tmp_path / "other"), transparent_params(Construction.ACC1), chain_config("acc2"))
    with pytest.raises(StorageError):
        ChainStore.open(str(tmp_path / "missing"))


def test_missing_and_tampered_blocks(tmp_path):
    build_chain(tmp_path, random_objects(12, seed=4))
    store = ChainStore.open(str(tmp_path))

    with pytest.raises(StorageError):
        store.block(99)

    with open(block_path(str(tmp_path), 1), "rb") as stream:
        first = stream.read()
    with open(block_path(str(tmp_path), 2), "wb") as stream:
        stream.write(first)
    with pytest.raises(StorageError):
        store.block(2)


def test_interval_policy(tmp_path):
    objects = random_objects(30, seed=6)
    store = build_chain(tmp_path, objects, block_policy="interval:10")

    for block in store.blocks():
        assert len({obj.t // 10 for obj in block.objects}) == 1
    assert sum(len(block.objects) for block in store.blocks()) == 30


def test_stats_by_index_mode(tmp_path):
    objects = random_objects(32, seed=10)
    totals = dict()
    for mode in ("nil", "intra", "both"):
        store = build_chain(tmp_path / mode, objects, index_mode=mode)
        rows = store.stats()
        assert [row["height"] for row in rows] == list(range(1, 9))
        totals[mode] = (sum(row["intra_bytes"] for row in rows), sum(row["skip_bytes"] for row in rows))

    assert totals["nil"][0] < totals["intra"][0] == totals["both"][0]
    assert totals["nil"][1] == totals["intra"][1] == 0 < totals["both"][1]


def test_directory_layout(tmp_path):
    build_chain(tmp_path, random_objects(4))
    assert sorted(os.listdir(tmp_path)) == ["blocks", "chain.meta", "headers.bin", "params.bin"]
    assert sorted(os.listdir(tmp_path / "blocks")) == ["00000000.blk", "00000001.blk"]
