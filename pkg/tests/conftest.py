import pytest

from chainads.crypto.accumulator import Construction
from tests.helpers import build_chain, random_objects, sparse_objects, transparent_accumulator


@pytest.fixture(scope="session")
def acc1():
    return transparent_accumulator(Construction.ACC1)


@pytest.fixture(scope="session")
def acc2():
    return transparent_accumulator(Construction.ACC2)


@pytest.fixture(params=["acc1", "acc2"])
def accumulator(request):
    return transparent_accumulator(Construction.parse(request.param))


@pytest.fixture(scope="module")
def random_chain(tmp_path_factory):
    """
    Acc2 chain of 15 blocks of 4 random objects, every index mode enabled.
    """
    objects = random_objects(60, seed=3)
    return build_chain(tmp_path_factory.mktemp("random-chain"), objects), objects


@pytest.fixture(scope="module")
def acc1_chain(tmp_path_factory):
    objects = random_objects(32, seed=5)
    return build_chain(tmp_path_factory.mktemp("acc1-chain"), objects, construction="acc1"), objects


@pytest.fixture(scope="module")
def sparse_chain(tmp_path_factory):
    """
    Acc2 chain of 40 blocks where only blocks 9 and 30 hold a "Sedan".
    """
    objects = sparse_objects(40, hits=(9, 30))
    return build_chain(tmp_path_factory.mktemp("sparse-chain"), objects, skip_list_length=4), objects


@pytest.fixture(scope="module")
def trend_chains(tmp_path_factory):
    """
    The same 256 blocks under every index mode, only blocks 8k + 1 and 8k + 2 hold a "Sedan":
    three out of four blocks miss it, in runs of six.
    """
    objects = sparse_objects(256, hits=[height for height in range(1, 257) if height % 8 in (1, 2)])
    chains = {
        index_mode: build_chain(
            tmp_path_factory.mktemp(f"trend-{index_mode}"), objects, index_mode=index_mode, skip_list_length=4
        )
        for index_mode in ("nil", "intra", "both")
    }
    return chains, objects
