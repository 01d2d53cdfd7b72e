import random
from collections import Counter

from chainads.chain.objects import TemporalObject
from chainads.chain.storage import ChainStore
from chainads.config import ChainConfig
from chainads.crypto.accumulator import Construction, create_accumulator, keygen


# Fast and INSECURE, every test but the pairing ones runs on it
TEST_GROUP = "insecure-exponent"
# Large enough for Acc2 element encodings never to collide in tests (transparent params derive powers lazily)
TEST_CAPACITY = 2 ** 40

VEHICLES = ("Sedan", "Van", "Truck")
BRANDS = ("Benz", "BMW", "Audi", "Ford")


def transparent_params(construction, capacity=TEST_CAPACITY, seed=7):
    return keygen(construction, capacity, seed=seed, group=TEST_GROUP, transparent=True)


def transparent_accumulator(construction, capacity=TEST_CAPACITY, seed=7, salt=b""):
    return create_accumulator(transparent_params(construction, capacity, seed), salt=salt)


def chain_config(construction="acc2", **overrides):
    values = dict(
        construction=construction,
        capacity=TEST_CAPACITY,
        group=TEST_GROUP,
        widths=(4, 4),
        index_mode="both",
        skip_list_length=3,
        block_policy="count:4",
    )
    values.update(overrides)
    return ChainConfig(**values)


def build_chain(directory, objects, construction="acc2", **overrides):
    """
    :rtype: ChainStore
    """
    config = chain_config(construction, **overrides)
    params = transparent_params(Construction.parse(construction), config.capacity)
    store = ChainStore.create(str(directory), params, config)
    store.ingest(objects)
    return store


def random_objects(count, seed=0, start=100, widths=(4, 4)):
    rng = random.Random(seed)
    objects = list()
    t = start
    for _ in range(count):
        t += rng.randint(0, 3)
        vector = tuple(rng.randint(0, 2 ** width - 1) for width in widths)
        objects.append(TemporalObject(t, vector, (rng.choice(VEHICLES), rng.choice(BRANDS))))

    return objects


def sparse_objects(blocks, per_block=4, hits=(), start=100):
    """
    Objects of `blocks` full blocks without any "Sedan", except one "Sedan" object in each block of `hits`.
    """
    objects = list()
    for height in range(1, blocks + 1):
        for index in range(per_block):
            t = start + 10 * height + index
            vehicle = "Sedan" if height in hits and index == 0 else "Van"
            objects.append(TemporalObject(t, (index % 16, height % 16), (vehicle, BRANDS[(height + index) % len(BRANDS)])))

    return objects


def expected_results(objects, query, domain):
    """
    Brute force oracle: canonical bytes of every object satisfying the query.
    """
    return Counter(obj.canonical_bytes for obj in objects if query.evaluate(obj.t, obj.vector, obj.keywords, domain))


def result_counter(results):
    return Counter(obj.canonical_bytes for obj in results)


def random_query_text(rng, low=90, high=400, widths=(4, 4)):
    """
    Window query with a random range, a random keyword condition or both.
    """
    start = rng.randint(low, high)
    parts = [f"window=[{start},{rng.randint(start, high)}]"]

    with_range, with_keywords = rng.choice([(True, False), (False, True), (True, True)])
    if with_range:
        bounds = [sorted(rng.randint(0, 2 ** width - 1) for _ in range(2)) for width in widths]
        lower = ",".join(str(bound[0]) for bound in bounds)
        upper = ",".join(str(bound[1]) for bound in bounds)
        parts.append(f"range=[({lower}),({upper})]")
    if with_keywords:
        vehicles = " OR ".join(f'"{vehicle}"' for vehicle in rng.sample(VEHICLES, rng.randint(1, 2)))
        brands = " OR ".join(f'"{brand}"' for brand in rng.sample(BRANDS, rng.randint(1, 3)))
        parts.append(f"bool=({vehicles}) AND ({brands})" if rng.random() < 0.7 else f"bool={vehicles}")

    return " ".join(parts)
