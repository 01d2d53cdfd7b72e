import json
import logging
from dataclasses import dataclass
from functools import cached_property

from chainads.chain.tree import hash_concat
from chainads.errors import ChainAdsError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TemporalObject:
    """
    o = <t, V, W>: a timestamp, a numeric vector and a keyword multiset.
    The object id is the hash of the canonical serialization.
    """
    t: int
    vector: tuple
    keywords: tuple

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(self.vector))
        # keyword multisets have no order
        object.__setattr__(self, "keywords", tuple(sorted(self.keywords)))

    @cached_property
    def canonical_bytes(self):
        """
        Compact JSON with sorted keywords, floats written with their shortest round-trip representation.

        :rtype: bytes
        """
        return json.dumps(
            {"t": self.t, "v": list(self.vector), "w": list(self.keywords)},
            separators=(",", ":"),
            ensure_ascii=False,
        ).encode("utf-8")

    @cached_property
    def object_id(self):
        return hash_concat(self.canonical_bytes)

    @classmethod
    def from_bytes(cls, data):
        """
        :type data: bytes
        :rtype: TemporalObject
        """
        try:
            obj = _object_from_record(json.loads(data.decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError, ObjectFormatError) as e:
            raise ObjectFormatError(f"invalid object encoding: {e}") from e

        if obj.canonical_bytes != data:
            raise ObjectFormatError("object bytes are not canonical")

        return obj


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _object_from_record(record):
    if not isinstance(record, dict) or set(record) != {"t", "v", "w"}:
        raise ObjectFormatError('an object is a JSON object with exactly the "t", "v" and "w" keys')

    t, vector, keywords = record["t"], record["v"], record["w"]
    if not isinstance(t, int) or isinstance(t, bool) or t < 0:
        raise ObjectFormatError(f"timestamp must be a non negative integer, got {t!r}")
    if not isinstance(vector, list) or not all(_is_number(value) for value in vector):
        raise ObjectFormatError("v must be a list of numbers")
    if not isinstance(keywords, list) or not all(isinstance(keyword, str) for keyword in keywords):
        raise ObjectFormatError("w must be a list of strings")

    return TemporalObject(t=t, vector=tuple(vector), keywords=tuple(keywords))


def read_objects(lines, dimensions=None):
    """
    Parse JSON lines objects: {"t": 1489536000, "v": [40.7, -73.9], "w": ["coffee", "shop"]}.
    Blank lines are skipped, timestamps must be non decreasing.

    :param lines: iterable of text lines (an open file works)
    :param dimensions: expected vector length, if known
    :rtype: list[TemporalObject]
    :raise IngestionError: with the 1-based line number of the first malformed line
    """
    objects = list()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue

        try:
            obj = _object_from_record(json.loads(line))
        except (json.JSONDecodeError, ObjectFormatError) as e:
            raise IngestionError(line_number, str(e)) from e

        if dimensions is not None and len(obj.vector) != dimensions:
            raise IngestionError(line_number, f"expected {dimensions} numeric attributes, got {len(obj.vector)}")
        if objects and obj.t < objects[-1].t:
            raise IngestionError(line_number, f"timestamp {obj.t} precedes {objects[-1].t}")

        objects.append(obj)

    logger.debug("read %d objects", len(objects))
    return objects


def cut_blocks(objects, policy):
    """
    Split time ordered objects into block bodies.

    :type objects: list[TemporalObject]
    :param policy: ("count", objects per block) or ("interval", seconds per block)
    :rtype: list[list[TemporalObject]]
    """
    kind, value = policy
    if kind == "count":
        return [objects[index:index + value] for index in range(0, len(objects), value)]

    blocks = list()
    current_slot = None
    for obj in objects:
        slot = obj.t // value
        if slot != current_slot:
            blocks.append(list())
            current_slot = slot
        blocks[-1].append(obj)

    return blocks


class ObjectFormatError(ChainAdsError):
    pass


class IngestionError(ChainAdsError):
    def __init__(self, line_number, message):
        super(IngestionError, self).__init__(f"line {line_number}: {message}")
        self.line_number = line_number
