from collections import namedtuple
from hashlib import sha256

from chainads.errors import ChainAdsError


KEYWORD_TAG = 0x00

Element = namedtuple("Element", ["value", "origin"])


def attribute_bytes(attribute):
    """
    Canonical byte string of an attribute.
    Keywords are tagged with 0x00, prefix elements carry their own dimension tag byte (see `PrefixElement`).

    :type attribute: str | PrefixElement
    :rtype: bytes
    """
    if isinstance(attribute, str):
        return bytes([KEYWORD_TAG]) + attribute.encode("utf-8")

    to_bytes = getattr(attribute, "to_bytes", None)
    if to_bytes is None:
        raise EncodingError(f"unsupported attribute type {type(attribute).__name__}")

    return to_bytes()


def attribute_hash(attribute, salt=b""):
    """
    :rtype: int
    """
    digest = sha256(salt + attribute_bytes(attribute)).digest()
    return int.from_bytes(digest, "big")


class ElementEncoder:
    """
    Map attributes to accumulator elements in [1, universe - 1] by hashing (salted per chain).

    Acc1 uses universe = p (the group order), Acc2 uses universe = q (the capacity), where distinct
    attributes may collide; a collision can only make a true disjointness unprovable, never forge one.
    """
    def __init__(self, universe, salt=b""):
        """
        :param universe: exclusive upper bound of encoded values
        :type universe: int
        :param salt: per-chain salt mixed into the hash
        :type salt: bytes
        """
        if universe < 2:
            raise EncodingError("element universe must contain at least one non-zero value")

        self._universe = universe
        self._salt = salt
        self._cache = dict()

    def encode(self, attribute):
        """
        :rtype: Element
        """
        element = self._cache.get(attribute)
        if element is None:
            value = attribute_hash(attribute, self._salt) % (self._universe - 1) + 1
            element = Element(value=value, origin=attribute)
            self._cache[attribute] = element

        return element

    def encode_multiset(self, multiset):
        """
        Encode every attribute of a multiset, merging multiplicities of colliding attributes.

        :type multiset: Multiset
        :return: encoded value -> multiplicity
        :rtype: dict[int, int]
        """
        values = dict()
        for attribute, multiplicity in multiset.items():
            value = self.encode(attribute).value
            values[value] = values.get(value, 0) + multiplicity

        return values

    @property
    def universe(self):
        return self._universe

    @property
    def salt(self):
        return self._salt


class EncodingError(ChainAdsError):
    pass
