import threading
from abc import ABCMeta, abstractmethod
from enum import Enum

from py_ecc import optimized_bls12_381 as bls
from py_ecc.bls.g2_primitives import subgroup_check
from py_ecc.bls.point_compression import compress_G1, compress_G2, decompress_G1, decompress_G2

from chainads.errors import ChainAdsError


class GroupKind(Enum):
    G1 = 1
    G2 = 2
    GT = 3


class GroupElement:
    """
    An element of one of the pairing groups, written multiplicatively:
    `a * b` is the group operation and `a ** k` is exponentiation by an integer.
    """
    __slots__ = ("group", "kind", "value")

    def __init__(self, group, kind, value):
        self.group = group
        self.kind = kind
        self.value = value

    def __mul__(self, other):
        self._check_compatible(other)
        return GroupElement(self.group, self.kind, self.group._operate(self.kind, self.value, other.value))

    def __pow__(self, exponent):
        exponent %= self.group.order
        return GroupElement(self.group, self.kind, self.group._exponentiate(self.kind, self.value, exponent))

    def __eq__(self, other):
        if not isinstance(other, GroupElement) or other.kind != self.kind or other.group.name != self.group.name:
            return False

        return self.group._equals(self.kind, self.value, other.value)

    def __hash__(self):
        return hash((self.kind, self.to_bytes()))

    def to_bytes(self):
        return self.group._serialize(self.kind, self.value)

    def _check_compatible(self, other):
        if other.kind != self.kind or other.group.name != self.group.name:
            raise GroupMismatchError(f"cannot combine {self.kind.name} with {other.kind.name}")

    def __repr__(self):
        return f"<{self.group.name}:{self.kind.name} {self.to_bytes().hex()[:16]}..>"


class PairingGroup(metaclass=ABCMeta):
    """
    Abstract bilinear group description e: G1 x G2 -> GT of prime order.

    Every concrete group counts the pairings it evaluates, which is how verification cost is measured.
    """
    name = None

    def __init__(self):
        self._lock = threading.Lock()
        self._pairings = 0

    @property
    @abstractmethod
    def order(self):
        raise NotImplementedError()

    @abstractmethod
    def generator(self, kind):
        """
        :type kind: GroupKind
        :rtype: GroupElement
        """
        raise NotImplementedError()

    def identity(self, kind):
        return self.generator(kind) ** 0

    def pair(self, g1_element, g2_element):
        """
        Evaluate the bilinear map.

        :type g1_element: GroupElement
        :type g2_element: GroupElement
        :rtype: GroupElement
        """
        if g1_element.kind != GroupKind.G1 or g2_element.kind != GroupKind.G2:
            raise GroupMismatchError("pairing expects (G1, G2) arguments")

        with self._lock:
            self._pairings += 1

        return GroupElement(self, GroupKind.GT, self._pair(g1_element.value, g2_element.value))

    def deserialize(self, kind, data):
        """
        :type kind: GroupKind
        :type data: bytes
        :rtype: GroupElement
        """
        if len(data) != self.element_size(kind):
            raise GroupEncodingError(f"{kind.name} element must be {self.element_size(kind)} bytes")

        return GroupElement(self, kind, self._deserialize(kind, data))

    @property
    def pairings(self):
        with self._lock:
            return self._pairings

    def reset_pairings(self):
        with self._lock:
            self._pairings = 0

    @abstractmethod
    def element_size(self, kind):
        raise NotImplementedError()

    @abstractmethod
    def _operate(self, kind, a, b):
        raise NotImplementedError()

    @abstractmethod
    def _exponentiate(self, kind, a, exponent):
        raise NotImplementedError()

    @abstractmethod
    def _equals(self, kind, a, b):
        raise NotImplementedError()

    @abstractmethod
    def _pair(self, a, b):
        raise NotImplementedError()

    @abstractmethod
    def _serialize(self, kind, a):
        raise NotImplementedError()

    @abstractmethod
    def _deserialize(self, kind, data):
        raise NotImplementedError()


class Bls12381Group(PairingGroup):
    """
    BLS12-381 asymmetric pairing group backed by `py_ecc`.
    Points are kept in projective coordinates and compressed on serialization.
    """
    name = "bls12-381"

    _SIZES = {GroupKind.G1: 48, GroupKind.G2: 96, GroupKind.GT: 12 * 48}

    @property
    def order(self):
        return bls.curve_order

    def generator(self, kind):
        if kind == GroupKind.G1:
            return GroupElement(self, kind, bls.G1)
        elif kind == GroupKind.G2:
            return GroupElement(self, kind, bls.G2)

        return GroupElement(self, kind, bls.pairing(bls.G2, bls.G1))

    def identity(self, kind):
        if kind == GroupKind.G1:
            return GroupElement(self, kind, bls.Z1)
        elif kind == GroupKind.G2:
            return GroupElement(self, kind, bls.Z2)

        return GroupElement(self, kind, bls.FQ12.one())

    def element_size(self, kind):
        return self._SIZES[kind]

    def _operate(self, kind, a, b):
        if kind == GroupKind.GT:
            return a * b

        return bls.add(a, b)

    def _exponentiate(self, kind, a, exponent):
        if kind == GroupKind.GT:
            return a ** exponent

        return bls.multiply(a, exponent)

    def _equals(self, kind, a, b):
        if kind == GroupKind.GT:
            return a == b

        return bls.eq(a, b)

    def _pair(self, a, b):
        # py_ecc takes the G2 argument first
        return bls.pairing(b, a)

    def _serialize(self, kind, a):
        if kind == GroupKind.G1:
            return compress_G1(a).to_bytes(48, "big")
        elif kind == GroupKind.G2:
            z1, z2 = compress_G2(a)
            return z1.to_bytes(48, "big") + z2.to_bytes(48, "big")

        return b"".join(int(coefficient).to_bytes(48, "big") for coefficient in a.coeffs)

    def _deserialize(self, kind, data):
        try:
            if kind == GroupKind.G1:
                point = decompress_G1(int.from_bytes(data, "big"))
            elif kind == GroupKind.G2:
                point = decompress_G2((int.from_bytes(data[:48], "big"), int.from_bytes(data[48:], "big")))
            else:
                raise GroupEncodingError("GT elements are never deserialized")
        except (ValueError, AssertionError) as e:
            raise GroupEncodingError(f"invalid compressed {kind.name} point") from e

        # decompression only checks the curve equation
        if not subgroup_check(point):
            raise GroupEncodingError(f"{kind.name} point outside the prime order subgroup")

        return point


class ExponentGroup(PairingGroup):
    """
    INSECURE group where every element is represented by its discrete logarithm.

    g^a is stored as `a`, the group operation is addition modulo the order and e(g^a, g^b) = gt^(ab).
    It satisfies every algebraic identity of a real pairing group while costing a few integer operations,
    which makes exhaustive property tests affordable. Never use it for anything but tests.
    """
    name = "insecure-exponent"

    @property
    def order(self):
        return bls.curve_order

    def generator(self, kind):
        return GroupElement(self, kind, 1)

    def identity(self, kind):
        return GroupElement(self, kind, 0)

    def element_size(self, kind):
        return 32

    def _operate(self, kind, a, b):
        return (a + b) % self.order

    def _exponentiate(self, kind, a, exponent):
        return (a * exponent) % self.order

    def _equals(self, kind, a, b):
        return a % self.order == b % self.order

    def _pair(self, a, b):
        return (a * b) % self.order

    def _serialize(self, kind, a):
        return (a % self.order).to_bytes(32, "big")

    def _deserialize(self, kind, data):
        value = int.from_bytes(data, "big")
        if value >= self.order:
            raise GroupEncodingError("exponent out of range")

        return value


_GROUPS = {
    Bls12381Group.name: Bls12381Group,
    ExponentGroup.name: ExponentGroup,
}


def get_group(name):
    """
    Instantiate a pairing group by its identifier.

    :type name: str
    :rtype: PairingGroup
    """
    if name not in _GROUPS:
        raise UnknownGroupError(f"unknown group {name!r}, expected one of {sorted(_GROUPS)}")

    return _GROUPS[name]()


class GroupMismatchError(ChainAdsError):
    pass


class GroupEncodingError(ChainAdsError):
    pass


class UnknownGroupError(ChainAdsError):
    pass
