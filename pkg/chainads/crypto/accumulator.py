import random
import secrets
import threading
from abc import ABCMeta, abstractmethod
from collections import namedtuple
from enum import Enum

from chainads.codec import Reader, Writer
from chainads.crypto.encoding import ElementEncoder
from chainads.crypto.groups import GroupKind, get_group
from chainads.crypto.polynomial import Polynomial, extended_gcd, field_inverse
from chainads.errors import ChainAdsError
from chainads.profiler import Counters


PARAMS_MAGIC = b"CADS-PP\x01"
NO_GAP = 2 ** 64 - 1
DEFAULT_MAX_CAPACITY = 2 ** 20


class Construction(Enum):
    ACC1 = 1
    ACC2 = 2

    @classmethod
    def parse(cls, name):
        """
        :param name: "acc1" / "acc2" (case insensitive)
        :rtype: Construction
        """
        try:
            return cls[name.upper()]
        except KeyError:
            raise SetupError(f"unknown construction {name!r}") from None

    @property
    def label(self):
        return self.name.lower()


class PublicParams:
    """
    Public key of a multiset accumulator.

    Powers g^(s^i) are published in both source groups (the pairing is asymmetric):
        * Acc1 - G1 and G2 powers for i in [0, q].
        * Acc2 - G1 powers for i in [0, 2q - 2] except i = q (the gap), G2 powers for i in [0, q - 1].

    Transparent params keep the trapdoor s and derive the powers lazily. They are INSECURE
    and only exist for tests and local experiments.
    """
    def __init__(self, construction, group, capacity, g1_powers=None, g2_powers=None, trapdoor=None):
        """
        :type construction: Construction
        :type group: chainads.crypto.groups.PairingGroup
        :param capacity: q
        :type capacity: int
        :param g1_powers: eager G1 powers by index, None at the gap (omitted for transparent params)
        :type g1_powers: list[GroupElement | None]
        :param g2_powers: eager G2 powers by index
        :type g2_powers: list[GroupElement]
        :param trapdoor: the secret s, transparent params only
        :type trapdoor: int | None
        """
        self.construction = construction
        self.group = group
        self.capacity = capacity

        self._trapdoor = trapdoor
        self._g1_powers = g1_powers
        self._g2_powers = g2_powers
        self._lazy_powers = dict()
        self._lock = threading.Lock()

    @property
    def is_transparent(self):
        return self._trapdoor is not None

    @property
    def trapdoor(self):
        """
        The secret exponent, only known to transparent params.
        """
        if self._trapdoor is None:
            raise SetupError("the trapdoor was discarded by the setup ceremony")

        return self._trapdoor

    @property
    def gap(self):
        """
        Index of the missing G1 power, None for Acc1.
        """
        return self.capacity if self.construction == Construction.ACC2 else None

    @property
    def max_g1_index(self):
        return self.capacity if self.construction == Construction.ACC1 else 2 * self.capacity - 2

    @property
    def max_g2_index(self):
        return self.capacity if self.construction == Construction.ACC1 else self.capacity - 1

    def g1_power(self, index):
        """
        :return: g1^(s^index)
        :rtype: GroupElement
        """
        if index < 0 or index > self.max_g1_index or index == self.gap:
            raise MissingPowerError(f"G1 power {index} is not published")

        return self._power(GroupKind.G1, index, self._g1_powers)

    def g2_power(self, index):
        """
        :return: g2^(s^index)
        :rtype: GroupElement
        """
        if index < 0 or index > self.max_g2_index:
            raise MissingPowerError(f"G2 power {index} is not published")

        return self._power(GroupKind.G2, index, self._g2_powers)

    @property
    def powers_count(self):
        """
        Number of published powers per group (the gap excluded).

        :rtype: tuple[int, int]
        """
        g1_count = self.max_g1_index + 1 - (1 if self.gap is not None else 0)
        return g1_count, self.max_g2_index + 1

    def to_bytes(self):
        """
        Layout: magic | construction (u8) | q (u64) | group name | transparent flag (u8) |
                transparent: trapdoor (32 bytes)
                otherwise:   gap index (u64, 2^64-1 for none) | G1 powers in index order | G2 powers in index order
        """
        writer = Writer().raw(PARAMS_MAGIC).u8(self.construction.value).u64(self.capacity).text(self.group.name)
        if self.is_transparent:
            return writer.u8(1).raw(self._trapdoor.to_bytes(32, "big")).getvalue()

        writer.u8(0).u64(NO_GAP if self.gap is None else self.gap)
        for index in range(self.max_g1_index + 1):
            if index != self.gap:
                writer.raw(self._g1_powers[index].to_bytes())
        for index in range(self.max_g2_index + 1):
            writer.raw(self._g2_powers[index].to_bytes())

        return writer.getvalue()

    @classmethod
    def from_bytes(cls, data):
        """
        :type data: bytes
        :rtype: PublicParams
        """
        try:
            reader = Reader(data)
            reader.expect_magic(PARAMS_MAGIC)
            construction = Construction(reader.u8())
            capacity = reader.u64()
            group = get_group(reader.text())

            if reader.u8():
                trapdoor = int.from_bytes(reader.raw(32), "big")
                reader.expect_end()
                return cls(construction, group, capacity, trapdoor=trapdoor)

            params = cls(construction, group, capacity)
            gap = reader.u64()
            if gap != (NO_GAP if params.gap is None else params.gap):
                raise ParamsFormatError(f"gap marker {gap} does not match the construction")

            g1_size, g2_size = group.element_size(GroupKind.G1), group.element_size(GroupKind.G2)
            params._g1_powers = [
                None if index == params.gap else group.deserialize(GroupKind.G1, reader.raw(g1_size))
                for index in range(params.max_g1_index + 1)
            ]
            params._g2_powers = [
                group.deserialize(GroupKind.G2, reader.raw(g2_size))
                for _ in range(params.max_g2_index + 1)
            ]
            reader.expect_end()
        except ParamsFormatError:
            raise
        except (ChainAdsError, ValueError) as e:
            raise ParamsFormatError(f"malformed public params: {e}") from e

        return params

    def check_consistency(self, trials=8, seed=None):
        """
        Sample index pairs a + b = c + d and check e(g1^(s^a), g2^(s^b)) == e(g1^(s^c), g2^(s^d)).

        :rtype: bool
        """
        rng = random.Random(seed)
        checked = 0
        while checked < trials:
            a, c = rng.randint(0, self.max_g1_index), rng.randint(0, self.max_g1_index)
            b = rng.randint(0, self.max_g2_index)
            d = a + b - c
            if self.gap in (a, c) or not 0 <= d <= self.max_g2_index:
                continue

            checked += 1
            left = self.group.pair(self.g1_power(a), self.g2_power(b))
            right = self.group.pair(self.g1_power(c), self.g2_power(d))
            if left != right:
                return False

        return True

    def _power(self, kind, index, eager_powers):
        if eager_powers is not None:
            return eager_powers[index]

        key = (kind, index)
        with self._lock:
            element = self._lazy_powers.get(key)
        if element is None:
            element = self.group.generator(kind) ** pow(self._trapdoor, index, self.group.order)
            with self._lock:
                self._lazy_powers[key] = element

        return element

    def __eq__(self, other):
        if not isinstance(other, PublicParams):
            return False

        return (self.construction, self.capacity, self.group.name, self._trapdoor) == \
            (other.construction, other.capacity, other.group.name, other._trapdoor) and \
            self._g1_powers == other._g1_powers and self._g2_powers == other._g2_powers

    def __repr__(self):
        mode = "transparent" if self.is_transparent else "sealed"
        return f"PublicParams({self.construction.label}, q={self.capacity}, {self.group.name}, {mode})"


def keygen(construction, capacity, seed=None, group="bls12-381", transparent=False,
           max_capacity=DEFAULT_MAX_CAPACITY):
    """
    Setup ceremony: sample the trapdoor s, publish its powers and forget it.

    Time Complexity: O(q) group exponentiations (O(1) for transparent params)

    :type construction: Construction
    :param capacity: q, at least 2
    :type capacity: int
    :param seed: reproducible ceremonies (tests only)
    :param group: pairing group identifier
    :param transparent: keep s and derive powers lazily (INSECURE)
    :param max_capacity: memory budget for the eager power tables
    :rtype: PublicParams
    """
    if capacity < 2:
        raise SetupError(f"capacity must be at least 2, got {capacity}")
    if not transparent and capacity > max_capacity:
        raise SetupError(f"capacity {capacity} exceeds the power table budget ({max_capacity})")

    pairing_group = get_group(group)
    order = pairing_group.order
    if seed is None:
        trapdoor = secrets.randbelow(order - 2) + 2
    else:
        trapdoor = random.Random(seed).randrange(2, order)

    params = PublicParams(construction, pairing_group, capacity, trapdoor=trapdoor)
    if transparent:
        return params

    g1_powers = [
        None if index == params.gap else params.g1_power(index)
        for index in range(params.max_g1_index + 1)
    ]
    g2_powers = [params.g2_power(index) for index in range(params.max_g2_index + 1)]

    return PublicParams(construction, pairing_group, capacity, g1_powers=g1_powers, g2_powers=g2_powers)


class AccValue(namedtuple("AccValue", ["construction", "d_a", "d_b"])):
    """
    Constant size digest of a multiset.
    Acc1 uses d_a = g1^P(X) only (d_b is None), Acc2 uses the pair (d_A, d_B).
    """
    __slots__ = ()

    def to_bytes(self):
        writer = Writer().u8(self.construction.value).raw(self.d_a.to_bytes())
        if self.d_b is not None:
            writer.raw(self.d_b.to_bytes())

        return writer.getvalue()


class DisjointProof(namedtuple("DisjointProof", ["construction", "f1", "f2", "right"])):
    """
    Disjointness proof of (X1, X2).
    Acc1 proofs are (F1*, F2*) in G2, Acc2 proofs are a single G1 element in f1 (f2 is None).
    `right` is the query side multiset X2, it is not part of the serialized form.
    """
    __slots__ = ()

    def to_bytes(self):
        writer = Writer().u8(self.construction.value).raw(self.f1.to_bytes())
        if self.f2 is not None:
            writer.raw(self.f2.to_bytes())

        return writer.getvalue()

    def with_right(self, right):
        return self._replace(right=right)


class Accumulator(metaclass=ABCMeta):
    """
    Multiset accumulator over published params.
    All operations are pure functions of their inputs and the params, hence thread safe.

    With transparent params and `trapdoor_shortcut` the exponents are evaluated at s directly,
    which yields the very same group elements as the symbolic computation over the published powers.
    """
    construction = None

    def __init__(self, params, salt=b"", trapdoor_shortcut=True):
        """
        :type params: PublicParams
        :param salt: per-chain salt of the element encoding
        :type salt: bytes
        :type trapdoor_shortcut: bool
        """
        if params.construction != self.construction:
            raise ConstructionMismatchError(
                f"{type(self).__name__} cannot use {params.construction.label} params"
            )

        self.params = params
        self.group = params.group
        self.order = params.group.order
        self.encoder = ElementEncoder(self._universe(), salt)
        self.counters = Counters()

        self._use_trapdoor = trapdoor_shortcut and params.is_transparent
        self._g1 = self.group.generator(GroupKind.G1)
        self._g2 = self.group.generator(GroupKind.G2)

    @abstractmethod
    def setup(self, multiset):
        """
        :type multiset: Multiset
        :rtype: AccValue
        """
        raise NotImplementedError()

    @abstractmethod
    def prove_disjoint(self, left, right):
        """
        :type left: Multiset
        :type right: Multiset
        :rtype: DisjointProof
        """
        raise NotImplementedError()

    @abstractmethod
    def verify_disjoint(self, left_value, right_value, proof):
        """
        :type left_value: AccValue
        :type right_value: AccValue
        :type proof: DisjointProof
        :rtype: bool
        """
        raise NotImplementedError()

    def sum(self, values):
        """
        :type values: list[AccValue]
        :rtype: AccValue
        """
        raise UnsupportedOperationError(f"{self.construction.label} digests cannot be aggregated")

    def proof_sum(self, proofs):
        """
        :type proofs: list[DisjointProof]
        :rtype: DisjointProof
        """
        raise UnsupportedOperationError(f"{self.construction.label} proofs cannot be aggregated")

    @property
    def supports_aggregation(self):
        return False

    def can_prove_disjoint(self, left, right):
        """
        Whether `prove_disjoint(left, right)` would succeed: no common attribute and no colliding encoding.
        Only hashes, no group operation.

        :type left: Multiset
        :type right: Multiset
        :rtype: bool
        """
        try:
            self._check_disjoint(left, right)
        except NotDisjointError:
            return False

        return True

    def read_value(self, reader):
        """
        :type reader: chainads.codec.Reader
        :rtype: AccValue
        """
        self._expect_construction(reader)
        d_a = self.group.deserialize(self._digest_kinds[0], reader.raw(self.group.element_size(self._digest_kinds[0])))
        d_b = None
        if len(self._digest_kinds) > 1:
            d_b = self.group.deserialize(self._digest_kinds[1], reader.raw(self.group.element_size(self._digest_kinds[1])))

        return AccValue(self.construction, d_a, d_b)

    def read_proof(self, reader, right=None):
        """
        :type reader: chainads.codec.Reader
        :rtype: DisjointProof
        """
        self._expect_construction(reader)
        f1 = self.group.deserialize(self._proof_kinds[0], reader.raw(self.group.element_size(self._proof_kinds[0])))
        f2 = None
        if len(self._proof_kinds) > 1:
            f2 = self.group.deserialize(self._proof_kinds[1], reader.raw(self.group.element_size(self._proof_kinds[1])))

        return DisjointProof(self.construction, f1, f2, right)

    def value_from_bytes(self, data):
        reader = Reader(data)
        value = self.read_value(reader)
        reader.expect_end()
        return value

    def proof_from_bytes(self, data, right=None):
        reader = Reader(data)
        proof = self.read_proof(reader, right)
        reader.expect_end()
        return proof

    def _check_construction(self, *items):
        for item in items:
            if item.construction != self.construction:
                raise ConstructionMismatchError(
                    f"{item.construction.label} {type(item).__name__} given to a {self.construction.label} accumulator"
                )

    def _check_disjoint(self, left, right):
        """
        Fail fast before any algebra, on the attributes first and then on their encodings.

        :return: encoded (left, right) value -> multiplicity maps
        """
        common = left.support & right.support
        if common:
            raise NotDisjointError(f"multisets are not disjoint, common elements: {sorted(map(str, common))}")

        left_values = self.encoder.encode_multiset(left)
        right_values = self.encoder.encode_multiset(right)
        if not left_values.keys().isdisjoint(right_values.keys()):
            raise NotDisjointError("element encodings collide, disjointness is unprovable under this salt")

        return left_values, right_values

    def _expect_construction(self, reader):
        tag = reader.u8()
        if tag != self.construction.value:
            raise ConstructionMismatchError(f"expected {self.construction.label} element, found tag {tag}")

    @abstractmethod
    def _universe(self):
        raise NotImplementedError()

    _digest_kinds = ()
    _proof_kinds = ()


class Acc1Accumulator(Accumulator):
    """
    q-SDH based construction:
        acc(X) = g1^P(X), P(X) = PI{x + s}
        proof(X1, X2) = (g2^Q1(s), g2^Q2(s)) with P(X1) * Q1 + P(X2) * Q2 = 1
        verify: e(acc(X1), F1*) * e(acc(X2), F2*) == e(g1, g2)
    """
    construction = Construction.ACC1

    _digest_kinds = (GroupKind.G1,)
    _proof_kinds = (GroupKind.G2, GroupKind.G2)

    def __init__(self, params, salt=b"", trapdoor_shortcut=True):
        super(Acc1Accumulator, self).__init__(params, salt, trapdoor_shortcut)
        self._target = None

    def setup(self, multiset):
        self.counters.increment("setup")
        roots = self._roots(self.encoder.encode_multiset(multiset))
        self._check_capacity(len(roots))

        if self._use_trapdoor:
            value = 1
            for root in roots:
                value = (value * (root + self.params.trapdoor)) % self.order
            return AccValue(self.construction, self._g1 ** value, None)

        polynomial = Polynomial.from_roots(roots, self.order)
        return AccValue(self.construction, self._commit(polynomial, self.params.g1_power), None)

    def prove_disjoint(self, left, right):
        self.counters.increment("prove_disjoint")
        left_values, right_values = self._check_disjoint(left, right)
        left_roots, right_roots = self._roots(left_values), self._roots(right_values)
        self._check_capacity(len(left_roots))
        self._check_capacity(len(right_roots))

        # P1 = k * P2 + R, hence gcd(P1, P2) = gcd(P2, R) with smaller operands
        p2 = Polynomial.from_roots(right_roots, self.order)
        reduced = Polynomial.product_mod(left_roots, p2)
        u, v, gcd = extended_gcd(p2, reduced)
        if gcd.degree != 0:
            raise NotDisjointError("gcd(P(X1), P(X2)) != 1")

        # P2 * u + R * v = 1  ->  P1 * v + P2 * (u - k * v) = 1
        q1 = v
        if self._use_trapdoor:
            s = self.params.trapdoor
            p1_at_s = 1
            for root in left_roots:
                p1_at_s = (p1_at_s * (root + s)) % self.order
            numerator = (1 - p1_at_s * q1.evaluate(s)) % self.order
            q2_at_s = (numerator * field_inverse(p2.evaluate(s), self.order)) % self.order
            return DisjointProof(self.construction, self._g2 ** q1.evaluate(s), self._g2 ** q2_at_s, right)

        p1 = Polynomial.from_roots(left_roots, self.order)
        q2, remainder = divmod(Polynomial.constant(1, self.order) - p1 * q1, p2)
        if not remainder.is_zero:
            raise NotDisjointError("Bezout cofactors do not divide exactly")

        return DisjointProof(
            self.construction,
            self._commit(q1, self.params.g2_power),
            self._commit(q2, self.params.g2_power),
            right
        )

    def verify_disjoint(self, left_value, right_value, proof):
        self._check_construction(left_value, right_value, proof)
        self.counters.increment("verify_disjoint")

        left = self.group.pair(left_value.d_a, proof.f1)
        right = self.group.pair(right_value.d_a, proof.f2)
        return left * right == self._pairing_target()

    def _pairing_target(self):
        if self._target is None:
            self._target = self.group.pair(self._g1, self._g2)

        return self._target

    def _commit(self, polynomial, power):
        """
        g^polynomial(s) from the published powers.
        """
        if polynomial.degree > self.params.capacity:
            raise CapacityError(f"degree {polynomial.degree} exceeds capacity {self.params.capacity}")

        result = None
        for index, coefficient in enumerate(polynomial.coefficients):
            if coefficient == 0:
                continue

            term = power(index) ** coefficient
            result = term if result is None else result * term

        if result is None:
            return power(0) ** 0

        return result

    def _check_capacity(self, size):
        if size > self.params.capacity:
            raise CapacityError(f"multiset of {size} elements exceeds capacity {self.params.capacity}")

    @staticmethod
    def _roots(values):
        return [value for value, multiplicity in values.items() for _ in range(multiplicity)]

    def _universe(self):
        return self.order


class Acc2Accumulator(Accumulator):
    """
    Aggregatable construction:
        d_A(X) = g1^A(X), A(X) = SIGMA{s^x}, d_B(X) = g2^B(X), B(X) = SIGMA{s^(q - x)}
        proof(X1, X2) = g1^(A(X1) * B(X2)), which exists since the s^q term is missing iff X1, X2 are disjoint
        verify: e(d_A(X1), d_B(X2)) == e(proof, g2)
    Digests and proofs are aggregated by the group operation.
    """
    construction = Construction.ACC2

    _digest_kinds = (GroupKind.G1, GroupKind.G2)
    _proof_kinds = (GroupKind.G1,)

    def setup(self, multiset):
        self.counters.increment("setup")
        values = self.encoder.encode_multiset(multiset)
        q = self.params.capacity

        if self._use_trapdoor:
            s = self.params.trapdoor
            a = sum(multiplicity * pow(s, value, self.order) for value, multiplicity in values.items())
            b = sum(multiplicity * pow(s, q - value, self.order) for value, multiplicity in values.items())
            return AccValue(self.construction, self._g1 ** a, self._g2 ** b)

        d_a = self._commit(values, self.params.g1_power, GroupKind.G1)
        d_b = self._commit({q - value: m for value, m in values.items()}, self.params.g2_power, GroupKind.G2)
        return AccValue(self.construction, d_a, d_b)

    def prove_disjoint(self, left, right):
        self.counters.increment("prove_disjoint")
        left_values, right_values = self._check_disjoint(left, right)
        q = self.params.capacity

        if self._use_trapdoor:
            s = self.params.trapdoor
            a = sum(m * pow(s, value, self.order) for value, m in left_values.items())
            b = sum(m * pow(s, q - value, self.order) for value, m in right_values.items())
            return DisjointProof(self.construction, self._g1 ** (a * b), None, right)

        # A(X1) * B(X2) = SIGMA{m_i * m_j * s^(q + x_i - x_j)}
        exponents = dict()
        for left_value, left_multiplicity in left_values.items():
            for right_value, right_multiplicity in right_values.items():
                index = q + left_value - right_value
                exponents[index] = exponents.get(index, 0) + left_multiplicity * right_multiplicity

        if q in exponents:
            raise NotDisjointError("the s^q term is required")

        return DisjointProof(
            self.construction,
            self._commit(exponents, self.params.g1_power, GroupKind.G1),
            None,
            right
        )

    def verify_disjoint(self, left_value, right_value, proof):
        self._check_construction(left_value, right_value, proof)
        self.counters.increment("verify_disjoint")

        return self.group.pair(left_value.d_a, right_value.d_b) == self.group.pair(proof.f1, self._g2)

    def sum(self, values):
        values = list(values)
        if not values:
            raise AggregationError("cannot sum an empty list of digests")
        self._check_construction(*values)

        d_a, d_b = values[0].d_a, values[0].d_b
        for value in values[1:]:
            d_a, d_b = d_a * value.d_a, d_b * value.d_b

        return AccValue(self.construction, d_a, d_b)

    def proof_sum(self, proofs):
        proofs = list(proofs)
        if not proofs:
            raise AggregationError("cannot sum an empty list of proofs")
        self._check_construction(*proofs)

        right = proofs[0].right
        if right is None or any(proof.right != right for proof in proofs):
            raise AggregationError("aggregated proofs must share the same right hand multiset")

        f1 = proofs[0].f1
        for proof in proofs[1:]:
            f1 = f1 * proof.f1

        return DisjointProof(self.construction, f1, None, right)

    @property
    def supports_aggregation(self):
        return True

    def _commit(self, exponents, power, kind):
        """
        PI{power(index) ^ multiplicity}, the identity for an empty map.
        """
        result = self.group.identity(kind)
        for index, multiplicity in exponents.items():
            result = result * (power(index) ** multiplicity)

        return result

    def _universe(self):
        return self.params.capacity


_ACCUMULATORS = {
    Construction.ACC1: Acc1Accumulator,
    Construction.ACC2: Acc2Accumulator,
}


def create_accumulator(params, salt=b"", trapdoor_shortcut=True):
    """
    :type params: PublicParams
    :rtype: Accumulator
    """
    return _ACCUMULATORS[params.construction](params, salt=salt, trapdoor_shortcut=trapdoor_shortcut)


class SetupError(ChainAdsError):
    pass


class CapacityError(ChainAdsError):
    pass


class NotDisjointError(ChainAdsError):
    pass


class MissingPowerError(ChainAdsError):
    pass


class ConstructionMismatchError(ChainAdsError):
    pass


class UnsupportedOperationError(ChainAdsError):
    pass


class AggregationError(ChainAdsError):
    pass


class ParamsFormatError(ChainAdsError):
    pass
