from collections import Counter


class Multiset:
    """
    Immutable multiset of hashable attributes (keywords or prefix elements).

    `+` is the multiset sum (multiplicities add up), which is the aggregation used by every index layer.
    Disjointness only depends on the supports.
    """
    __slots__ = ("_counts", "_hash")

    def __init__(self, elements=()):
        """
        :param elements: attributes, repeated by multiplicity, or a mapping attribute -> multiplicity.
        """
        counts = Counter(elements._counts if isinstance(elements, Multiset) else elements)
        if any(multiplicity <= 0 for multiplicity in counts.values()):
            raise ValueError("multiplicities must be positive")

        self._counts = counts
        self._hash = None

    @classmethod
    def sum(cls, multisets):
        """
        :type multisets: iterable[Multiset]
        :rtype: Multiset
        """
        total = Counter()
        for multiset in multisets:
            total.update(multiset._counts)

        return cls(total)

    def __add__(self, other):
        total = Counter(self._counts)
        total.update(other._counts)
        return Multiset(total)

    def union(self, other):
        """
        Classical multiset union (maximal multiplicities).
        """
        return Multiset(self._counts | other._counts)

    @property
    def support(self):
        """
        :rtype: frozenset
        """
        return frozenset(self._counts)

    def multiplicity(self, element):
        return self._counts.get(element, 0)

    def items(self):
        return self._counts.items()

    def elements(self):
        """
        Iterate over the elements repeated by multiplicity.
        """
        return self._counts.elements()

    def isdisjoint(self, other):
        """
        :param other: any iterable of attributes (multiset, set, clause)
        :rtype: bool
        """
        return all(element not in self._counts for element in other)

    def jaccard_index(self, other):
        """
        Jaccard index of the two supports |A & B| / |A | B| (0 for two empty supports).

        :type other: Multiset
        :rtype: float
        """
        sketch1, sketch2 = self.support, other.support
        union = sketch1.union(sketch2)
        if not union:
            return 0.0

        return len(sketch1.intersection(sketch2)) / len(union)

    @property
    def cardinality(self):
        """
        Number of distinct elements.
        """
        return len(self._counts)

    def __len__(self):
        """
        Number of elements counted with multiplicity.
        """
        return sum(self._counts.values())

    def __contains__(self, element):
        return element in self._counts

    def __iter__(self):
        return iter(self._counts)

    def __eq__(self, other):
        return isinstance(other, Multiset) and self._counts == other._counts

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))

        return self._hash

    def __repr__(self):
        return f"Multiset({dict(self._counts)!r})"
