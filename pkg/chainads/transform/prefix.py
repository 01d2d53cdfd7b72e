from collections import namedtuple

from chainads.errors import ChainAdsError


class PrefixElement(namedtuple("PrefixElement", ["dimension", "bits", "width"])):
    """
    A node of the implicit complete binary tree over [0, 2^width - 1] for one numeric dimension.

    `bits` is the path from the root ("1" -> right child), a prefix shorter than the width stands for
    every value below it and is written with a trailing wildcard (10* == [4, 5] for width 3).
    """
    __slots__ = ()

    def __new__(cls, dimension, bits, width):
        if not 1 <= len(bits) <= width or set(bits) - {"0", "1"}:
            raise DomainError(f"invalid prefix {bits!r} for width {width}")
        if not 0 <= dimension < 255:
            raise DomainError(f"dimension tag {dimension} out of range")

        return super(PrefixElement, cls).__new__(cls, dimension, bits, width)

    @property
    def wildcard(self):
        return len(self.bits) < self.width

    @property
    def interval(self):
        """
        :return: closed interval [low, high] of the values below this node
        :rtype: tuple[int, int]
        """
        free_bits = self.width - len(self.bits)
        low = int(self.bits, 2) << free_bits
        return low, low + (1 << free_bits) - 1

    def contains(self, value):
        low, high = self.interval
        return low <= value <= high

    def children(self):
        """
        The two halves of the interval, none for a single value.

        :rtype: tuple[PrefixElement]
        """
        if not self.wildcard:
            return ()

        return tuple(PrefixElement(self.dimension, self.bits + bit, self.width) for bit in "01")

    def ancestors(self):
        """
        Enclosing prefixes, from the parent up to the one bit prefix.

        :rtype: list[PrefixElement]
        """
        return [
            PrefixElement(self.dimension, self.bits[:length], self.width) for length in range(len(self.bits) - 1, 0, -1)
        ]

    def to_bytes(self):
        """
        dimension tag (dimension + 1, 0 is reserved for keywords) | bits as ascii | '*' for wildcards
        """
        return bytes([self.dimension + 1]) + self.bits.encode("ascii") + (b"*" if self.wildcard else b"")

    def __str__(self):
        return f"{self.bits}{'*' if self.wildcard else ''}_{self.dimension}"


def _check_width(width):
    if width < 1:
        raise DomainError(f"width must be positive, got {width}")


def trans_value(value, width, dimension=0):
    """
    All the prefixes of the width-bit binary form of value (trans(4) = {1*, 10*, 100} for width 3).

    Time Complexity: O(width)

    :type value: int
    :type width: int
    :type dimension: int
    :rtype: frozenset[PrefixElement]
    """
    _check_width(width)
    if not 0 <= value < (1 << width):
        raise DomainError(f"value {value} is out of the {width} bits domain")

    bits = format(value, f"0{width}b")
    return frozenset(PrefixElement(dimension, bits[:length], width) for length in range(1, width + 1))


def range_cover(alpha, beta, width, dimension=0):
    """
    Minimal set of tree nodes covering exactly [alpha, beta].
    The root itself is never emitted, the full domain is covered by {0*, 1*}.

    Time Complexity: O(width)
    Space Complexity: O(width)

    :type alpha: int
    :type beta: int
    :type width: int
    :type dimension: int
    :rtype: frozenset[PrefixElement]
    """
    _check_width(width)
    if alpha > beta:
        raise DomainError(f"inverted range [{alpha}, {beta}]")
    if alpha < 0 or beta >= (1 << width):
        raise DomainError(f"range [{alpha}, {beta}] is out of the {width} bits domain")

    cover = set()
    # (bits, low, high) of the nodes straddling the range boundaries
    pending = [("0", 0, (1 << (width - 1)) - 1), ("1", 1 << (width - 1), (1 << width) - 1)]
    while pending:
        bits, low, high = pending.pop()
        if high < alpha or low > beta:
            continue

        if alpha <= low and high <= beta:
            cover.add(PrefixElement(dimension, bits, width))
            continue

        middle = (low + high) // 2
        pending.append((bits + "0", low, middle))
        pending.append((bits + "1", middle + 1, high))

    return frozenset(cover)


def covers_interval(prefixes, alpha, beta):
    """
    Whether the union of the prefix intervals contains the whole [alpha, beta].

    :type prefixes: iterable[PrefixElement]
    :rtype: bool
    """
    position = alpha
    for low, high in sorted(prefix.interval for prefix in prefixes):
        if low > position:
            break
        position = max(position, high + 1)
        if position > beta:
            return True

    return position > beta


def domain_max(width):
    return (1 << width) - 1


class DomainError(ChainAdsError):
    pass
