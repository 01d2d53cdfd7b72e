import itertools

import pytest

from chainads.transform.prefix import DomainError, PrefixElement, covers_interval, range_cover, trans_value


def labels(prefixes):
    return {f"{prefix.bits}{'*' if prefix.wildcard else ''}" for prefix in prefixes}


def test_trans_value():
    assert labels(trans_value(4, 3)) == {"1*", "10*", "100"}
    assert labels(trans_value(0, 1)) == {"0"}
    assert all(prefix.dimension == 2 for prefix in trans_value(5, 3, dimension=2))


def test_range_cover():
    assert labels(range_cover(0, 6, 3)) == {"0*", "10*", "110"}
    assert labels(range_cover(0, 7, 3)) == {"0*", "1*"}
    assert labels(range_cover(5, 5, 3)) == {"101"}
    assert labels(range_cover(1, 6, 3)) == {"001", "01*", "10*", "110"}


def test_prefix_element():
    prefix = PrefixElement(0, "10", 3)

    assert prefix.interval == (4, 5)
    assert prefix.contains(5) and not prefix.contains(6)
    assert str(prefix) == "10*_0"
    assert str(PrefixElement(1, "100", 3)) == "100_1"


@pytest.mark.parametrize("width", [1, 2, 3, 4])
def test_cover_exact_at_small_widths(width):
    top = (1 << width) - 1
    for alpha, beta in itertools.combinations_with_replacement(range(top + 1), 2):
        cover = range_cover(alpha, beta, width)

        assert covers_interval(cover, alpha, beta)
        assert len(cover) <= 2 * width
        for value in range(top + 1):
            # a value is inside the range iff its prefixes hit the cover exactly once
            hits = len(trans_value(value, width) & cover)
            assert hits == (1 if alpha <= value <= beta else 0)


def test_covers_interval():
    assert covers_interval([PrefixElement(0, "0", 3), PrefixElement(0, "10", 3)], 1, 5)
    assert not covers_interval([PrefixElement(0, "0", 3), PrefixElement(0, "11", 3)], 1, 5)
    assert not covers_interval([], 0, 0)


def test_domain_errors():
    with pytest.raises(DomainError):
        trans_value(8, 3)
    with pytest.raises(DomainError):
        trans_value(-1, 3)
    with pytest.raises(DomainError):
        range_cover(5, 4, 3)
    with pytest.raises(DomainError):
        range_cover(0, 8, 3)
    with pytest.raises(DomainError):
        range_cover(0, 0, 0)
    with pytest.raises(DomainError):
        PrefixElement(0, "102", 3)
    with pytest.raises(DomainError):
        PrefixElement(0, "1010", 3)


def test_prefix_children_and_ancestors():
    prefix = PrefixElement(1, "10", 4)

    assert labels(prefix.children()) == {"100*", "101*"}
    assert all(child.dimension == 1 for child in prefix.children())
    assert PrefixElement(1, "1011", 4).children() == ()
    assert labels(PrefixElement(0, "1011", 4).ancestors()) == {"101*", "10*", "1*"}
    assert [ancestor.bits for ancestor in PrefixElement(0, "1011", 4).ancestors()] == ["101", "10", "1"]
    assert PrefixElement(0, "1", 4).ancestors() == []
