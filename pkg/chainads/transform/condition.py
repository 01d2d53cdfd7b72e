import re
from dataclasses import dataclass, field

import numpy as np

from chainads.crypto.encoding import attribute_bytes
from chainads.crypto.multiset import Multiset
from chainads.errors import ChainAdsError
from chainads.transform.prefix import PrefixElement, DomainError, covers_interval, domain_max, range_cover, trans_value


def clause_key(clause):
    """
    Canonical, order independent, sort key of an equivalence set.
    """
    return tuple(sorted(attribute_bytes(element) for element in clause))


def clause_to_text(clause):
    return "{" + ", ".join(sorted(str(element) for element in clause)) + "}"


class CNFCondition:
    """
    Conjunction of equivalence sets (OR within a set, AND between the sets).
    A multiset W matches iff it intersects every set.
    """
    def __init__(self, clauses):
        """
        :type clauses: iterable[iterable[str | PrefixElement]]
        """
        self.clauses = tuple(frozenset(clause) for clause in clauses)
        if any(not clause for clause in self.clauses):
            raise QuerySyntaxError("empty equivalence set in a CNF condition")

    def matches(self, multiset):
        """
        :type multiset: Multiset
        :rtype: bool
        """
        return all(not multiset.isdisjoint(clause) for clause in self.clauses)

    def find_mismatch_clause(self, multiset):
        """
        The smallest clause disjoint from the multiset, ties broken by the clause order.

        :type multiset: Multiset
        :rtype: frozenset
        """
        candidates = [clause for clause in self.clauses if multiset.isdisjoint(clause)]
        if not candidates:
            raise NoMismatchClauseError("the multiset matches every clause of the condition")

        return min(candidates, key=len)

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __eq__(self, other):
        return isinstance(other, CNFCondition) and self.clauses == other.clauses

    def __hash__(self):
        return hash(self.clauses)

    def __repr__(self):
        return " AND ".join(clause_to_text(clause) for clause in self.clauses) or "TRUE"


class Domain:
    """
    The numeric attribute space: one unsigned `width`-bit integer per dimension.

    Raw values are quantized with the affine map floor((v - offset) * scale), clamped into the domain.
    Integer values of an unscaled domain are taken as they are and must already lie in it.
    """
    def __init__(self, widths, offsets=None, scales=None):
        """
        :type widths: tuple[int]
        :type offsets: tuple[float] | None
        :type scales: tuple[float] | None
        """
        self.widths = tuple(widths)
        self.offsets = np.asarray(offsets if offsets is not None else [0.0] * len(self.widths), dtype=np.float64)
        self.scales = np.asarray(scales if scales is not None else [1.0] * len(self.widths), dtype=np.float64)
        if len(self.offsets) != len(self.widths) or len(self.scales) != len(self.widths):
            raise DomainError("widths, offsets and scales must have one entry per dimension")
        if any(width < 1 or width > 64 for width in self.widths):
            raise DomainError("widths must be in [1, 64]")

        self._maxima = np.asarray([float(domain_max(width)) for width in self.widths], dtype=np.float64)
        self._identity = not np.any(self.offsets) and np.all(self.scales == 1.0)

    @property
    def dimensions(self):
        return len(self.widths)

    def quantize(self, vector):
        """
        :type vector: sequence[int | float]
        :rtype: tuple[int]
        """
        if len(vector) != self.dimensions:
            raise DomainError(f"expected {self.dimensions} numeric attributes, got {len(vector)}")

        if self._identity and all(isinstance(value, int) for value in vector):
            for value, width in zip(vector, self.widths):
                if not 0 <= value <= domain_max(width):
                    raise DomainError(f"value {value} is out of the {width} bits domain")
            return tuple(vector)

        scaled = np.floor((np.asarray(vector, dtype=np.float64) - self.offsets) * self.scales)
        return tuple(
            min(int(value), domain_max(width)) for value, width in zip(np.clip(scaled, 0.0, self._maxima), self.widths)
        )

    def quantize_bound(self, dimension, value, upper):
        """
        Quantize a query bound, None (an open bound) maps to the domain edge.
        """
        if value is None:
            return domain_max(self.widths[dimension]) if upper else 0

        if self._identity and isinstance(value, int):
            return min(max(value, 0), domain_max(self.widths[dimension]))

        scaled = np.floor((float(value) - self.offsets[dimension]) * self.scales[dimension])
        return min(int(np.clip(scaled, 0.0, self._maxima[dimension])), domain_max(self.widths[dimension]))

    def __eq__(self, other):
        return (
            isinstance(other, Domain)
            and self.widths == other.widths
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.scales, other.scales)
        )

    def __repr__(self):
        return f"Domain(widths={self.widths})"


@dataclass(frozen=True)
class Query:
    """
    q = <[t_s, t_e], [lower, upper], CNF over keywords>.
    A subscription query has no window, a keyword only query has no range.
    Open range bounds are None.
    """
    window: tuple = None
    lower: tuple = None
    upper: tuple = None
    keyword_clauses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.window is not None and self.window[0] > self.window[1]:
            raise DomainError(f"inverted window [{self.window[0]}, {self.window[1]}]")
        if (self.lower is None) != (self.upper is None):
            raise QuerySyntaxError("a range needs both a lower and an upper vector")
        if self.lower is not None and len(self.lower) != len(self.upper):
            raise QuerySyntaxError("range vectors must have the same dimension")

    @property
    def is_subscription(self):
        return self.window is None

    @property
    def has_range(self):
        return self.lower is not None

    def bounds(self, domain):
        """
        Quantized closed range per dimension (the whole domain when the query has no range).

        :type domain: Domain
        :rtype: list[tuple[int, int]]
        """
        if not self.has_range:
            return [(0, domain_max(width)) for width in domain.widths]

        if len(self.lower) != domain.dimensions:
            raise DomainError(f"query range has {len(self.lower)} dimensions, the chain has {domain.dimensions}")

        bounds = list()
        for dimension in range(domain.dimensions):
            alpha = domain.quantize_bound(dimension, self.lower[dimension], upper=False)
            beta = domain.quantize_bound(dimension, self.upper[dimension], upper=True)
            if alpha > beta:
                raise DomainError(f"inverted range [{alpha}, {beta}] on dimension {dimension}")
            bounds.append((alpha, beta))

        return bounds

    def in_window(self, timestamp):
        return self.window is None or self.window[0] <= timestamp <= self.window[1]

    def evaluate(self, timestamp, vector, keywords, domain):
        """
        Direct evaluation of the predicates on raw attributes, without any transformation.

        :rtype: bool
        """
        if not self.in_window(timestamp):
            return False

        if self.has_range:
            point = domain.quantize(vector)
            if any(not alpha <= value <= beta for value, (alpha, beta) in zip(point, self.bounds(domain))):
                return False

        keywords = set(keywords)
        return all(not keywords.isdisjoint(clause) for clause in self.keyword_clauses)

    def __str__(self):
        parts = list()
        if self.window is not None:
            parts.append(f"window=[{self.window[0]},{self.window[1]}]")
        if self.has_range:
            parts.append(f"range=[{_vector_text(self.lower)},{_vector_text(self.upper)}]")
        if self.keyword_clauses:
            parts.append("bool=" + " AND ".join(_clause_text(clause) for clause in self.keyword_clauses))

        return " ".join(parts)


def _vector_text(vector):
    return "(" + ",".join("*" if value is None else str(value) for value in vector) + ")"


def _clause_text(clause):
    keywords = sorted(clause)
    if len(keywords) == 1:
        return _quote(keywords[0])

    return "(" + " OR ".join(_quote(keyword) for keyword in keywords) + ")"


def _quote(keyword):
    return '"' + keyword.replace("\\", "\\\\").replace('"', '\\"') + '"'


def transform_query(query, domain):
    """
    trans([alpha, beta]) AND keyword CNF: one range cover clause per dimension followed by the keyword clauses.

    :type query: Query
    :type domain: Domain
    :rtype: CNFCondition
    """
    clauses = list()
    if query.has_range:
        for dimension, (alpha, beta) in enumerate(query.bounds(domain)):
            clauses.append(range_cover(alpha, beta, domain.widths[dimension], dimension))

    clauses.extend(query.keyword_clauses)
    return CNFCondition(clauses)


def transform_vector(point, domain):
    """
    :param point: quantized numeric vector
    :rtype: list[PrefixElement]
    """
    elements = list()
    for dimension, (value, width) in enumerate(zip(point, domain.widths)):
        elements.extend(trans_value(value, width, dimension))

    return elements


def transform_object(obj, domain):
    """
    W' = trans(V) + W.

    :param obj: any object exposing `vector` (raw numeric attributes) and `keywords` (a sequence)
    :type domain: Domain
    :rtype: Multiset
    """
    return Multiset(transform_vector(domain.quantize(obj.vector), domain) + list(obj.keywords))


def certifies_mismatch(clause, query, domain):
    """
    Whether W disjoint from `clause` implies that W fails the query:
        * the clause contains one of the keyword clauses, or
        * its prefix elements of a single dimension cover the query range on that dimension
          (transformed range clauses and grid cells of subscription trees alike).

    :type clause: frozenset
    :type query: Query
    :type domain: Domain
    :rtype: bool
    """
    if any(keyword_clause <= clause for keyword_clause in query.keyword_clauses):
        return True

    per_dimension = dict()
    for element in clause:
        if isinstance(element, PrefixElement):
            per_dimension.setdefault(element.dimension, list()).append(element)

    if not per_dimension:
        return False

    bounds = query.bounds(domain)
    for dimension, prefixes in per_dimension.items():
        if dimension >= domain.dimensions or any(prefix.width != domain.widths[dimension] for prefix in prefixes):
            continue

        alpha, beta = bounds[dimension]
        if covers_interval(prefixes, alpha, beta):
            return True

    return False


_TOKEN = re.compile(r'\s*(?:(?P<keyword>"(?:[^"\\]|\\.)*")|(?P<op>AND|OR)\b|(?P<paren>[()]))')
_SECTION = re.compile(r'(?P<name>window|range|bool)=')
_NUMBER = re.compile(r'^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$')


def parse_query(text):
    """
    Parse the textual query form:
        window=[t_s,t_e] range=[(lower vector),(upper vector)] bool="Sedan" AND ("Benz" OR "BMW")

    Every section is optional, `*` marks an open range bound and the Boolean part must be in CNF.

    :type text: str
    :rtype: Query
    """
    sections = _split_sections(text)
    window = lower = upper = None
    if "window" in sections:
        window = _parse_window(sections["window"])
    if "range" in sections:
        lower, upper = _parse_range(sections["range"])

    keyword_clauses = _parse_cnf(sections["bool"]) if "bool" in sections else tuple()
    return Query(window=window, lower=lower, upper=upper, keyword_clauses=keyword_clauses)


def _split_sections(text):
    matches = list(_SECTION.finditer(text))
    if not matches:
        if text.strip():
            raise QuerySyntaxError(f"expected window=, range= or bool= sections in {text!r}")
        return dict()

    if text[:matches[0].start()].strip():
        raise QuerySyntaxError(f"unexpected text {text[:matches[0].start()].strip()!r}")

    sections = dict()
    for index, match in enumerate(matches):
        # bool= may contain quoted keywords looking like sections, it has to be the last section
        end = matches[index + 1].start() if index + 1 < len(matches) else len(text)
        name = match.group("name")
        if name in sections:
            raise QuerySyntaxError(f"duplicated section {name}")
        sections[name] = text[match.end():end].strip()
        if name == "bool":
            sections[name] = text[match.end():].strip()
            break

    return sections


def _parse_number(token):
    token = token.strip()
    if token == "*":
        return None
    if not _NUMBER.match(token):
        raise QuerySyntaxError(f"invalid number {token!r}")

    if re.match(r"^[+-]?\d+$", token):
        return int(token)

    return float(token)


def _parse_window(text):
    match = re.fullmatch(r"\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]", text)
    if not match:
        raise QuerySyntaxError(f"invalid window {text!r}")

    start, end = _parse_number(match.group(1)), _parse_number(match.group(2))
    if not isinstance(start, int) or not isinstance(end, int):
        raise QuerySyntaxError("window bounds must be integer timestamps")
    if start > end:
        raise DomainError(f"inverted window [{start}, {end}]")

    return start, end


def _parse_range(text):
    match = re.fullmatch(r"\[\s*\(([^()]*)\)\s*,\s*\(([^()]*)\)\s*\]", text)
    if not match:
        raise QuerySyntaxError(f"invalid range {text!r}")

    lower = tuple(_parse_number(token) for token in match.group(1).split(","))
    upper = tuple(_parse_number(token) for token in match.group(2).split(","))
    if len(lower) != len(upper):
        raise QuerySyntaxError("range vectors must have the same dimension")

    return lower, upper


def _tokenize(text):
    tokens = list()
    position = 0
    text = text.rstrip()
    while position < len(text):
        match = _TOKEN.match(text, position)
        if not match or match.end() == position:
            raise QuerySyntaxError(f"unexpected input at {text[position:]!r}")

        if match.group("keyword"):
            tokens.append(("keyword", re.sub(r"\\(.)", r"\1", match.group("keyword")[1:-1])))
        elif match.group("op"):
            tokens.append(("op", match.group("op")))
        else:
            tokens.append(("paren", match.group("paren")))
        position = match.end()

    return tokens


def _parse_cnf(text):
    """
    cnf := clause (AND clause)*
    clause := keyword | '(' keyword (OR keyword)* ')'
    A bare top level disjunction (no AND) is accepted as a single clause.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise QuerySyntaxError("empty Boolean condition")

    top_level_ops = set()
    depth = 0
    for kind, value in tokens:
        if kind == "paren":
            depth += 1 if value == "(" else -1
            if depth < 0 or depth > 1:
                raise QuerySyntaxError("unbalanced or nested parentheses, the condition must be in CNF")
        elif kind == "op" and depth == 0:
            top_level_ops.add(value)
    if depth != 0:
        raise QuerySyntaxError("unbalanced parentheses")
    if top_level_ops == {"AND", "OR"}:
        raise QuerySyntaxError("mixed top level AND / OR, the condition must be in CNF")

    if top_level_ops == {"OR"}:
        return (_parse_disjunction(tokens),)

    clauses = list()
    position = 0
    while position < len(tokens):
        kind, value = tokens[position]
        if kind == "keyword":
            clauses.append(frozenset([value]))
            position += 1
        elif kind == "paren" and value == "(":
            end = tokens.index(("paren", ")"), position)
            clauses.append(_parse_disjunction(tokens[position + 1:end]))
            position = end + 1
        else:
            raise QuerySyntaxError(f"unexpected {value!r}")

        if position < len(tokens):
            if tokens[position] != ("op", "AND") or position + 1 == len(tokens):
                raise QuerySyntaxError("clauses must be joined by AND")
            position += 1

    return tuple(clauses)


def _parse_disjunction(tokens):
    keywords = list()
    for index, (kind, value) in enumerate(tokens):
        expected = "keyword" if index % 2 == 0 else "op"
        if kind != expected or (kind == "op" and value != "OR"):
            raise QuerySyntaxError("a clause is a disjunction of quoted keywords")
        if kind == "keyword":
            keywords.append(value)

    if not keywords or len(tokens) % 2 == 0:
        raise QuerySyntaxError("dangling OR in a clause")

    return frozenset(keywords)


class QuerySyntaxError(ChainAdsError):
    pass


class NoMismatchClauseError(ChainAdsError):
    pass
