import itertools
from enum import Enum

from chainads.errors import ChainAdsError
from chainads.transform.condition import transform_query
from chainads.transform.prefix import PrefixElement, domain_max, range_cover


class CoverType(Enum):
    FULL = "full"
    PARTIAL = "partial"


class GridCell:
    """
    Node of an IP-Tree: an axis aligned cell of the quantized space.

    The cell at depth t is given by one t-bit prefix per dimension (the root has none), which reads as the
    CNF condition {p_0} AND {p_1} AND ...
        rcif: query id -> cover type, for every query intersecting the cell
        bcif: keyword clause -> ids of the queries fully covering the cell
    """
    def __init__(self, bits, widths):
        """
        :param bits: one prefix per dimension, all of the same length
        :type bits: tuple[str]
        :type widths: tuple[int]
        """
        self.bits = bits
        self.widths = widths
        self.depth = len(bits[0])
        self.prefixes = tuple(
            PrefixElement(dimension, prefix, width) for dimension, (prefix, width) in enumerate(zip(bits, widths))
        ) if self.depth else ()

        self.rcif = dict()
        self.bcif = dict()
        self.children = list()

    @property
    def is_leaf(self):
        return not self.children

    def bounds(self):
        """
        :return: closed interval of the cell per dimension
        :rtype: list[tuple[int, int]]
        """
        if not self.depth:
            return [(0, domain_max(width)) for width in self.widths]

        return [prefix.interval for prefix in self.prefixes]

    def cover_type(self, query_bounds):
        """
        :param query_bounds: quantized closed range of a query per dimension
        :rtype: CoverType | None
        """
        full = True
        for (low, high), (alpha, beta) in zip(self.bounds(), query_bounds):
            if beta < low or high < alpha:
                return None
            full = full and alpha <= low and high <= beta

        return CoverType.FULL if full else CoverType.PARTIAL

    def intersects(self, multiset):
        """
        Whether the transformed multiset holds a value of the cell on every dimension.
        """
        return all(prefix in multiset for prefix in self.prefixes)

    def split(self):
        self.children = [
            GridCell(tuple(prefix + bit for prefix, bit in zip(self.bits, child_bits)), self.widths)
            for child_bits in itertools.product("01", repeat=len(self.bits))
        ]

    def partial_queries(self):
        return [query_id for query_id, cover in self.rcif.items() if cover is CoverType.PARTIAL]

    def full_queries(self):
        return [query_id for query_id, cover in self.rcif.items() if cover is CoverType.FULL]

    def structure(self):
        """
        Nested comparable description of the subtree.
        """
        return (
            self.bits,
            tuple(sorted((query_id, cover.value) for query_id, cover in self.rcif.items())),
            tuple(sorted((tuple(sorted(clause)), tuple(sorted(ids))) for clause, ids in self.bcif.items())),
            tuple(child.structure() for child in self.children),
        )

    def __repr__(self):
        return "<GridCell " + (" AND ".join(str(prefix) for prefix in self.prefixes) or "ROOT") + ">"


class IPTree:
    """
    Inverted prefix tree over the registered subscription queries.

    A cell is split into 2^d equal children as long as some query partially covers it and the depth limit
    min(max_depth, narrowest width) is not reached. Fully covered cells record the query in their RCIF and
    its keyword clauses in their BCIF. Children left without any partially covering query by a
    deregistration are merged back into their parent on the next traversal.

    Usage:
        tree = IPTree(domain, max_depth=8)
        tree.register(1, parse_query('range=[(0,2),(1,3)] bool="Van" AND "Benz"'))
        tree.matching_queries(node.multiset, {1})
    """
    def __init__(self, domain, max_depth=8):
        """
        :type domain: chainads.transform.condition.Domain
        :type max_depth: int
        """
        self.domain = domain
        self.max_depth = max_depth
        self.depth_limit = min([max_depth] + list(domain.widths))
        self.root = GridCell(tuple("" for _ in domain.widths), tuple(domain.widths))
        self.queries = dict()
        self.conditions = dict()
        self.cell_clauses = dict()
        self._dirty = False

    def register(self, query_id, query):
        """
        :type query_id: int
        :type query: chainads.transform.condition.Query
        """
        if query_id in self.queries:
            raise DuplicateQueryError(f"query {query_id} is already registered")

        bounds = query.bounds(self.domain)
        self.queries[query_id] = query
        self.conditions[query_id] = transform_query(query, self.domain)
        self.cell_clauses[query_id] = (
            crossed_cells(bounds, self.domain.widths, self.depth_limit) if query.has_range else []
        )
        self._insert(self.root, query_id, query, bounds)

    def deregister(self, query_id):
        if query_id not in self.queries:
            raise QueryNotFoundError(query_id)

        del self.queries[query_id]
        del self.conditions[query_id]
        del self.cell_clauses[query_id]
        stack = [self.root]
        while stack:
            cell = stack.pop()
            if cell.rcif.pop(query_id, None) is None:
                continue
            for clause in list(cell.bcif):
                cell.bcif[clause].discard(query_id)
                if not cell.bcif[clause]:
                    del cell.bcif[clause]
            stack.extend(cell.children)

        self._dirty = True

    def merge(self):
        """
        Drop the children of every cell left without partially covering queries.
        """
        stack = [self.root]
        while stack:
            cell = stack.pop()
            if not cell.partial_queries():
                cell.children = list()
            stack.extend(cell.children)

        self._dirty = False

    def matching_queries(self, multiset, candidates):
        """
        Classify the candidate queries against a transformed multiset by descending the cells it intersects.

        A query fully covering an intersected cell satisfies its range condition, it then matches unless one
        of its BCIF clauses is disjoint from the multiset. Queries only partially covering a leaf cell are
        evaluated on their transformed condition.

        :type multiset: chainads.crypto.multiset.Multiset
        :type candidates: set[int]
        :rtype: set[int]
        """
        if self._dirty:
            self.merge()

        full, unresolved, failed = set(), set(), set()
        stack = [self.root] if self.root.intersects(multiset) else []
        while stack:
            cell = stack.pop()
            full.update(cell.full_queries())
            for clause, query_ids in cell.bcif.items():
                if multiset.isdisjoint(clause):
                    failed.update(query_ids)

            if cell.is_leaf:
                unresolved.update(cell.partial_queries())
            else:
                stack.extend(child for child in cell.children if child.intersects(multiset))

        matching = (full - failed) & candidates
        for query_id in (unresolved - full) & candidates:
            if self.conditions[query_id].matches(multiset):
                matching.add(query_id)

        return matching

    def find_cell(self, bits):
        """
        :param bits: one prefix per dimension
        :rtype: GridCell | None
        """
        bits = tuple(bits)
        cell = self.root
        while cell.bits != bits:
            cell = next(
                (child for child in cell.children if all(map(str.startswith, bits, child.bits))),
                None
            )
            if cell is None:
                return None

        return cell

    def structure(self):
        if self._dirty:
            self.merge()

        return self.root.structure()

    def _insert(self, cell, query_id, query, bounds):
        cover = cell.cover_type(bounds)
        if cover is None:
            return

        cell.rcif[query_id] = cover
        if cover is CoverType.FULL:
            for clause in query.keyword_clauses:
                cell.bcif.setdefault(frozenset(clause), set()).add(query_id)
            return

        if cell.depth >= self.depth_limit:
            return

        if cell.is_leaf:
            cell.split()
            for other_id in cell.partial_queries():
                if other_id != query_id:
                    self._push_down(cell, other_id)

        for child in cell.children:
            self._insert(child, query_id, query, bounds)

    def _push_down(self, cell, query_id):
        query = self.queries[query_id]
        bounds = query.bounds(self.domain)
        for child in cell.children:
            self._insert(child, query_id, query, bounds)

    def __len__(self):
        return len(self.queries)

    def __eq__(self, other):
        return isinstance(other, IPTree) and self.structure() == other.structure()


def crossed_cells(bounds, widths, depth_limit):
    """
    Range mismatch clauses made of tree cells: for every level (coarsest first) and dimension, the prefixes
    of the cells the query range crosses on that dimension. A multiset disjoint from one of them holds no
    value of the range on that dimension, and queries with neighbouring ranges end up with the same clauses.

    Dimensions the range fully spans are skipped, as are levels needing more cells than the exact cover.

    :param bounds: quantized closed range per dimension
    :type widths: tuple[int]
    :type depth_limit: int
    :rtype: list[frozenset[PrefixElement]]
    """
    clauses = list()
    for depth in range(1, depth_limit + 1):
        for dimension, ((alpha, beta), width) in enumerate(zip(bounds, widths)):
            if alpha == 0 and beta == domain_max(width):
                continue

            shift = width - depth
            first, last = alpha >> shift, beta >> shift
            if last - first + 1 > len(range_cover(alpha, beta, width, dimension)):
                continue

            clauses.append(frozenset(
                PrefixElement(dimension, format(cell, f"0{depth}b"), width) for cell in range(first, last + 1)
            ))

    return clauses


def build_ip_tree(queries, domain, max_depth=8):
    """
    Top-down construction over a set of queries.

    :param queries: query id -> query
    :type queries: dict[int, chainads.transform.condition.Query]
    :rtype: IPTree
    """
    tree = IPTree(domain, max_depth)
    for query_id, query in queries.items():
        tree.register(query_id, query)

    return tree


class QueryNotFoundError(ChainAdsError):
    def __init__(self, query_id):
        super(QueryNotFoundError, self).__init__(f"no registered query {query_id}")
        self.query_id = query_id


class DuplicateQueryError(ChainAdsError):
    pass
