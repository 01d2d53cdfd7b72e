import logging

from chainads.chain.tree import IntraNode
from chainads.errors import ChainAdsError
from chainads.transform.condition import transform_object


logger = logging.getLogger(__name__)


def build_leaves(objects, accumulator, domain):
    """
    One leaf per object with W' = transform_object(o) and AttDigest = acc(W').

    :type objects: list[TemporalObject]
    :type accumulator: chainads.crypto.accumulator.Accumulator
    :type domain: chainads.transform.condition.Domain
    :rtype: list[IntraNode]
    """
    leaves = list()
    for obj in objects:
        multiset = transform_object(obj, domain)
        leaves.append(IntraNode.create_leaf(obj, multiset, accumulator.setup(multiset)))

    return leaves


def aggregate_digest(accumulator, left, right, multiset):
    """
    Digest of W_l + W_r, by the group operation when the construction is aggregatable.
    """
    if accumulator.supports_aggregation:
        return accumulator.sum([left.digest, right.digest])

    return accumulator.setup(multiset)


def build_intra_index(objects, accumulator, domain):
    """
    Bottom-up greedy pairing by attribute similarity.

    On every level the node with the largest |W| is paired with the remaining node of maximum Jaccard
    similarity (first one on ties), an odd node left alone moves up to the next level as is.

    Time Complexity: O(n^2) multiset comparisons per level

    :type objects: list[TemporalObject]
    :rtype: IntraNode
    """
    if not objects:
        raise BuildError("cannot index an empty block")

    nodes = build_leaves(objects, accumulator, domain)
    while len(nodes) > 1:
        new_nodes = list()
        while len(nodes) > 1:
            first = max(range(len(nodes)), key=lambda index: (nodes[index].multiset.cardinality, -index))
            node = nodes.pop(first)

            second = max(
                range(len(nodes)),
                key=lambda index: (node.multiset.jaccard_index(nodes[index].multiset), -index)
            )
            partner = nodes.pop(second)

            multiset = node.multiset + partner.multiset
            digest = aggregate_digest(accumulator, node, partner, multiset)
            new_nodes.append(IntraNode.create_node(node, partner, digest))

        nodes = new_nodes + nodes

    logger.debug("built intra index over %d objects", len(objects))
    return nodes[0]


def build_plain_index(objects, accumulator, domain):
    """
    Plain Merkle shape over the objects in their original order: leaves carry digests, internal nodes only hashes.

    Leaves are inserted one by one, each insertion splits the first full node on the right spine:
           PARENT_NODE                        PARENT_NODE
                  \\                 ->              \\
                SPLIT_NODE                          MERGE_NODE
                 //    \\                           //      \\
                ?        ?                      SPLIT_NODE  NEW_NODE

    :type objects: list[TemporalObject]
    :rtype: IntraNode
    """
    if not objects:
        raise BuildError("cannot index an empty block")

    root = None
    for leaf in build_leaves(objects, accumulator, domain):
        if root is None:
            root = leaf
            continue

        # The left node must be full by construction rules
        spine = list()
        split_node = root
        while not split_node.is_full:
            spine.append(split_node)
            split_node = split_node.right

        merged = IntraNode.create_node(split_node, leaf, None)
        for ancestor in reversed(spine):
            merged = IntraNode.create_node(ancestor.left, merged, None)
        root = merged

    return root


def build_index(objects, accumulator, domain, mode):
    """
    :param mode: "nil" for the plain index, "intra" / "both" for the similarity index
    :rtype: IntraNode
    """
    if mode == "nil":
        return build_plain_index(objects, accumulator, domain)

    return build_intra_index(objects, accumulator, domain)


class BuildError(ChainAdsError):
    pass
