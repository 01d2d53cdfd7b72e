from collections import deque
from hashlib import sha256


HASH_SIZE = 32
ZERO_HASH = bytes(HASH_SIZE)


def hash_concat(*parts):
    """
    :type parts: bytes
    :return: sha256(part_1 | part_2 | ...)
    :rtype: bytes
    """
    return sha256(b"".join(parts)).digest()


def digest_bytes(digest):
    """
    Serialized accumulator value, empty for digest-less nodes.
    """
    return b"" if digest is None else digest.to_bytes()


class BinaryTreeNode:
    """
    Represent a generic node in a binary tree structure.
    """
    def __init__(self, parent=None, left=None, right=None):
        self.parent = parent
        self.left = left
        self.right = right

    @property
    def children(self):
        if self.is_leaf:
            return ()

        return self.left, self.right

    @property
    def is_leaf(self):
        return self.left is None and self.right is None


class IntraNode(BinaryTreeNode):
    """
    Node of an intra-block index.

        hash_n = H(child_hash | AttDigest_n)
        child_hash = object id for leaves, H(hash_l | hash_r) for internal nodes

    Leaves always carry a digest, internal nodes of the plain (nil) index carry none.
    `multiset` is the transformed attribute multiset, the multiset sum of the leaves below the node.
    """
    def __init__(self, child_hash, multiset, digest, obj=None, left=None, right=None):
        super(IntraNode, self).__init__(left=left, right=right)

        self.child_hash = child_hash
        self.multiset = multiset
        self.digest = digest
        self.obj = obj
        self.node_hash = hash_concat(child_hash, digest_bytes(digest))

        self.height = 0 if self.is_leaf else max(left.height, right.height) + 1
        self.leaves_counter = 1 if self.is_leaf else left.leaves_counter + right.leaves_counter

    @classmethod
    def create_leaf(cls, obj, multiset, digest):
        """
        :type obj: chainads.chain.objects.TemporalObject
        :type multiset: Multiset
        :type digest: AccValue
        :rtype: IntraNode
        """
        return cls(child_hash=obj.object_id, multiset=multiset, digest=digest, obj=obj)

    @classmethod
    def create_node(cls, left, right, digest):
        """
        :type left: IntraNode
        :type right: IntraNode
        :param digest: accumulator value of the multiset sum, None for plain nodes
        :rtype: IntraNode
        """
        node = cls(
            child_hash=hash_concat(left.node_hash, right.node_hash),
            multiset=left.multiset + right.multiset,
            digest=digest,
            left=left,
            right=right
        )
        left.parent = node
        right.parent = node

        return node

    @property
    def capacity(self):
        return 2 ** self.height

    @property
    def is_full(self):
        return self.capacity == self.leaves_counter

    def __repr__(self):
        kind = "leaf" if self.is_leaf else "node"
        return f"<IntraNode {kind} {self.node_hash.hex()[:12]}>"


def iter_bfs(root):
    """
    Breadth first traversal, left child before right child.

    :type root: BinaryTreeNode | None
    :rtype: iterator[BinaryTreeNode]
    """
    if root is None:
        return

    queue = deque([root])
    while queue:
        node = queue.popleft()
        yield node
        queue.extend(node.children)


def iter_leaves(root):
    """
    Leaves from left to right.
    """
    stack = [root] if root is not None else []
    while stack:
        node = stack.pop()
        if node.is_leaf:
            yield node
        else:
            stack.append(node.right)
            stack.append(node.left)
