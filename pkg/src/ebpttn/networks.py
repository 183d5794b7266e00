"""Topology algebra for binary tree tensor networks.

A TtnTopology is an unrooted binary tree: leaves 0..N-1 carry the physical
sites, internal vertices (numbered upward from N) have degree 3, and one
distinguished edge -- the root edge -- carries the singular-value matrix of
the state.  Moving the root edge does not change the state, so isomorphism
checks ignore it: two topologies are equivalent when a leaf-label-preserving
map takes one tree onto the other.
"""

from __future__ import annotations

import json

from .ebp import BipartitionTree


def _double_factorial(k: int) -> int:
    if k <= 0:
        return 1
    out = 1
    while k > 0:
        out *= k
        k -= 2
    return out


def count_rooted(n: int) -> int:
    """Number of rooted binary trees on n labeled leaves: (2n-3)!!, exact."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _double_factorial(2 * n - 3)


def count_unrooted(n: int) -> int:
    """Number of unrooted binary trees on n labeled leaves: (2n-5)!!, exact."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return _double_factorial(2 * n - 5)


class TtnTopology:
    """Unrooted binary tree over N leaves with a designated root edge."""

    def __init__(self, n_sites: int, edges, root_edge):
        self.n_sites = n_sites
        self.edges = tuple(sorted(tuple(sorted(e)) for e in edges))
        self.root_edge = tuple(sorted(root_edge))
        self._adj: dict[int, list[int]] = {}
        for u, v in self.edges:
            self._adj.setdefault(u, []).append(v)
            self._adj.setdefault(v, []).append(u)
        for v in self._adj:
            self._adj[v].sort()
        self.validate()

    # -- structure ---------------------------------------------------------

    def validate(self):
        n = self.n_sites
        if n < 2:
            raise ValueError("topology needs at least 2 leaves")
        if len(self.edges) != len(set(self.edges)):
            raise ValueError("duplicate edges")
        if len(self.edges) != 2 * n - 3:
            raise ValueError(f"{len(self.edges)} edges, expected {2 * n - 3}")
        if self.root_edge not in self.edges:
            raise ValueError(f"root edge {self.root_edge} is not an edge")
        vertices = set(self._adj)
        if vertices != set(range(2 * n - 2)):
            raise ValueError("vertices must be exactly 0..2N-3 (leaves then internals)")
        for v in range(n):
            if len(self._adj[v]) != 1:
                raise ValueError(f"leaf {v} has degree {len(self._adj[v])}")
        for v in range(n, 2 * n - 2):
            if len(self._adj[v]) != 3:
                raise ValueError(f"internal vertex {v} has degree {len(self._adj[v])}")
        # connectivity (with the right vertex/edge count this also rules out cycles)
        seen = {0}
        stack = [0]
        while stack:
            for w in self._adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(vertices):
            raise ValueError("topology is not connected")

    def neighbors(self, v: int) -> list[int]:
        return list(self._adj[v])

    def is_leaf(self, v: int) -> bool:
        return v < self.n_sites

    def internal_vertices(self) -> range:
        return range(self.n_sites, 2 * self.n_sites - 2)

    def side_leaves(self, u: int, v: int) -> frozenset[int]:
        """Leaves on the u side of edge (u, v)."""
        if tuple(sorted((u, v))) not in self.edges:
            raise ValueError(f"({u}, {v}) is not an edge")
        seen = {u}
        stack = [u]
        leaves = set()
        while stack:
            x = stack.pop()
            if self.is_leaf(x):
                leaves.add(x)
            for w in self._adj[x]:
                if w != v and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(leaves)

    # -- equivalence -------------------------------------------------------

    def _encode(self, v: int, parent: int) -> str:
        if self.is_leaf(v):
            return f"L{v}"
        parts = sorted(self._encode(w, v) for w in self._adj[v] if w != parent)
        return "(" + ",".join(parts) + ")"

    def canonical_key(self) -> str:
        """Leaf-labeled canonical form, independent of the root edge position."""
        anchor = self._adj[0][0]  # the tree rooted at leaf 0's unique edge
        return self._encode(anchor, 0)

    def isomorphic_to(self, other: "TtnTopology") -> bool:
        return (self.n_sites == other.n_sites
                and self.canonical_key() == other.canonical_key())

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "n_sites": self.n_sites,
            "edges": [list(e) for e in self.edges],
            "root_edge": list(self.root_edge),
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TtnTopology":
        payload = json.loads(text)
        return cls(payload["n_sites"], payload["edges"], payload["root_edge"])

    def to_dot(self) -> str:
        lines = ["graph ttn {", "  node [shape=circle];"]
        for v in range(self.n_sites):
            lines.append(f'  {v} [label="{v}"];')
        for v in self.internal_vertices():
            lines.append(f'  {v} [label="", shape=point, width=0.12];')
        for u, v in self.edges:
            style = ' [style=bold, color=goldenrod, label="root"]' if (u, v) == self.root_edge else ""
            lines.append(f"  {u} -- {v}{style};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def reroot(topology: TtnTopology, edge) -> TtnTopology:
    """Move the root-edge designation; the underlying tree is unchanged."""
    edge = tuple(sorted(edge))
    if edge not in topology.edges:
        raise ValueError(f"{edge} is not an edge of the topology")
    return TtnTopology(topology.n_sites, topology.edges, edge)


class _Builder:
    """Incremental construction with automatic internal-vertex numbering."""

    def __init__(self, n_sites: int):
        self.n = n_sites
        self.next_id = n_sites
        self.edges: list[tuple[int, int]] = []

    def join(self, a: int, b: int) -> int:
        """New internal vertex adjacent to a and b; returns its id."""
        v = self.next_id
        self.next_id += 1
        self.edges.append((a, v))
        self.edges.append((b, v))
        return v

    def finish(self, a: int, b: int) -> TtnTopology:
        """Close the tree with the root edge (a, b)."""
        self.edges.append((a, b))
        return TtnTopology(self.n, self.edges, (a, b))


def _most_balanced_root(t: TtnTopology) -> TtnTopology:
    """Move the root edge to the most leaf-balanced edge (ties: smallest edge)."""
    n = t.n_sites
    best = min(t.edges, key=lambda e: (abs(2 * len(t.side_leaves(e[0], e[1])) - n), e))
    return reroot(t, best)


def _caterpillar(order: list[int]) -> TtnTopology:
    """MPS-style tree peeling the given site order one leaf at a time."""
    n = len(order)
    if n == 2:
        return TtnTopology(2, [(0, 1)], (0, 1))
    b = _Builder(n)
    head = b.join(order[0], order[1])
    for site in order[2:-1]:
        head = b.join(head, site)
    return _most_balanced_root(b.finish(head, order[-1]))


def uniform_mps(n: int) -> TtnTopology:
    """Caterpillar tree over sites 0..n-1, the standard DMRG matrix product state."""
    if n < 2:
        raise ValueError("uniform MPS needs n >= 2")
    return _caterpillar(list(range(n)))


def snake_mps(width: int, height: int) -> TtnTopology:
    """Uniform MPS along the boustrophedon path of a row-major grid."""
    if width < 2 or height < 2:
        raise ValueError("snake MPS needs width >= 2 and height >= 2")
    order = []
    for r in range(height):
        cols = range(width) if r % 2 == 0 else range(width - 1, -1, -1)
        order.extend(r * width + c for c in cols)
    return _caterpillar(order)


def dimer_mps(n: int) -> TtnTopology:
    """Caterpillar over two-site dimers (2i, 2i+1), each dimer joined by one vertex."""
    if n < 2 or n % 2:
        raise ValueError("dimer MPS needs even n >= 2")
    if n == 2:
        return TtnTopology(2, [(0, 1)], (0, 1))
    b = _Builder(n)
    dimers = [b.join(2 * i, 2 * i + 1) for i in range(n // 2)]
    if len(dimers) == 2:
        return b.finish(dimers[0], dimers[1])
    head = b.join(dimers[0], dimers[1])
    for d in dimers[2:-1]:
        head = b.join(head, d)
    return _most_balanced_root(b.finish(head, dimers[-1]))


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def pbttn_1d(n: int) -> TtnTopology:
    """Perfect binary tree over contiguous halves of the chain."""
    if n < 2 or not _is_pow2(n):
        raise ValueError("1D pbTTN needs n a power of two, n >= 2")
    b = _Builder(n)

    def build(lo: int, hi: int) -> int:
        if hi - lo == 1:
            return lo
        mid = (lo + hi) // 2
        return b.join(build(lo, mid), build(mid, hi))

    half = n // 2
    return b.finish(build(0, half), build(half, n))


def pbttn_2d(width: int, height: int) -> TtnTopology:
    """Perfect binary tree over 2D blocks: sites pair horizontally at the
    finest level, then merge directions alternate (2x1 -> 2x2 -> 4x2 -> ...)."""
    if not (_is_pow2(width) and _is_pow2(height)) or width < 2 or height < 2:
        raise ValueError("2D pbTTN needs width and height powers of two, both >= 2")
    b = _Builder(width * height)

    def build(r0: int, c0: int, bw: int, bh: int) -> int:
        if bw == 1 and bh == 1:
            return r0 * width + c0
        if bw > bh:  # last merge was horizontal: undo it first
            return b.join(build(r0, c0, bw // 2, bh), build(r0, c0 + bw // 2, bw // 2, bh))
        return b.join(build(r0, c0, bw, bh // 2), build(r0 + bh // 2, c0, bw, bh // 2))

    top_a = build(0, 0, width, height // 2)
    top_b = build(height // 2, 0, width, height // 2)
    return b.finish(top_a, top_b)


def topology_from_tree(tree: BipartitionTree) -> TtnTopology:
    """Strip a bipartition tree down to its TTN topology.

    Every internal bipartition node except the root becomes a degree-3
    vertex; the root's two children are joined directly by the root edge
    (the singular-value position).
    """
    n = tree.n_sites
    b = _Builder(n)

    def build(node_id: str) -> int:
        node = tree.nodes[node_id]
        if node.children is None:
            return node.sites.bit_length() - 1  # the single set bit = leaf index
        ca = build(node.children[0])
        cb = build(node.children[1])
        return b.join(ca, cb)

    root = tree.nodes[""]
    if root.children is None:
        raise ValueError("bipartition tree has no splits")
    va = build(root.children[0])
    vb = build(root.children[1])
    return b.finish(va, vb)


def _mmx_4x4_pattern(b: _Builder, site) -> tuple[int, int]:
    """The 4x4 network found by the max-loss-minimizing search, frozen.

    ``site(r, c)`` maps grid coordinates to leaf ids.  The 4-site units are
    the 2x2 blocks: the top-left block dissolves into the spine one site at a
    time, the other three hang off it as MPS-like subtrees with the far pair
    of each block forming the innermost cherry.  Returns the two endpoints of
    the top edge (between the top-right unit junction and the bottom-block
    junction).
    """

    def unit(cherry_a, cherry_b, mid, out):
        v = b.join(site(*cherry_a), site(*cherry_b))
        v = b.join(v, site(*mid))
        return b.join(v, site(*out))

    tr = unit((0, 3), (1, 3), (0, 2), (1, 2))   # {2,3,7} cherry (3,7), then 6
    bl = unit((3, 0), (3, 1), (2, 0), (2, 1))   # {12,13} cherry, then 8, then 9
    br = unit((3, 2), (3, 3), (2, 3), (2, 2))   # {14,15} cherry, then 11, then 10
    head = b.join(site(0, 0), site(0, 1))
    head = b.join(head, site(1, 0))
    head = b.join(head, site(1, 1))
    head = b.join(head, tr)
    bottom = b.join(bl, br)
    return head, bottom


def mmx_4x4() -> TtnTopology:
    """Frozen form of the 16-site topology the MMX search finds on the 4x4 grid."""
    b = _Builder(16)
    head, bottom = _mmx_4x4_pattern(b, lambda r, c: 4 * r + c)
    return b.finish(head, bottom)


def extended_mmx_64() -> TtnTopology:
    """Self-similar 64-site extension of the 4x4 maximum-loss-minimizing network.

    Construction rule: tile the 8x8 grid into sixteen 2x2 blocks and treat
    each block as one supersite on a 4x4 grid; wire the supersites with the
    `mmx_4x4` pattern, and expand every supersite into a 4-leaf subtree whose
    orientation copies the corresponding 2x2 unit of the 16-site network
    (cherry on the block's far pair, inner site attached last).  Contracting
    every block back to a point therefore reproduces the 16-site topology
    one scale up.
    """
    width = 8
    b = _Builder(64)

    def block_root(rb: int, cb: int) -> int:
        def s(r, c):
            return (2 * rb + r) * width + (2 * cb + c)

        kind = (rb % 2, cb % 2)
        if kind == (0, 0):    # spine-corner block: top pair, then left, then right
            v = b.join(s(0, 0), s(0, 1))
            v = b.join(v, s(1, 0))
            return b.join(v, s(1, 1))
        if kind == (0, 1):    # cherry on the right column, inner column last
            v = b.join(s(0, 1), s(1, 1))
            v = b.join(v, s(0, 0))
            return b.join(v, s(1, 0))
        if kind == (1, 0):    # cherry on the bottom row
            v = b.join(s(1, 0), s(1, 1))
            v = b.join(v, s(0, 0))
            return b.join(v, s(0, 1))
        v = b.join(s(1, 0), s(1, 1))
        v = b.join(v, s(0, 1))
        return b.join(v, s(0, 0))

    head, bottom = _mmx_4x4_pattern(b, block_root)
    return b.finish(head, bottom)


def induced_topology(topology: TtnTopology, leaf_map: dict[int, int]) -> TtnTopology:
    """Topology induced on a leaf subset: the spanning subtree with outside
    branches pruned and degree-2 vertices contracted; leaves renamed through
    ``leaf_map`` (old leaf -> new contiguous leaf id)."""
    keep = set(leaf_map)
    if len(keep) < 2 or len(leaf_map.values()) != len(set(leaf_map.values())):
        raise ValueError("leaf_map must injectively rename at least two leaves")
    adj = {v: set(topology.neighbors(v)) for v in range(2 * topology.n_sites - 2)}

    def drop(v):
        for w in adj[v]:
            adj[w].discard(v)
        del adj[v]

    pruning = True
    while pruning:
        pruning = False
        for v in list(adj):
            if v not in keep and len(adj[v]) <= 1:
                drop(v)
                pruning = True
    for v in list(adj):
        if v not in keep and len(adj[v]) == 2:
            a, w = sorted(adj[v])
            drop(v)
            adj[a].add(w)
            adj[w].add(a)

    n_new = len(keep)
    names = dict(leaf_map)
    for i, v in enumerate(sorted(set(adj) - keep)):
        names[v] = n_new + i
    edges = {tuple(sorted((names[u], names[v]))) for u in adj for v in adj[u]}
    t = TtnTopology(n_new, sorted(edges), sorted(edges)[0])
    return _most_balanced_root(t)
