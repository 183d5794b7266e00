"""Recursive entanglement bipartitioning driven by a precomputed entropy table.

Starting from the full site set, each cluster is split into the pair of
sub-clusters minimizing the chosen objective:

    mmi:  S(A) + S(B) - S(A | B)   (mutual information between the branches)
    mmx:  max(S(A), S(B))          (worst single-branch entropy)

Unordered splits are enumerated once by keeping the cluster's lowest site in
part A.  Scores within ``tie_tol`` are degenerate; the default tie rule picks
the smallest canonical A mask (bit-reproducible), the ``random`` rule picks a
seeded-uniform choice among the tied splits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .entropy import EntropyTable, _check_proper, sites_from_mask, mask_from_sites

OBJECTIVES = ("mmi", "mmx")
TIE_RULES = ("lexicographic", "random")
TIE_TOL = 1e-10


def score(table: EntropyTable, objective: str, a: int, b: int) -> float:
    """Objective value of the split (a, b); both masks disjoint and nonempty."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    a = _check_proper(a, table.n_sites)
    b = _check_proper(b, table.n_sites)
    if a & b:
        raise ValueError(f"subsets {a:#x} and {b:#x} overlap")
    sa = table.lookup(a)
    sb = table.lookup(b)
    if objective == "mmx":
        return max(sa, sb)
    union = a | b
    s_union = 0.0 if union == table.full_mask else table.lookup(union)
    return sa + sb - s_union


@dataclass
class BipartitionNode:
    id: str                        # branch path over {A, B}; "" is the root
    sites: int                     # bitmask of the node's site cluster
    ee: float                      # exact EE of the cluster vs its complement
    children: tuple[str, str] | None
    generation: int


class BipartitionTree:
    """Rooted binary tree of site clusters with exact EE on every node."""

    def __init__(self, n_sites: int, nodes: dict[str, BipartitionNode], objective: str):
        self.n_sites = n_sites
        self.nodes = nodes
        self.objective = objective
        self.validate()

    def validate(self):
        full = (1 << self.n_sites) - 1
        root = self.nodes.get("")
        if root is None or root.sites != full or root.ee != 0.0:
            raise ValueError("malformed tree: root must hold the full site set with ee 0")
        internal = 0
        leaves = 0
        for node in self.nodes.values():
            if node.children is None:
                if node.sites.bit_count() != 1:
                    raise ValueError(f"leaf {node.id!r} holds {node.sites.bit_count()} sites")
                leaves += 1
                continue
            internal += 1
            ca, cb = (self.nodes[c] for c in node.children)
            if (ca.sites & cb.sites) or (ca.sites | cb.sites) != node.sites:
                raise ValueError(f"children of {node.id!r} do not partition the parent cluster")
        if leaves != self.n_sites or internal != self.n_sites - 1:
            raise ValueError(
                f"tree has {leaves} leaves / {internal} internal nodes, "
                f"expected {self.n_sites} / {self.n_sites - 1}")

    def leaves(self) -> list[BipartitionNode]:
        return [n for n in self.nodes.values() if n.children is None]

    def to_json(self) -> str:
        payload = {
            "n_sites": self.n_sites,
            "objective": self.objective,
            "nodes": [
                {
                    "id": node.id,
                    "sites": sites_from_mask(node.sites),
                    "ee": node.ee,
                    "children": list(node.children) if node.children else None,
                }
                for _, node in sorted(self.nodes.items())
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BipartitionTree":
        payload = json.loads(text)
        n = payload["n_sites"]
        nodes = {}
        for rec in payload["nodes"]:
            children = tuple(rec["children"]) if rec["children"] else None
            nodes[rec["id"]] = BipartitionNode(
                rec["id"], mask_from_sites(rec["sites"], n), rec["ee"], children,
                len(rec["id"]))
        return cls(n, nodes, payload["objective"])

    def to_dot(self) -> str:
        lines = ["digraph bipartition {", '  rankdir=TB;', '  node [shape=box];']
        for nid, node in sorted(self.nodes.items()):
            label = ",".join(str(s) for s in sites_from_mask(node.sites))
            lines.append(f'  "{nid or "root"}" [label="{label}"];')
        for nid, node in sorted(self.nodes.items()):
            if node.children:
                for cid in node.children:
                    child = self.nodes[cid]
                    lines.append(f'  "{nid or "root"}" -> "{cid}" [label="{child.ee:.4f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _best_split(entries, full, q: int, objective: str, tie_rule: str, rng, tie_tol: float):
    """Minimize the objective over all unordered proper splits of cluster ``q``."""
    low = q & (-q)
    rest = q ^ low
    s_q = 0.0 if q == full else entries[q if q & 1 else q ^ full]
    best = np.inf
    ties: list[tuple[float, int]] = []
    sub = rest
    while True:
        sub = (sub - 1) & rest
        a = low | sub
        b = q ^ a
        if b:
            sa = entries[a if a & 1 else a ^ full]
            sb = entries[b if b & 1 else b ^ full]
            val = max(sa, sb) if objective == "mmx" else sa + sb - s_q
            if val < best - tie_tol:
                best = val
                ties = [(val, a)]
            elif val <= best + tie_tol:
                ties.append((val, a))
                best = min(best, val)
        if sub == 0:
            break
    masks = [a for val, a in ties if val <= best + tie_tol]
    if tie_rule == "lexicographic":
        a = min(masks)
    else:
        a = masks[rng.integers(len(masks))]
    return a, q ^ a, best


def run_ebp(table: EntropyTable, objective: str = "mmx", tie_rule: str = "lexicographic",
            seed: int = 0, tie_tol: float = TIE_TOL) -> BipartitionTree:
    """Top-down recursive bipartitioning of the full system.

    Every cluster of two or more sites is split by exhaustive enumeration of
    its 2^(|Q|-1) - 1 unordered proper splits; recursion stops at single
    sites.  Each node carries the exact EE of its cluster read off the table.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    if tie_rule not in TIE_RULES:
        raise ValueError(f"unknown tie rule {tie_rule!r}; expected one of {TIE_RULES}")
    n = table.n_sites
    if len(table) != (1 << (n - 1)) - 1:
        raise ValueError(
            f"entropy table has {len(table)} entries, needs {(1 << (n - 1)) - 1} for n={n}")
    rng = np.random.default_rng(seed)
    entries = table.entries
    full = table.full_mask
    nodes: dict[str, BipartitionNode] = {}

    def build(mask: int, path: str):
        ee = 0.0 if mask == full else entries[mask if mask & 1 else mask ^ full]
        if mask.bit_count() == 1:
            nodes[path] = BipartitionNode(path, mask, ee, None, len(path))
            return
        a, b, _ = _best_split(entries, full, mask, objective, tie_rule, rng, tie_tol)
        nodes[path] = BipartitionNode(path, mask, ee, (path + "A", path + "B"), len(path))
        build(a, path + "A")
        build(b, path + "B")

    build(full, "")
    return BipartitionTree(n, nodes, objective)


def max_cut_entropy(tree: BipartitionTree) -> float:
    """Largest EE encountered across the bipartitioning process (root excluded)."""
    return max(node.ee for nid, node in tree.nodes.items() if nid != "")
