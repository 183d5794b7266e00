"""Variational TTN ground-state optimization at fixed bond dimension.

The state is kept in canonical form: every internal 3-leg tensor is an
isometry toward the root edge, and the root edge carries a unit-Frobenius
matrix, so the norm is always 1.  Each bond term of the Hamiltonian is
shifted by -J/4 (its largest eigenvalue), making every term negative
semidefinite; the shift is added back for reporting.  A sweep updates each
isometry with the SVD minimizer of the linearized shifted energy and ends
with an exact eigensolve of the small effective operator on the root matrix,
so the energy can never increase during a sweep.

Renormalized operators are cached per directed edge.  Upward caches hold,
for each subtree, the summed block Hamiltonian of its interior bonds plus
the spin operators of sites whose bond partner lies outside; downward caches
hold the complementary objects capped by the root matrix.  Only bonds whose
causal cone touches a vertex contribute nontrivially to its environment;
everything else collapses through the isometry conditions.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigensolver import lanczos_ground
from .lattice import BondList
from .networks import TtnTopology

# real operator triple (Sx, i*Sy, Sz); S_i.S_j = SxSx - (iSy)(iSy) + SzSz
_SX = np.array([[0.0, 0.5], [0.5, 0.0]])
_ISY = np.array([[0.0, 0.5], [-0.5, 0.0]])
_SZ = np.array([[0.5, 0.0], [0.0, -0.5]])
SPIN_OPS = np.stack([_SX, _ISY, _SZ])
PAIR_COEFFS = (1.0, -1.0, 1.0)

ROOT = -1  # parent sentinel for the two vertices flanking the root edge


class OptimizeError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# orientation of a topology toward its root edge

class _Orientation:
    def __init__(self, topology: TtnTopology, chi: int):
        if chi < 2:
            raise ValueError("bond dimension must be >= 2")
        self.topology = topology
        self.chi = chi
        n = topology.n_sites
        self.root_u, self.root_v = topology.root_edge
        self.parent: dict[int, int] = {self.root_u: ROOT, self.root_v: ROOT}
        self.children: dict[int, tuple[int, int]] = {}
        self.post: dict[int, list[int]] = {}  # per root-side post-order of internal vertices
        for side, other in ((self.root_u, self.root_v), (self.root_v, self.root_u)):
            stack = [side]
            dfs = []
            while stack:
                x = stack.pop()
                dfs.append(x)
                if not topology.is_leaf(x):
                    up = other if x == side else self.parent[x]
                    kids = tuple(sorted(w for w in topology.neighbors(x) if w != up))
                    self.children[x] = kids
                    for w in kids:
                        self.parent[w] = x
                        stack.append(w)
            self.post[side] = [x for x in reversed(dfs) if not topology.is_leaf(x)]

        self.below: dict[int, int] = {}  # leaf bitmask of the subtree at/below v
        for v in range(n):
            self.below[v] = 1 << v
        for side in (self.root_u, self.root_v):
            for v in self.post[side]:
                a, b = self.children[v]
                self.below[v] = self.below[a] | self.below[b]

        def leg(g: int) -> int:
            return min(chi, 1 << g, 1 << (n - g))

        self.dim: dict[int, int] = {}
        for v in self.parent:
            self.dim[v] = leg(self.below[v].bit_count())
        for v in self.children.values():
            for w in v:
                self.dim[w] = leg(self.below[w].bit_count())
        self.dim_root = leg(self.below[self.root_u].bit_count())
        for v, kids in self.children.items():
            a, b = kids
            if self.dim[v] > self.dim[a] * self.dim[b]:
                raise ValueError("leg dimension rule violated (parent exceeds children product)")

    def tensor_shape(self, v: int) -> tuple[int, int, int]:
        a, b = self.children[v]
        da, db = self.dim[a], self.dim[b]
        dp = self.dim_root if self.parent[v] == ROOT else self.dim[v]
        return da, db, dp


@dataclass
class TtnState:
    """TTN in canonical form: isometries toward the root edge + root matrix."""

    topology: TtnTopology
    chi: int
    tensors: dict[int, np.ndarray]
    root_matrix: np.ndarray

    def orientation(self) -> _Orientation:
        if not hasattr(self, "_orient"):
            self._orient = _Orientation(self.topology, self.chi)
        return self._orient

    def copy(self) -> "TtnState":
        return TtnState(self.topology, self.chi, dict(self.tensors), self.root_matrix.copy())

    def isometry_residual(self) -> float:
        """Largest deviation of any tensor from exact isometry toward the root."""
        worst = abs(np.linalg.norm(self.root_matrix) - 1.0)
        for t in self.tensors.values():
            w = t.reshape(-1, t.shape[2])
            worst = max(worst, float(np.max(np.abs(w.T @ w - np.eye(t.shape[2])))))
        return worst

    def to_wavefunction(self) -> np.ndarray:
        """Dense amplitude vector (bit k of the index = site k); small N only."""
        n = self.topology.n_sites
        if n > 16:
            raise ValueError("dense contraction is limited to 16 sites")
        orient = self.orientation()

        def subtree(v) -> tuple[np.ndarray, list[int]]:
            if self.topology.is_leaf(v):
                return np.eye(2), [v]
            a, b = orient.children[v]
            ma, la = subtree(a)
            mb, lb = subtree(b)
            t = self.tensors[v]
            m = np.kron(ma, mb) @ t.reshape(-1, t.shape[2])
            return m, la + lb
        mu, lu = subtree(orient.root_u)
        mv, lv = subtree(orient.root_v)
        combined = mu @ self.root_matrix @ mv.T
        order = lu + lv  # axis t of the reshaped tensor = order[t], most significant first
        tensor = combined.reshape((2,) * n)
        perm = [order.index(n - 1 - t) for t in range(n)]
        return tensor.transpose(perm).reshape(-1)


def init_random(topology: TtnTopology, chi: int, seed: int = 0) -> TtnState:
    """Random isometric TTN: seeded normal tensors orthonormalized toward the root."""
    orient = _Orientation(topology, chi)
    rng = np.random.default_rng(seed)
    tensors = {}
    for v in sorted(orient.children):
        da, db, dp = orient.tensor_shape(v)
        q, _ = np.linalg.qr(rng.standard_normal((da * db, dp)))
        tensors[v] = np.ascontiguousarray(q.reshape(da, db, dp))
    lam = rng.standard_normal((orient.dim_root, orient.dim_root))
    lam /= np.linalg.norm(lam)
    return TtnState(topology, chi, tensors, lam)


# ---------------------------------------------------------------------------
# tensor contractions (T has legs: child a, child b, parent p)

def _asc_a(T, M):
    """M on leg a, ascended to the parent leg: out[p',p] = T[a'bp'] M[a'a] T[abp]."""
    return np.tensordot(T, np.tensordot(M, T, (1, 0)), ((0, 1), (0, 1)))


def _asc_b(T, M):
    return np.tensordot(T, np.tensordot(M, T, (1, 1)), ((1, 0), (0, 1)))


def _asc_ab(T, Ma, Mb):
    x = np.tensordot(Ma, T, (1, 0))          # (a', b, p)
    x = np.tensordot(Mb, x, (1, 1))          # (b', a', p)
    return np.tensordot(T, x, ((0, 1), (1, 0)))


def _desc_a(T, Mp, Mb=None):
    """Parent-leg matrix (and optionally one on leg b) descended to leg a."""
    x = np.tensordot(Mp, T, (1, 2))          # (p', a, b)
    if Mb is None:
        return np.tensordot(T, x, ((1, 2), (2, 0)))
    y = np.tensordot(Mb, x, (1, 2))          # (b', p', a)
    return np.tensordot(T, y, ((1, 2), (0, 1)))


def _desc_b(T, Mp, Ma=None):
    x = np.tensordot(Mp, T, (1, 2))          # (p', a, b)
    if Ma is None:
        return np.tensordot(T, x, ((0, 2), (1, 0)))
    y = np.tensordot(Ma, x, (1, 1))          # (a', p', b)
    return np.tensordot(T, y, ((0, 2), (0, 1)))


def _gamma_piece(T, X, Y, Z):
    """Environment contribution: out[abp] = T[a'b'p'] X[a'a] Y[b'b] Z[p'p]."""
    u = T
    if Z is not None:
        u = np.tensordot(u, Z, (2, 0))                       # (a', b', p)
    if Y is not None:
        u = np.moveaxis(np.tensordot(u, Y, (1, 0)), 2, 1)    # (a', b, p)
    if X is not None:
        u = np.tensordot(X, u, (0, 0))                       # (a, b, p)
    return u


# ---------------------------------------------------------------------------
# bond bookkeeping relative to an oriented topology

class _BondAnalysis:
    def __init__(self, orient: _Orientation, bonds: BondList):
        if bonds.n_sites != orient.topology.n_sites:
            raise ValueError(
                f"bond list is for {bonds.n_sites} sites, topology has {orient.topology.n_sites}")
        self.bonds = bonds
        below = orient.below
        full = (1 << bonds.n_sites) - 1

        def side(mask, s):
            return bool(mask & (1 << s))

        # per internal vertex: bonds joining its two child subtrees, and bonds
        # crossing from either child subtree to outside the vertex
        self.join: dict[int, list] = {v: [] for v in orient.children}
        self.cross_a: dict[int, list] = {v: [] for v in orient.children}
        self.cross_b: dict[int, list] = {v: [] for v in orient.children}
        # sites below v whose partner lies outside the subtree of v
        self.active_up: dict[int, list] = {}
        # per vertex: sites outside its subtree with a partner inside
        self.active_down: dict[int, list] = {}
        self.cross_root: list = []

        for v, (a, b) in orient.children.items():
            ma, mb = below[a], below[b]
            for i, j, J in bonds.bonds:
                ia, ja = side(ma, i), side(ma, j)
                ib, jb = side(mb, i), side(mb, j)
                if ia and jb:
                    self.join[v].append((i, j, J))
                elif ja and ib:
                    self.join[v].append((j, i, J))
                elif ia and not (ja or jb):      # (inside child a, outside v)
                    self.cross_a[v].append((i, j, J))
                elif ja and not (ia or ib):
                    self.cross_a[v].append((j, i, J))
                elif ib and not (ja or jb):      # (inside child b, outside v)
                    self.cross_b[v].append((i, j, J))
                elif jb and not (ia or ib):
                    self.cross_b[v].append((j, i, J))

        for v in list(orient.children) + list(range(bonds.n_sites)):
            mv = below[v]
            act_up, act_down = set(), set()
            for i, j, J in bonds.bonds:
                iv, jv = side(mv, i), side(mv, j)
                if iv != jv:
                    act_up.add(i if iv else j)
                    act_down.add(j if iv else i)
            self.active_up[v] = sorted(act_up)
            self.active_down[v] = sorted(act_down)

        mu = below[orient.root_u]
        for i, j, J in bonds.bonds:
            if side(mu, i) != side(mu, j):
                self.cross_root.append((i, j, J) if side(mu, i) else (j, i, J))

        self.shift = sum(J for _, _, J in bonds.bonds) / 4.0


# ---------------------------------------------------------------------------
# the sweep engine

class _Engine:
    """Cache-carrying optimizer for one (topology, bonds, chi) problem."""

    def __init__(self, topology: TtnTopology, bonds: BondList, chi: int):
        self.orient = _Orientation(topology, chi)
        self.ba = _BondAnalysis(self.orient, bonds)
        self.topology = topology

    # -- upward caches ------------------------------------------------------

    def _leaf_cache(self, leaf: int):
        site = {leaf: SPIN_OPS.copy()} if self.ba.active_up[leaf] else {}
        return None, site

    def _combine_up(self, v, up):
        """Upward cache at v from its children's caches."""
        a, b = self.orient.children[v]
        T = self.tensors[v]
        ham_a, site_a = up[a]
        ham_b, site_b = up[b]
        dp = T.shape[2]
        ham = np.zeros((dp, dp))
        have = False
        if ham_a is not None:
            ham += _asc_a(T, ham_a)
            have = True
        if ham_b is not None:
            ham += _asc_b(T, ham_b)
            have = True
        for i, j, J in self.ba.join[v]:
            oi, oj = site_a[i], site_b[j]
            for k, c in enumerate(PAIR_COEFFS):
                ham += (J * c) * _asc_ab(T, oi[k], oj[k])
            ham -= (J / 4.0) * np.eye(dp)
            have = True
        site = {}
        for s in self.ba.active_up[v]:
            ops = site_a.get(s)
            if ops is not None:
                site[s] = np.stack([_asc_a(T, ops[k]) for k in range(3)])
            else:
                ops = site_b[s]
                site[s] = np.stack([_asc_b(T, ops[k]) for k in range(3)])
        return (ham if have else None), site

    def build_up(self):
        up = {}
        for leaf in range(self.topology.n_sites):
            up[leaf] = self._leaf_cache(leaf)
        for side in (self.orient.root_u, self.orient.root_v):
            for v in self.orient.post[side]:
                up[v] = self._combine_up(v, up)
        return up

    # -- downward caches ----------------------------------------------------

    def _root_down(self, top_vertex, up):
        """Downward cache just below the root edge, capped by the root matrix."""
        lam = self.lam
        if top_vertex == self.orient.root_u:
            other = self.orient.root_v
            cap = lambda M: lam @ M @ lam.T
            rho = lam @ lam.T
            outside_sites = {j for _, j, _ in self.ba.cross_root}
        else:
            other = self.orient.root_u
            cap = lambda M: lam.T @ M @ lam
            rho = lam.T @ lam
            outside_sites = {i for i, _, _ in self.ba.cross_root}
        oham, osite = up[other]
        ham = cap(oham) if oham is not None else np.zeros_like(rho)
        site = {s: np.stack([cap(osite[s][k]) for k in range(3)]) for s in outside_sites}
        return rho, ham, site

    def _step_down(self, v, child, down_v, up):
        """Downward cache for ``child`` given the one for its parent ``v``."""
        a, b = self.orient.children[v]
        T = self.tensors[v]
        rho_v, ham_v, site_v = down_v
        to_a = child == a
        sib = b if to_a else a
        desc = _desc_a if to_a else _desc_b
        sham, ssite = up[sib]
        rho = desc(T, rho_v)
        ham = desc(T, ham_v)
        if sham is not None:
            ham += desc(T, rho_v, sham)
        # bonds joining the sibling subtree with the outside combine here
        combines = self.ba.cross_b[v] if to_a else self.ba.cross_a[v]
        for i, j, J in combines:   # i in the sibling subtree, j outside v
            oi, oj = ssite[i], site_v[j]
            for k, c in enumerate(PAIR_COEFFS):
                ham += (J * c) * desc(T, oj[k], oi[k])
            ham -= (J / 4.0) * rho
        site = {}
        for s in self.ba.active_down[child]:
            ops = site_v.get(s)
            if ops is not None:  # s lies outside v
                site[s] = np.stack([desc(T, ops[k]) for k in range(3)])
            else:                # s lies in the sibling subtree
                sops = ssite[s]
                site[s] = np.stack([desc(T, rho_v, sops[k]) for k in range(3)])
        return rho, ham, site

    # -- environments and updates -------------------------------------------

    def gamma(self, v, down_v, up):
        """Environment of vertex v: linearization of the shifted energy in T[v]."""
        a, b = self.orient.children[v]
        T = self.tensors[v]
        rho, dham, dsite = down_v
        aham, asite = up[a]
        bham, bsite = up[b]
        g = _gamma_piece(T, None, None, dham)
        if aham is not None:
            g += _gamma_piece(T, aham, None, rho)
        if bham is not None:
            g += _gamma_piece(T, None, bham, rho)
        nshift = 0.0
        for i, j, J in self.ba.join[v]:
            for k, c in enumerate(PAIR_COEFFS):
                g += (J * c) * _gamma_piece(T, asite[i][k], bsite[j][k], rho)
            nshift += J
        for i, j, J in self.ba.cross_a[v]:
            for k, c in enumerate(PAIR_COEFFS):
                g += (J * c) * _gamma_piece(T, asite[i][k], None, dsite[j][k])
            nshift += J
        for i, j, J in self.ba.cross_b[v]:
            for k, c in enumerate(PAIR_COEFFS):
                g += (J * c) * _gamma_piece(T, None, bsite[i][k], dsite[j][k])
            nshift += J
        if nshift:
            g -= (nshift / 4.0) * _gamma_piece(T, None, None, rho)
        return g

    @staticmethod
    def svd_update(gamma: np.ndarray) -> np.ndarray:
        """Isometry minimizing <T, gamma>: -U V^T from the SVD of the matricized env."""
        da, db, dp = gamma.shape
        u, _, vt = np.linalg.svd(gamma.reshape(da * db, dp), full_matrices=False)
        return np.ascontiguousarray((-u @ vt).reshape(da, db, dp))

    # -- root matrix ---------------------------------------------------------

    def _root_pieces(self, up):
        pieces = []
        uham, usite = up[self.orient.root_u]
        vham, vsite = up[self.orient.root_v]
        if uham is not None:
            pieces.append((1.0, uham, None))
        if vham is not None:
            pieces.append((1.0, None, vham))
        nshift = 0.0
        for i, j, J in self.ba.cross_root:
            for k, c in enumerate(PAIR_COEFFS):
                pieces.append((J * c, usite[i][k], vsite[j][k]))
            nshift += J
        if nshift:
            pieces.append((-nshift / 4.0, None, None))
        return pieces

    def _apply_pieces(self, pieces, lam):
        out = np.zeros_like(lam)
        for c, X, Y in pieces:
            m = lam if X is None else X @ lam
            if Y is not None:
                m = m @ Y.T
            out += c * m
        return out

    def root_energy(self, up, lam) -> float:
        pieces = self._root_pieces(up)
        return float(np.sum(lam * self._apply_pieces(pieces, lam))) + self.ba.shift

    def update_root(self, up):
        """Exact minimizer of the root-matrix quadratic form; returns the energy."""
        d = self.lam.shape[0]
        pieces = self._root_pieces(up)
        if d * d <= 1024:
            h = np.zeros((d * d, d * d))
            eye = np.eye(d)
            for c, X, Y in pieces:
                h += c * np.kron(X if X is not None else eye, Y if Y is not None else eye)
            w, vecs = np.linalg.eigh(h)
            e, vec = float(w[0]), vecs[:, 0]
        else:
            mv = lambda x: self._apply_pieces(pieces, x.reshape(d, d)).reshape(-1)
            rng = np.random.default_rng(7)
            e, vec, _, _ = lanczos_ground(mv, d * d, self.lam.reshape(-1) + 1e-3 * rng.standard_normal(d * d),
                                          tol=1e-12, max_krylov=min(d * d, 120))
        lam = vec.reshape(d, d)
        self.lam = lam / np.linalg.norm(lam)
        return e + self.ba.shift

    # -- sweeping -------------------------------------------------------------

    def load(self, state: TtnState):
        self.tensors = dict(state.tensors)
        self.lam = state.root_matrix.copy()
        self.up = self.build_up()

    def export(self) -> TtnState:
        return TtnState(self.topology, self.orient.chi, dict(self.tensors), self.lam.copy())

    def _sweep_vertex(self, v, down_v):
        g = self.gamma(v, down_v, self.up)
        self.tensors[v] = self.svd_update(g)
        for child in self.orient.children[v]:
            if not self.topology.is_leaf(child):
                self._sweep_vertex(child, self._step_down(v, child, down_v, self.up))
        self.up[v] = self._combine_up(v, self.up)

    def sweep(self) -> float:
        for top in (self.orient.root_u, self.orient.root_v):
            if not self.topology.is_leaf(top):
                self._sweep_vertex(top, self._root_down(top, self.up))
        return self.update_root(self.up)


# ---------------------------------------------------------------------------
# public operations

def energy(state: TtnState, bonds: BondList) -> float:
    """<psi|H|psi> by cached bottom-up contraction toward the root edge."""
    eng = _Engine(state.topology, bonds, state.chi)
    eng.tensors = state.tensors
    eng.lam = state.root_matrix
    up = eng.build_up()
    return eng.root_energy(up, state.root_matrix)


def environment(state: TtnState, bonds: BondList, vertex: int) -> np.ndarray:
    """Linearization of the shifted energy with respect to the tensor at ``vertex``.

    The defining property is sum(T[vertex] * environment) = <psi|H - shift|psi>
    with all other tensors held fixed.
    """
    if state.topology.is_leaf(vertex) or vertex not in state.tensors:
        raise ValueError(f"vertex {vertex} is not an internal vertex")
    eng = _Engine(state.topology, bonds, state.chi)
    eng.tensors = dict(state.tensors)
    eng.lam = state.root_matrix
    up = eng.build_up()
    # walk down from the root edge to the vertex
    orient = eng.orient
    path = [vertex]
    while orient.parent[path[-1]] != ROOT:
        path.append(orient.parent[path[-1]])
    path.reverse()
    down = eng._root_down(path[0], up)
    for v, child in zip(path, path[1:]):
        down = eng._step_down(v, child, down, up)
    return eng.gamma(vertex, down, up)


def update_isometry(state: TtnState, vertex: int, env: np.ndarray) -> TtnState:
    """Replace the tensor at ``vertex`` by the isometry minimizing <T, env>."""
    if vertex not in state.tensors:
        raise ValueError(f"vertex {vertex} is not an internal vertex")
    if env.shape != state.tensors[vertex].shape:
        raise ValueError(f"environment shape {env.shape} does not match tensor "
                         f"{state.tensors[vertex].shape}")
    new = state.copy()
    new.tensors[vertex] = _Engine.svd_update(env)
    return new


def _gauge_step(state: TtnState, across: int, child: int) -> TtnState:
    """Move the root matrix across vertex ``across`` onto its edge to ``child``."""
    from .networks import reroot

    orient = state.orientation()
    u, v = state.topology.root_edge
    other = v if across == u else u
    a, b = orient.children[across]
    t = state.tensors[across]
    # absorb the root matrix into the parent leg; the free leg now faces `other`
    lam = state.root_matrix
    absorbed = np.tensordot(t, lam, (2, 1 if across == v else 0))
    if child == a:
        m = absorbed.transpose(1, 2, 0).reshape(-1, t.shape[0])
        kept, kdim = b, t.shape[1]
    else:
        m = absorbed.transpose(0, 2, 1).reshape(-1, t.shape[1])
        kept, kdim = a, t.shape[0]
    q, r = np.linalg.qr(m)
    new_t = q.reshape(kdim, absorbed.shape[2], -1)
    if other < kept:  # children of `across` are stored in sorted order
        new_t = new_t.transpose(1, 0, 2)
    new_lam = r if across < child else r.T
    new = TtnState(reroot(state.topology, (across, child)), state.chi,
                   dict(state.tensors), new_lam / np.linalg.norm(new_lam))
    new.tensors[across] = np.ascontiguousarray(new_t)
    return new


def gauge_move(state: TtnState, edge) -> TtnState:
    """Relocate the root edge (the singular-value matrix) without changing the state.

    Walks the root matrix edge by edge, absorbing it into the crossed tensor
    and splitting off a new isometry by QR, so every intermediate state is in
    canonical form toward its own root edge.
    """
    target = tuple(sorted(edge))
    if target not in state.topology.edges:
        raise ValueError(f"{target} is not an edge of the topology")
    cur = state
    while cur.topology.root_edge != target:
        orient = cur.orientation()

        def chain(vertex):
            out = [vertex]
            while orient.parent[out[-1]] != ROOT:
                out.append(orient.parent[out[-1]])
            return out

        cx, cy = chain(target[0]), chain(target[1])
        deep = cx if len(cx) >= len(cy) else cy
        step_child = deep[-2] if len(deep) > 1 else (target[0] if deep[0] == target[1]
                                                     else target[1])
        cur = _gauge_step(cur, deep[-1], step_child)
    return cur


@dataclass
class OptimizeReport:
    """Per-restart energy traces and the best result of the protocol."""

    traces: list = field(default_factory=list)      # one energy-per-sweep list per restart
    restart_energies: list = field(default_factory=list)
    restart_converged: list = field(default_factory=list)
    best_energy: float = np.inf
    best_restart: int = -1
    sweeps: int = 0
    converged: bool = False
    delta_e: float | None = None
    failures: list = field(default_factory=list)    # (restart, reason)

    def to_csv(self, path, network: str, chi: int, seed: int) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["network", "chi", "seed", "restart", "sweeps", "energy",
                        "delta_e", "converged"])
            for r, trace in enumerate(self.traces):
                de = "" if self.delta_e is None or r != self.best_restart \
                    else format(self.delta_e, ".12g")
                w.writerow([network, chi, seed, r, len(trace),
                            format(self.restart_energies[r], ".12g"), de,
                            self.restart_converged[r]])

    def to_json(self) -> str:
        payload = {
            "best_energy": self.best_energy,
            "best_restart": self.best_restart,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "delta_e": self.delta_e,
            "traces": self.traces,
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def _run_restart(args):
    """One restart; returns (trace, converged, state, error).  Never raises,
    so a blown-up restart does not take down the remaining ones."""
    topology, bonds, chi, seed, max_sweeps, tol = args
    eng = _Engine(topology, bonds, chi)
    eng.load(init_random(topology, chi, seed))
    trace = []
    converged = False
    prev = np.inf
    for _ in range(max_sweeps):
        try:
            e = eng.sweep()
        except np.linalg.LinAlgError as err:
            return trace, False, None, f"contraction blow-up in restart seeded {seed}: {err}"
        if not np.isfinite(e):
            return trace, False, None, f"non-finite energy in restart seeded {seed}"
        trace.append(e)
        if abs(prev - e) < tol:
            converged = True
            break
        prev = e
    return trace, converged, eng.export(), None


def optimize(topology: TtnTopology, bonds: BondList, chi: int,
             max_sweeps: int = 200, tol: float = 1e-10, restarts: int = 10,
             seed: int = 0, exact_energy: float | None = None,
             threads: int = 1) -> tuple[TtnState, OptimizeReport]:
    """Best-of-``restarts`` variational optimization.

    Restart k draws its initial tensors from seed + k; each restart sweeps
    until the per-sweep energy change drops below ``tol`` or ``max_sweeps``
    is hit.  The returned state is the best restart's final state; the
    report records every restart's trace and which one won.
    """
    report = OptimizeReport()
    best_state = None
    jobs = [(topology, bonds, chi, seed + k, max_sweeps, tol) for k in range(restarts)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_restart, jobs))
    else:
        outcomes = [_run_restart(job) for job in jobs]
    for k, (trace, converged, state, error) in enumerate(outcomes):
        if error is not None:
            report.failures.append((k, error))
            trace = trace or [np.inf]
        report.traces.append(trace)
        report.restart_energies.append(trace[-1])
        report.restart_converged.append(converged)
        if state is not None and trace[-1] < report.best_energy:
            report.best_energy = trace[-1]
            report.best_restart = k
            report.sweeps = len(trace)
            report.converged = converged
            best_state = state
    if best_state is None:
        raise OptimizeError("every restart failed with non-finite energies")
    if exact_energy is not None:
        report.delta_e = report.best_energy - exact_energy
    return best_state, report
