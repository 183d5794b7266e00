"""Spin-1/2 Heisenberg models as bond lists, with matrix-free Hamiltonian action.

Basis convention used throughout the package: bit k of a basis index encodes
the spin at site k (0 = up, 1 = down), and square-lattice sites are numbered
row-major, i.e. site (r, c) on a w x h grid is r*w + c. The Hamiltonian is
H = sum_bonds J * S_i . S_j, which is real symmetric in this basis, so all
state vectors are real float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GEOMETRIES = ("chain", "square")
BOUNDARIES = ("open", "periodic")

#: hard cap for stages that touch the full Hilbert space
MAX_EXACT_SITES = 16
#: cap for topology-only stages (no wavefunction involved)
MAX_TOPOLOGY_SITES = 64


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry, size and boundary of a Heisenberg model.

    For ``square`` geometry, ``width``/``height`` default to the square root
    of ``n_sites``; both must be >= 2 and multiply to ``n_sites``.
    """

    geometry: str
    n_sites: int
    boundary: str = "open"
    coupling: float = 1.0
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}; expected one of {GEOMETRIES}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}; expected one of {BOUNDARIES}")
        if not 2 <= self.n_sites <= MAX_TOPOLOGY_SITES:
            raise ValueError(f"n_sites must be in [2, {MAX_TOPOLOGY_SITES}], got {self.n_sites}")
        if self.geometry == "square":
            if self.boundary == "periodic":
                raise ValueError("periodic square lattices are not supported")
            w, h = self.width, self.height
            if w is None and h is None:
                r = round(self.n_sites ** 0.5)
                if r * r != self.n_sites:
                    raise ValueError(
                        f"n_sites={self.n_sites} is not a perfect square; pass width and height"
                    )
                w = h = r
            elif w is None or h is None:
                raise ValueError("width and height must be given together")
            if w < 2 or h < 2:
                raise ValueError("square lattice needs width >= 2 and height >= 2")
            if w * h != self.n_sites:
                raise ValueError(f"width*height = {w * h} does not match n_sites = {self.n_sites}")
            object.__setattr__(self, "width", w)
            object.__setattr__(self, "height", h)


@dataclass(frozen=True)
class BondList:
    """Ordered list of exchange bonds (i, j, J) with 0 <= i < j < n_sites."""

    n_sites: int
    bonds: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        covered = set()
        for i, j, _ in self.bonds:
            if not 0 <= i < j < self.n_sites:
                raise ValueError(f"bond ({i}, {j}) out of range for n_sites={self.n_sites}")
            if (i, j) in seen:
                raise ValueError(f"duplicate bond ({i}, {j})")
            seen.add((i, j))
            covered.update((i, j))
        if covered != set(range(self.n_sites)):
            missing = sorted(set(range(self.n_sites)) - covered)
            raise ValueError(f"sites {missing} appear in no bond")

    def __len__(self):
        return len(self.bonds)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j, _ in self.bonds]


def build_bonds(spec: LatticeSpec) -> BondList:
    """Nearest-neighbour bond list for the given lattice.

    Open chains give N-1 bonds (i, i+1); periodic chains add (0, N-1).
    Open square lattices give all horizontal and vertical nearest-neighbour
    pairs in row-major order, 2*w*h - w - h bonds in total.
    """
    J = spec.coupling
    if spec.geometry == "chain":
        bonds = [(i, i + 1, J) for i in range(spec.n_sites - 1)]
        if spec.boundary == "periodic":
            bonds.append((0, spec.n_sites - 1, J))
        return BondList(spec.n_sites, tuple(bonds))
    w, h = spec.width, spec.height
    bonds = []
    for r in range(h):
        for c in range(w):
            s = r * w + c
            if c + 1 < w:
                bonds.append((s, s + 1, J))
            if r + 1 < h:
                bonds.append((s, s + w, J))
    return BondList(spec.n_sites, tuple(bonds))


class HamiltonianAction:
    """Cached matrix-free application of H = sum_b J_b S_i.S_j.

    Works either on the full 2^N basis (``basis=None``) or on an explicit
    sector basis given as a sorted array of basis states.  Per bond the
    diagonal term contributes +J/4 for aligned spin pairs and -J/4 for
    anti-aligned ones; anti-aligned pairs additionally exchange amplitude
    with weight J/2.
    """

    def __init__(self, bonds: BondList, basis: np.ndarray | None = None):
        self.bonds = bonds
        n = bonds.n_sites
        if n > MAX_EXACT_SITES:
            raise ValueError(f"exact Hamiltonian action is limited to {MAX_EXACT_SITES} sites")
        if basis is None:
            basis = np.arange(1 << n, dtype=np.uint32)
            sector = False
        else:
            basis = np.asarray(basis, dtype=np.uint32)
            sector = True
        self.basis = basis
        self.dim = basis.size

        diag = np.zeros(self.dim)
        self._hops = []  # (amplitude, src indices, dst indices) per bond
        for i, j, J in bonds.bonds:
            bi = (basis >> np.uint32(i)) & np.uint32(1)
            bj = (basis >> np.uint32(j)) & np.uint32(1)
            anti = bi != bj
            diag += np.where(anti, -0.25 * J, 0.25 * J)
            src = np.nonzero(anti)[0]
            flipped = basis[src] ^ np.uint32((1 << i) | (1 << j))
            if sector:
                dst = np.searchsorted(basis, flipped)
            else:
                dst = flipped.astype(np.intp)
            self._hops.append((0.5 * J, src, dst))
        self.diag = diag

    def __call__(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.dim,):
            raise ValueError(f"state vector has length {v.shape}, expected ({self.dim},)")
        out = self.diag * v
        for amp, src, dst in self._hops:
            out[dst] += amp * v[src]
        return out


def apply_hamiltonian(bonds: BondList, v: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
    """Return H @ v without forming the Hamiltonian matrix.

    ``v`` must have length 2^n_sites, or match ``basis`` when a sector basis
    (sorted array of kept basis states) is supplied.
    """
    v = np.asarray(v, dtype=float)
    return HamiltonianAction(bonds, basis)(v)
