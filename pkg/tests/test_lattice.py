import numpy as np
import pytest

from ebpttn.lattice import LatticeSpec, BondList, build_bonds, apply_hamiltonian

SX = np.array([[0.0, 0.5], [0.5, 0.0]])
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
SZ = np.array([[0.5, 0.0], [0.0, -0.5]])


def dense_hamiltonian(bonds: BondList) -> np.ndarray:
    """Independent dense oracle, built term by term with Kronecker products.

    Convention: bit k of the basis index is the spin at site k, so site k
    occupies the k-th slot from the *right* of the Kronecker chain.
    """
    n = bonds.n_sites
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    for i, j, J in bonds.bonds:
        for op in (SX, SY, SZ):
            ops = [np.eye(2)] * n
            ops[i] = op
            ops[j] = op
            term = ops[-1]
            for k in range(n - 2, -1, -1):
                term = np.kron(term, ops[k])
            h += J * term
    assert np.allclose(h.imag, 0)
    return h.real


def test_chain_bonds_open():
    b = build_bonds(LatticeSpec("chain", 4, "open"))
    assert b.pairs() == [(0, 1), (1, 2), (2, 3)]


def test_chain_bonds_periodic():
    b = build_bonds(LatticeSpec("chain", 4, "periodic"))
    assert b.pairs() == [(0, 1), (1, 2), (2, 3), (0, 3)]


def test_square_bond_count():
    b = build_bonds(LatticeSpec("square", 16, "open"))
    assert len(b) == 2 * 4 * 4 - 4 - 4
    assert (0, 1) in [p for p in b.pairs()]
    assert (0, 4) in [p for p in b.pairs()]


def test_square_row_major_neighbours():
    b = build_bonds(LatticeSpec("square", 8, "open", width=4, height=2))
    assert set(b.pairs()) == {(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7),
                              (0, 4), (1, 5), (2, 6), (3, 7)}


@pytest.mark.parametrize("kwargs", [
    dict(geometry="square", n_sites=16, boundary="periodic"),
    dict(geometry="square", n_sites=15),
    dict(geometry="square", n_sites=8),                      # 2x4 needs explicit dims
    dict(geometry="square", n_sites=8, width=8, height=1),
    dict(geometry="triangle", n_sites=8),
    dict(geometry="chain", n_sites=8, boundary="twisted"),
    dict(geometry="chain", n_sites=1),
])
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(ValueError):
        LatticeSpec(**kwargs)


def test_bondlist_rejects_duplicates_and_gaps():
    with pytest.raises(ValueError):
        BondList(3, ((0, 1, 1.0), (0, 1, 1.0), (1, 2, 1.0)))
    with pytest.raises(ValueError):
        BondList(4, ((0, 1, 1.0), (1, 2, 1.0)))  # site 3 uncovered
    with pytest.raises(ValueError):
        BondList(2, ((1, 0, 1.0),))


def test_singlet_is_eigenvector():
    b = build_bonds(LatticeSpec("chain", 2, "open"))
    v = np.zeros(4)
    v[0b01] = 1 / np.sqrt(2)
    v[0b10] = -1 / np.sqrt(2)
    assert np.allclose(apply_hamiltonian(b, v), -0.75 * v, atol=1e-14)


def test_aligned_pair_diagonal():
    b = build_bonds(LatticeSpec("chain", 2, "open"))
    v = np.zeros(4)
    v[0b00] = 1.0  # both spins up
    assert np.allclose(apply_hamiltonian(b, v), 0.25 * v, atol=1e-14)


@pytest.mark.parametrize("spec", [
    LatticeSpec("chain", 4, "open"),
    LatticeSpec("chain", 6, "periodic"),
    LatticeSpec("square", 8, "open", width=4, height=2),
    LatticeSpec("chain", 8, "open"),
])
def test_matches_dense_oracle(spec):
    b = build_bonds(spec)
    h = dense_hamiltonian(b)
    rng = np.random.default_rng(0)
    for _ in range(4):
        v = rng.standard_normal(1 << spec.n_sites)
        assert np.allclose(apply_hamiltonian(b, v), h @ v, atol=1e-12)


def test_symmetric_and_linear():
    b = build_bonds(LatticeSpec("chain", 8, "open"))
    rng = np.random.default_rng(1)
    for _ in range(5):
        u = rng.standard_normal(256)
        v = rng.standard_normal(256)
        a, c = rng.standard_normal(2)
        assert abs(u @ apply_hamiltonian(b, v) - v @ apply_hamiltonian(b, u)) < 1e-12
        lhs = apply_hamiltonian(b, a * u + c * v)
        rhs = a * apply_hamiltonian(b, u) + c * apply_hamiltonian(b, v)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_sz_sector_preserved():
    b = build_bonds(LatticeSpec("chain", 8, "periodic"))
    idx = np.arange(256)
    rng = np.random.default_rng(2)
    for m in (2, 4, 6):
        sector = np.bitwise_count(idx.astype(np.uint64)) == m
        v = np.where(sector, rng.standard_normal(256), 0.0)
        hv = apply_hamiltonian(b, v)
        assert np.all(hv[~sector] == 0.0)


def test_sector_basis_apply():
    b = build_bonds(LatticeSpec("chain", 6, "open"))
    idx = np.arange(64)
    basis = idx[np.bitwise_count(idx.astype(np.uint64)) == 3]
    rng = np.random.default_rng(3)
    vs = rng.standard_normal(basis.size)
    full = np.zeros(64)
    full[basis] = vs
    expected = apply_hamiltonian(b, full)[basis]
    assert np.allclose(apply_hamiltonian(b, vs, basis=basis), expected, atol=1e-13)


def test_length_mismatch_rejected():
    b = build_bonds(LatticeSpec("chain", 4, "open"))
    with pytest.raises(ValueError):
        apply_hamiltonian(b, np.zeros(15))
