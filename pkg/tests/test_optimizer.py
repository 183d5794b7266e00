import numpy as np
import pytest

from ebpttn.eigensolver import ground_state
from ebpttn.lattice import LatticeSpec, apply_hamiltonian, build_bonds
from ebpttn.networks import dimer_mps, pbttn_1d, pbttn_2d, reroot, uniform_mps
from ebpttn.optimizer import (OptimizeReport, TtnState, energy, environment,
                              gauge_move, init_random, optimize, update_isometry)
from test_lattice import dense_hamiltonian


def chain(n, boundary="open"):
    return build_bonds(LatticeSpec("chain", n, boundary))


def shifted_energy_dense(state: TtnState, bonds) -> float:
    """Oracle: <psi|H - shift|psi> by dense contraction, no isometry assumed."""
    psi = state.to_wavefunction()
    shift = sum(J for _, _, J in bonds.bonds) / 4.0
    return psi @ apply_hamiltonian(bonds, psi) - shift * (psi @ psi)


def test_init_is_deterministic():
    topo = dimer_mps(8)
    a = init_random(topo, 4, seed=9)
    b = init_random(topo, 4, seed=9)
    assert np.array_equal(a.root_matrix, b.root_matrix)
    for v in a.tensors:
        assert np.array_equal(a.tensors[v], b.tensors[v])
    c = init_random(topo, 4, seed=10)
    assert not np.array_equal(a.root_matrix, c.root_matrix)


def test_init_respects_leg_dimension_rule():
    state = init_random(dimer_mps(16), 8, seed=0)
    orient = state.orientation()
    for v, t in state.tensors.items():
        g = orient.below[v].bit_count()
        expected = min(8, 1 << g, 1 << (16 - g))
        if orient.parent[v] != -1:
            assert t.shape[2] == expected
    # dimer vertices (two leaf children) have toward-root dimension 4 = 2*2
    dimer_vertices = [v for v in state.tensors
                      if all(c < 16 for c in orient.children[v])]
    assert dimer_vertices
    for v in dimer_vertices:
        assert state.tensors[v].shape == (2, 2, 4)
    # deeper legs are capped at chi
    assert max(t.shape[2] for t in state.tensors.values()) == 8


def test_init_isometric():
    state = init_random(pbttn_2d(4, 4), 8, seed=2)
    assert state.isometry_residual() < 1e-12


def test_two_site_ground_state():
    topo = uniform_mps(2)
    state, report = optimize(topo, chain(2), chi=8, restarts=1, max_sweeps=5)
    assert abs(report.best_energy + 0.75) < 1e-12
    assert state.root_matrix.shape == (2, 2)
    assert not state.tensors


def test_energy_matches_dense_reconstruction():
    bonds = chain(6)
    for seed in (0, 1):
        state = init_random(dimer_mps(6), 4, seed=seed)
        psi = state.to_wavefunction()
        dense = psi @ apply_hamiltonian(bonds, psi)
        assert abs(energy(state, bonds) - dense) < 1e-10


def test_energy_rejects_size_mismatch():
    state = init_random(uniform_mps(6), 4, seed=0)
    with pytest.raises(ValueError):
        energy(state, chain(8))


def test_environment_defining_property():
    """sum(T * env) equals the shifted energy, for every internal vertex."""
    bonds = chain(8, "periodic")
    state = init_random(pbttn_1d(8), 4, seed=5)
    e_shift = shifted_energy_dense(state, bonds)
    for v in state.tensors:
        g = environment(state, bonds, v)
        assert abs(float(np.sum(state.tensors[v] * g)) - e_shift) < 1e-10


def test_environment_matches_finite_differences():
    bonds = chain(6)
    state = init_random(dimer_mps(6), 4, seed=3)
    rng = np.random.default_rng(8)
    for v in sorted(state.tensors)[:2]:
        g = environment(state, bonds, v)
        delta = rng.standard_normal(g.shape)
        delta /= np.linalg.norm(delta)

        def at(t):
            s = state.copy()
            s.tensors[v] = t
            return shifted_energy_dense(s, bonds)

        eps = 1e-5
        fd = (at(state.tensors[v] + eps * delta)
              - at(state.tensors[v] - eps * delta)) / (2 * eps)
        assert abs(fd - 2 * float(np.sum(g * delta))) < 1e-6


def test_environment_rejects_leaves():
    state = init_random(uniform_mps(6), 4, seed=0)
    with pytest.raises(ValueError):
        environment(state, chain(6), 0)


def test_update_isometry_properties():
    bonds = chain(6)
    state = init_random(dimer_mps(6), 4, seed=1)
    v = sorted(state.tensors)[0]
    rng = np.random.default_rng(0)

    # random environment: update restores exact isometry
    g = rng.standard_normal(state.tensors[v].shape)
    new = update_isometry(state, v, g)
    t = new.tensors[v]
    w = t.reshape(-1, t.shape[2])
    assert np.max(np.abs(w.T @ w - np.eye(t.shape[2]))) < 1e-12

    # a gamma of the form -(current tensor) * positive diagonal is a fixed point
    t0 = state.tensors[v]
    da, db, dp = t0.shape
    sigma = np.diag(np.arange(1, dp + 1, dtype=float))
    g_fix = -(t0.reshape(-1, dp) @ sigma).reshape(da, db, dp)
    fixed = update_isometry(state, v, g_fix)
    assert np.allclose(fixed.tensors[v], t0, atol=1e-12)

    with pytest.raises(ValueError):
        update_isometry(state, v, np.zeros((1, 1, 1)))


def test_sweeps_never_raise_shifted_energy():
    """Shifted bond terms are negative semidefinite, so the SVD update and the
    root eigensolve both descend; the per-sweep trace must be monotone."""
    for topo, bonds in ((pbttn_1d(8), chain(8)),
                        (uniform_mps(8), chain(8, "periodic")),
                        (pbttn_2d(4, 2), build_bonds(LatticeSpec("square", 8, "open",
                                                                 width=4, height=2)))):
        _, report = optimize(topo, bonds, chi=4, restarts=1, max_sweeps=40)
        trace = np.array(report.traces[0])
        assert np.all(np.diff(trace) <= 1e-12)


def test_full_rank_reaches_exact():
    for n, topo in ((6, uniform_mps(6)), (8, pbttn_1d(8)), (8, dimer_mps(8))):
        bonds = chain(n)
        exact = np.linalg.eigvalsh(dense_hamiltonian(bonds))[0]
        _, report = optimize(topo, bonds, chi=1 << (n // 2), restarts=2,
                             max_sweeps=60, seed=1)
        assert report.best_energy >= exact - 1e-9
        assert abs(report.best_energy - exact) < 1e-9


def test_variational_bound():
    bonds = chain(8)
    exact = ground_state(bonds).energy
    for chi in (2, 4, 8):
        _, report = optimize(pbttn_1d(8), bonds, chi=chi, restarts=2, max_sweeps=60)
        assert report.best_energy >= exact - 1e-9


def test_converged_state_reconstructs_consistently():
    bonds = chain(6)
    state, report = optimize(dimer_mps(6), bonds, chi=8, restarts=1, max_sweeps=50)
    psi = state.to_wavefunction()
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    dense = psi @ apply_hamiltonian(bonds, psi)
    assert abs(dense - energy(state, bonds)) < 1e-10
    assert abs(dense - report.best_energy) < 1e-10


def test_isometry_residuals_after_optimize():
    state, _ = optimize(pbttn_1d(8), chain(8), chi=4, restarts=1, max_sweeps=30)
    assert state.isometry_residual() < 1e-12


def test_gauge_move_preserves_the_state():
    """Relocating the root matrix is a pure gauge move: same wavefunction,
    same energy, canonical form restored at every position."""
    topo = dimer_mps(8)
    bonds = chain(8)
    state = init_random(topo, 4, seed=7)
    psi0 = state.to_wavefunction()
    e0 = energy(state, bonds)
    for edge in topo.edges:
        moved = gauge_move(state, edge)
        assert moved.topology.root_edge == tuple(sorted(edge))
        psi = moved.to_wavefunction()
        assert min(np.max(np.abs(psi - psi0)), np.max(np.abs(psi + psi0))) < 1e-12
        assert abs(energy(moved, bonds) - e0) < 1e-10
        assert moved.isometry_residual() < 1e-12
    # moving there and back is the identity up to rounding
    back = gauge_move(gauge_move(state, topo.edges[0]), topo.root_edge)
    psi = back.to_wavefunction()
    assert min(np.max(np.abs(psi - psi0)), np.max(np.abs(psi + psi0))) < 1e-12
    with pytest.raises(ValueError):
        gauge_move(state, (0, 1))


def test_gauge_invariance_under_reroot():
    bonds = chain(6)
    topo = uniform_mps(6)
    energies = []
    for edge in topo.edges:
        _, report = optimize(reroot(topo, edge), bonds, chi=4, restarts=3,
                             max_sweeps=80, seed=0)
        energies.append(report.best_energy)
    assert max(energies) - min(energies) < 1e-7


def test_restart_bookkeeping_and_exports(tmp_path):
    bonds = chain(6)
    exact = ground_state(bonds).energy
    state, report = optimize(uniform_mps(6), bonds, chi=4, restarts=3,
                             max_sweeps=30, seed=4, exact_energy=exact)
    assert len(report.traces) == 3
    assert report.best_energy == min(report.restart_energies)
    assert report.restart_energies[report.best_restart] == report.best_energy
    assert report.delta_e == pytest.approx(report.best_energy - exact)
    assert report.delta_e >= -1e-9

    csv_path = tmp_path / "report.csv"
    report.to_csv(csv_path, network="uniform-mps", chi=4, seed=4)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "network,chi,seed,restart,sweeps,energy,delta_e,converged"
    assert len(lines) == 4

    payload = report.to_json()
    assert '"best_energy"' in payload


def test_optimize_deterministic():
    bonds = chain(8)
    _, a = optimize(pbttn_1d(8), bonds, chi=4, restarts=2, max_sweeps=25, seed=3)
    _, b = optimize(pbttn_1d(8), bonds, chi=4, restarts=2, max_sweeps=25, seed=3)
    assert a.traces == b.traces


def test_all_restarts_failing_raises():
    from ebpttn.lattice import BondList
    from ebpttn.optimizer import OptimizeError
    bad = BondList(4, ((0, 1, float("nan")), (1, 2, 1.0), (2, 3, 1.0)))
    with pytest.raises(OptimizeError):
        optimize(uniform_mps(4), bad, chi=2, restarts=2, max_sweeps=5)


def test_optimize_threads_match_serial():
    bonds = chain(6)
    _, serial = optimize(uniform_mps(6), bonds, chi=4, restarts=2, max_sweeps=20, seed=0)
    _, parallel = optimize(uniform_mps(6), bonds, chi=4, restarts=2, max_sweeps=20,
                           seed=0, threads=2)
    assert serial.traces == parallel.traces
