"""Tree-tensor-network topology search by entanglement bipartitioning, plus
variational TTN ground-state optimization at fixed bond dimension."""

from .lattice import LatticeSpec, BondList, build_bonds, apply_hamiltonian
from .eigensolver import Wavefunction, GroundStateResult, ground_state
from .entropy import EntropyTable, entanglement_entropy, entropy_table, mutual_information
from .ebp import BipartitionTree, run_ebp, score, max_cut_entropy
from .networks import (
    TtnTopology,
    topology_from_tree,
    uniform_mps,
    dimer_mps,
    pbttn_1d,
    pbttn_2d,
    snake_mps,
    mmx_4x4,
    extended_mmx_64,
    induced_topology,
    reroot,
    count_rooted,
    count_unrooted,
)
from .optimizer import (
    TtnState,
    OptimizeReport,
    init_random,
    energy,
    environment,
    update_isometry,
    gauge_move,
    optimize,
)

__all__ = [
    "LatticeSpec", "BondList", "build_bonds", "apply_hamiltonian",
    "Wavefunction", "GroundStateResult", "ground_state",
    "EntropyTable", "entanglement_entropy", "entropy_table", "mutual_information",
    "BipartitionTree", "run_ebp", "score", "max_cut_entropy",
    "TtnTopology", "topology_from_tree", "uniform_mps", "dimer_mps", "pbttn_1d",
    "pbttn_2d", "snake_mps", "mmx_4x4", "extended_mmx_64", "induced_topology",
    "reroot", "count_rooted", "count_unrooted",
    "TtnState", "OptimizeReport", "init_random", "energy", "environment",
    "update_isometry", "gauge_move", "optimize",
]

__version__ = "0.1.0"
