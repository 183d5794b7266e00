"""Command-line front end: diagonalize, tabulate entropies, search topologies,
optimize TTNs, and regenerate the benchmark energy tables.

Configuration can come entirely from flags or from a JSON config file
(--config); explicit flags override file fields.  All commands are
deterministic for a fixed --seed.  Exit status: 0 on success, 2 on a
configuration error, 3 on a numerical failure (non-convergence or a
degenerate ground state).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, fields

from . import networks
from .ebp import run_ebp, max_cut_entropy, BipartitionTree
from .eigensolver import ground_state, LanczosError
from .entropy import entropy_table
from .lattice import LatticeSpec, build_bonds
from .networks import TtnTopology, topology_from_tree
from .optimizer import optimize, OptimizeError

NETWORK_NAMES = ("uniform-mps", "dimer-mps", "pbttn", "snake-mps",
                 "extended-mmx-64", "from-file")


@dataclass
class RunConfig:
    task: str = ""
    lattice: str = "chain"
    n: int = 16
    width: int | None = None
    height: int | None = None
    boundary: str = "open"
    j: float = 1.0
    objective: str = "mmx"
    tie_rule: str = "lexicographic"
    network: str = "uniform-mps"
    tree_file: str | None = None
    chi: list[int] | None = None
    sweeps: int = 200
    tol: float = 1e-10
    restarts: int = 10
    seed: int = 0
    threads: int | None = None
    out: str | None = None
    format: str | None = None

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return self.threads
        env = os.environ.get("EBPTTN_THREADS")
        if env:
            return int(env)
        return os.cpu_count() or 1

    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.lattice, self.n, self.boundary, self.j,
                           self.width, self.height)


def _parse_chi(text: str) -> list[int]:
    values = [int(x) for x in text.split(",") if x.strip()]
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"chi list {text!r} must be strictly increasing")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebpttn",
        description="Entanglement-bipartitioning TTN toolkit for S=1/2 Heisenberg models")
    sub = parser.add_subparsers(dest="task", required=True)

    def model_flags(p):
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--lattice", choices=("chain", "square"))
        p.add_argument("--n", type=int)
        p.add_argument("--width", type=int)
        p.add_argument("--height", type=int)
        p.add_argument("--boundary", choices=("open", "periodic"))
        p.add_argument("--j", type=float, help="exchange coupling (default 1.0)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int,
                       help="worker processes (default: EBPTTN_THREADS or all cores)")
        p.add_argument("--out", help="output file (default: stdout where applicable)")

    p = sub.add_parser("ed", help="exact ground state by Lanczos")
    model_flags(p)

    p = sub.add_parser("entropy", help="entropies of all bipartitions, as CSV")
    model_flags(p)

    p = sub.add_parser("ebp", help="recursive entanglement bipartitioning")
    model_flags(p)
    p.add_argument("--objective", choices=("mmi", "mmx"))
    p.add_argument("--tie-rule", dest="tie_rule", choices=("lexicographic", "random"))
    p.add_argument("--format", choices=("json", "dot"))

    p = sub.add_parser("optimize", help="variational TTN optimization")
    model_flags(p)
    p.add_argument("--network", choices=NETWORK_NAMES)
    p.add_argument("--tree-file", dest="tree_file",
                   help="JSON topology or bipartition tree (with --network from-file)")
    p.add_argument("--chi", type=str, help="bond dimension, or increasing comma list")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--restarts", type=int)
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("tables", help="regenerate a benchmark table for the model")
    model_flags(p)
    p.add_argument("--chi", type=str)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--restarts", type=int)

    p = sub.add_parser("count", help="binary tree counts")
    p.add_argument("--n", type=int, required=True)
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(task=args.task)
    file_fields = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_fields = json.load(fh)
    known = {f.name for f in fields(RunConfig)}
    for key, value in file_fields.items():
        if key not in known:
            raise ValueError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    for key in known:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if cfg.chi is None:
        cfg.chi = [8]
    else:
        cfg.chi = _parse_chi(",".join(str(c) for c in cfg.chi)
                             if isinstance(cfg.chi, list) else str(cfg.chi))
    return cfg


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ed(cfg: RunConfig) -> int:
    result = ground_state(build_bonds(cfg.spec()), seed=cfg.seed)
    print(f"energy {result.energy:.12g}")
    print(f"residual {result.residual:.3g}")
    print(f"gap_estimate {result.gap_estimate:.12g}")
    if cfg.out:
        result.wavefunction.dump(cfg.out)
        print(f"wavefunction {cfg.out}")
    return 0


def cmd_entropy(cfg: RunConfig) -> int:
    result = ground_state(build_bonds(cfg.spec()), seed=cfg.seed)
    table = entropy_table(result.wavefunction, threads=cfg.resolved_threads())
    if cfg.out:
        table.export_csv(cfg.out)
        print(f"entropy_table {cfg.out} entries {len(table)}")
    else:
        table.export_csv(sys.stdout)
    return 0


def _classify(topology: TtnTopology, cfg: RunConfig) -> str:
    candidates = []
    n = cfg.n
    if n % 2 == 0:
        candidates.append(("dimer-mps", networks.dimer_mps(n)))
    candidates.append(("uniform-mps", networks.uniform_mps(n)))
    if n & (n - 1) == 0:
        candidates.append(("pbttn", networks.pbttn_1d(n)))
    if cfg.lattice == "square":
        spec = cfg.spec()
        candidates.append(("snake-mps", networks.snake_mps(spec.width, spec.height)))
        if spec.width & (spec.width - 1) == 0 and spec.height & (spec.height - 1) == 0:
            candidates.append(("pbttn-2d", networks.pbttn_2d(spec.width, spec.height)))
        if spec.width == 4 and spec.height == 4:
            candidates.append(("mmx-4x4", networks.mmx_4x4()))
    for name, cand in candidates:
        if topology.isomorphic_to(cand):
            return name
    return "unclassified"


def cmd_ebp(cfg: RunConfig) -> int:
    result = ground_state(build_bonds(cfg.spec()), seed=cfg.seed)
    table = entropy_table(result.wavefunction, threads=cfg.resolved_threads())
    tree = run_ebp(table, cfg.objective, cfg.tie_rule, seed=cfg.seed)
    payload = tree.to_dot() if cfg.format == "dot" else tree.to_json()
    summary = (f"objective {cfg.objective}\n"
               f"max_cut_entropy {max_cut_entropy(tree):.12g}\n"
               f"structure {_classify(topology_from_tree(tree), cfg)}\n")
    if cfg.out:
        _emit(payload, cfg.out)
        sys.stdout.write(summary + f"tree {cfg.out}\n")
    else:
        sys.stderr.write(summary)
        sys.stdout.write(payload)
    return 0


def _load_tree_file(path: str) -> TtnTopology:
    with open(path) as fh:
        text = fh.read()
    payload = json.loads(text)
    if "edges" in payload:
        return TtnTopology.from_json(text)
    return topology_from_tree(BipartitionTree.from_json(text))


def _named_topology(cfg: RunConfig) -> TtnTopology:
    spec = cfg.spec()
    name = cfg.network
    if name == "from-file":
        if not cfg.tree_file:
            raise ValueError("--network from-file requires --tree-file")
        topo = _load_tree_file(cfg.tree_file)
        if topo.n_sites != cfg.n:
            raise ValueError(f"tree file has {topo.n_sites} leaves, model has {cfg.n} sites")
        return topo
    if name == "uniform-mps":
        return networks.uniform_mps(cfg.n)
    if name == "dimer-mps":
        return networks.dimer_mps(cfg.n)
    if name == "pbttn":
        if cfg.lattice == "square":
            return networks.pbttn_2d(spec.width, spec.height)
        return networks.pbttn_1d(cfg.n)
    if name == "snake-mps":
        if cfg.lattice != "square":
            raise ValueError("snake MPS is defined on square lattices")
        return networks.snake_mps(spec.width, spec.height)
    if name == "extended-mmx-64":
        if cfg.lattice != "square" or cfg.n != 64:
            raise ValueError("extended-mmx-64 is the 8x8 (64-site) network")
        return networks.extended_mmx_64()
    raise ValueError(f"unknown network {name!r}")


def _exact_energy(cfg: RunConfig, bonds) -> float | None:
    if cfg.n <= 16 and cfg.n % 2 == 0:
        return ground_state(bonds, seed=cfg.seed).energy
    return None


def cmd_optimize(cfg: RunConfig) -> int:
    bonds = build_bonds(cfg.spec())
    topo = _named_topology(cfg)
    exact = _exact_energy(cfg, bonds)
    rows = []
    traces = {}
    for chi in cfg.chi:
        state, report = optimize(topo, bonds, chi, max_sweeps=cfg.sweeps, tol=cfg.tol,
                                 restarts=cfg.restarts, seed=cfg.seed,
                                 exact_energy=exact, threads=cfg.resolved_threads())
        print(f"network {cfg.network} chi {chi} energy {report.best_energy:.12g}"
              + ("" if exact is None else f" delta_e {report.delta_e:.12g}"))
        for r, trace in enumerate(report.traces):
            rows.append([cfg.network, chi, cfg.seed, r, len(trace),
                         format(report.restart_energies[r], ".12g"),
                         "" if (exact is None or r != report.best_restart)
                         else format(report.delta_e, ".12g"),
                         report.restart_converged[r]])
        traces[chi] = report.traces
    if cfg.format == "json":
        payload = json.dumps({"network": cfg.network, "seed": cfg.seed,
                              "traces": {str(c): t for c, t in traces.items()}},
                             sort_keys=True, indent=1) + "\n"
        if cfg.out:
            _emit(payload, cfg.out)
        else:
            sys.stdout.write(payload)
    elif cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["network", "chi", "seed", "restart", "sweeps", "energy",
                        "delta_e", "converged"])
            w.writerows(rows)
        print(f"report {cfg.out}")
    return 0


def cmd_tables(cfg: RunConfig) -> int:
    bonds = build_bonds(cfg.spec())
    gs = ground_state(bonds, seed=cfg.seed)
    nets: list[tuple[str, TtnTopology]] = []
    if cfg.lattice == "chain":
        nets = [("dimer MPS", networks.dimer_mps(cfg.n)),
                ("uniform MPS", networks.uniform_mps(cfg.n)),
                ("pbTTN", networks.pbttn_1d(cfg.n))]
    else:
        table = entropy_table(gs.wavefunction, threads=cfg.resolved_threads())
        spec = cfg.spec()
        nets = [("MMX", topology_from_tree(run_ebp(table, "mmx", seed=cfg.seed))),
                ("MMI", topology_from_tree(run_ebp(table, "mmi", seed=cfg.seed))),
                ("pbTTN", networks.pbttn_2d(spec.width, spec.height)),
                ("snake MPS", networks.snake_mps(spec.width, spec.height))]
    chi = cfg.chi[-1]
    rows = [["network", "chi", "E", "delta_e"],
            ["Exact", "", format(gs.energy, ".12g"), ""]]
    for name, topo in nets:
        state, report = optimize(topo, bonds, chi, max_sweeps=cfg.sweeps, tol=cfg.tol,
                                 restarts=cfg.restarts, seed=cfg.seed,
                                 exact_energy=gs.energy, threads=cfg.resolved_threads())
        rows.append([name, chi, format(report.best_energy, ".12g"),
                     format(report.delta_e, ".12g")])
        print(f"{name}: E {report.best_energy:.12g} delta_e {report.delta_e:.12g}")
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        print(f"table {cfg.out}")
    return 0


def cmd_count(cfg: RunConfig) -> int:
    print(f"rooted {networks.count_rooted(cfg.n)}")
    if cfg.n >= 2:
        print(f"unrooted {networks.count_unrooted(cfg.n)}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        handler = {
            "ed": cmd_ed,
            "entropy": cmd_entropy,
            "ebp": cmd_ebp,
            "optimize": cmd_optimize,
            "tables": cmd_tables,
            "count": cmd_count,
        }[cfg.task]
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        return handler(cfg)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (LanczosError, OptimizeError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
