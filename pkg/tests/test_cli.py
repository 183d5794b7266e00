import csv
import json

import pytest

from ebpttn import cli
from ebpttn.eigensolver import LanczosError, Wavefunction


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_count(capsys):
    code, out, _ = run(capsys, "count", "--n", "16")
    assert code == 0
    assert "rooted 6190283353629375" in out
    assert "unrooted 213458046676875" in out


def test_ed_two_sites(capsys):
    code, out, _ = run(capsys, "ed", "--lattice", "chain", "--n", "2",
                       "--boundary", "open")
    assert code == 0
    assert "energy -0.75" in out


def test_ed_wavefunction_dump(capsys, tmp_path):
    path = tmp_path / "wave.bin"
    code, out, _ = run(capsys, "ed", "--lattice", "chain", "--n", "4",
                       "--boundary", "open", "--out", str(path))
    assert code == 0
    assert path.read_bytes()[:8] == b"EBPWAVE1"
    back = Wavefunction.load(path)
    assert back.n_sites == 4


def test_entropy_csv(capsys, tmp_path):
    path = tmp_path / "table.csv"
    code, out, _ = run(capsys, "entropy", "--lattice", "chain", "--n", "6",
                       "--boundary", "open", "--threads", "1", "--out", str(path))
    assert code == 0
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["mask", "size", "entropy"]
    assert len(rows) == 1 + 31


def test_ebp_tree_roundtrip(capsys, tmp_path):
    path = tmp_path / "tree.json"
    code, out, _ = run(capsys, "ebp", "--lattice", "chain", "--n", "8",
                       "--boundary", "open", "--objective", "mmx",
                       "--threads", "1", "--out", str(path))
    assert code == 0
    assert "max_cut_entropy" in out
    assert "structure dimer-mps" in out
    text = path.read_text()
    from ebpttn.ebp import BipartitionTree
    assert BipartitionTree.from_json(text).to_json() == text


def test_ebp_dot_output(capsys, tmp_path):
    path = tmp_path / "tree.dot"
    code, out, _ = run(capsys, "ebp", "--lattice", "chain", "--n", "6",
                       "--boundary", "open", "--objective", "mmi",
                       "--format", "dot", "--threads", "1", "--out", str(path))
    assert code == 0
    assert path.read_text().startswith("digraph")


def test_optimize_csv_report(capsys, tmp_path):
    path = tmp_path / "report.csv"
    code, out, _ = run(capsys, "optimize", "--lattice", "chain", "--n", "6",
                       "--boundary", "open", "--network", "dimer-mps",
                       "--chi", "4", "--restarts", "2", "--sweeps", "30",
                       "--threads", "1", "--out", str(path))
    assert code == 0
    assert "network dimer-mps chi 4 energy" in out
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["network", "chi", "seed", "restart", "sweeps", "energy",
                       "delta_e", "converged"]
    assert len(rows) == 3


def test_optimize_chi_list_and_json(capsys, tmp_path):
    path = tmp_path / "report.json"
    code, out, _ = run(capsys, "optimize", "--lattice", "chain", "--n", "6",
                       "--boundary", "open", "--network", "uniform-mps",
                       "--chi", "2,4", "--restarts", "1", "--sweeps", "20",
                       "--threads", "1", "--format", "json", "--out", str(path))
    assert code == 0
    payload = json.loads(path.read_text())
    assert set(payload["traces"]) == {"2", "4"}


def test_optimize_rejects_nonincreasing_chi(capsys):
    code, _, err = run(capsys, "optimize", "--lattice", "chain", "--n", "6",
                       "--boundary", "open", "--network", "uniform-mps",
                       "--chi", "8,4")
    assert code == 2
    assert "chi" in err


def test_optimize_from_tree_file(capsys, tmp_path):
    tree_path = tmp_path / "tree.json"
    code, _, _ = run(capsys, "ebp", "--lattice", "chain", "--n", "6",
                     "--boundary", "open", "--objective", "mmx",
                     "--threads", "1", "--out", str(tree_path))
    assert code == 0
    code, out, _ = run(capsys, "optimize", "--lattice", "chain", "--n", "6",
                       "--boundary", "open", "--network", "from-file",
                       "--tree-file", str(tree_path), "--chi", "4",
                       "--restarts", "1", "--sweeps", "20", "--threads", "1")
    assert code == 0
    assert "energy" in out


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "lattice": "chain", "n": 6, "boundary": "open", "network": "uniform-mps",
        "chi": [4], "restarts": 1, "sweeps": 15, "threads": 1}))
    code, out_a, _ = run(capsys, "optimize", "--config", str(cfg))
    assert code == 0
    # flag overrides the file's network
    code, out_b, _ = run(capsys, "optimize", "--config", str(cfg),
                         "--network", "dimer-mps")
    assert code == 0
    assert "uniform-mps" in out_a and "dimer-mps" in out_b


def test_determinism_given_seed(capsys, tmp_path):
    args = ("optimize", "--lattice", "chain", "--n", "8", "--boundary", "open",
            "--network", "pbttn", "--chi", "4", "--restarts", "2",
            "--sweeps", "25", "--seed", "11", "--threads", "1")
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ("ed", "--lattice", "square", "--n", "16", "--boundary", "periodic"),
    ("ed", "--lattice", "chain", "--n", "3", "--boundary", "open"),
    ("optimize", "--lattice", "chain", "--n", "6", "--boundary", "open",
     "--network", "snake-mps", "--chi", "4"),
    ("optimize", "--lattice", "chain", "--n", "6", "--boundary", "open",
     "--network", "from-file"),
    ("optimize", "--lattice", "chain", "--n", "6", "--boundary", "open",
     "--network", "extended-mmx-64", "--chi", "4"),
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_missing_config_file_exit_2(capsys):
    code, _, err = run(capsys, "ed", "--config", "/nonexistent/run.json")
    assert code == 2


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise LanczosError("did not converge", residual=1.0)
    monkeypatch.setattr(cli, "ground_state", boom)
    code, _, err = run(capsys, "ed", "--lattice", "chain", "--n", "4",
                       "--boundary", "open")
    assert code == 3
    assert "numerical failure" in err


def test_tables_chain(capsys, tmp_path):
    path = tmp_path / "table.csv"
    code, out, _ = run(capsys, "tables", "--lattice", "chain", "--n", "8",
                       "--boundary", "open", "--chi", "4", "--restarts", "2",
                       "--sweeps", "40", "--threads", "1", "--out", str(path))
    assert code == 0
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["network", "chi", "E", "delta_e"]
    names = [r[0] for r in rows[1:]]
    assert names == ["Exact", "dimer MPS", "uniform MPS", "pbTTN"]
    for row in rows[2:]:
        assert float(row[3]) >= -1e-9  # variational bound
