import csv
import io
from pathlib import Path

import numpy as np

from dmgso import __version__
from dmgso.cli import main, parse_filter
from dmgso.experiments import gen_synthetic

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent
TOY = HERE / "data" / "toy.csv"
GOLDEN = HERE / "data" / "toy_embed_golden.csv"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_edges(path, w):
    n = w.shape[0]
    lines = ["i,j,weight"] + [f"{i},{j},{float(w[i, j])!r}" for i in range(n) for j in range(i + 1, n) if w[i, j] > 0]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_signals(path, x):
    lines = ["timestamp," + ",".join(f"s{k}" for k in range(x.shape[1]))]
    lines += [f"2021-03-01T{h % 24:02d}:00:00," + ",".join(repr(float(v)) for v in row) for h, row in enumerate(x)]
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------- exit codes


def test_version(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0
    assert __version__ in out


def test_usage_errors(capsys):
    assert run([], capsys)[0] == 1
    assert run(["frobnicate"], capsys)[0] == 1
    assert run(["embed", "--input", TOY, "--sigma", "1", "--sigma-median"], capsys)[0] == 1
    code, _, err = run(["learn", "--signals", TOY], capsys)
    assert code == 1 and "--graph or --coords" in err


def test_missing_config_is_a_data_error(capsys):
    code, _, err = run(["bench", "--config", "missing.cfg"], capsys)
    assert code == 2
    assert "missing.cfg" in err


def test_bad_parameter_is_a_usage_error(capsys):
    code, _, err = run(["demo-lattice", "--side", "2"], capsys)
    assert code == 1 and err


def test_numerical_failure_exit_code(tmp_path, capsys):
    # tau = 1, sign -1 puts a pole at the Markov eigenvalue 1
    g, x = gen_synthetic(6, 0, 20)
    edges = write_edges(tmp_path / "g.csv", g.weights)
    sig = write_signals(tmp_path / "x.csv", x)
    code, _, err = run(["filter", "--graph", edges, "--signals", sig, "--gso", "P", "--filter", "tikhonov:1",
                        "--sign", "-1"], capsys)
    assert code == 3
    assert "pole" in err


# ---------------------------------------------------------------- embed


def test_embed_matches_golden(tmp_path, capsys):
    out = tmp_path / "emb.csv"
    code, _, _ = run(["embed", "--input", TOY, "--sigma-median", "--t", "1", "--l", "2", "--output", out], capsys)
    assert code == 0
    assert out.read_bytes() == GOLDEN.read_bytes()
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[1] == ["node", "coord_1", "coord_2"]
    assert len(rows) == 2 + 8


def test_embed_to_stdout_is_reproducible(capsys):
    argv = ["embed", "--input", TOY, "--sigma-median", "--t", "1", "--l", "2"]
    first = run(argv, capsys)[1]
    assert first == run(argv, capsys)[1] == GOLDEN.read_text()


def test_embed_bandwidth_choices(capsys):
    code, out, _ = run(["embed", "--input", TOY, "--sigma", "0.5", "--l", "3"], capsys)
    assert code == 0 and "sigma=0.5" in out.splitlines()[0]
    code, out, _ = run(["embed", "--input", TOY, "--sigma-bgh", "--l", "1"], capsys)
    assert code == 0 and out.splitlines()[1] == "node,coord_1"


# ---------------------------------------------------------------- demo-lattice


def test_demo_lattice_single_delta_frame(capsys):
    code, out, _ = run(["demo-lattice", "--side", "5", "--t-max", "0", "--filter", "identity"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 25
    vals = {(int(r["row"]), int(r["col"])): float(r["value"]) for r in rows}
    assert vals[(2, 2)] == 1.0
    assert sum(vals.values()) == 1.0


def test_demo_lattice_to_file(tmp_path, capsys):
    out = tmp_path / "frames.csv"
    assert run(["demo-lattice", "--side", "7", "--t-max", "3", "--output", out], capsys)[0] == 0
    rows = list(csv.DictReader(out.open()))
    for k in range(4):
        assert abs(sum(float(r["value"]) for r in rows if r["frame"] == str(k)) - 1.0) <= 1e-10


# ---------------------------------------------------------------- check-gso, filter, learn


def test_check_gso_report(tmp_path, capsys):
    g, _ = gen_synthetic(8, 1, 5)
    edges = write_edges(tmp_path / "g.csv", g.weights)
    code, out, _ = run(["check-gso", "--graph", edges, "--gso", "L", "--probes", "50"], capsys)
    assert code == 0
    rows = {r[0]: r for r in csv.reader(io.StringIO(out))}
    assert {"linearity", "convolutive", "norm_bound", "non_expansive"} <= set(rows)


def test_filter_identity_returns_input(tmp_path, capsys):
    g, x = gen_synthetic(6, 2, 10)
    edges = write_edges(tmp_path / "g.csv", g.weights)
    sig = write_signals(tmp_path / "x.csv", x)
    out = tmp_path / "y.csv"
    code, _, _ = run(["filter", "--graph", edges, "--signals", sig, "--filter", "identity", "--output", out], capsys)
    assert code == 0
    y = np.loadtxt(out, delimiter=",", skiprows=1, usecols=range(1, 7))
    np.testing.assert_allclose(y, x, atol=0)


def test_learn_writes_edges_and_sidecar(tmp_path, capsys):
    g, x = gen_synthetic(6, 3, 40)
    edges = write_edges(tmp_path / "g.csv", g.weights)
    sig = write_signals(tmp_path / "x.csv", x)
    out = tmp_path / "w.csv"
    code, _, _ = run(["learn", "--graph", edges, "--signals", sig, "--filter", "tikhonov:0.5", "--max-iters", "50",
                      "--output", out], capsys)
    assert code == 0
    assert out.read_text().startswith("i,j,weight\n")
    assert (tmp_path / "w.csv.json").exists()


def test_learn_on_standin_data(capsys):
    code, out, _ = run(["learn", "--coords", ROOT / "data" / "standin_coords.csv", "--signals",
                        ROOT / "data" / "standin_signals.csv", "--difference", "--filter", "tikhonov:0.3",
                        "--max-iters", "50"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "i,j,weight"


def test_parse_filter():
    assert parse_filter("shift") is None
    assert parse_filter("tikhonov:0.3").tau == 0.3
    assert parse_filter("tikhonov", tau=0.7, sign=-1).sign == -1
    assert parse_filter("poly:1,0.5").coeffs == (1.0, 0.5)
    assert parse_filter("heat:2").t == 2.0


# ---------------------------------------------------------------- bench


def test_bench_is_byte_deterministic(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 8\nm_signals = 40\ngso_list = A, DM\ntau_grid = 0.2, 0.8\nmax_iters = 40\n")
    outs = []
    for k, jobs in enumerate([1, 1, 2]):
        out_dir = tmp_path / f"r{k}"
        code, _, _ = run(["--jobs", jobs, "bench", "--config", cfg, "--output-dir", out_dir], capsys)
        assert code == 0
        outs.append(out_dir)
    for name in ["table.csv", "table_ree.md", "table_nrmse.md"]:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes() == (outs[2] / name).read_bytes()
    assert (outs[0] / "table.meta.json").exists()


def test_bench_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 8\nm_signals = 40\ngso_list = A\ntau_grid = 0.2\nmax_iters = 10\n")
    out_dir = tmp_path / "r"
    code, _, _ = run(["bench", "--config", cfg, "--gso-list", "L,P", "--output-dir", out_dir], capsys)
    assert code == 0
    lines = (out_dir / "table.csv").read_text().splitlines()
    assert [ln.split(",")[1] for ln in lines[1:]] == ["L", "P"]
