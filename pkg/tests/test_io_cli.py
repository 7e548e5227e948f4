import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npwnet import io
from npwnet.cli import main
from npwnet.errors import MalformedEdgeList
from npwnet.network import from_arrays
from npwnet.simulate import planted_config, simulate


def _read(path):
    return path.read_bytes()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=20))
def test_edge_list_round_trip(tmp_path_factory, ws):
    path = tmp_path_factory.mktemp("rt") / "edges.csv"
    n = len(ws) + 1
    net = from_arrays(n, np.zeros(len(ws), int), np.arange(1, n), ws)
    io.write_edges(path, net)
    assert io.read_edges(path, n=n) == net


def test_malformed_rows_report_line(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("i,j,w\n0,1,0.5\na,b,c\n")
    with pytest.raises(MalformedEdgeList) as info:
        io.read_edges(p)
    assert info.value.line == 3
    p.write_text("0,1,0.5\n")
    with pytest.raises(MalformedEdgeList, match="header"):
        io.read_edges(p)
    p.write_text("i,j,w\n0,1,0.5\n1,0,2.0\n")
    with pytest.raises(MalformedEdgeList, match="duplicate") as info:
        io.read_edges(p)
    assert info.value.line == 3
    p.write_text("i,j,w\n2,2,0.5\n")
    with pytest.raises(MalformedEdgeList, match="self-loop"):
        io.read_edges(p)


def test_labels_and_density_round_trip(tmp_path):
    z = np.array([1, 0, 2, 2])
    io.write_labels(tmp_path / "l.csv", z)
    assert np.array_equal(io.read_labels(tmp_path / "l.csv"), z)
    from npwnet.locdens import DensityEstimate
    est = DensityEstimate(np.linspace(0, 1, 5), np.log(np.linspace(0.5, 1.5, 5)), 0.2, 2, (0, 1))
    io.write_density(tmp_path / "d.csv", est)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "w,log_f,f"
    back = io.read_density(tmp_path / "d.csv")
    assert np.array_equal(back.grid, est.grid) and np.array_equal(back.log_density, est.log_density)


def test_simulate_command_is_byte_identical(tmp_path):
    args = ["simulate", "--n", "100", "--K", "2", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("edges.csv", "labels.csv", "truth.json"):
        assert _read(tmp_path / "a" / name) == _read(tmp_path / "b" / name)
    head = (tmp_path / "a" / "edges.csv").read_text().splitlines()[0]
    assert head == "i,j,w"


def test_simulate_degenerate_configs(tmp_path):
    assert main(["simulate", "--n", "30", "--pi", "1,0", "--seed", "1",
                 "--out", str(tmp_path / "p")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "p" / "labels.csv")))
    assert {r["cluster"] for r in rows} == {"0"}
    assert main(["simulate", "--n", "30", "--theta=-10,-10", "--seed", "1",
                 "--out", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e" / "edges.csv").read_text() == "i,j,w\n"


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 40, "seed": 3, "weights": "gamma"}))
    assert main(["simulate", "--config", str(cfg), "--n", "25", "--out", str(tmp_path / "o")]) == 0
    truth = json.loads((tmp_path / "o" / "truth.json").read_text())
    assert truth["n"] == 25 and truth["weight_kind"] == "gamma" and truth["seed"] == 3


def test_usage_errors_exit_one(tmp_path, capsys):
    assert main(["simulate", "--n", "30", "--out", str(tmp_path)]) == 1  # no seed
    assert main(["bogus"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("i,j,w\na,b,c\n")
    assert main(["fit", "--edges", str(bad), "--out", str(tmp_path / "f")]) == 1
    assert "bad.csv:2:" in capsys.readouterr().err


def test_fit_eval_pipeline(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--n", "60", "--seed", "2", "--out", str(sim)]) == 0
    edges = str(sim / "edges.csv")
    code = main(["fit", "--edges", edges, "--K", "2", "--restarts", "1", "--out",
                 str(tmp_path / "fit")])
    assert code == 0
    doc = json.loads((tmp_path / "fit" / "fit.json").read_text())
    for key in ("theta", "pi", "labels", "gamma", "elbo_trace", "icl", "converged", "config", "seed"):
        assert key in doc
    assert (tmp_path / "fit" / "density_0_1.csv").exists()
    # non-convergence exits 2 but still writes results
    code = main(["fit", "--edges", edges, "--K", "2", "--restarts", "1", "--max-iter", "1",
                 "--out", str(tmp_path / "fit1")])
    assert code == 2 and (tmp_path / "fit1" / "fit.json").exists()
    # truth equals fit labels -> log RI = 0
    truth = tmp_path / "truth"
    truth.mkdir()
    labels = np.asarray(doc["labels"])
    io.write_labels(truth / "labels.csv", labels)
    assert main(["eval", "--edges", edges, "--fit", str(tmp_path / "fit"), "--truth", str(truth),
                 "--out", str(tmp_path / "ev")]) == 0
    metrics = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    assert metrics["log_ri"] == 0.0
    # without truth only descriptive statistics are produced
    assert main(["eval", "--edges", edges, "--fit", str(tmp_path / "fit"),
                 "--out", str(tmp_path / "ev2")]) == 0
    m2 = json.loads((tmp_path / "ev2" / "metrics.json").read_text())
    assert m2["log_ri"] is None and "all" in m2["descriptive"]


def test_select_command(tmp_path, capsys):
    sim = tmp_path / "sim"
    main(["simulate", "--n", "40", "--seed", "4", "--out", str(sim)])
    assert main(["select", "--edges", str(sim / "edges.csv"), "--k-range", "1",
                 "--out", str(tmp_path / "sel")]) == 0
    assert "best_k=1" in capsys.readouterr().out
    assert (tmp_path / "sel" / "icl.csv").exists() and (tmp_path / "sel" / "icl.json").exists()


def test_bench_shape_and_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("NPWNET_THREADS", "1")
    args = ["bench", "--replicates", "3", "--n", "40", "--seed", "5", "--restarts", "1",
            "--max-iter", "15"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert _read(tmp_path / "a.csv") == _read(tmp_path / "b.csv")
    rows = list(csv.DictReader(open(tmp_path / "a.csv")))
    assert list(rows[0]) == ["replicate", "mode", "metric", "value"]
    ri = {(r["replicate"], r["mode"]) for r in rows if r["metric"] == "log_ri"}
    assert len(ri) == 9
