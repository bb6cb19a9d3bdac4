import json
from pathlib import Path

import pytest

from orchestra.cli import main

from conftest import FIXTURES

DESCRIPTIONS = str(FIXTURES / "descriptions")
DAG6 = str(FIXTURES / "dag6.orc")
TOPOLOGY3 = str(FIXTURES / "topology3.json")
TOPOLOGY_SOLO = str(FIXTURES / "topology_solo.json")


def test_compile_ok(capsys):
    code = main(["compile", "--spec", DAG6, "--descriptions", DESCRIPTIONS])
    assert code == 0
    out = capsys.readouterr().out
    assert "6 invocations" in out


def test_compile_emit_dot(tmp_path, capsys):
    dot = tmp_path / "graph.dot"
    code = main(["compile", "--spec", DAG6, "--descriptions", DESCRIPTIONS,
                 "--emit-dot", str(dot)])
    assert code == 0
    assert dot.read_text().startswith("digraph")


def test_compile_diagnostic_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.orc"
    bad.write_text(Path(DAG6).read_text().replace("p6.Op6 -> x", "p6.Op6 -> y"))
    code = main(["compile", "--spec", str(bad), "--descriptions", DESCRIPTIONS])
    assert code == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1  # a single diagnostic line
    assert "'x'" in err


def test_compile_missing_file_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["compile", "--spec", "no-such-file.orc"])
    assert exc.value.code == 2


def test_unknown_flag_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["compile", "--spec", DAG6, "--frobnicate"])
    assert exc.value.code == 2


def test_partition_writes_composites_and_placement(tmp_path, capsys):
    out = tmp_path / "parts"
    code = main([
        "partition", "--spec", DAG6, "--descriptions", DESCRIPTIONS,
        "--topology", TOPOLOGY3, "--out", str(out), "--sink", "eA", "--seed", "0",
    ])
    assert code == 0
    orc_files = sorted(out.glob("*.orc"))
    assert len(orc_files) == 3
    placement = json.loads((out / "placement.json").read_text())
    assert len(placement["composites"]) == 3
    engines = {c["engine"] for c in placement["composites"]}
    assert engines == {"eA", "eB", "eC"}
    assert placement["assignments"]
    assert placement["audit"]


def test_partition_idempotent_under_fixed_seed(tmp_path):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main([
            "partition", "--spec", DAG6, "--descriptions", DESCRIPTIONS,
            "--topology", TOPOLOGY3, "--out", str(out), "--sink", "eA", "--seed", "5",
        ]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]


def test_partition_single_engine_topology(tmp_path):
    out = tmp_path / "solo"
    code = main([
        "partition", "--spec", DAG6, "--descriptions", DESCRIPTIONS,
        "--topology", TOPOLOGY_SOLO, "--out", str(out),
    ])
    assert code == 0
    assert len(list(out.glob("*.orc"))) == 1


def test_partition_missing_qos_pair_names_pair(tmp_path, capsys):
    topo = json.loads(Path(TOPOLOGY3).read_text())
    topo["services"] = [s for s in topo["services"] if s["id"] != "Service6"]
    topo_path = tmp_path / "topo.json"
    topo_path.write_text(json.dumps(topo))
    code = main([
        "partition", "--spec", DAG6, "--descriptions", DESCRIPTIONS,
        "--topology", str(topo_path), "--out", str(tmp_path / "x"),
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert "Service6" in err


def test_run_with_inline_inputs(capsys):
    code = main(["run", "--spec", DAG6, "--descriptions", DESCRIPTIONS, "--input", "a=5"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("x = ")


def test_run_missing_input_exit_1(capsys):
    code = main(["run", "--spec", DAG6, "--descriptions", DESCRIPTIONS])
    assert code == 1
    assert "missing inputs" in capsys.readouterr().err


def bench_config(tmp_path, seed=7) -> Path:
    config = {
        "topology": TOPOLOGY3,
        "workflows": [{"pattern": "pipeline", "service_count": 4}],
        "modes": ["centralized", "distributed"],
        "input_sizes": [1.0],
        "repetitions": 1,
        "seed": seed,
    }
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(config))
    return path


def test_bench_minimal_two_row_report(tmp_path, capsys):
    config = bench_config(tmp_path)
    out = tmp_path / "out"
    code = main(["bench", "--config", str(config), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["runs"]) == 2
    assert {r["mode"] for r in report["runs"]} == {"centralized", "distributed"}
    csv_lines = (out / "report.csv").read_text().splitlines()
    assert len(csv_lines) == 3
    table = capsys.readouterr().out
    assert "S" in table and "pipeline" in table


def test_bench_fixed_seed_byte_identical(tmp_path):
    config = bench_config(tmp_path, seed=123)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["bench", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(["bench", "--config", str(config), "--out", str(out_b)]) == 0
    assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()
    assert (out_a / "report.csv").read_bytes() == (out_b / "report.csv").read_bytes()


def test_bench_bad_config_exit_1(tmp_path, capsys):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps({"workflows": []}))
    code = main(["bench", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 1


def test_report_summarizes_bench_output(tmp_path, capsys):
    config = bench_config(tmp_path)
    out = tmp_path / "out"
    main(["bench", "--config", str(config), "--out", str(out)])
    capsys.readouterr()
    code = main(["report", "--report", str(out / "report.json")])
    assert code == 0
    table = capsys.readouterr().out
    assert "pipeline" in table
    code = main(["report", "--report", str(out / "report.json"), "--format", "csv"])
    assert code == 0
    assert capsys.readouterr().out.startswith("pattern,mode,")
