import csv
import io
import json

import pytest

from dblab import bench
from dblab.cli import main, parse_n
from dblab.errors import InvalidParameterError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_parse_n_forms():
    assert parse_n("8") == [8]
    assert parse_n("1..4") == [1, 2, 3, 4]
    assert parse_n("1-3") == [1, 2, 3]
    assert parse_n("1,2,8") == [1, 2, 8]


def test_analyze_hkp_range(capsys):
    code, out, _ = run(capsys, "analyze", "--protocols", "HKP", "--fraud", "mafia", "--n", "1..4")
    assert code == 0
    assert out.startswith("# generated ")
    rows = rows_of(out)
    assert len(rows) == 4
    assert float(rows[3]["value"]) == 0.31640625


def test_analyze_all_protocols(capsys):
    code, out, _ = run(capsys, "analyze", "--n", "8", "--no-header-timestamp")
    assert code == 0 and not out.startswith("#")
    rows = rows_of(out)
    assert len(rows) == 8
    assert bench.all_probabilities_valid([{"value": float(r["value"])} for r in rows], ["value"])


def test_empty_n_range_is_usage_error(capsys):
    code, _, err = run(capsys, "analyze", "--n", "5..2")
    assert code == 2 and "empty" in err


def test_simulate_byte_identical(capsys, tmp_path):
    args = ["simulate", "--protocols", "HKP,GRAPH", "--n", "4", "--trials", "20000",
            "--seed", "9", "--no-header-timestamp"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = rows_of(a.read_text())
    assert {r["protocol"] for r in rows} == {"HKP", "GRAPH"}


def test_simulate_distance_large_n_resource_error(capsys):
    code, _, err = run(capsys, "simulate", "--protocols", "HKP", "--fraud", "distance", "--n", "24",
                       "--trials", "10")
    assert code == 3 and "resource" in err


def test_json_output(capsys):
    code, out, _ = run(capsys, "analyze", "--protocols", "KAP", "--pd", "0.25,0.75", "--n", "2",
                       "--format", "json")
    assert code == 0
    rows = [json.loads(l) for l in out.splitlines()]
    assert len(rows) == 4 and {r["param"] for r in rows} == {"0.25", "0.75"}


def test_tradeoff_easy_targets():
    grid = bench.tradeoff([0.8], [0.9], 4)
    cell = grid[0][0]
    assert cell.winner.name == "HKP" and cell.rounds_needed == 1 and cell.memory_bits == 2


def test_tradeoff_unachievable():
    cell = bench.tradeoff([1e-9], [1e-9], 4)[0][0]
    assert not cell.achievable and cell.as_row()["winner"] == "none"


def test_tradeoff_monotone_in_targets():
    targets = bench.log_grid(1e-6, 0.5, 8)
    grid = bench.tradeoff(targets, targets, 64)
    rounds = [[c.rounds_needed or 10**9 for c in row] for row in grid]
    # targets shrink along both axes, so the rounds needed never drop
    for r in range(len(targets)):
        for c in range(len(targets)):
            if r + 1 < len(targets):
                assert rounds[r + 1][c] >= rounds[r][c]
            if c + 1 < len(targets):
                assert rounds[r][c + 1] >= rounds[r][c]


def test_tradeoff_independent_of_protocol_order():
    targets = bench.log_grid(1e-4, 0.5, 5)
    a = bench.tradeoff(targets, targets, 32, protocols=("GRAPH", "HKP", "KAP", "ATP3"))
    b = bench.tradeoff(targets, targets, 32, protocols=("ATP3", "KAP", "HKP", "GRAPH"))
    assert [[c.as_row() for c in row] for row in a] == [[c.as_row() for c in row] for row in b]


def test_tradeoff_validation():
    with pytest.raises(InvalidParameterError):
        bench.tradeoff([1.5], [0.1], 4)
    with pytest.raises(InvalidParameterError):
        bench.tradeoff([0.1], [0.1], 0)


def test_tradeoff_cli(capsys):
    code, out, _ = run(capsys, "tradeoff", "--grid-size", "3", "--n-max", "16", "--no-header-timestamp")
    assert code == 0 and len(rows_of(out)) == 9


def test_oracle_limit(capsys):
    code, _, _ = run(capsys, "oracle", "--n-max", "4")
    assert code == 3


def test_oracle_n1_passes(capsys):
    code, out, _ = run(capsys, "oracle", "--n-max", "1", "--format", "json")
    assert code == 0
    rows = [json.loads(l) for l in out.splitlines()]
    assert all(r["status"] == "pass" for r in rows)


def test_oracle_mismatch_exit_code(capsys):
    # the graph mafia closed form is labelled exact but exceeds the optimum from n = 2
    code, out, err = run(capsys, "oracle", "--n-max", "2", "--no-header-timestamp")
    assert code == 4
    assert "GRAPH mafia n=2" in err
    failed = [r for r in rows_of(out) if r["status"] == "FAIL"]
    assert [(r["protocol"], r["fraud"], r["n"]) for r in failed] == [("GRAPH", "mafia", "2")]
