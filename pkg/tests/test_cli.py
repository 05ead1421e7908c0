import csv
import os

import pytest

from degradesim.cli import main, parse_loads, parse_seeds

FAST = ["--slots", "60", "--requests", "60"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_loads():
    assert parse_loads("26:44:2") == [26, 28, 30, 32, 34, 36, 38, 40, 42, 44]
    assert parse_loads("1,2.5") == [1.0, 2.5]
    assert parse_loads("0.5:1.5:0.5") == [0.5, 1.0, 1.5]


def test_parse_seeds():
    assert parse_seeds("1..20") == list(range(1, 21))
    assert parse_seeds("4") == [4]
    assert parse_seeds("3,1") == [3, 1]


def test_single_cell(tmp_path):
    out = tmp_path / "o"
    assert main(FAST + ["--loads", "2", "--policies", "baseline", "--seeds", "1", "--out", str(out)]) == 0
    table = rows(out / "bbp.csv")
    assert table[0] == ["load_erlang", "policy", "seed", "priority", "bbp"]
    assert [r[3] for r in table[1:]] == ["all", "1", "2", "3", "4", "5"]
    series = rows(out / "series.csv")
    assert series[0] == ["time_h", "policy", "throughput_gbps", "bbp_window"] and len(series) > 1
    assert "policy=baseline" in (out / "summary.txt").read_text()


def test_row_count_and_byte_identical_rerun(tmp_path):
    args = FAST + ["--loads", "1:2:1", "--policies", "baseline,OE-MinPDR", "--seeds", "1..2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert len(rows(tmp_path / "a" / "bbp.csv")) == 1 + 2 * 2 * 2 * 6
    for name in ("bbp.csv", "series.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sa = (tmp_path / "a" / "summary.txt").read_text().splitlines()
    sb = (tmp_path / "b" / "summary.txt").read_text().splitlines()
    assert sa[0].startswith("# generated") and sa[1:] == sb[1:]


def test_parallel_jobs_match_serial(tmp_path):
    args = FAST + ["--loads", "2", "--policies", "baseline,E-MinRH", "--seeds", "1..2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--jobs", "2", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "bbp.csv").read_bytes() == (tmp_path / "b" / "bbp.csv").read_bytes()


def test_trace_replay(tmp_path):
    base = FAST + ["--loads", "2", "--policies", "OE-MinRH", "--seeds", "3"]
    assert main(base + ["--trace-out", str(tmp_path / "traces"), "--out", str(tmp_path / "a")]) == 0
    (trace,) = os.listdir(tmp_path / "traces")
    assert main(base + ["--trace-in", str(tmp_path / "traces" / trace), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "bbp.csv").read_bytes() == (tmp_path / "b" / "bbp.csv").read_bytes()
    assert (tmp_path / "a" / "summary.txt").read_text().splitlines()[1:] == (
        tmp_path / "b" / "summary.txt"
    ).read_text().splitlines()[1:]


def test_lambda_sets_load(tmp_path):
    assert main(FAST + ["--lambda", "20", "--mu", "10", "--policies", "baseline", "--seeds", "1",
                        "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "bbp.csv")[1][0] == "2.0"


def test_custom_topology(tmp_path):
    topo = tmp_path / "ring.txt"
    topo.write_text("nodes 4 slots 300\nlink 0 1 500\nlink 1 2 500\nlink 2 3 500\nlink 3 0 500\n")
    assert main(["--topology", str(topo), "--slots", "20", "--requests", "40", "--loads", "1",
                 "--policies", "O-MinPDR", "--seeds", "1", "--out", str(tmp_path / "o")]) == 0
    assert len(rows(tmp_path / "o" / "bbp.csv")) == 7


@pytest.mark.parametrize("bad", [
    ["--loads", "x"], ["--policies", "nope"], ["--seeds", "a..b"], ["--threshold", "0"],
    ["--oe-order", "sideways"], ["--frobnicate"], ["--topology", "/nonexistent/topo.txt"],
    ["--trace-in", "/nonexistent/trace.csv"], ["--slots", "0"],
])
def test_bad_flags_exit_2(bad, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(FAST + bad + ["--out", str(tmp_path)])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_malformed_topology_exit_2(tmp_path):
    topo = tmp_path / "bad.txt"
    topo.write_text("nodes 3 slots 10\nlink 0 9 100\n")
    with pytest.raises(SystemExit) as exc:
        main(["--topology", str(topo), "--out", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_unwritable_output_exit_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(FAST + ["--loads", "1", "--seeds", "1", "--out", str(blocker / "sub")]) == 1
