import csv
import io
import subprocess
import sys

import pytest

from urk.cli import run
from urk.lb.params import DELTA_CONSTRAINT


def rows(text):
    lines = text.splitlines()
    assert lines[0].startswith("# urk ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def invoke(capsys, argv):
    code = run(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_pochhammer_csv(capsys):
    code, out, _ = invoke(capsys, ["exp", "pochhammer", "--kmax", "64"])
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["K", "product", "bound", "pass"]
    assert len(table) == 64 and all(r["pass"] == "True" for r in table)
    assert abs(float(table[0]["product"]) - 3.4627) < 1e-3


def test_ur_run_reports_payload(capsys):
    code, out, _ = invoke(capsys, ["ur-run", "--n", "256", "--k", "1", "--q", "3", "--oversample", "4", "--seed", "7"])
    assert code == 0
    (row,) = rows(out)
    L, m = int(row["L"]), int(row["m_rows"])
    assert L == 8
    # payload is (L + 1) levels of ceil(m log2 3) bits each
    import math

    assert int(row["payload_bits"]) == (L + 1) * math.ceil(m * math.log2(3))
    assert int(row["message_bytes"]) * 8 >= int(row["payload_bits"]) + int(row["header_bits"])
    assert row["valid"] == "True"


def test_lb_encode_constraint_exit_code(capsys, tmp_path):
    code, _, err = invoke(capsys, ["lb-encode", "--n", "2048", "--log2-inv-delta", "32", "--encoding", str(tmp_path / "e")])
    assert code == 2
    assert DELTA_CONSTRAINT in err


def test_invalid_flags_exit_code(capsys):
    assert invoke(capsys, ["ur-run"])[0] == 1
    assert invoke(capsys, ["exp", "nonsense"])[0] == 1
    assert invoke(capsys, ["ur-run", "--n", "x"])[0] == 1


def test_parameter_violation_exit_code(capsys):
    code, _, err = invoke(capsys, ["ur-run", "--n", "8", "--k", "5"])
    assert code == 2 and "constraint violated" in err


def test_lb_file_roundtrip(capsys, tmp_path):
    setfile = tmp_path / "set.txt"
    S = list(range(0, 4096, 8))
    setfile.write_text(" ".join(map(str, S)))
    enc = tmp_path / "enc.bin"
    for proto in ("oracle", "iid-failure"):
        base = ["--n", "4096", "--log2-inv-delta", "64", "--protocol", proto, "--seed", "3", "--encoding", str(enc)]
        assert invoke(capsys, ["lb-encode", *base, "--set", str(setfile)])[0] == 0
        code, out, _ = invoke(capsys, ["lb-decode", *base])
        assert code == 0
        assert [int(r["element"]) for r in rows(out)] == S


def test_lb_decode_malformed_file(capsys, tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\x01\x02")
    code, _, err = invoke(capsys, ["lb-decode", "--n", "4096", "--log2-inv-delta", "64", "--encoding", str(bad)])
    assert code == 2


def test_k_variant_roundtrip(capsys, tmp_path):
    enc = tmp_path / "enc.bin"
    base = ["--n", "4096", "--k", "4", "--protocol", "oracle", "--seed", "1", "--encoding", str(enc)]
    assert invoke(capsys, ["lb-encode", *base])[0] == 0
    code, out, _ = invoke(capsys, ["lb-decode", *base])
    assert code == 0 and len(rows(out)) == 128


def test_sketch_demo(capsys, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO("5 1\n9 1\n9 -1\nfind\nsample\n"))
    code, out, _ = invoke(capsys, ["sketch-demo", "--n", "64", "--oversample", "4", "--seed", "2"])
    assert code == 0
    table = rows(out)
    assert [r["answer"] for r in table] == ["5", "5"]


def test_sketch_demo_bad_line(capsys, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO("5 1 2\n"))
    assert invoke(capsys, ["sketch-demo", "--n", "64", "--oversample", "4"])[0] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["exp", "failure-rate", "--n", "32", "--oversample", "2", "4", "--trials", "20"],
        ["exp", "message-size", "--ns", "256", "1024"],
        ["exp", "uniformity", "--trials", "200"],
        ["exp", "savings", "--n", "4096", "--log2-inv-delta", "64", "--trials", "3", "--protocol", "iid-failure"],
        ["exp", "adaptivity", "--trials", "10000"],
    ],
)
def test_experiments_are_deterministic(capsys, argv):
    code, first, _ = invoke(capsys, [*argv, "--seed", "5"])
    assert code == 0
    assert invoke(capsys, [*argv, "--seed", "5"])[1] == first
    assert len(rows(first)) >= 1


def test_seed_from_environment(capsys, monkeypatch):
    argv = ["exp", "adaptivity", "--trials", "1000"]
    monkeypatch.setenv("URK_SEED", "9")
    from_env = invoke(capsys, argv)[1]
    monkeypatch.delenv("URK_SEED")
    assert invoke(capsys, [*argv, "--seed", "9"])[1] == from_env


def test_output_file(capsys, tmp_path):
    dest = tmp_path / "out.csv"
    assert invoke(capsys, ["exp", "pochhammer", "--kmax", "2", "-o", str(dest)])[0] == 0
    assert len(rows(dest.read_text())) == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "urk.cli", "exp", "pochhammer", "--kmax", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "3.46" in proc.stdout
