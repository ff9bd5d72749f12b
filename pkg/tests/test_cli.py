import dataclasses
import json
import subprocess
import sys

import pytest

from qkdbounds import cli, postproc
from qkdbounds.bellcore import binary_entropy


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_rate_single_bb84(capsys):
    code, out, _ = run(capsys, "rate", "single", "--protocol", "bb84", "--qber", "0.05")
    doc = json.loads(out)
    assert code == 0
    assert doc["value"] == pytest.approx(1 - 2 * binary_entropy(0.05), abs=1e-9)
    assert doc["abort"] is False


def test_rate_single_non_positive_exits_two(capsys):
    code, out, _ = run(capsys, "rate", "single", "--protocol", "sarg", "--qber", "0.2")
    assert code == 2 and json.loads(out)["abort"] is True


def test_rate_single_with_distillation(capsys):
    code, out, _ = run(capsys, "rate", "single", "--protocol", "six-state", "--qber", "0.2",
                       "--ad-block", "4", "--q", "auto")
    doc = json.loads(out)
    assert code == 0 and doc["value"] > 0
    assert doc["witness"]["m"] == 4
    assert doc["witness"]["per_raw_bit"] < doc["value"]


def test_rate_wcp_and_decoy(capsys):
    code, out, _ = run(capsys, "rate", "wcp", "--protocol", "bb84", "--distance", "10", "--mu", "auto")
    no_decoy = json.loads(out)
    assert code == 0 and no_decoy["unit"] == "bits per pulse"
    code, out, _ = run(capsys, "rate", "decoy", "--protocol", "bb84", "--distance", "10")
    assert code == 0 and json.loads(out)["value"] >= no_decoy["value"]


@pytest.mark.parametrize("argv", [
    ["rate", "single", "--protocol", "bb84"],
    ["rate", "single", "--qber", "0.1", "--q", "0.7"],
    ["rate", "single", "--qber", "0.1", "--q", "often"],
    ["rate", "wcp", "--protocol", "six-state"],
    ["rate", "wcp", "--mu", "-1"],
    ["rate", "wcp", "--eta-det", "2"],
    ["curve", "--step", "0"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_one(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_out_of_domain_qber_exits_one(capsys):
    assert run(capsys, "rate", "single", "--qber", "0.9")[0] == 1


def test_threshold_verb(capsys):
    code, out, _ = run(capsys, "threshold", "--protocol", "sarg")
    doc = json.loads(out)
    assert code == 0
    assert doc["qber"] == pytest.approx(0.1167, abs=5e-4)
    assert doc["trace_length"] > 2


def test_curve_csv_format(capsys, tmp_path):
    path = tmp_path / "c.csv"
    code, out, _ = run(capsys, "curve", "--protocol", "bb84", "--from", "0", "--to", "20", "--step", "10",
                       "--out", str(path))
    assert code == 0 and out == ""
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "distance_km,mu_opt,q_opt,rate_per_pulse,abort"
    assert [line.split(",")[0] for line in lines[1:]] == ["0.0", "10.0", "20.0"]
    rates = [float(line.split(",")[3]) for line in lines[1:]]
    assert rates == sorted(rates, reverse=True)


def test_curve_is_byte_identical(capsys, tmp_path):
    argv = ["curve", "--protocol", "sarg", "--from", "0", "--to", "10", "--step", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, *argv, "--out", str(a))
    run(capsys, *argv, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_curve_json_and_empty_sweep(capsys):
    code, out, _ = run(capsys, "curve", "--from", "0", "--to", "5", "--step", "5", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 2
    code, out, _ = run(capsys, "curve", "--from", "5", "--to", "0")
    assert code == 0 and out == "distance_km,mu_opt,q_opt,rate_per_pulse,abort\n"


def test_config_precedence(capsys, tmp_path, monkeypatch):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"protocol": "six-state", "qber": 0.1}))
    code, out, _ = run(capsys, "rate", "single", "--config", str(conf))
    assert json.loads(out)["inputs"]["protocol"] == "six-state"
    code, out, _ = run(capsys, "rate", "single", "--config", str(conf), "--protocol", "bb84")
    assert json.loads(out)["inputs"]["protocol"] == "bb84"
    monkeypatch.setenv(cli.CONFIG_ENV, str(conf))
    code, out, _ = run(capsys, "rate", "single")
    assert code == 0 and json.loads(out)["inputs"]["qber"] == 0.1


def test_bad_config(capsys, tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"colour": "blue"}))
    assert run(capsys, "rate", "single", "--qber", "0.1", "--config", str(conf))[0] == 1
    assert run(capsys, "rate", "single", "--qber", "0.1", "--config", str(tmp_path / "missing.json"))[0] == 1


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    assert out.count("PASS") == 6 and "FAIL" not in out


def test_verify_detects_fault(capsys, monkeypatch):
    real = postproc.advantage_distill

    def broken(lam, m):
        res = real(lam, m)
        arr = (1 - 1e-6) * res.lam_out.as_array() + 0.25e-6
        return dataclasses.replace(res, lam_out=type(res.lam_out).from_array(arr))

    monkeypatch.setattr(postproc, "advantage_distill", broken)
    code, out, _ = run(capsys, "verify")
    assert code == 3
    line = next(x for x in out.splitlines() if "ad_vs_enumeration" in x)
    assert line.startswith("FAIL") and "Error" not in line
    assert float(line.split("max deviation")[1].split()[0]) > 1e-7


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qkdbounds", "rate", "single", "--qber", "0.05"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(0.427206, abs=1e-6)
