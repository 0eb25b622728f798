import json

import pytest

from ustatbounds.cli import COMMANDS, build_parser, run


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_constants(capsys):
    assert run(["constants"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["K_Os"] - 15.7858) < 1e-3
    assert sorted(out["gamma"]) == ["1", "2", "3", "4", "5", "6"]


@pytest.mark.parametrize("cfg,needle", [
    ({"kernel": {"name": "median"}}, "kernel/name"),
    ({"kernel": {"name": "sum"}, "replications": 5}, "replications"),
    ({"dist": {"atoms": [[0, 1.5], [1, 0.5]]}}, "dist"),
    ({"unknown": 1}, "<root>"),
])
def test_schema_errors(tmp_path, capsys, cfg, needle):
    assert run(["decompose", "--config", write(tmp_path, cfg)]) == 1
    err = capsys.readouterr().err
    assert "config invalid at" in err and needle in err


@pytest.mark.parametrize("argv", [
    ["bogus"], ["simulate", "--seed", "-4"], ["simulate", "--workers", "0"], ["decompose", "--config", "/no/such"],
])
def test_usage_errors(argv, capsys):
    assert run(argv) == 1
    assert "Traceback" not in capsys.readouterr().err


def test_bad_json(tmp_path):
    assert run(["decompose", "--config", write(tmp_path, "{not json")]) == 1


def test_probabilities_not_summing(tmp_path):
    assert run(["decompose", "--config", write(tmp_path, {"kernel": {"name": "sum"},
                                                         "dist": {"atoms": [[0, 0.5], [1, 0.4]]}})]) == 1


def test_missing_keys(tmp_path, capsys):
    assert run(["variance", "--config", write(tmp_path, {"kernel": {"name": "sum"}})]) == 1
    assert "ns" in capsys.readouterr().err


def test_cap_exceeded_is_computation_error(tmp_path, capsys):
    cfg = {"kernel": {"name": "sum", "arity": 3}, "dist": {"atoms": [[0, 0.5], [1, 0.5]]}, "cap": 4}
    assert run(["decompose", "--config", write(tmp_path, cfg)]) == 2
    assert "CapExceeded" in capsys.readouterr().err


def test_decompose_and_variance(tmp_path, capsys):
    path = write(tmp_path, {"kernel": {"name": "sample_variance"}, "ns": [5, 200]})
    assert run(["decompose", "--config", path]) == 0
    dec = json.loads(capsys.readouterr().out)
    assert dec["rank"] == 2 and len(dec["projections"]) == 2
    assert run(["variance", "--config", path]) == 0
    var = json.loads(capsys.readouterr().out)
    assert [row["n"] for row in var["by_n"]] == [5, 200]


def test_bound_direct(tmp_path, capsys):
    cfg = {"bound": {"d": 2, "r": 1, "n": 10, "p": 4, "phi_p": 1, "sigma_n": 0.5}}
    assert run(["bound", "--config", write(tmp_path, cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    b = out["bounds"][0]
    assert b["normalized"] == pytest.approx(2 * b["detailed"])
    assert len(out["gamma_table"]) == 2


def test_bound_invalid_rank(tmp_path):
    cfg = {"bound": {"d": 2, "r": 3, "n": 10, "p": 4, "phi_p": 1}}
    assert run(["bound", "--config", write(tmp_path, cfg)]) == 1


def test_norm_and_tail_files(tmp_path):
    cfg = {"kernel": {"name": "identity"}, "dist": {"poisson_centered": {"p_max": 30}},
           "family": {"kind": "power-log", "params": {"m": 2, "r": 0}, "d": 1}}
    out = tmp_path / "out"
    assert run(["norm", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    assert (out / "orlicz.csv").read_text().startswith("u,M\n")
    assert run(["tail", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    assert (out / "tail.csv").read_text().startswith("x,envelope,empirical_tail\n")
    tail = json.loads((out / "tail.json").read_text())
    assert tail["family"]["tail_power"] == "2/3"
    assert tail["kernel"]["exceedances"] == 0


def test_simulate_verify_and_negative_control(tmp_path, capsys):
    cfg = write(tmp_path, {"kernel": {"name": "product"}, "ns": [3, 10], "replications": 1000})
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["simulate", "--config", cfg, "--seed", "11", "--out", str(a)]) == 0
    assert run(["simulate", "--config", cfg, "--seed", "11", "--out", str(b), "--workers", "2"]) == 0
    for name in ("report.json", "curves.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert run(["verify", "--report", str(a / "report.json"), "--out", str(tmp_path / "v")]) == 0
    assert run(["verify", "--report", str(a / "report.json"), "--negative-control"]) == 3
    assert '"verdict": "FAIL"' in capsys.readouterr().out


def test_seed_changes_output(tmp_path):
    cfg = write(tmp_path, {"kernel": {"name": "sum"}, "ns": [4], "replications": 200})
    for seed in ("1", "2"):
        assert run(["simulate", "--config", cfg, "--seed", seed, "--out", str(tmp_path / seed)]) == 0
    assert (tmp_path / "1" / "report.json").read_bytes() != (tmp_path / "2" / "report.json").read_bytes()


@pytest.mark.parametrize("command", list(COMMANDS))
def test_help_has_example(command, capsys):
    assert run([command, "--help"]) == 0
    text = capsys.readouterr().out
    assert "example:" in text and f"ustatbounds {command}" in text


def test_parser_lists_all_commands():
    text = build_parser().format_help()
    for command in COMMANDS:
        assert command in text
