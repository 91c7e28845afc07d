import json

from chainlearn.cli import main


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


BASE = {
    "kind": "contraction",
    "pair_count": 30,
    "decay_n_max": 3,
    "decay_grid": 128,
    "master_seed": 2,
}


def test_cli_audit_contraction(tmp_path, capsys):
    config = write_config(tmp_path, "c.json", BASE)
    out = tmp_path / "audit.csv"
    assert main(["audit-contraction", "--config", config, "--out", str(out)]) == 0
    text = out.read_text()
    assert "row_kind" in text and "decay" in text


def test_cli_stdout_when_no_out(tmp_path, capsys):
    config = write_config(tmp_path, "c.json", {"kind": "lemma", "lemma_probes": 4})
    assert main(["lemma-check", "--config", config]) == 0
    captured = capsys.readouterr()
    assert "passed=true" in captured.out


def test_cli_determinism_byte_identical(tmp_path):
    config = write_config(
        tmp_path,
        "c.json",
        {"kind": "asem", "n": 400, "replications": 5, "net_radius": 0.25, "pi_grid": 256},
    )
    out1, out2 = tmp_path / "a1.csv", tmp_path / "a2.csv"
    assert main(["asem", "--config", config, "--out", str(out1)]) == 0
    assert main(["asem", "--config", config, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_seed_override_changes_output(tmp_path):
    config = write_config(
        tmp_path,
        "c.json",
        {"kind": "asem", "n": 400, "replications": 5, "net_radius": 0.25, "pi_grid": 256},
    )
    out1, out2 = tmp_path / "a1.csv", tmp_path / "a2.csv"
    assert main(["asem", "--config", config, "--seed", "5", "--out", str(out1)]) == 0
    assert main(["asem", "--config", config, "--seed", "6", "--out", str(out2)]) == 0
    assert out1.read_bytes() != out2.read_bytes()


def test_cli_config_error_exit_code(tmp_path, capsys):
    config = write_config(tmp_path, "c.json", {"kind": "asem", "bogus_key": 1})
    assert main(["asem", "--config", config]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_malformed_json_exit_code(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["asem", "--config", str(path)]) == 1


def test_cli_missing_config_exit_code(tmp_path):
    assert main(["asem", "--config", str(tmp_path / "absent.json")]) == 1


def test_cli_lemma_violation_exit_code(tmp_path):
    config = write_config(
        tmp_path, "c.json", {"kind": "lemma", "target_name": "tent", "lemma_probes": 6}
    )
    out = tmp_path / "lemma.csv"
    assert main(["lemma-check", "--config", config, "--out", str(out)]) == 2
    assert out.exists()  # report written despite the violation


def test_cli_io_error_exit_code(tmp_path):
    config = write_config(tmp_path, "c.json", {"kind": "lemma", "lemma_probes": 4})
    missing_dir = tmp_path / "no_such_dir" / "x.csv"
    assert main(["lemma-check", "--config", config, "--out", str(missing_dir)]) == 3


def test_cli_json_format(tmp_path):
    config = write_config(tmp_path, "c.json", {"kind": "lemma", "lemma_probes": 4})
    out = tmp_path / "lemma.json"
    assert main(["lemma-check", "--config", config, "--format", "json", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["metadata"]["passed"] is True


def test_cli_kind_follows_subcommand(tmp_path):
    # the subcommand wins over the config's kind tag
    config = write_config(tmp_path, "c.json", {**BASE, "kind": "lemma"})
    out = tmp_path / "audit.csv"
    assert main(["audit-contraction", "--config", config, "--out", str(out)]) == 0
    assert "sup_ratio" in out.read_text()
