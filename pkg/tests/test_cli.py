import csv
import json

import pytest

from ctlab import cli

SMALL_HYP2 = {"schema_version": 1, "n_configs": 40, "fellow_pairs": 20, "sandwich_pairs": 40, "chunk": 10}
SMALL_WALK = {"schema_version": 1, "N": 200, "paths": 100, "bootstrap": 200, "z_seeds": 400,
              "z_n": [100, 200], "binomial_n": 100}


def _write(tmp_path, data, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


def test_defaults_and_overrides():
    cfg = cli.make_config("verify-hyp2")
    assert cfg.seed == 0 and cfg.workers == 1 and cfg["n_configs"] == 1000
    cfg = cli.make_config("walk-stats", {"schema_version": 1, "N": 500, "seed": 3}, seed=9, workers=2)
    assert cfg.seed == 9 and cfg.workers == 2 and cfg["N"] == 500
    assert "workers" not in cfg.echo()


@pytest.mark.parametrize("text, msg", [
    ('{"schema_version": 1, "N": 100, "N": 200}', "duplicate"),
    ('{"schema_version": 1, "level": NaN}', "non-standard"),
    ("[1, 2]", "object"),
    ("{oops", "valid JSON"),
    ('{"N": 100}', "schema_version"),
    ('{"schema_version": 2}', "schema_version"),
    ('{"schema_version": 1, "bogus": 1}', "unknown"),
    ('{"schema_version": 1, "N": 10}', "N"),
    ('{"schema_version": 1, "seed": -1}', "seed"),
    ('{"schema_version": 1, "workers": 0}', "workers"),
    ('{"schema_version": 1, "z_law": "cauchy"}', "z_law"),
])
def test_config_errors(tmp_path, text, msg):
    path = _write(tmp_path, text)
    with pytest.raises(cli.ConfigError, match=msg):
        cli.load_config("walk-stats", path)


def test_cross_checks():
    with pytest.raises(cli.ConfigError, match="lo < hi"):
        cli.make_config("solv-qg", {"schema_version": 1, "window": [30, 5]})
    with pytest.raises(cli.ConfigError, match="even"):
        cli.make_config("solv-qg", {"schema_version": 1, "grid": 9})
    with pytest.raises(cli.ConfigError, match="no axis"):
        cli.make_config("solv-qg", {"schema_version": 1, "axes": [[0, 0]]})
    with pytest.raises(cli.ConfigError, match="0.05"):
        cli.make_config("height-fiber", {"schema_version": 1, "step": 0.1})
    with pytest.raises(cli.ConfigError, match="theta_min"):
        cli.make_config("verify-hyp2", {"schema_version": 1, "theta_min": 0.6, "theta_max": 0.5})


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["verify-hyp2", "--config", _write(tmp_path, {"schema_version": 1, "bogus": 1}),
                     "--out", str(tmp_path / "o")]) == 2
    assert "unknown config keys" in capsys.readouterr().err
    assert cli.main(["no-such-command"]) == 2
    assert cli.main(["verify-hyp2", "--workers", "0"]) == 2
    assert cli.main(["verify-hyp2", "--config", str(tmp_path / "missing.json")]) == 2


def test_periodic_walk_is_a_config_error(tmp_path, capsys):
    data = dict(SMALL_WALK, z_law="z_only", lazy=0.0)
    code = cli.main(["walk-stats", "--config", _write(tmp_path, data), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "lazy step" in capsys.readouterr().err


def test_negative_control_fails(tmp_path):
    # with T0 = 0 the projection interval bound is too tight to hold
    data = dict(SMALL_HYP2, T0=0.0)
    code = cli.main(["verify-hyp2", "--config", _write(tmp_path, data), "--out", str(tmp_path / "o")])
    assert code == 1
    rep = json.loads((tmp_path / "o" / "verify-hyp2.json").read_text())
    crit = {c["name"]: c for c in rep["criteria"]}
    assert not crit["projection_interval"]["passed"]
    assert crit["lambert"]["passed"]


def test_json_artifact(tmp_path):
    code = cli.main(["verify-hyp2", "--config", _write(tmp_path, SMALL_HYP2), "--out", str(tmp_path / "o")])
    assert code == 0
    rep = json.loads((tmp_path / "o" / "verify-hyp2.json").read_text())
    assert rep["schema_version"] == 1 and rep["command"] == "verify-hyp2"
    assert rep["config"]["n_configs"] == 40
    assert all(c["passed"] for c in rep["criteria"])
    assert "seconds" in rep["runtime"]


def test_csv_artifacts(tmp_path):
    cfg = cli.make_config("verify-hyp2", SMALL_HYP2)
    rep = cli.run(cfg)
    paths = rep.write(str(tmp_path), "csv")
    names = {p.rsplit("/", 1)[-1] for p in paths}
    assert {"verify-hyp2.criteria.csv", "verify-hyp2.config.json"} <= names
    with open(tmp_path / "verify-hyp2.criteria.csv") as fh:
        header = fh.readline()
        assert header.startswith("# ctlab report schema_version=")
        rows = list(csv.DictReader(fh))
    assert [r["name"] for r in rows] == [c.name for c in rep.criteria]


def test_report_digest_ignores_runtime():
    cfg = cli.make_config("verify-hyp2", SMALL_HYP2)
    a, b = cli.run(cfg), cli.run(cfg)
    assert a.digest() == b.digest()
    other = cli.run(cli.make_config("verify-hyp2", SMALL_HYP2, seed=1))
    assert other.digest() != a.digest()


@pytest.mark.parametrize("command, data", [("verify-hyp2", SMALL_HYP2), ("walk-stats", SMALL_WALK)])
def test_worker_count_does_not_change_results(command, data):
    one = cli.run(cli.make_config(command, data, workers=1))
    two = cli.run(cli.make_config(command, data, workers=2))
    assert one.digest() == two.digest()
    assert cli.canonical_json(one.results()) == cli.canonical_json(two.results())


def test_task_seeds_distinct():
    seen = {cli.task_seed(0, 1, i) for i in range(200)} | {cli.task_seed(0, 2, i) for i in range(200)}
    assert len(seen) == 400
    assert cli.task_seed(5, 1, 2) == cli.task_seed(5, 1, 2)
    assert all(0 <= s < 2 ** 64 for s in seen)


def test_content_hash_is_git_blob():
    import hashlib

    data = cli.canonical_json({"a": 1})
    assert cli.content_hash({"a": 1}) == hashlib.sha1(b"blob 7\0" + data).hexdigest()
    assert cli.canonical_json({"x": float("nan")}) == b'{"x":"nan"}'


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "ctlab", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify-hyp2" in out.stdout
