import json
import random

import pytest

from sucdict import cli
from sucdict.experiments import EXPERIMENTS, run
from sucdict.oracle import singularity_rate


@pytest.fixture(scope="module")
def fixture_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    rng = random.Random(1)
    keys = sorted(rng.sample(range(1 << 16), 1 << 12))
    vals = [rng.randrange(16) for _ in keys]
    cli.write_ints(d / "k.bin", keys)
    cli.write_ints(d / "v.bin", vals, cli.VALUES_MAGIC)
    return d, keys, vals


def test_key_file_format(tmp_path):
    cli.write_ints(tmp_path / "k", [1, 2, 1 << 40])
    raw = (tmp_path / "k").read_bytes()
    assert raw[:8] == b"SUCDKEYS" and int.from_bytes(raw[8:16], "little") == 3
    assert cli.read_ints(tmp_path / "k") == [1, 2, 1 << 40]
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(ValueError):
        cli.read_ints(tmp_path / "bad")


def test_build_verify_query(fixture_files, capsys):
    d, keys, vals = fixture_files
    out = str(d / "dict.sucd")
    assert cli.main(["build", "--keys", str(d / "k.bin"), "--values", str(d / "v.bin"), "--out", out,
                     "--universe", str(1 << 16), "--sigma", "16", "--bucket-size", "64"]) == 0
    assert cli.main(["--json", "verify", "--dict", out, "--keys", str(d / "k.bin"),
                     "--values", str(d / "v.bin")]) == 0
    rep = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert rep["wrong"] == 0 and rep["max_access_probes"] <= 40
    absent = next(x for x in range(1 << 16) if x not in set(keys))
    assert cli.main(["query", "--dict", out, "--key", str(absent)]) == 0
    assert "absent" in capsys.readouterr().out
    assert cli.main(["query", "--dict", out, "--key", str(keys[5])]) == 0
    assert capsys.readouterr().out.startswith(f"{keys[5]}: {vals[5]} ")


def test_build_failure_exit_code(tmp_path, capsys):
    cli.write_ints(tmp_path / "k", [1, 2, 3])
    assert cli.main(["build", "--keys", str(tmp_path / "k"), "--out", str(tmp_path / "o"),
                     "--universe", "4"]) == 3


def test_experiment_report_and_determinism(capsys):
    assert cli.main(["--json", "experiment", "--name", "rank-prob", "--trials", "20", "--seed", "3"]) == 0
    a = json.loads(capsys.readouterr().out)
    b = run("rank-prob", 20, 3)
    a.pop("timings"), b.pop("timings")
    assert a == json.loads(json.dumps(b))
    assert set(a) >= {"command", "params", "success_rates", "passed"}


def test_rank_prob_agrees_with_oracle_rate():
    rep = run("rank-prob", 100, 0)
    ref = singularity_rate(32, 50, 67, 100, seed=0)
    assert abs(rep["success_rates"]["32"] - ref) <= 0.2


def test_violated_bound_exit_code(capsys):
    assert cli.main(["experiment", "--name", "loads", "--trials", "10"]) == 2
    assert "BOUND VIOLATED" in capsys.readouterr().out


def test_all_experiments_registered():
    assert set(EXPERIMENTS) == {"rank-prob", "retrieval-success", "blocktree-rank", "loads",
                                "entropy", "redundancy-sweep", "base-convert"}


def test_threads_env(monkeypatch):
    monkeypatch.setenv("SUCD_THREADS", "3")
    assert cli.threads() == 3
    monkeypatch.setenv("SUCD_THREADS", "x")
    assert cli.threads() == 1
