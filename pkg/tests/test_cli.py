import csv
import hashlib
import json

import numpy as np
import pytest
import yaml

from bcpace import ArtifactVersionMismatch, ConfigError
from bcpace.cli import EPISODE_FIELDS, main, read_rows, write_rows
from bcpace.config import ExperimentSpec, dump_spec, load_spec
from bcpace.experiment import RESULT_FIELDS
from bcpace.serialize import load_estimate, save_estimate

from conftest import CONFIGS

SHIPPED = sorted(CONFIGS.glob("*.yaml"))


def small_config(tmp_path, base="tiger.yaml", name="cfg.yaml", **changes):
    data = yaml.safe_load((CONFIGS / base).read_text())
    data["eval"]["episodes"] = changes.pop("episodes", 50)
    for key, value in changes.items():
        section, field = key.split("__")
        data[section][field] = value
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- config --------------------------------------------------------------------

@pytest.mark.parametrize("path", SHIPPED, ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path, tmp_path):
    spec = load_spec(path)
    dump_spec(spec, tmp_path / "back.yaml")
    assert load_spec(tmp_path / "back.yaml") == spec


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("environment: tiger\nsurprise: 1\n")
    with pytest.raises(ConfigError):
        load_spec(bad)
    bad.write_text("environment: tiger\nsolver: {k: 0}\n")
    with pytest.raises(ConfigError):
        load_spec(bad)
    bad.write_text("schema_version: 2\nenvironment: tiger\n")
    with pytest.raises(ConfigError):
        load_spec(bad)
    with pytest.raises(ConfigError):
        ExperimentSpec("tiger", seeds=[])


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("environment: {name: nowhere}\n")
    assert main(["--config", str(bad), "--out", str(tmp_path), "train"]) == 2
    assert main(["--out", str(tmp_path), "train"]) == 2


# -- train -----------------------------------------------------------------------

def test_train_smoke_and_determinism(tmp_path, capsys):
    cfg = small_config(tmp_path)
    for run in ("a", "b"):
        assert main(["--config", str(cfg), "--out", str(tmp_path / run), "train"]) == 0
    d = tmp_path / "a" / "tiger" / "seed-0"
    assert (d / "estimate.npz").exists() and (tmp_path / "a" / "spec.yaml").exists()
    log_text = (d / "training_log.csv").read_text()
    assert len(log_text.splitlines()) > 1
    assert (tmp_path / "b" / "tiger" / "seed-0" / "training_log.csv").read_text() == log_text
    meta = json.loads(str(np.load(d / "estimate.npz")["meta"]))
    assert meta["extra"]["terminated"] is True


def test_train_fan_out(tmp_path, capsys):
    cfg = small_config(tmp_path, "chain.yaml", solver__max_episodes=20, solver__horizon=20)
    spec = load_spec(cfg).with_seeds([0, 1, 2, 3, 4])
    dump_spec(spec, cfg)
    code = main(["--config", str(cfg), "--out", str(tmp_path), "train"])
    assert code == 3  # the tiny budget runs out
    arts = sorted((tmp_path / "chain").glob("seed-*/estimate.npz"))
    assert len(arts) == 5
    assert len({sha(p) for p in arts}) == 5


def test_env_out_override(tmp_path, monkeypatch, capsys):
    cfg = small_config(tmp_path)
    monkeypatch.setenv("BCPACE_OUT", str(tmp_path / "env-out"))
    assert main(["--config", str(cfg), "train"]) == 0
    assert (tmp_path / "env-out" / "tiger" / "seed-0" / "estimate.npz").exists()


# -- eval ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("trained")
    cfg = small_config(tmp)
    assert main(["--config", str(cfg), "--out", str(tmp), "train"]) == 0
    return cfg, tmp, tmp / "tiger" / "seed-0" / "estimate.npz"


def test_eval_artifact_is_pure(trained, tmp_path, capsys):
    cfg, _, art = trained
    before = sha(art)
    assert main(["--config", str(cfg), "--out", str(tmp_path), "eval", "--artifact", str(art)]) == 0
    assert sha(art) == before
    rows = read_rows(tmp_path / "results.csv")
    assert [r.policy for r in rows] == ["bcpace"] and rows[0].episodes == 50
    with open(tmp_path / "episodes.csv") as fh:
        reader = csv.reader(fh)
        assert tuple(next(reader)) == EPISODE_FIELDS
        assert len(list(reader)) == 50


def test_eval_baseline(trained, tmp_path, capsys):
    cfg, _, _ = trained
    assert main(["--config", str(cfg), "--out", str(tmp_path), "eval", "--baseline", "qmdp"]) == 0
    rows = read_rows(tmp_path / "results.csv")
    assert rows[0].policy == "qmdp"
    assert rows[0].stderr == pytest.approx(
        np.std([float(r["return"]) for r in csv.DictReader(open(tmp_path / "episodes.csv"))], ddof=1)
        / np.sqrt(50))
    assert main(["--config", str(cfg), "--out", str(tmp_path), "eval", "--baseline", "pomcp"]) == 2


def test_eval_qmdp_lightdark_zero(tmp_path, capsys):
    cfg = small_config(tmp_path, "lightdark.yaml")
    assert main(["--config", str(cfg), "--out", str(tmp_path), "eval", "--baseline", "qmdp"]) == 0
    row = read_rows(tmp_path / "results.csv")[0]
    assert row.mean_return <= 0 + 3 * row.stderr
    assert row.stderr == 0.0  # deterministic dynamics, deterministic policy


def test_artifact_mismatch_exit_code(trained, tmp_path, capsys):
    cfg, _, art = trained
    data = dict(np.load(art))
    meta = json.loads(str(data.pop("meta")))
    meta["version"] = 99
    bad = tmp_path / "bad.npz"
    np.savez(bad, meta=json.dumps(meta), **data)
    assert main(["--config", str(cfg), "--out", str(tmp_path), "eval", "--artifact", str(bad)]) == 4
    with pytest.raises(ArtifactVersionMismatch):
        load_estimate(bad)


def test_artifact_round_trip(trained, tmp_path):
    _, _, art = trained
    qe = load_estimate(art)
    assert qe.frozen
    save_estimate(tmp_path / "again.npz", qe, qe.env_name, qe.env_params)
    qe2 = load_estimate(tmp_path / "again.npz")
    n = qe.samples.n
    np.testing.assert_array_equal(qe.samples.Q[:n], qe2.samples.Q[:n])
    np.testing.assert_array_equal(qe.samples.B[:n], qe2.samples.B[:n])
    rng = np.random.default_rng(0)
    for _ in range(200):
        s, b = int(rng.integers(3)), rng.dirichlet([1, 1])
        assert np.array_equal(qe.estimates(s, b), qe2.estimates(s, b))
    with pytest.raises(RuntimeError):
        qe.add_sample(0, [0.5, 0.5], 0, 0.0, 1, [0.5, 0.5], False)


# -- bench and diag ----------------------------------------------------------------

def test_bench_seed_isolation(tmp_path, capsys):
    one = small_config(tmp_path, name="one.yaml")
    spec = load_spec(one).with_seeds([0, 1])
    two = tmp_path / "two.yaml"
    dump_spec(spec, two)
    assert main(["--out", str(tmp_path / "r1"), "bench", str(one)]) == 0
    assert main(["--out", str(tmp_path / "r2"), "bench", str(two)]) == 0
    r1 = {(r.policy, r.seed): r for r in read_rows(tmp_path / "r1" / "bench.csv")}
    r2 = {(r.policy, r.seed): r for r in read_rows(tmp_path / "r2" / "bench.csv")}
    assert set(r2) == {("bcpace", 0), ("bcpace", 1), ("qmdp", 1)}
    for key in (("bcpace", 0), ("qmdp", 1)):
        assert r1[key].mean_return == r2[key].mean_return
        assert r1[key].mean_discounted == r2[key].mean_discounted
        assert r1[key].samples == r2[key].samples


def test_result_csv_schema(tmp_path):
    from bcpace.experiment import ResultRow

    rows = [ResultRow("tiger", "qmdp", 1.5, 0.1, 1.0, 0.05, 10, 1, 0, 0.5),
            ResultRow("chain", "bcpace", 2.0, 0.2, 1.5, 0.1, 10, 0, 33, 1.25)]
    write_rows(tmp_path / "r.csv", rows)
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == RESULT_FIELDS
    back = read_rows(tmp_path / "r.csv")
    assert back == sorted(rows, key=lambda r: (r.environment, r.policy, r.seed))


def test_diag_report(trained, tmp_path, capsys):
    cfg, _, art = trained
    code = main(["--config", str(cfg), "--out", str(tmp_path), "diag", "--artifact", str(art),
                 "--trace-episodes", "30", "--trials", "500"])
    assert code == 0
    report = json.loads((tmp_path / "diag-tiger.json").read_text())
    assert report["cover_reduced"] <= report["cover_full"]
    assert report["sample_count_ok"] and report["samples"] <= report["sample_count_bound"]
    for key in ("complexity_m", "k_window", "belief_contraction_violation_rate",
                "estimator_lipschitz_violation_rate", "cover_ratio"):
        assert key in report


def test_trajectory_command(tmp_path, capsys):
    cfg = small_config(tmp_path, "lightdark.yaml", solver__max_episodes=5)
    main(["--config", str(cfg), "--out", str(tmp_path), "train"])
    art = tmp_path / "lightdark" / "seed-0" / "estimate.npz"
    assert main(["trajectory", "--artifact", str(art), "--horizon", "5"]) == 0
    out = capsys.readouterr().out
    assert out.count("latent=") == 2
