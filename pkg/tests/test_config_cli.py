import csv
from fractions import Fraction
from pathlib import Path

import pytest

from dglgan import cli, nn
from dglgan.config import ConfigError, ExperimentConfig

TINY = [
    "run.T=6", "run.S=6", "run.batch=8", "run.eval_every=3", "run.eval_samples=64", "run.score_samples=16",
    "model.g_hidden=[8, 8]", "model.d_hidden=[8, 8]", "model.latent_dim=2", "bench.runs=12", "bench.batch=8",
    "gradprobe.n=2", "gradprobe.points=5", "teacher.steps=6",
]


def run(*argv):
    return cli.main([str(a) for a in argv])


def tiny_args(out, *extra):
    args = ["--out", out]
    for o in TINY + list(extra):
        args += ["--override", o]
    return args


# ---------------------------------------------------------------- config


def test_defaults_follow_training_contract():
    cfg = ExperimentConfig.default().train
    assert (cfg.lr, cfg.beta1, cfg.beta2) == (0.002, 0.0, 0.99)
    assert (cfg.T, cfg.S, cfg.eval_every, cfg.eval_samples) == (20000, 20000, 500, 4096)
    assert cfg.strategy.lam == 0.1


def test_round_trip(tmp_path):
    cfg = ExperimentConfig.default().with_overrides("strategy.variant='gdgl'", "model.multiplier='1/4'", "optim.teacher_d_lr=0.001")
    cfg.save(tmp_path / "a.toml")
    back = ExperimentConfig.load(tmp_path / "a.toml")
    assert back == cfg and back.hash == cfg.hash
    assert back.train.multiplier == Fraction(1, 4) and back.train.teacher_d_lr == 0.001


@pytest.mark.parametrize(
    "override,field",
    [
        ("strategy.lamda=0.1", "strategy.lamda"),
        ("optimiser.lr=0.1", "optimiser"),
        ("run.T='many'", "run.T"),
        ("run.alternating=1", "run.alternating"),
        ("strategy.lam=-1", "strategy"),
        ("strategy.variant='vanilla'", "strategy"),
        ("model.multiplier='2'", "config"),
        ("metrics.bins=0", "metrics"),
    ],
)
def test_strict_rejection_names_field(override, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_doc({}, [override])
    assert info.value.field == field


def test_bad_toml(tmp_path):
    (tmp_path / "x.toml").write_text("[run\nT=1")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "x.toml")


def test_presets_via_config():
    exp = ExperimentConfig.default()
    assert exp.strategy("dgl_updated").update_teacher_d
    assert exp.with_overrides("strategy.lam=0.5").strategy("dgl").lam == 0.5
    assert exp.with_overrides("strategy.variant='single_d_updated'").strategy().variant == "single_teacher_d"


def test_numeric_multiplier_accepted():
    assert ExperimentConfig.from_doc({"model": {"multiplier": 0.25}}).train.multiplier == Fraction(1, 4)


# ---------------------------------------------------------------- cli


def test_oracle_check_exit_zero(capsys):
    assert run("oracle-check") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 6


def test_train_degenerate(tmp_path):
    assert run("train", *tiny_args(tmp_path, "run.T=0", "run.S=0")) == 0
    (d,) = [p for p in tmp_path.iterdir() if p.is_dir()]
    assert {p.name for p in d.iterdir()} >= {"checkpoint_init.json", "checkpoint_final.json", "runlog.csv", "scores.csv"}
    assert (d / "checkpoint_init.json").read_bytes() != b""
    init = nn.Checkpoint.load(d / "checkpoint_init.json")
    final = nn.Checkpoint.load(d / "checkpoint_final.json")
    assert final.step == 0 and all(
        (init.g_params[k] == final.g_params[k]).all() for k in init.g_params
    )
    lines = (d / "runlog.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0].startswith("# dglgan") and d.name.split("-")[0] in lines[0]


def test_validation_errors_exit_one(tmp_path, capsys):
    assert run("train", "--override", "strategy.lamda=1") == 1
    assert "strategy.lamda" in capsys.readouterr().err
    assert run("train", *tiny_args(tmp_path, "strategy.variant='dgl'")) == 1
    assert "teacher" in capsys.readouterr().err
    assert run("train", "--config", tmp_path / "missing.toml") == 1
    assert run("distill", *tiny_args(tmp_path), "--checkpoint", tmp_path / "nope.json") == 1


def test_runtime_failure_exit_two(tmp_path, capsys):
    assert run("train", *tiny_args(tmp_path, "run.logit_limit=1e-9")) == 2
    assert "diverged" in capsys.readouterr().err


def test_train_distill_metrics_gradprobe_bench(tmp_path, capsys):
    t = tmp_path / "teacher"
    assert run("train", *tiny_args(t, "run.S=0")) == 0
    (tdir,) = [p for p in t.iterdir() if p.is_dir()]
    teacher = tdir / "checkpoint_final.json"
    s = tmp_path / "student"
    base = tiny_args(s, "model.multiplier='1/2'", f"teacher.checkpoint='{teacher}'")
    assert run("train", *base, "--override", "run.S=0") == 0
    (sdir,) = [p for p in s.iterdir() if p.is_dir()]
    start = sdir / "checkpoint_final.json"
    assert run("distill", *base, "--override", "strategy.variant='dgl_updated'", "--checkpoint", start) == 0
    mismatch = tiny_args(s, f"teacher.checkpoint='{teacher}'", "strategy.variant='dgl'")
    assert run("distill", *mismatch, "--checkpoint", start) == 1
    capsys.readouterr()
    assert run("metrics", *base, "--checkpoint", start) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("# dglgan") and out[1] == "step,toy_frechet,hist_jsd" and out[2].startswith("6,")
    assert run("gradprobe", *base, "--checkpoint", start, "--clip-3sigma") == 0
    lines = (s / "gradmap.csv").read_text().splitlines()
    assert lines[1] == "x,y,student_dx,student_dy,teacher_dx,teacher_dy" and len(lines) == 7
    capsys.readouterr()
    assert run("bench", *tiny_args(tmp_path / "b"), "--multipliers", "1/2") == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[1].startswith("multiplier,params") and [r.split(",")[0] for r in rows[2:]] == ["1", "1/2"]
    assert int(rows[3].split(",")[1]) < int(rows[2].split(",")[1])


def test_sweep_enumeration(tmp_path):
    args = tiny_args(tmp_path, "sweep.strategies=['baseline', 'dgl']", "sweep.multipliers=['1/2', '1/4']", "sweep.seeds=[0,1,2,3,4]")
    assert run("sweep", *args, "--jobs", "1") == 0
    runs = [p for p in (tmp_path / "runs").iterdir() if p.is_dir()]
    assert len(runs) == 20
    with open(tmp_path / "sweep_runs.csv") as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert len(rows) == 20 and all(r["config_hash"] and r["seed"] for r in rows)
    assert {Path(tmp_path / "runs" / f"{r['config_hash']}-s{r['seed']}").is_dir() for r in rows} == {True}
    assert (tmp_path / "sweep.csv").exists() and (tmp_path / "sweep.md").exists()
