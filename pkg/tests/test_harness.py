import json
import re
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pott.harness import (BadMagic, ConfigError, EmptyRunSet, ExperimentConfig, FormatError,
                          ResultRecord, SplitOverlap, TruncatedPayload, VersionMismatch,
                          aggregate, append_record, decode_tensor, encode_checkpoint,
                          encode_tensor, load_checkpoint, load_records, read_dataset,
                          read_tensor, render_svg, save_checkpoint, write_csv, write_dataset,
                          write_tensor)
from pott.harness.cli import main
from pott.harness.experiment import max_workers
from pott.harness.report import prediction_panels
from pott.neural_ops import DeepONet, FNO1d
from pott.pde_data import DomainSpec, generate_domain

DECODER = Path(__file__).resolve().parents[1] / "tools" / "decode_pott.py"


def decode_with_script(path):
    out = subprocess.run([sys.executable, str(DECODER), str(path)], capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


# ---------------------------------------------------------------- tensor records

def test_two_by_two_layout(tmp_path):
    path = tmp_path / "t.pott"
    write_tensor(path, np.array([[1.0, 2.0], [3.0, 4.0]]))
    raw = path.read_bytes()
    expected = (b"POTT" + struct.pack("<III", 1, 1, 2) + struct.pack("<II", 2, 2)
                + struct.pack("<4d", 1, 2, 3, 4))
    assert raw == expected
    assert len(raw) == 16 + 8 + 32
    got = decode_with_script(path)
    assert got == {"dims": [2, 2], "values": [1.0, 2.0, 3.0, 4.0]}


@pytest.mark.parametrize("shape", [(), (1,), (7,), (3, 5), (2, 3, 4)])
def test_tensor_roundtrip_exact(tmp_path, shape):
    a = np.random.default_rng(len(shape)).normal(size=shape) * 1e3
    path = tmp_path / "a.pott"
    write_tensor(path, a)
    b = read_tensor(path)
    assert b.shape == a.shape
    assert b.tobytes() == a.tobytes()
    assert encode_tensor(b) == path.read_bytes()
    got = decode_with_script(path)
    assert got["dims"] == list(shape)
    assert np.array_equal(np.array(got["values"]).reshape(shape), a)


def test_special_values_survive():
    a = np.array([0.0, -0.0, np.inf, -np.inf, 5e-324, np.finfo(float).max])
    b = decode_tensor(encode_tensor(a))
    assert b.tobytes() == a.tobytes()


def test_format_errors_are_distinguishable():
    good = encode_tensor(np.arange(6.0).reshape(2, 3))
    with pytest.raises(TruncatedPayload, match="truncated payload"):
        decode_tensor(good[:-3])
    with pytest.raises(TruncatedPayload, match="truncated payload"):
        decode_tensor(good[:10])
    with pytest.raises(BadMagic, match="bad magic"):
        decode_tensor(b"PTTO" + good[4:])
    with pytest.raises(VersionMismatch, match="version mismatch"):
        decode_tensor(good[:4] + struct.pack("<I", 9) + good[8:])
    with pytest.raises(FormatError):
        decode_tensor(good + b"\0")


# ---------------------------------------------------------------- checkpoints

def small_models():
    rng = np.random.default_rng(0)
    fno = FNO1d(16, rng, width=4, n_blocks=2, modes=4, head_width=8)
    don = DeepONet((6,), [np.linspace(0, 1, 5), np.linspace(0, 1, 3)], rng,
                   branch_hidden=(8,), trunk_hidden=(8,), latent=4)
    return fno, don


@pytest.mark.parametrize("which", [0, 1])
def test_checkpoint_roundtrip(tmp_path, which):
    model = small_models()[which]
    model.stats.k_mean, model.stats.u_std = 0.25, 3.5
    path = tmp_path / "m.pott"
    save_checkpoint(path, model, extra={"note": "x"})
    back = load_checkpoint(path)
    for (n, p), (m, q) in zip(model.named_parameters(), back.named_parameters()):
        assert n == m
        assert p.data.tobytes() == q.data.tobytes()
    assert back.config() == model.config()
    assert encode_checkpoint(back, extra={"note": "x"}) == path.read_bytes()
    k = np.random.default_rng(1).normal(size=(2, *model.k_shape))
    np.testing.assert_array_equal(back.predict_array(k), model.predict_array(k))
    got = decode_with_script(path)
    assert got["tag"] == model.arch
    assert list(got["params"]) == [n for n, _ in model.named_parameters()]
    for n, p in model.named_parameters():
        assert np.array_equal(np.array(got["params"][n]["values"]).reshape(p.shape), p.data)


def test_checkpoint_truncated(tmp_path):
    path = tmp_path / "m.pott"
    save_checkpoint(path, small_models()[0])
    raw = path.read_bytes()
    for cut in (10, 30, len(raw) - 8):
        path.write_bytes(raw[:cut])
        with pytest.raises(TruncatedPayload):
            load_checkpoint(path)


# ---------------------------------------------------------------- datasets

@pytest.fixture(scope="module")
def adv_domain():
    spec = DomainSpec.preset("advection", "D1", n_train=6, n_val=2, n_test=3)
    return generate_domain(spec)


def test_dataset_roundtrip_byte_exact(tmp_path, adv_domain):
    write_dataset(tmp_path / "a", adv_domain)
    back = read_dataset(tmp_path / "a")
    assert set(back) == {"train", "val", "test"}
    for s, d in adv_domain.items():
        assert back[s].k.tobytes() == d.k.tobytes()
        assert back[s].u.tobytes() == d.u.tobytes()
        np.testing.assert_array_equal(back[s].indices, d.indices)
        assert back[s].spec == d.spec
    write_dataset(tmp_path / "b", back)
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_dataset_split_hygiene_checked_on_load(tmp_path, adv_domain):
    root = tmp_path / "a"
    write_dataset(root, adv_domain)
    manifest = json.loads((root / "manifest.json").read_text())
    ids = [s["id"] for v in manifest["splits"].values() for s in v["samples"]]
    assert len(ids) == len(set(ids)) == 11
    manifest["splits"]["test"]["samples"][0]["id"] = manifest["splits"]["train"]["samples"][0]["id"]
    (root / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(SplitOverlap):
        read_dataset(root)


def test_dataset_missing_and_malformed(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_dataset(tmp_path / "nothing")
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(FormatError):
        read_dataset(tmp_path)


# ---------------------------------------------------------------- config and records

def test_experiment_config_validation():
    cfg = ExperimentConfig()
    assert cfg.seeds == [0, 1, 2] and cfg.n_target == 50
    assert cfg.hash() == ExperimentConfig().hash()
    assert cfg.hash() != ExperimentConfig(method="finetune").hash()
    for bad in (dict(method="dann"), dict(n_target=75), dict(equation="heat"),
                dict(source="D9"), dict(seeds=[]), dict(pott={"lam": -1}),
                dict(pott={"unknown": 1}), dict(train={"lr": 0})):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": 1})
    assert ExperimentConfig(n_target=7, allow_custom_n_target=True).n_target == 7


def test_records_are_appended(tmp_path):
    r = ResultRecord("h", "t", "finetune", 50, 0, 0.5)
    append_record(tmp_path, r)
    append_record(tmp_path, ResultRecord("h", "t", "finetune", 50, 1, 0.7))
    recs = load_records(tmp_path)
    assert [x.seed for x in recs] == [0, 1]
    with pytest.raises(ValueError):
        ResultRecord("h", "t", "finetune", 50, 0, -1.0)


def test_pott_threads(monkeypatch):
    monkeypatch.setenv("POTT_THREADS", "3")
    assert max_workers() == 3
    monkeypatch.setenv("POTT_THREADS", "zero")
    with pytest.raises(ConfigError):
        max_workers()


# ---------------------------------------------------------------- reports

def test_single_record_has_zero_std():
    rows = aggregate([ResultRecord("h", "task", "pott", 50, 0, 0.25)])
    assert rows == [{"task": "task", "method": "pott", "n_target": 50, "mean_rmse": 0.25,
                     "std_rmse": 0.0, "n_seeds": 1}]


def test_csv_over_seeds_and_methods(tmp_path):
    vals = {"pott": [0.1, 0.2, 0.3], "finetune": [0.3, 0.3, 0.6]}
    recs = [ResultRecord("h", "b", m, 100, s, v) for m, vs in vals.items()
            for s, v in enumerate(vs)]
    write_csv(tmp_path / "r.csv", recs)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "task,method,n_target,mean_rmse,std_rmse,n_seeds"
    assert len(lines) == 3
    by = {ln.split(",")[1]: ln.split(",") for ln in lines[1:]}
    for m, vs in vals.items():
        assert float(by[m][3]) == pytest.approx(np.mean(vs), abs=1e-15)
        assert float(by[m][4]) == pytest.approx(np.std(vs), abs=1e-15)
    with pytest.raises(EmptyRunSet):
        aggregate([])


def test_constant_heatmap_is_uniform():
    svg = render_svg({"c": np.full((4, 5), 2.0)})
    fills = re.findall(r'<rect [^>]*fill="(#[0-9a-f]{6})"', svg)
    assert len(fills) == 20 and len(set(fills)) == 1


def test_error_panel_matches_stored_tensors(tmp_path):
    rng = np.random.default_rng(0)
    gt, pred = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    write_tensor(tmp_path / "gt.pott", gt)
    write_tensor(tmp_path / "pred.pott", pred)
    svg = render_svg(prediction_panels(np.zeros((3, 4)), gt, pred))
    panel = svg.split('data-name="abs error"')[1].split("</g>")[0]
    shown = np.array([float(v) for v in re.findall(r'data-v="([^"]+)"', panel)]).reshape(3, 4)
    again = np.abs(read_tensor(tmp_path / "pred.pott") - read_tensor(tmp_path / "gt.pott"))
    np.testing.assert_array_equal(shown, again)


def test_curve_panels_for_1d():
    svg = render_svg(prediction_panels(np.sin(np.arange(8.0)), np.ones(8), np.zeros(8)))
    assert svg.count("<path") == 4


# ---------------------------------------------------------------- command line

@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    for sub, n in (("D1", 24), ("D2", 8)):
        (root / f"{sub}.json").write_text(json.dumps({
            "equation": "burgers", "subdomain": sub, "grid": [32], "n_train": n, "n_val": 4,
            "n_test": 6}))
        assert main(["gen", "--spec", str(root / f"{sub}.json"), "--out", str(root / sub)]) == 0
    assert main(["pretrain", "--data", str(root / "D1"), "--out", str(root / "src.pott"),
                 "--epochs", "3", "--batch-size", "8"]) == 0
    cfg = {"equation": "burgers", "source": "D1", "target": "D2", "n_target": 8,
           "allow_custom_n_target": True, "seeds": [0, 1], "train": {"epochs": 2, "batch_size": 4},
           "pott": {"n_outer": 3, "n_inner": 2, "transfer_epochs": 2, "batch_src": 4,
                    "batch_tgt": 4, "t_hidden": [16], "f_hidden": [16]}}
    (root / "exp.json").write_text(json.dumps(cfg))
    for method in ("finetune", "pott", "srctgt"):
        assert main(["transfer", "--method", method, "--src", str(root / "D1"), "--tgt",
                     str(root / "D2"), "--ckpt", str(root / "src.pott"), "--config",
                     str(root / "exp.json"), "--out", str(root / "runs" / method)]) == 0
    return root


def test_gen_writes_all_splits(cli_run):
    data = read_dataset(cli_run / "D1")
    assert {s: len(d) for s, d in data.items()} == {"train": 24, "val": 4, "test": 6}
    assert (cli_run / "D1" / "provenance.json").is_file()


def test_preset_split_sizes():
    spec = DomainSpec.preset("burgers", "D1")
    assert (spec.n_train, spec.n_val, spec.n_test) == (1000, 10, 100)


def test_transfer_then_eval_gives_record_value(cli_run, capsys):
    rec = [r for r in load_records(cli_run / "runs" / "finetune") if r.seed == 0][0]
    capsys.readouterr()
    assert main(["eval", "--ckpt", str(cli_run / "runs" / "finetune" / "model_seed0.pott"),
                 "--data", str(cli_run / "D2")]) == 0
    out = capsys.readouterr().out.strip()
    assert float(out) == rec.test_rmse


def test_transfer_artifacts(cli_run):
    pott = cli_run / "runs" / "pott"
    stamp = json.loads((pott / "provenance.json").read_text())
    assert stamp["config"]["experiment"]["method"] == "pott"
    assert "commit" in stamp["code"]
    pf = read_dataset(pott / "pushforward_seed0")["train"]
    assert len(pf) == 24 and pf.k.shape[1:] == (32,)
    recs = load_records(cli_run / "runs")
    assert sorted({r.method for r in recs}) == ["finetune", "pott", "srctgt"]
    assert all(len(r.dual_trace) == 3 for r in recs if r.method == "pott")


def test_transfer_is_deterministic(cli_run):
    out = cli_run / "again"
    assert main(["transfer", "--method", "pott", "--src", str(cli_run / "D1"), "--tgt",
                 str(cli_run / "D2"), "--ckpt", str(cli_run / "src.pott"), "--config",
                 str(cli_run / "exp.json"), "--out", str(out)]) == 0
    first = {r.seed: r.test_rmse for r in load_records(cli_run / "runs" / "pott")}
    second = {r.seed: r.test_rmse for r in load_records(out)}
    for s in first:
        assert abs(first[s] - second[s]) <= 1e-12


def test_report_csv_and_svg(cli_run):
    assert main(["report", "--runs", str(cli_run / "runs"), "--out", str(cli_run / "r.csv")]) == 0
    lines = (cli_run / "r.csv").read_text().splitlines()
    assert len(lines) == 4
    assert main(["report", "--runs", str(cli_run / "runs" / "pott"), "--out",
                 str(cli_run / "r.svg"), "--sample", "2"]) == 0
    assert (cli_run / "r.svg").read_text().count("<path") == 4


def test_cli_errors(cli_run, tmp_path, capsys):
    assert main(["gen", "--bogus"]) != 0
    assert main(["frobnicate"]) != 0
    assert main(["eval", "--ckpt", str(tmp_path / "none.pott"), "--data", str(cli_run / "D2")]) == 1
    (tmp_path / "bad.json").write_text("{oops")
    assert main(["transfer", "--method", "finetune", "--src", str(cli_run / "D1"), "--tgt",
                 str(cli_run / "D2"), "--ckpt", str(cli_run / "src.pott"), "--config",
                 str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 1
    (tmp_path / "trunc.pott").write_bytes((cli_run / "src.pott").read_bytes()[:100])
    assert main(["eval", "--ckpt", str(tmp_path / "trunc.pott"), "--data",
                 str(cli_run / "D2")]) == 1
    assert "truncated payload" in capsys.readouterr().err
    assert main(["report", "--runs", str(tmp_path), "--out", str(tmp_path / "x.csv")]) == 1
