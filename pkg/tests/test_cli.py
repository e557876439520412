import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from landvec.cli import main
from landvec.persistence import read_dataset, read_model
from landvec.randfunc import evaluate, read_suite
from landvec.sampling import rescale, sobol_points


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def strip_logs(text):
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small generated dataset and a trained model shared by the CLI tests."""
    d = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--count", "300", "--dim", "2", "--seed", "1", "--m", "5", "--out", str(d / "s")]) == 0
    assert main(["train", "--data", str(d / "s.d2vd"), "--latent", "4", "--epochs", "3",
                 "--out", str(d / "m.d2v")]) == 0
    return d


def test_generate_contract(workdir, capsys, tmp_path):
    ds = read_dataset(workdir / "s.d2vd")
    assert len(ds) == 300 and ds.n == 32 and ds.d == 2
    exprs, meta = read_suite(workdir / "s.suite.txt")
    assert len(exprs) == 300 and int(meta["d"]) == 2
    code, out, _ = run(capsys, "generate", "--count", 300, "--dim", 2, "--seed", 1, "--m", 5, "--out", tmp_path / "s")
    assert code == 0 and out.startswith("rejected,")
    for suffix in (".d2vd", ".suite.txt"):
        assert (tmp_path / f"s{suffix}").read_bytes() == (workdir / f"s{suffix}").read_bytes()


def test_train_output_and_determinism(workdir, capsys, tmp_path):
    outs = []
    for name in ("a.d2v", "b.d2v"):
        code, out, _ = run(capsys, "train", "--data", workdir / "s.d2vd", "--latent", 4, "--kl-weight", 0.001,
                           "--epochs", 3, "--out", tmp_path / name)
        assert code == 0
        outs.append(strip_logs(out))
    assert outs[0] == outs[1]
    assert (tmp_path / "a.d2v").read_bytes() == (tmp_path / "b.d2v").read_bytes()
    rows = list(csv.reader(io.StringIO(outs[0])))
    assert rows[0][:2] == ["epoch", "train_loss"] and len(rows) == 4
    model = read_model(tmp_path / "a.d2v")
    assert model.ls == 4 and model.beta == 0.001 and model.kind == "vae"


def test_train_ae(workdir, capsys, tmp_path):
    code, _, _ = run(capsys, "train", "--data", workdir / "s.d2vd", "--kind", "ae", "--latent", 4, "--epochs", 1,
                     "--out", tmp_path / "ae.d2v")
    assert code == 0
    model = read_model(tmp_path / "ae.d2v")
    assert model.kind == "ae" and model.logvar_head is None


def test_exit_codes(workdir, capsys, tmp_path):
    data = workdir / "s.d2vd"
    assert run(capsys, "train", "--data", data, "--latent", 9, "--out", tmp_path / "x")[0] == 2
    assert run(capsys, "train", "--latent", 4)[0] == 2
    assert run(capsys)[0] == 2
    assert run(capsys, "bogus")[0] == 2
    bad = tmp_path / "bad.d2vd"
    bad.write_bytes(b"XXXX" + data.read_bytes()[4:])
    assert run(capsys, "train", "--data", bad, "--latent", 4, "--out", tmp_path / "x")[0] == 3
    assert run(capsys, "train", "--data", tmp_path / "missing", "--latent", 4, "--out", tmp_path / "x")[0] == 3
    assert run(capsys, "classify", "--dim", 2, "--task", "funnel", "--featureset", "vae")[0] == 2
    code, _, err = run(capsys, "--threads", 0, "generate", "--count", 1, "--dim", 2, "--out", tmp_path / "g")
    assert code == 2 and "threads" in err


def test_config_file_and_override(workdir, capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# shared settings\ndim = 2\ncount = 20\nm = 4\nseed = 3\n")
    code, _, _ = run(capsys, "--config", cfg, "generate", "--out", tmp_path / "c")
    assert code == 0 and len(read_dataset(tmp_path / "c.d2vd")) == 20
    code, _, _ = run(capsys, "--config", cfg, "generate", "--count", 7, "--out", tmp_path / "c")
    assert code == 0 and len(read_dataset(tmp_path / "c.d2vd")) == 7
    cfg.write_text("colour = blue\n")
    assert run(capsys, "--config", cfg, "generate", "--out", tmp_path / "c")[0] == 2
    cfg.write_text("count = many\n")
    assert run(capsys, "--config", cfg, "generate", "--out", tmp_path / "c")[0] == 2


def test_encode_reconstruct_traverse(workdir, capsys):
    model = workdir / "m.d2v"
    code, out, _ = run(capsys, "encode", "--model", model, "--data", workdir / "s.d2vd")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["index", "z_0", "z_1", "z_2", "z_3"] and len(rows) == 301
    code, out, _ = run(capsys, "reconstruct", "--model", model, "--data", workdir / "s.d2vd")
    assert code == 0 and len(out.splitlines()) == 301
    code, out, _ = run(capsys, "traverse", "--model", model, "--data", workdir / "s.d2vd", "--record", 5)
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert code == 0 and len(rows) == 4 * 9
    assert [r[0] for r in rows].count("2") == 9


def test_archive_and_nearest(workdir, capsys, tmp_path):
    model = workdir / "m.d2v"
    assert run(capsys, "archive", "--model", model, "--suite", workdir / "s.suite.txt",
               "--out", tmp_path / "a.txt")[0] == 0
    exprs, _ = read_suite(workdir / "s.suite.txt")
    raw = evaluate(exprs[11], rescale(sobol_points(5, 2), -5, 5))
    query = tmp_path / "q.txt"
    query.write_text("\n".join(repr(float(v)) for v in raw) + "\n")
    code, out, _ = run(capsys, "nearest", "--model", model, "--archive", tmp_path / "a.txt", "--query", query, "-k", 6)
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert code == 0 and len(rows) == 6
    assert rows[0][0] == "1" and float(rows[0][1]) == 0.0
    dists = [float(r[1]) for r in rows]
    assert dists == sorted(dists)
    assert run(capsys, "nearest", "--model", model, "--archive", tmp_path / "a.txt", "--query", query,
               "-k", 10_000)[0] == 2
    # archive built with a different model
    other = tmp_path / "other.d2v"
    assert run(capsys, "train", "--data", workdir / "s.d2vd", "--latent", 4, "--epochs", 1, "--seed", 9,
               "--out", other)[0] == 0
    assert run(capsys, "nearest", "--model", other, "--archive", tmp_path / "a.txt", "--query", query)[0] == 3


def test_classify_ela_rows(capsys):
    argv = ["classify", "--dim", 2, "--task", "funnel", "--featureset", "ela", "--seeds", 3, "--trees", 5, "--m", 5]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["dim", "task", "featureset", "seed", "macro_f1"]
    assert [r[3] for r in rows[1:]] == ["0", "1", "2", "mean"]
    scores = [float(r[4]) for r in rows[1:4]]
    assert abs(float(rows[4][4]) - np.mean(scores)) <= 1e-12
    assert strip_logs(run(capsys, *argv)[1]) == strip_logs(out)


def test_sweep_and_mds(workdir, capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--data", workdir / "s.d2vd", "--latent-sizes", "2,4",
                       "--kl-weights", "0.001 0.01", "--epochs", 1)
    assert code == 0 and len(out.splitlines()) == 5
    feats = tmp_path / "f.csv"
    feats.write_text("id,label,a,b,c\np,x,0,0,0\nq,x,3,0,0\nr,y,0,4,0\n")
    code, out, _ = run(capsys, "mds", "--features", feats)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["id", "label", "mds_x", "mds_y"] and rows[3][:2] == ["r", "y"]
    code, out, _ = run(capsys, "mds", "--dim", 2, "--featureset", "ela", "--m", 5)
    assert code == 0 and len(out.splitlines()) == 2401


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "landvec.cli", "generate", "--count", "3", "--dim", "2",
                           "--m", "4", "--out", str(tmp_path / "p")], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("rejected,")
