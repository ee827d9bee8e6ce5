import numpy as np
import pytest

from recurrent_sr.cli import main
from recurrent_sr.data import read_ppm, write_ppm
from recurrent_sr.net import SRNetConfig, init_params, save_checkpoint


@pytest.fixture
def ppm(tmp_path, rng):
    path = tmp_path / "a.ppm"
    write_ppm(rng.integers(0, 256, size=(12, 10, 3), dtype=np.uint8), path)
    return path


def test_metrics_identical(ppm, capsys):
    assert main(["metrics", str(ppm), str(ppm)]) == 0
    out = dict(line.split(" ", 1) for line in capsys.readouterr().out.splitlines())
    assert float(out["diff_ratio_pct"]) == 0.0
    assert float(out["mse"]) == 0.0
    assert out["psnr"] == "identical"


def test_fixedpoint_series(capsys):
    assert main(["fixedpoint", "0.5", "3"]) == 0
    rows = [line.split(",") for line in capsys.readouterr().out.splitlines()]
    assert rows[0] == ["stage", "increment", "cumulative"]
    assert [float(r[1]) for r in rows[1:4]] == [0.5, 0.25, 0.125]
    assert float(rows[3][2]) == 0.875
    assert rows[4][0] == "limit" and float(rows[4][2]) == 1.0


def test_enhance_roundtrip(tmp_path, ppm, capsys):
    ckpt = tmp_path / "s.ckpt"
    save_checkpoint(init_params(SRNetConfig(1)), ckpt, stage=2)
    out = tmp_path / "o.ppm"
    assert main(["enhance", str(ckpt), str(ppm), str(out), "--tap", "blue"]) == 0
    # a fresh network leaves the blue layer equal to its input
    np.testing.assert_array_equal(read_ppm(out), read_ppm(ppm))
    assert "stage 2" in capsys.readouterr().out


def test_run_from_config(tmp_path, rng, capsys):
    train = tmp_path / "train"
    train.mkdir()
    for i in range(3):
        write_ppm(rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8), train / f"{i}.ppm")
    (tmp_path / "c.cfg").write_text(
        "dataset.train_dir = train\npatch.size = 16\npatch.per_image = 2\nnet.residual_layers = 1\n"
        "optim.epochs = 1\nrts.max_stages = 3\nout_dir = out\n")
    assert main(["run", str(tmp_path / "c.cfg"), "--no-timing"]) == 0
    out = tmp_path / "out"
    assert (out / "stages.csv").read_text().startswith("stage,loss,diff_ratio_pct,delta_pct,alpha_hat,seconds\n")
    assert (out / "theory.csv").exists() and (out / "stage_3.ckpt").exists()
    assert not list(out.glob("*.tmp"))


@pytest.mark.parametrize("argv", [[], ["nonsense"], ["metrics", "only_one"], ["fixedpoint", "x", "3"]])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_data_errors_exit_2(tmp_path, ppm, capsys):
    assert main(["metrics", str(ppm), str(tmp_path / "missing.ppm")]) == 2
    (tmp_path / "bad.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    assert main(["metrics", str(ppm), str(tmp_path / "bad.ppm")]) == 2
    (tmp_path / "bad.ckpt").write_bytes(b"nope")
    assert main(["enhance", str(tmp_path / "bad.ckpt"), str(ppm), str(tmp_path / "o.ppm")]) == 2
    assert main(["fixedpoint", "1.0", "3"]) == 2
    err = capsys.readouterr().err
    assert all(line.startswith("rts:") for line in err.splitlines())


def test_config_error_exit_1(tmp_path, capsys):
    (tmp_path / "c.cfg").write_text("what = 1\n")
    assert main(["run", str(tmp_path / "c.cfg")]) == 1


def test_numeric_failure_exit_3(tmp_path, ppm, capsys):
    params = init_params(SRNetConfig(1))
    params["input.weight"].data[0, 0, 0, 0] = np.nan
    save_checkpoint(params, tmp_path / "nan.ckpt")
    assert main(["enhance", str(tmp_path / "nan.ckpt"), str(ppm), str(tmp_path / "o.ppm")]) == 3
