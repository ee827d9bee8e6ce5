import pytest

from recurrent_sr.config import KEYS, ConfigError, RTSConfig, dump_config, load_config, parse_config

SAMPLE = """\
# desk-scale run
dataset.train_dir = data/train
dataset.valid_dir = /abs/valid   # absolute stays as is
patch.size = 128
patch.per_image = 8
degrade.quality = 40
net.residual_layers = 1
optim.lr = 0.003
optim.lr_final = 1e-4
optim.epochs = 5
rts.max_stages = 5
rts.stop_rule = delta_rise
rts.warm_start = false
seed = 11
out_dir = out
"""


def test_parse_sample(tmp_path):
    cfg = parse_config(SAMPLE, base_dir=tmp_path)
    assert cfg.train_dir == str(tmp_path / "data/train")
    assert cfg.valid_dir == "/abs/valid"
    assert cfg.out_dir == str(tmp_path / "out")
    assert (cfg.patch_size, cfg.patches_per_image, cfg.degrade.quality) == (128, 8, 40)
    assert cfg.net.n_residual_layers == 1 and cfg.net.body_channels == 64
    assert (cfg.lr, cfg.lr_final, cfg.batch, cfg.epochs, cfg.max_stages) == (0.003, 1e-4, 8, 5, 5)
    assert cfg.stop_rule == "delta_rise" and cfg.warm_start is False and cfg.seed == 11


def test_defaults():
    cfg = parse_config("")
    assert cfg == RTSConfig(train_dir="", out_dir="rts_out")
    assert (cfg.patch_size, cfg.patches_per_image, cfg.lr, cfg.batch, cfg.epochs) == (256, 100, 1e-3, 8, 20)
    assert (cfg.max_stages, cfg.stop_rule, cfg.warm_start) == (8, "delta_min", True)
    assert cfg.lr_final is None


def test_dump_parse_roundtrip(tmp_path):
    cfg = parse_config(SAMPLE, base_dir=tmp_path)
    assert parse_config(dump_config(cfg)) == cfg
    assert set(line.split(" = ")[0] for line in dump_config(cfg).splitlines()) == set(KEYS)


def test_load_config_resolves_relative_to_file(tmp_path):
    (tmp_path / "c.cfg").write_text("dataset.train_dir = imgs\n")
    assert load_config(tmp_path / "c.cfg").train_dir == str(tmp_path / "imgs")


@pytest.mark.parametrize("text, match", [
    ("bogus.key = 1", "unknown key"),
    ("seed = 1\nseed = 2", "duplicate"),
    ("patch.size 128", "key = value"),
    ("patch.size = big", "bad value"),
    ("patch.size = 127", "even"),
    ("rts.stop_rule = vibes", "stop_rule"),
    ("rts.warm_start = maybe", "boolean"),
    ("degrade.quality = 0", "quality"),
    ("rts.max_stages = 0", "max_stages"),
    ("optim.lr = 0.001\noptim.lr_final = 0.01", "lr_final"),
])
def test_rejects_bad_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)
