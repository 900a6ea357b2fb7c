import math
import struct

import numpy as np
import pytest

from structure2vec.checkpoint import (
    MAGIC,
    CheckpointError,
    ModelCheckpoint,
    from_bytes,
    load_checkpoint,
    save_checkpoint,
    to_bytes,
)
from structure2vec.config import ConfigError, TrainConfig, build_config, load_config, parse_config_text
from structure2vec.embed import EngineKind
from structure2vec.head import TaskKind
from structure2vec.model import init_params


def test_defaults_valid():
    c = TrainConfig()
    assert c.engine_kind is EngineKind.MEAN_FIELD and c.d == 16 and c.T == 3 and not c.resample


@pytest.mark.parametrize(
    "kw, match",
    [
        ({"engine": "gibbs"}, "valid engines: mean_field, loopy_bp, damped_bp, trbp"),
        ({"d": 0}, "d must"),
        ({"T": 0}, "T must"),
        ({"batch_size": 0}, "batch_size"),
        ({"lr0": -1.0}, "lr0"),
        ({"lr0": math.inf}, "lr0"),
        ({"head_depth": 3}, "head_depth"),
        ({"resample_edges": (1.0,), "resample_weights": (1.0,)}, "one more"),
        ({"resample_edges": (2.0, 1.0), "resample_weights": (1.0, 1.0, 1.0)}, "sorted"),
        ({"select_metric": "f1"}, "select_metric"),
    ],
)
def test_invalid_values(kw, match):
    with pytest.raises(ConfigError, match=match):
        TrainConfig(**kw)


def test_lr_schedule():
    c = TrainConfig(lr0=0.1, lr_decay=0.5, lr_decay_every=10)
    assert [c.lr_at(e) for e in (1, 10, 11, 21)] == [0.1, 0.1, 0.05, 0.025]
    assert TrainConfig(lr0=0.1, lr_schedule="constant").lr_at(500) == 0.1


def test_parse_text_sections_comments_and_types():
    text = """
    # training run
    [model]
    engine = lbp      ; alias
    d = 8
    bias = yes
    [optim]
    lr0 = 0.05
    early_stop_patience = none
    grad_clip = 5
    resample_edges = 1.0, 2.5
    resample_weights = 1 2 4
    """
    c = build_config(parse_config_text(text))
    assert c.engine == "loopy_bp" and c.d == 8 and c.bias is True and c.lr0 == 0.05
    assert c.early_stop_patience is None and c.grad_clip == 5.0
    assert c.resample_edges == (1.0, 2.5) and c.resample_weights == (1.0, 2.0, 4.0)


def test_unknown_key_and_bad_lines():
    with pytest.raises(ConfigError, match=r"<config>:2: unknown key 'learning_rate'"):
        parse_config_text("d = 4\nlearning_rate = 0.1\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config_text("d 4\n")
    with pytest.raises(ConfigError, match="bad value for d"):
        parse_config_text("d = four\n")
    with pytest.raises(ConfigError, match="bad value for bias"):
        parse_config_text("bias = maybe\n")


def test_precedence_and_text_roundtrip(tmp_path):
    path = tmp_path / "c.conf"
    path.write_text("d = 8\nT = 2\n")
    c = load_config(path, {"T": "4"})
    assert (c.d, c.T) == (8, 4)
    again = build_config(parse_config_text(c.to_text()))
    assert again == c
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.conf")
    with pytest.raises(ConfigError):
        build_config({}, {"nope": "1"})


def _ckpt(engine="loopy_bp", d=16, b=16, p=7, task=TaskKind.classification(2), bias=False, depth=2, seed=0):
    cfg = TrainConfig(engine=engine, d=d, b=b, bias=bias, head_depth=depth)
    params = init_params(engine, d, p, 3, task, np.random.default_rng(seed), depth=depth, b=b, bias=bias)
    return ModelCheckpoint(params, cfg, epoch=12, val_metric=0.875)


@pytest.mark.parametrize("engine", list(EngineKind))
@pytest.mark.parametrize("task", [TaskKind.regression(), TaskKind.classification(3)])
def test_checkpoint_roundtrip_bitwise(engine, task, tmp_path):
    ck = _ckpt(engine.value, d=5, b=4, p=3, task=task, bias=True)
    path = tmp_path / "m.s2v"
    save_checkpoint(ck, path)
    back = load_checkpoint(path)
    assert back.config == ck.config and back.epoch == 12 and back.val_metric == 0.875
    assert back.params.task == task and back.params.engine is engine
    for k, v in ck.params.arrays().items():
        assert np.array_equal(back.params.arrays()[k], v)
    assert to_bytes(back) == path.read_bytes()


def test_checkpoint_depth1_and_header():
    ck = _ckpt(depth=1, d=3, p=2)
    data = to_bytes(ck)
    assert data[:4] == MAGIC
    assert struct.unpack_from("<7I", data, 4) == (1, 3, 2, 0, 2, 3, 1)
    assert from_bytes(data).params.head.depth == 1


def test_checkpoint_size_small():
    assert len(to_bytes(_ckpt())) < 50 * 1024


def test_checkpoint_rejects_corruption():
    data = to_bytes(_ckpt(d=3, b=2, p=2))
    with pytest.raises(CheckpointError, match="magic"):
        from_bytes(b"XXXX" + data[4:])
    with pytest.raises(CheckpointError, match="truncated"):
        from_bytes(data[:60])
    with pytest.raises(CheckpointError, match="trailing"):
        from_bytes(data + b"\0")
    bad = bytearray(data)
    struct.pack_into("<I", bad, 4, 9)
    with pytest.raises(CheckpointError, match="engine id"):
        from_bytes(bytes(bad))


def test_save_is_atomic_no_temp_left(tmp_path):
    save_checkpoint(_ckpt(d=2, b=2, p=2), tmp_path / "a.s2v")
    assert [p.name for p in tmp_path.iterdir()] == ["a.s2v"]
