import numpy as np
import pytest

from trafficformer.checkpoint import Checkpoint
from trafficformer.config import ModelConfig
from trafficformer.data import DatasetSplits
from trafficformer.errors import CheckpointError, DimensionError, DivergenceError
from trafficformer.optim import Adam, MultiStepLR
from trafficformer.tensor import Tensor, backward
from trafficformer.training import evaluate, predict, train

TINY = dict(T=8, H=4, D=8, batch_size=8)


def test_early_stop_after_exactly_patience(small_splits):
    cfg = ModelConfig(**TINY, max_epochs=50, patience=3)
    result = train(cfg, small_splits, val_loss_hook=lambda epoch, loss: 1.0)
    assert result.stopped_early
    assert len(result.log) == 4
    assert result.checkpoint.epoch == 0


def test_same_seed_same_curve(small_splits):
    cfg = ModelConfig(**TINY, max_epochs=2, seed=5)
    a, b = train(cfg, small_splits), train(cfg, small_splits)
    assert a.step_losses == b.step_losses
    assert [r["val_loss"] for r in a.log] == [r["val_loss"] for r in b.log]
    c = train(cfg.replace(seed=6), small_splits)
    assert c.step_losses != a.step_losses


def test_best_checkpoint_restored(small_splits):
    cfg = ModelConfig(**TINY, max_epochs=4)
    vals = iter([3.0, 1.0, 2.0, 2.5])
    result = train(cfg, small_splits, val_loss_hook=lambda epoch, loss: next(vals))
    assert result.checkpoint.epoch == 1 and result.checkpoint.best_val_loss == 1.0


def test_log_records(small_splits):
    cfg = ModelConfig(**TINY, max_epochs=2, lr_milestones=[1])
    log = train(cfg, small_splits).log
    assert [r["epoch"] for r in log] == [0, 1]
    assert log[0]["lr"] == 1e-3 and log[1]["lr"] == pytest.approx(1e-4)
    assert set(log[0]) == {"epoch", "lr", "train_loss", "val_loss", "val_mae", "val_rmse", "val_mape", "wall_time"}


def test_max_steps(small_splits):
    result = train(ModelConfig(**TINY, max_epochs=10), small_splits, max_steps=3)
    assert len(result.step_losses) == 3


def test_divergence(small_splits):
    bad = small_splits.train.subset(slice(None))
    bad.x = bad.x.copy()
    bad.x[0, 0, 0, 0] = np.nan
    splits = DatasetSplits(bad, small_splits.val, small_splits.test, small_splits.normalizer,
                           small_splits.steps_per_day, small_splits.node_ids)
    with pytest.raises(DivergenceError) as err:
        train(ModelConfig(**{**TINY, "batch_size": 1000}, max_epochs=1), splits)
    assert err.value.epoch == 0 and err.value.step == 0


def test_config_must_match_windows(small_splits):
    with pytest.raises(DimensionError):
        train(ModelConfig(T=12, H=4, D=8), small_splits)


def test_checkpoint_roundtrip_is_bit_exact(small_splits, tmp_path):
    result = train(ModelConfig(**TINY, max_epochs=1), small_splits)
    path = tmp_path / "m.ckpt"
    result.checkpoint.save(path)
    loaded = Checkpoint.load(path)
    a = predict(result.checkpoint.build_model(), small_splits.test, small_splits.normalizer)
    b = predict(loaded.build_model(), small_splits.test, loaded.normalizer)
    assert a.tobytes() == b.tobytes()
    assert evaluate(result.checkpoint, small_splits.test) == evaluate(loaded, small_splits.test)
    assert loaded.config == result.checkpoint.config


def test_corrupt_checkpoint(tmp_path, small_splits):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\0" * 32)
    with pytest.raises(CheckpointError, match="magic"):
        Checkpoint.load(path)
    result = train(ModelConfig(**TINY, max_epochs=1), small_splits)
    result.checkpoint.save(path)
    raw = path.read_bytes()
    path.write_bytes(raw[:60])
    with pytest.raises(CheckpointError):
        Checkpoint.load(path)


class TestOptim:
    def test_adam_minimizes_quadratic(self):
        x = Tensor(np.array([3.0, -2.0]), requires_grad=True)
        opt = Adam([x], lr=0.1)
        for _ in range(300):
            opt.zero_grad()
            backward((x * x).sum())
            opt.step()
        assert np.abs(x.data).max() < 1e-2

    def test_first_adam_step_has_size_lr(self):
        x = Tensor(np.array([5.0]), requires_grad=True)
        opt = Adam([x], lr=0.01)
        backward((x * x).sum())
        opt.step()
        assert x.data[0] == pytest.approx(5.0 - 0.01, abs=1e-9)

    def test_multistep(self):
        opt = Adam([], lr=1.0)
        sched = MultiStepLR(opt, [40, 70], 0.1)
        assert [sched.lr_at(e) for e in (0, 39, 40, 69, 70, 99)] == pytest.approx([1, 1, 0.1, 0.1, 0.01, 0.01])
