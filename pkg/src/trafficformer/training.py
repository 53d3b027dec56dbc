"""Training loop with early stopping, and evaluation in raw units."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .errors import DimensionError, DivergenceError, NumericError
from .metrics import compute_metrics
from .model import Forecaster, huber_loss
from .optim import Adam, MultiStepLR
from .tensor import backward

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list
    step_losses: list = field(default_factory=list)
    model: Forecaster = None
    stopped_early: bool = False


def resolve_config(config, splits):
    """Fill ``N`` and ``steps_per_day`` from the data and check the rest agrees."""
    N = splits.train.x.shape[2]
    T = splits.train.x.shape[1]
    H = splits.train.y.shape[1]
    if (config.T, config.H) != (T, H):
        raise DimensionError(f"config T,H={(config.T, config.H)} but windows have {(T, H)}")
    if config.N is not None and config.N != N:
        raise DimensionError(f"config N={config.N} but data has {N} nodes")
    return config.replace(N=N, steps_per_day=splits.steps_per_day)


def predict(model, windows, normalizer, batch_size=64):
    """Denormalized eval-mode predictions ``(W, H, N)`` for every window."""
    out = [model(b, "eval").data for b in windows.batches(batch_size)]
    return normalizer.denormalize(np.concatenate(out, axis=0))


def validation_loss(model, windows, normalizer, delta, batch_size=64):
    total, count = 0.0, 0
    for b in windows.batches(batch_size):
        loss = huber_loss(model(b, "eval"), normalizer.normalize(b.y), delta)
        total += loss.item() * len(b)
        count += len(b)
    return total / count


def evaluate(checkpoint_or_model, windows, normalizer=None, batch_size=64):
    """Metrics of eval-mode predictions against raw-unit targets of ``windows``."""
    if isinstance(checkpoint_or_model, Checkpoint):
        model = checkpoint_or_model.build_model()
        normalizer = normalizer or checkpoint_or_model.normalizer
    else:
        model = checkpoint_or_model
    pred = predict(model, windows, normalizer, batch_size)
    return compute_metrics(pred, windows.y, model.config.mape_threshold)


def train(config, splits, *, max_steps=None, val_loss_hook=None, on_epoch=None):
    """Fit a :class:`Forecaster` and return the best-validation checkpoint.

    ``val_loss_hook(epoch, val_loss)`` may replace the measured validation
    loss (used to exercise early stopping). ``on_epoch(record)`` is called
    after every epoch with the log record. Training stops after
    ``config.max_epochs``, ``config.patience`` epochs without improvement,
    or ``max_steps`` optimizer steps.
    """
    cfg = resolve_config(config, splits)
    seed = cfg.seed
    model = Forecaster(cfg, np.random.default_rng(seed))
    shuffle_rng = np.random.default_rng([seed, 1])
    noise_rng = np.random.default_rng([seed, 2])
    opt = Adam(model.parameters(), lr=cfg.lr)
    sched = MultiStepLR(opt, cfg.lr_milestones, cfg.lr_decay)
    norm = splits.normalizer

    records, step_losses = [], []
    best_loss, best_params, best_epoch = np.inf, None, -1
    wait, steps, stopped_early = 0, 0, False
    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        lr = sched.set_epoch(epoch)
        epoch_losses = []
        for batch in splits.train.batches(cfg.batch_size, shuffle_rng):
            try:
                pred = model(batch, "train", rng=noise_rng)
            except NumericError as exc:
                raise DivergenceError(f"{exc} at epoch {epoch}, step {steps}", epoch, steps) from exc
            loss = huber_loss(pred, norm.normalize(batch.y), cfg.huber_delta)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, step {steps}", epoch, steps)
            opt.zero_grad()
            backward(loss)
            opt.step()
            steps += 1
            epoch_losses.append(value)
            step_losses.append(value)
            if max_steps is not None and steps >= max_steps:
                break

        val_loss = validation_loss(model, splits.val, norm, cfg.huber_delta)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}", epoch, steps)
        val_metrics = evaluate(model, splits.val, norm)
        if val_loss_hook is not None:
            val_loss = val_loss_hook(epoch, val_loss)
        record = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(np.mean(epoch_losses)),
            "val_loss": float(val_loss),
            "val_mae": val_metrics.mae,
            "val_rmse": val_metrics.rmse,
            "val_mape": val_metrics.mape,
            "wall_time": time.perf_counter() - t0,
        }
        records.append(record)
        log.info("epoch %d lr %.2e train %.5f val %.5f", epoch, lr, record["train_loss"], val_loss)
        if on_epoch is not None:
            on_epoch(record)

        if val_loss < best_loss:
            best_loss, best_epoch, wait = val_loss, epoch, 0
            best_params = {n: p.data.copy() for n, p in model.named_parameters().items()}
        else:
            wait += 1
            if wait >= cfg.patience:
                stopped_early = True
                break
        if max_steps is not None and steps >= max_steps:
            break

    for name, p in model.named_parameters().items():
        p.data = best_params[name]
    ckpt = Checkpoint.from_model(model, norm, best_epoch, float(best_loss), splits.node_ids)
    return TrainResult(ckpt, records, step_losses, model, stopped_early)
