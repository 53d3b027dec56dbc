"""Module-by-module and end-to-end gradient checks at small canonical shapes."""

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .data import WindowBatch
from .decomposition import gate
from .gradcheck import gradcheck
from .model import Forecaster, huber_loss
from .spatial import connectivity_scores, draw_noise, masked_spatial_attention, sample_mask
from .tensor import Tensor, sum_
from .temporal import fourier_attention, fremlp

CANONICAL = dict(T=8, H=4, N=5, D=8, L=1)
BATCH = 2
# Node flows share a common profile plus a small per-node deviation so the
# mask probabilities sit inside the sigmoid rather than at its plateaus.
NODE_SPREAD = 0.06
# The metric factor is initialised at ~2e-4 per entry, so a 1e-5 step is a
# several-percent change and central differences are truncation-limited
# there; its step is scaled down to match the parameter size.
STEP_SCALE = {"spatial_mask": 1e-2}


@dataclass
class CheckResult:
    module: str
    max_rel_error: float
    passed: bool
    n_checked: int
    worst: tuple = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.module:<18} max_rel_error={self.max_rel_error:.3e}  coords={self.n_checked}"


def canonical_config(config=None):
    """``config`` with its shapes replaced by the canonical small ones.

    Ablation switches, depth and every other setting are kept, so the check
    covers the modules that config actually builds.
    """
    base = config.to_dict() if config is not None else {}
    base.update(CANONICAL)
    if config is not None:
        base["L"] = config.L
    return ModelConfig.from_dict(base)


def random_batch(cfg, rng, B=BATCH):
    T, N = cfg.T, cfg.N
    flow = rng.normal(size=(B, T, 1)) + NODE_SPREAD * rng.normal(size=(B, T, N))
    tod = rng.integers(0, cfg.steps_per_day, size=(B, T))
    dow = rng.integers(0, 7, size=(B, T))
    x = np.stack([flow,
                  np.broadcast_to((tod / cfg.steps_per_day)[..., None], flow.shape),
                  np.broadcast_to((dow / 7.0)[..., None], flow.shape)], axis=-1)
    y = rng.normal(size=(B, cfg.H, N))
    return WindowBatch(x, y, tod, dow)


def _weighted(out, weights):
    return sum_(out * weights)


def build_checks(cfg, seed=0):
    """``{module name: (loss closure, parameters)}`` for every module the config enables."""
    rng = np.random.default_rng(seed)
    model = Forecaster(cfg, np.random.default_rng(cfg.seed))
    batch = random_batch(cfg, rng)
    B, T, N, D = BATCH, cfg.T, cfg.N, cfg.D
    block = model.blocks[0]
    feats = Tensor(rng.normal(size=(B, T, N, D)))
    noise = draw_noise(rng, (B, N, N))
    checks = {}

    emb = model.embedding
    w_emb = rng.normal(size=(B, T, N, D))
    w_tab = rng.normal(size=(B, T, D))
    w_node = rng.normal(size=(N, D))

    def f_embedding():
        x_emb, e_tod, e_dow, e_node = emb(batch)
        loss = _weighted(x_emb, w_emb)
        if e_tod is not None:
            loss = loss + _weighted(e_tod, w_tab) + _weighted(e_dow, w_tab)
        if e_node is not None:
            loss = loss + _weighted(e_node, w_node)
        return loss

    checks["embedding"] = (f_embedding, emb.parameters())

    if block.gate is not None:
        _, e_tod, e_dow, e_node = emb(batch)
        lam_shape = gate(e_tod, e_dow, e_node, block.gate).shape
        w_gate = rng.normal(size=lam_shape)
        checks["decomposition"] = (lambda: _weighted(gate(e_tod, e_dow, e_node, block.gate), w_gate),
                                   block.gate.parameters())
    w_feat = rng.normal(size=(B, T, N, D))
    if block.fourier is not None:
        checks["fourier_attention"] = (lambda: _weighted(fourier_attention(feats, block.fourier), w_feat),
                                       block.fourier.parameters())
    if block.fremlp is not None:
        fparams = [p for layer in block.fremlp for p in layer.parameters()]
        checks["fremlp"] = (lambda: _weighted(fremlp(feats, block.fremlp), w_feat), fparams)
    if model.mask is not None:
        w_mask = rng.normal(size=(B, N, N))

        def f_mask():
            m = sample_mask(connectivity_scores(Tensor(batch.flow), model.mask), model.mask, "train",
                            noise=noise, hard=False)
            return _weighted(m.mask, w_mask)

        checks["spatial_mask"] = (f_mask, model.mask.parameters())
    if block.spatial is not None:
        mask = (rng.uniform(size=(B, N, N)) > 0.4).astype(np.float64)
        mask[:, np.arange(N), np.arange(N)] = 1.0
        checks["spatial_attention"] = (lambda: _weighted(masked_spatial_attention(feats, mask, block.spatial),
                                                         w_feat), block.spatial.parameters())
    flat = Tensor(rng.normal(size=(B, N, T * D)))
    target_head = rng.normal(size=(B, N, cfg.H))
    checks["head"] = (lambda: huber_loss(model.head(flat), target_head, cfg.huber_delta),
                      model.head.parameters())
    target = rng.normal(size=(B, cfg.H, N))
    checks["end_to_end"] = (lambda: huber_loss(model(batch, "train", noise=noise, hard=False), target,
                                               cfg.huber_delta), model.parameters())
    return checks


def run_gradchecks(config=None, eps=1e-5, tol=1e-4, seed=0):
    """Run every check and return a list of :class:`CheckResult` in module order."""
    cfg = canonical_config(config)
    results = []
    for name, (f, params) in build_checks(cfg, seed).items():
        report = gradcheck(f, params, eps=eps * STEP_SCALE.get(name, 1.0), tol=tol, seed=seed)
        results.append(CheckResult(name, report.max_rel_error, report.passed, report.n_checked, report.worst))
    return results
