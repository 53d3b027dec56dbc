import numpy as np
import pytest

from trafficformer.config import ModelConfig
from trafficformer.errors import ConfigError, DimensionError
from trafficformer.gradcheck import gradcheck
from trafficformer.model import Forecaster, huber_loss
from trafficformer.spatial import draw_noise
from trafficformer.tensor import Tensor, backward

BASE = dict(T=8, H=4, N=5, D=8)


def build(**kw):
    return Forecaster(ModelConfig(**{**BASE, **kw}))


@pytest.mark.parametrize("flags", [{}, {"no_DA": True}, {"no_DM": True}, {"no_NE": True}, {"no_TE": True},
                                   {"no_NE": True, "no_TE": True}, {"no_SA": True}, {"no_mask": True},
                                   {"L": 2}, {"residual": True, "L": 3}, {"fremlp_depth": 2}])
def test_output_shape(flags, small_splits):
    model = build(**flags)
    batch = small_splits.train.batch(np.arange(3))
    assert model(batch).shape == (3, 4, 5)
    assert model(batch, "train", rng=np.random.default_rng(0)).shape == (3, 4, 5)


def test_eval_is_deterministic(small_batch):
    model = build()
    np.testing.assert_array_equal(model(small_batch).data, model(small_batch).data)


def test_reduced_graph_parameter_count():
    C, D, T, H = 3, 8, 8, 4
    model = build(no_SA=True, no_DA=True)
    expected = (C * D + D + D * D + D) + 3 * D * D + (T * D * H + H)
    assert model.num_parameters() == expected
    assert set(model.named_parameters()) == {
        "embedding.proj_in.weight", "embedding.proj_in.bias", "embedding.proj_out.weight",
        "embedding.proj_out.bias", "blocks.0.fourier.w_q", "blocks.0.fourier.w_k", "blocks.0.fourier.w_v",
        "head.weight", "head.bias",
    }


def test_ablation_parameter_ordering():
    full, no_mask, no_sa = build().num_parameters(), build(no_mask=True).num_parameters(), build(no_SA=True).num_parameters()
    assert full > no_mask > no_sa
    assert full - no_mask == (2 * 8) ** 2


def test_gate_width_follows_ablations():
    assert build().blocks[0].gate.w_g.shape == (24, 8)
    assert build(no_NE=True).blocks[0].gate.w_g.shape == (16, 8)
    assert build(no_TE=True).blocks[0].gate.w_g.shape == (8, 8)


def test_blocks_have_independent_parameters():
    model = build(L=2)
    a, b = model.blocks
    assert a.fourier.w_q is not b.fourier.w_q
    assert not np.array_equal(a.fourier.w_q.data, b.fourier.w_q.data)


def test_exclusive_temporal_ablations():
    with pytest.raises(ConfigError):
        build(no_DA=True, no_DM=True)


def test_heads_divide():
    with pytest.raises(ConfigError):
        build(D=10)


def test_batch_mismatch(small_batch):
    with pytest.raises(DimensionError):
        build(N=6)(small_batch)


def test_mask_is_returned(small_batch):
    y, mask = build()(small_batch, return_mask=True)
    assert mask.binary.shape == (2, 5, 5)
    assert build(no_mask=True).compute_mask(small_batch) is None


def test_gate_ignores_flow(small_batch):
    model = build()
    emb = model.embedding(small_batch)
    lam = model.blocks[0].gate
    from trafficformer.decomposition import gate

    before = gate(*emb[1:], lam).data
    bumped = type(small_batch)(small_batch.x.copy(), small_batch.y, small_batch.tod_index, small_batch.dow_index)
    bumped.x[..., 0] += 3.0
    np.testing.assert_array_equal(gate(*model.embedding(bumped)[1:], lam).data, before)


def test_end_to_end_gradcheck(small_splits, small_batch):
    model = build()
    noise = draw_noise(np.random.default_rng(7), (2, 5, 5))
    target = small_splits.normalizer.normalize(small_batch.y)
    report = gradcheck(lambda: huber_loss(model(small_batch, "train", noise=noise, hard=False), target),
                       model.parameters(), eps=1e-5)
    assert report.max_rel_error < 1e-4, report


class TestHuber:
    def test_zero(self):
        assert huber_loss(Tensor(np.ones((2, 3))), np.ones((2, 3))).item() == 0.0

    def test_closed_form(self):
        assert huber_loss(Tensor([[0.5]]), np.zeros((1, 1)), 1.0).item() == 0.125
        assert huber_loss(Tensor([[2.0]]), np.zeros((1, 1)), 1.0).item() == 1.5

    def test_mean_over_entries(self):
        assert huber_loss(Tensor([[0.5, 2.0]]), np.zeros((1, 2))).item() == pytest.approx((0.125 + 1.5) / 2)

    @pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
    def test_slope_continuous_at_delta(self, delta):
        for x0 in (delta, delta - 1e-9, delta + 1e-9):
            x = Tensor([[x0]], requires_grad=True)
            backward(huber_loss(x, np.zeros((1, 1)), delta))
            assert x.grad[0, 0] == pytest.approx(delta, rel=1e-8)

    def test_bad_delta(self):
        with pytest.raises(ConfigError):
            huber_loss(Tensor([[1.0]]), np.zeros((1, 1)), 0.0)
