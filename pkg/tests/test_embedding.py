import numpy as np
import pytest

from trafficformer.data import WindowBatch
from trafficformer.embedding import EmbeddingSet
from trafficformer.gradcheck import gradcheck
from trafficformer.tensor import sum_


def make_batch(rng, B=2, T=4, N=3, spd=288):
    tod = rng.integers(0, spd, size=(B, T))
    dow = rng.integers(0, 7, size=(B, T))
    x = rng.normal(size=(B, T, N, 3))
    return WindowBatch(x, np.zeros((B, 2, N)), tod, dow)


def test_shapes(rng):
    emb = EmbeddingSet(3, 8, 3, rng)
    x_emb, e_d, e_w, e_n = emb(make_batch(rng))
    assert x_emb.shape == (2, 4, 3, 8)
    assert e_d.shape == e_w.shape == (2, 4, 8)
    assert e_n.shape == (3, 8)


def test_zero_input_gives_zero(rng):
    emb = EmbeddingSet(3, 8, 3, rng)
    batch = make_batch(rng)
    batch.x[:] = 0.0
    assert np.all(emb(batch)[0].data == 0.0)


def test_equal_tod_gives_equal_rows(rng):
    emb = EmbeddingSet(3, 8, 3, rng)
    batch = make_batch(rng)
    batch.tod_index[0, 1] = batch.tod_index[1, 3] = 17
    e_d = emb(batch)[1].data
    np.testing.assert_array_equal(e_d[0, 1], e_d[1, 3])


def test_lookup_is_row_gather(rng):
    emb = EmbeddingSet(3, 8, 3, rng)
    batch = make_batch(rng)
    r = int(batch.tod_index[0, 0])
    before = emb(batch)[1].data.copy()
    emb.tod_table.data[r] += 1.0
    changed = np.any(emb(batch)[1].data != before, axis=-1)
    np.testing.assert_array_equal(changed, batch.tod_index == r)


def test_out_of_range_index(rng):
    emb = EmbeddingSet(3, 8, 3, rng, steps_per_day=48)
    batch = make_batch(rng, spd=288)
    batch.tod_index[0, 0] = 100
    with pytest.raises(IndexError):
        emb(batch)


def test_projection_gradients(rng):
    emb = EmbeddingSet(3, 8, 3, rng)
    batch = make_batch(rng)
    params = [emb.proj_in.weight, emb.proj_in.bias, emb.proj_out.weight, emb.proj_out.bias]
    report = gradcheck(lambda: sum_(emb(batch)[0] * emb(batch)[0]), params, tol=1e-6)
    assert report.passed, report


def test_table_gradients(rng):
    emb = EmbeddingSet(3, 8, 3, rng, steps_per_day=12)
    batch = make_batch(rng, spd=12)

    def f():
        _, e_d, e_w, e_n = emb(batch)
        return sum_(e_d * e_w) + sum_(e_n * e_n)

    assert gradcheck(f, [emb.tod_table, emb.dow_table, emb.node_table], tol=1e-6).passed
