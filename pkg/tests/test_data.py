import datetime as dt

import numpy as np
import pytest

from trafficformer.data import (
    Normalizer, SyntheticSpec, TrafficSeries, calendar_indices, generate_synthetic, load_csv,
    load_series, make_windows, prepare_splits, save_series, split_6_2_2,
)
from trafficformer.errors import InsufficientDataError, ParseError, SpecError


class TestLoadCsv:
    def test_plain(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3,4\n")
        s = load_csv(p)
        np.testing.assert_array_equal(s.values, [[1, 2], [3, 4]])
        assert s.node_ids == ["0", "1"]

    def test_header(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b\n1,2\n3,4\n")
        assert load_csv(p).node_ids == ["a", "b"]

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3,4,5\n")
        with pytest.raises(ParseError, match="row 1"):
            load_csv(p)

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b\n1,2\n3,x\n")
        with pytest.raises(ParseError, match="row 2, column 1"):
            load_csv(p)

    def test_empty(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("")
        with pytest.raises(ParseError, match="empty"):
            load_csv(p)

    def test_nan_rejected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\nnan,4\n")
        with pytest.raises(ParseError, match="NaN"):
            load_csv(p)

    def test_sidecar_roundtrip(self, tmp_path):
        s = TrafficSeries(np.arange(6.0).reshape(3, 2) + 0.1, start_timestamp=86400 * 4, interval_seconds=600,
                          node_ids=["x", "y"])
        save_series(s, tmp_path / "d.csv")
        back = load_series(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.values, s.values)
        assert (back.interval_seconds, back.start_timestamp, back.node_ids) == (600, 86400 * 4, ["x", "y"])


class TestCalendar:
    def test_second_slot(self):
        tod, _ = calendar_indices(300, 300, 1)
        assert tod[0] == 1

    def test_weekday_matches_datetime(self):
        start = 1_535_760_000  # 2018-09-01 00:00 UTC
        tod, dow = calendar_indices(start, 300, 288 * 9)
        for s in range(0, 288 * 9, 97):
            stamp = dt.datetime.fromtimestamp(start + 300 * s, tz=dt.timezone.utc)
            assert dow[s] == stamp.weekday()
            assert tod[s] == (stamp.hour * 3600 + stamp.minute * 60) // 300


class TestWindows:
    def series(self, steps=25, n=3):
        return TrafficSeries(np.arange(steps * n, dtype=float).reshape(steps, n))

    def test_count(self):
        w = make_windows(self.series(), 12, 12, Normalizer(0.0, 1.0))
        assert len(w) == 2

    def test_target_starts_after_input(self):
        s = self.series()
        w = make_windows(s, 12, 12, Normalizer(0.0, 1.0))
        np.testing.assert_array_equal(w.y[0, 0], s.values[12])
        np.testing.assert_array_equal(w.x[0, -1, :, 0], s.values[11])

    def test_channels(self):
        s = TrafficSeries(np.ones((30, 2)) * 5, start_timestamp=300)
        w = make_windows(s, 4, 2, Normalizer(1.0, 2.0))
        assert w.x.shape == (25, 4, 2, 3)
        np.testing.assert_allclose(w.x[..., 0], 2.0)
        assert w.x[0, 0, 0, 1] == pytest.approx(1 / 288)
        assert np.all((w.x[..., 1:] >= 0) & (w.x[..., 1:] < 1))
        assert w.x[0, 0, 0, 2] == pytest.approx(3 / 7)

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            make_windows(self.series(steps=20), 12, 12, Normalizer(0.0, 1.0))

    def test_targets_reassemble_series(self):
        s = self.series(steps=40)
        w = make_windows(s, 5, 3, Normalizer(0.0, 1.0))
        np.testing.assert_array_equal(w.y[:, 0], s.values[5:5 + len(w)])
        np.testing.assert_array_equal(w.y[-1], s.values[-3:])


class TestSplit:
    def windows(self, count):
        s = TrafficSeries(np.random.default_rng(0).normal(size=(count + 3, 2)))
        return make_windows(s, 2, 2, Normalizer(0.0, 1.0))

    @pytest.mark.parametrize("count,sizes", [(10, (6, 2, 2)), (11, (6, 2, 3))])
    def test_sizes(self, count, sizes):
        tr, va, te = split_6_2_2(self.windows(count))
        assert (len(tr), len(va), len(te)) == sizes

    def test_chronological(self):
        tr, va, te = split_6_2_2(self.windows(37))
        assert tr.start.max() < va.start.min() and va.start.max() < te.start.min()

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            split_6_2_2(self.windows(4))

    def test_normalizer_fitted_on_train_steps_only(self):
        values = np.concatenate([np.ones((40, 2)), 1000 * np.ones((60, 2))])
        values[:40:2] = 3.0
        sp = prepare_splits(TrafficSeries(values), 5, 5)
        n_train = len(sp.train)
        np.testing.assert_allclose(sp.normalizer.mean, values[: n_train - 1 + 10].mean())

    def test_normalizer_roundtrip(self, rng):
        n = Normalizer(3.5, 2.25)
        v = rng.normal(size=100) * 50
        assert np.abs(n.denormalize(n.normalize(v)) - v).max() < 1e-9

    def test_zero_std(self):
        with pytest.raises(InsufficientDataError):
            Normalizer.fit(np.ones(10))


class TestSynthetic:
    def test_degenerate_identical_nodes(self):
        s = generate_synthetic(SyntheticSpec(N=4, steps=100))
        assert np.all(s.values == s.values[:, :1])

    def test_deterministic(self):
        spec = SyntheticSpec(N=4, steps=300, noise_std=2.0, event_rate=5.0, event_magnitude=20.0,
                             cluster_assignment=[0, 1, 0, 1], seed=9)
        assert generate_synthetic(spec).values.tobytes() == generate_synthetic(spec).values.tobytes()

    def test_cluster_correlations(self):
        amp = 50.0
        spec = SyntheticSpec(N=8, steps=288 * 3, daily_amplitude=amp, noise_std=0.1 * amp,
                             cluster_assignment=[0] * 4 + [1] * 4, seed=2)
        c = np.corrcoef(generate_synthetic(spec).values.T)
        same = np.equal.outer(spec.cluster_assignment, spec.cluster_assignment) & ~np.eye(8, dtype=bool)
        cross = ~np.equal.outer(spec.cluster_assignment, spec.cluster_assignment)
        assert c[same].mean() > c[cross].mean()

    def test_noiseless_components(self):
        spec = SyntheticSpec(N=6, steps=600, noise_std=3.0, cluster_assignment=[0, 0, 1, 1, 2, 2])
        _, parts = generate_synthetic(spec, return_components=True)
        c = np.corrcoef(parts["periodic"].T)
        assert c[0, 1] >= 0.99 and c[2, 3] >= 0.99
        phases = spec.cluster_phases()
        gaps = np.abs(np.subtract.outer(phases, phases))
        gaps = np.minimum(gaps, 2 * np.pi - gaps)[~np.eye(3, dtype=bool)]
        assert gaps.min() >= np.pi / 4 - 1e-12

    def test_events_are_six_step_pulses(self):
        spec = SyntheticSpec(N=2, steps=2000, event_rate=3.0, event_magnitude=10.0, seed=1)
        _, parts = generate_synthetic(spec, return_components=True)
        assert parts["events"].max() > 0
        assert parts["events"].min() == 0

    @pytest.mark.parametrize("changes", [{"N": 1, "cluster_assignment": [0]}, {"daily_amplitude": 0.0},
                                         {"weekly_amplitude": -1.0}, {"cluster_assignment": [0, 1]}])
    def test_invalid(self, changes):
        d = SyntheticSpec(N=3).to_dict()
        d.update(changes)
        with pytest.raises(SpecError):
            generate_synthetic(SyntheticSpec.from_dict(d))
