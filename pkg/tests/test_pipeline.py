import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedepth.errors import DataFormatError, DegenerateSampleError
from gatedepth.pipeline import (
    RawDataset,
    Sample,
    build_dataset,
    load_samples,
    prefilter,
    prefilter_counts,
    save_samples,
    split,
    standardize,
    standardize_batch,
    variant,
)


def ds(rows):
    return RawDataset([Sample(*row) for row in rows])


class TestLoadSave:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "samples.csv"
        original = ds([(10, 100, 30, 12.5), (0, 50, 200, 80.0), (250, 6, 0, 33.25)])
        save_samples(original, path)
        loaded = load_samples(path)
        assert loaded.samples == original.samples

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c,d\n1,2,3,4.0\n")
        with pytest.raises(DataFormatError, match="header"):
            load_samples(path)

    def test_out_of_range_value_names_the_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("s1,s2,s3,r\n10,20,30,5.0\n300,20,30,5.0\n")
        with pytest.raises(DataFormatError, match=":3"):
            load_samples(path)

    def test_non_numeric_field_names_the_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("s1,s2,s3,r\n10,twenty,30,5.0\n")
        with pytest.raises(DataFormatError, match=":2"):
            load_samples(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataFormatError):
            load_samples(path)
        path.write_text("s1,s2,s3,r\n")
        with pytest.raises(DataFormatError, match="no data rows"):
            load_samples(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_samples(tmp_path / "nope.csv")


class TestPrefilter:
    def test_saturated_removed(self):
        assert len(prefilter(ds([(251, 40, 10, 5.0)]))) == 0

    def test_low_contrast_removed(self):
        assert len(prefilter(ds([(100, 102, 104, 5.0)]))) == 0

    def test_normal_sample_kept(self):
        assert len(prefilter(ds([(10, 100, 30, 5.0)]))) == 1

    def test_boundaries_kept(self):
        # exactly 250 is not saturated; spread of exactly 6 is enough contrast
        kept = prefilter(ds([(250, 30, 10, 5.0), (100, 106, 104, 5.0)]))
        assert len(kept) == 2

    def test_counts(self):
        data = ds([(251, 40, 10, 5.0), (100, 102, 104, 5.0), (10, 100, 30, 5.0)])
        assert prefilter_counts(data) == (1, 1, 1)

    @given(
        st.lists(
            st.tuples(
                st.integers(0, 255), st.integers(0, 255), st.integers(0, 255),
                st.floats(0.1, 200.0),
            ),
            max_size=60,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_idempotent_and_order_preserving(self, rows):
        data = ds(rows)
        once = prefilter(data)
        twice = prefilter(once)
        assert once.samples == twice.samples
        # kept samples appear in their original order (subsequence check)
        it = iter(data.samples)
        assert all(any(s == t for t in it) for s in once.samples)


class TestVariants:
    def triple_group(self, triple, ranges):
        return [Sample(*triple, r) for r in ranges]

    def test_dataset1_drops_outlier_and_collapses(self):
        data = RawDataset(self.triple_group((10, 60, 7), [30.0, 30.4, 30.6, 32.0]))
        out = build_dataset(data, variant("dataset1"))
        # mean 30.75; only 32.0 deviates by more than 1 m; three survivors
        # remain, so one sample at the recomputed mean is emitted
        assert len(out) == 1
        assert out.samples[0].triple == (10, 60, 7)
        assert out.samples[0].r == pytest.approx(30.333333333333332)

    def test_deviation_cut_uses_the_initial_mean_once(self):
        # a far outlier drags the initial mean so every sample deviates by
        # more than 1 m and the whole group dies; no re-iteration happens
        data = RawDataset(self.triple_group((10, 60, 7), [30.0, 30.4, 30.6, 45.0]))
        out = build_dataset(data, variant("dataset1"))
        assert len(out) == 0

    def test_boundary_deviation_kept(self):
        data = RawDataset(self.triple_group((10, 60, 7), [29.0, 30.0, 31.0]))
        out = build_dataset(data, variant("dataset1"))
        # deviations are exactly 1.0 m, which is not "more than 1 m"
        assert len(out) == 1
        assert out.samples[0].r == pytest.approx(30.0)

    def test_small_groups_dropped(self):
        data = RawDataset(self.triple_group((10, 60, 7), [30.0, 30.4]))
        assert len(build_dataset(data, variant("dataset1"))) == 0

    def test_dataset2_keeps_survivors(self):
        data = RawDataset(self.triple_group((10, 60, 7), [30.0, 30.4, 30.6, 32.0]))
        out = build_dataset(data, variant("dataset2"))
        assert [s.r for s in out.samples] == [30.0, 30.4, 30.6]

    def test_dataset3_softens_far_groups(self):
        far = self.triple_group((5, 20, 80), [65.0, 66.5])       # kept: 2 m rule, no minimum
        near = self.triple_group((10, 60, 7), [58.0, 59.5])      # dropped: fewer than 3
        out = build_dataset(RawDataset(far + near), variant("dataset3"))
        assert len(out) == 1
        assert out.samples[0].r == pytest.approx(65.75)

    def test_dataset3_matches_dataset1_below_cutoff(self):
        rng = np.random.default_rng(3)
        samples = []
        for k in range(40):
            triple = (int(rng.integers(0, 200)), int(rng.integers(0, 200)), int(rng.integers(0, 200)))
            base = float(rng.uniform(5.0, 55.0))  # group means stay below 60 m
            for _ in range(int(rng.integers(1, 6))):
                samples.append(Sample(*triple, base + float(rng.uniform(-1.5, 1.5))))
        data = RawDataset(samples)
        out1 = build_dataset(data, variant("dataset1"))
        out3 = build_dataset(data, variant("dataset3"))
        assert out1.samples == out3.samples

    def test_dataset4_is_verbatim(self):
        data = ds([(10, 60, 7, 30.0), (5, 20, 80, 65.0), (10, 60, 7, 31.0)])
        out = build_dataset(data, variant("dataset4"))
        assert out.samples == data.samples

    def test_dataset1_emits_at_most_one_sample_per_triple(self):
        rng = np.random.default_rng(11)
        samples = []
        for _ in range(300):
            triple = (int(rng.integers(0, 30)), int(rng.integers(0, 30)), int(rng.integers(0, 30)))
            samples.append(Sample(*triple, float(rng.uniform(10.0, 90.0))))
        out = build_dataset(RawDataset(samples), variant("dataset1"))
        triples = [s.triple for s in out.samples]
        assert len(triples) == len(set(triples))

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            variant("dataset9")


class TestStandardize:
    def test_symmetric_triple(self):
        out = standardize(Sample(10, 20, 30, 5.0))
        np.testing.assert_allclose(out.x, [-1.0, 0.0, 1.0], atol=1e-12)
        assert out.r == 5.0

    def test_zero_spread_rejected(self):
        with pytest.raises(DegenerateSampleError):
            standardize(Sample(10, 10, 10, 5.0))
        with pytest.raises(DegenerateSampleError):
            standardize_batch(np.array([[10.0, 10.0, 10.0]]))

    @given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)))
    @settings(max_examples=200, deadline=None)
    def test_zero_mean_unit_std(self, triple):
        if max(triple) == min(triple):
            return
        out = standardize(Sample(*triple, 5.0))
        assert abs(out.x.mean()) < 1e-9
        assert abs(out.x.std(ddof=1) - 1.0) < 1e-9

    @given(
        st.tuples(st.integers(0, 100), st.integers(0, 100), st.integers(0, 100)),
        st.floats(0.25, 2.0),
        st.floats(0.0, 20.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_affine_invariance(self, triple, scale, shift):
        if max(triple) == min(triple):
            return
        base = standardize_batch(np.array([triple], dtype=float))
        moved = standardize_batch(np.array([triple], dtype=float) * scale + shift)
        np.testing.assert_allclose(moved, base, atol=1e-9)


class TestSplit:
    def test_fraction(self):
        data = ds([(10, 100, 30, float(i + 1)) for i in range(100)])
        train, val = split(data, 0.8, seed=3)
        assert (len(train), len(val)) == (80, 20)

    def test_partition_and_determinism(self):
        data = ds([(10, 100, 30, float(i + 1)) for i in range(37)])
        a_train, a_val = split(data, 0.6, seed=12)
        b_train, b_val = split(data, 0.6, seed=12)
        assert a_train.samples == b_train.samples and a_val.samples == b_val.samples
        merged = sorted(a_train.samples + a_val.samples, key=lambda s: s.r)
        assert merged == sorted(data.samples, key=lambda s: s.r)

    def test_bad_fraction(self):
        data = ds([(10, 100, 30, 1.0)])
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                split(data, bad, seed=0)
