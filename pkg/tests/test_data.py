import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dpkmeans.data import (
    Dataset,
    FormatError,
    InfeasibleSpecError,
    SyntheticSpec,
    cluster_sizes,
    gen_synthetic,
    load_csv,
    normalize,
    write_csv,
)


class TestLoadCsv:
    def test_two_rows(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("0.5,0.5\n-0.5,-0.5\n")
        ds = load_csv(p)
        assert (ds.n, ds.d) == (2, 2)
        assert ds.r is None

    def test_header_skipped(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("x,y\n1,2\n3,4\n")
        np.testing.assert_array_equal(load_csv(p).points, [[1, 2], [3, 4]])

    def test_non_numeric_names_line(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("0.5,0.5\n1.0,abc\n")
        with pytest.raises(FormatError, match=":2:"):
            load_csv(p)

    def test_ragged_names_line(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3,4\n5\n")
        with pytest.raises(FormatError, match=":3:"):
            load_csv(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("")
        with pytest.raises(FormatError):
            load_csv(p)

    def test_crlf_and_bom(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_bytes(b"\xef\xbb\xbfx,y\r\n1,2\r\n\r\n3,4\r\n")
        np.testing.assert_array_equal(load_csv(p).points, [[1, 2], [3, 4]])

    def test_expected_dimension(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2,3\n")
        with pytest.raises(FormatError):
            load_csv(p, d=2)

    @given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
                  elements=st.floats(-1e12, 1e12, allow_nan=False)))
    @settings(max_examples=30)
    def test_round_trip_bit_exact(self, tmp_path_factory, pts):
        p = tmp_path_factory.mktemp("rt") / "p.csv"
        write_csv(p, pts)
        np.testing.assert_array_equal(load_csv(p).points, pts)


class TestNormalize:
    def test_endpoints(self):
        np.testing.assert_array_equal(normalize(np.array([[0.0], [10.0]])).points.ravel(), [-1, 1])

    def test_midpoint(self):
        np.testing.assert_allclose(normalize(np.array([[0.0], [5.0], [10.0]])).points.ravel(), [-1, 0, 1])

    def test_constant_column(self):
        out = normalize(np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 5.0]]))
        np.testing.assert_array_equal(out.points[:, 0], 0.0)

    @given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 3)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)), st.floats(0.1, 10.0))
    @settings(max_examples=50)
    def test_idempotent_and_in_domain(self, pts, r):
        once = normalize(pts, r)
        twice = normalize(once, r)
        assert np.all(np.abs(once.points) <= r)
        np.testing.assert_allclose(twice.points, once.points, atol=1e-12 * r)


class TestDataset:
    def test_rejects_out_of_domain(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[1.5, 0.0]]), r=1.0)

    def test_read_only(self):
        ds = Dataset(np.zeros((2, 2)), r=1.0)
        with pytest.raises(ValueError):
            ds.points[0, 0] = 1.0


class TestSynthetic:
    def test_equal_split(self):
        assert sorted(cluster_sizes(10, 2)) == [5, 5]

    def test_remainder_split(self):
        assert cluster_sizes(10, 3) == [4, 3, 3]

    def test_deterministic(self):
        spec = SyntheticSpec(d=3, k=4, n=500, separation=0.5, seed=9)
        a, ca = gen_synthetic(spec)
        b, cb = gen_synthetic(spec)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(ca, cb)

    @given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_separation_and_domain(self, d, k, seed):
        spec = SyntheticSpec(d=d, k=k, n=50 * k, separation=0.3, seed=seed)
        try:
            ds, centers = gen_synthetic(spec)
        except InfeasibleSpecError:
            return
        assert np.all(np.abs(ds.points) <= 1.0)
        for i in range(k):
            for j in range(i):
                assert np.linalg.norm(centers[i] - centers[j]) >= 0.3

    def test_infeasible(self):
        with pytest.raises(InfeasibleSpecError):
            gen_synthetic(SyntheticSpec(d=1, k=5, n=50, separation=1.0, seed=0))
