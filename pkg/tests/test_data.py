import numpy as np
import pytest

from asrc.data import (
    gen_blobs,
    gen_two_moons,
    load_labels,
    load_matrix,
    normalize_minmax,
    save_labels,
    save_matrix,
)
from asrc.exceptions import DimensionError, ParseError


class TestCsv:
    def test_parse_basic(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3,4\n")
        np.testing.assert_array_equal(load_matrix(path), [[1.0, 2.0], [3.0, 4.0]])

    def test_header_skipped(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,2\n")
        np.testing.assert_array_equal(
            load_matrix(path, has_header=True), [[1.0, 2.0]]
        )

    def test_parse_error_carries_line(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(ParseError, match="line 2"):
            load_matrix(path)

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(DimensionError, match="line 2"):
            load_matrix(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,nan\n")
        with pytest.raises(ParseError):
            load_matrix(path)

    def test_round_trip(self, tmp_path):
        x = np.array([[1.5, -2.25], [0.0, 1e-7]])
        path = tmp_path / "m.csv"
        save_matrix(x, path)
        np.testing.assert_array_equal(load_matrix(path), x)


class TestRawF64:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((7, 3))
        path = tmp_path / "m.bin"
        save_matrix(x, path, fmt="raw-f64")
        back = load_matrix(path, fmt="raw-f64")
        assert back.tobytes() == x.tobytes()
        # write the loaded matrix again: the files must be byte-identical
        path2 = tmp_path / "m2.bin"
        save_matrix(back, path2, fmt="raw-f64")
        assert path.read_bytes() == path2.read_bytes()

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "m.bin"
        path.write_bytes(b"\x01\x02")
        with pytest.raises(ParseError):
            load_matrix(path, fmt="raw-f64")

    def test_size_mismatch(self, tmp_path):
        import struct

        path = tmp_path / "m.bin"
        path.write_bytes(struct.pack("<QQ", 2, 2) + b"\x00" * 8)
        with pytest.raises(ParseError):
            load_matrix(path, fmt="raw-f64")


class TestLabelsIo:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "l.txt"
        save_labels(np.array([0, 2, 1, 2]), path)
        np.testing.assert_array_equal(load_labels(path), [0, 2, 1, 2])

    def test_bad_line(self, tmp_path):
        path = tmp_path / "l.txt"
        path.write_text("0\nx\n")
        with pytest.raises(ParseError, match="line 2"):
            load_labels(path)


class TestNormalize:
    def test_affine_map(self):
        x = np.array([[2.0], [4.0], [6.0]])
        np.testing.assert_allclose(normalize_minmax(x), [[0.0], [0.5], [1.0]])

    def test_constant_column_maps_to_zero(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0]])
        out = normalize_minmax(x)
        np.testing.assert_array_equal(out[:, 1], [0.0, 0.0])

    def test_range_bounds(self):
        rng = np.random.default_rng(1)
        out = normalize_minmax(rng.standard_normal((50, 4)) * 13)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestSynthetic:
    def test_noiseless_moons_on_arcs(self):
        x, labels = gen_two_moons(100, noise=0.0, seed=3)
        outer = x[labels == 0]
        inner = x[labels == 1]
        np.testing.assert_allclose(np.linalg.norm(outer, axis=1), 1.0, atol=1e-12)
        shifted = inner - np.array([1.0, 0.5])
        np.testing.assert_allclose(np.linalg.norm(shifted, axis=1), 1.0, atol=1e-12)

    def test_moons_determinism(self):
        a, la = gen_two_moons(60, 0.05, seed=9)
        b, lb = gen_two_moons(60, 0.05, seed=9)
        assert a.tobytes() == b.tobytes()
        assert la.tobytes() == lb.tobytes()

    def test_blobs_zero_separation_single_center(self):
        x, labels = gen_blobs(40, 4, separation=0.0, spread=0.5, seed=2)
        assert np.linalg.norm(x.mean(axis=0)) < 0.5

    def test_blobs_separation_scale(self):
        x, labels = gen_blobs(400, 4, separation=10.0, spread=1.0, seed=0)
        centers = np.stack([x[labels == c].mean(axis=0) for c in range(4)])
        dists = [
            np.linalg.norm(centers[a] - centers[b])
            for a in range(4)
            for b in range(a + 1, 4)
        ]
        assert min(dists) == pytest.approx(10.0, rel=0.1)

    def test_blobs_determinism(self):
        a, la = gen_blobs(50, 3, 5.0, 0.3, seed=11)
        b, lb = gen_blobs(50, 3, 5.0, 0.3, seed=11)
        assert a.tobytes() == b.tobytes()
        assert la.tobytes() == lb.tobytes()

    def test_blobs_balanced_counts(self):
        _, labels = gen_blobs(10, 3, 1.0, 0.1, seed=0)
        np.testing.assert_array_equal(np.bincount(labels), [4, 3, 3])
