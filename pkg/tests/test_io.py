import numpy as np
import pytest
from numpy.testing import assert_allclose

from decs import Dataset, InvalidInputError, WeightedAdjacency
from decs.io import (
    edge_name_universe,
    format_float,
    read_dataset_csv,
    read_edge_records,
    read_edges_tsv,
    resolve_edges,
    write_dataset_csv,
    write_edges_tsv,
)
from decs.rng import generator


class TestFloatFormat:
    def test_round_trip_exact(self):
        rng = generator(0)
        for value in rng.standard_normal(200):
            assert float(format_float(value)) == value

    def test_shortest_representation(self):
        assert format_float(0.1) == "0.1"
        assert format_float(1.0) == "1.0"


class TestDatasetCsv:
    def test_round_trip_with_header(self, tmp_path):
        ds = Dataset(values=generator(1).standard_normal((7, 3)), names=("a", "b", "c"))
        path = tmp_path / "d.csv"
        write_dataset_csv(path, ds)
        back = read_dataset_csv(path)
        assert back.names == ("a", "b", "c")
        assert np.array_equal(back.values, ds.values)

    def test_round_trip_headerless(self, tmp_path):
        ds = Dataset(values=generator(2).standard_normal((4, 2)))
        path = tmp_path / "d.csv"
        write_dataset_csv(path, ds)
        back = read_dataset_csv(path)
        assert back.names is None
        assert np.array_equal(back.values, ds.values)

    def test_ragged_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(InvalidInputError, match="ragged"):
            read_dataset_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_dataset_csv(tmp_path / "nope.csv")

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(InvalidInputError):
            read_dataset_csv(path)


class TestEdgesTsv:
    def _weights(self):
        w = np.zeros((3, 3))
        w[0, 1] = 1.25
        w[2, 0] = -0.5
        return WeightedAdjacency(weights=w)

    def test_round_trip_numeric(self, tmp_path):
        path = tmp_path / "e.tsv"
        write_edges_tsv(path, self._weights())
        back = read_edges_tsv(path, dim=3)
        assert_allclose(back.weights, self._weights().weights)

    def test_round_trip_named(self, tmp_path):
        path = tmp_path / "e.tsv"
        names = ("x1", "x2", "x3")
        write_edges_tsv(path, self._weights(), names=names)
        content = path.read_text()
        assert content.startswith("source\ttarget\tweight\n")
        assert "x1\tx2\t1.25" in content
        back = read_edges_tsv(path, names=names)
        assert_allclose(back.weights, self._weights().weights)

    def test_name_universe(self, tmp_path):
        path = tmp_path / "e.tsv"
        write_edges_tsv(path, self._weights(), names=("u", "v", "w"))
        records = read_edge_records(path)
        assert edge_name_universe(records) == ("u", "v", "w")

    def test_numeric_universe_is_none(self, tmp_path):
        path = tmp_path / "e.tsv"
        write_edges_tsv(path, self._weights())
        assert edge_name_universe(read_edge_records(path)) is None

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("1\t2\t0.5\n")
        with pytest.raises(InvalidInputError, match="header"):
            read_edge_records(path)

    def test_unknown_name_rejected(self):
        with pytest.raises(InvalidInputError, match="unknown endpoint"):
            resolve_edges([("a", "b", 1.0)], names=("a", "c"))

    def test_self_loop_rejected(self):
        with pytest.raises(InvalidInputError, match="self-loop"):
            resolve_edges([("2", "2", 1.0)])

    def test_dim_inference(self):
        adjacency = resolve_edges([("1", "4", 0.5)])
        assert adjacency.dim == 4
        assert adjacency.weights[0, 3] == 0.5

    def test_threshold_filters_writes(self, tmp_path):
        path = tmp_path / "e.tsv"
        write_edges_tsv(path, self._weights(), threshold=1.0)
        back = read_edges_tsv(path, dim=3)
        assert back.edge_count() == 1
