"""Tests for heatmap and report files."""

import json

import numpy as np

from src.profiler.activation import ActivationMap
from src.profiler.export import export_heatmap, read_heatmap, write_report


def _map(rows, tokens=1):
    values = np.array(rows, dtype=float)
    return ActivationMap(values, np.zeros(values.shape, dtype=np.int64), tokens)


class TestExportHeatmap:
    """Tests for heatmap CSV output."""

    def test_single_cell(self, tmp_path):
        path = export_heatmap(_map([[3.5]]), tmp_path / "h.csv")

        lines = path.read_text().splitlines()

        assert lines[0] == "# layers=1 experts=1 tokens=1"
        assert lines[1] == "3.5"

    def test_row_order(self, tmp_path):
        path = export_heatmap(_map([[1.0, 2.0], [3.0, 4.0]]), tmp_path / "h.csv")

        lines = path.read_text().splitlines()

        assert lines[1:] == ["1.0,2.0", "3.0,4.0"]

    def test_read_back_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        amap = _map(rng.random((3, 5)) * 100, tokens=17)

        restored = read_heatmap(export_heatmap(amap, tmp_path / "sub" / "h.csv"))

        assert np.array_equal(restored.values, amap.values)
        assert restored.token_count == 17


class TestWriteReport:
    """Tests for JSON reports."""

    def test_sorted_keys(self, tmp_path):
        path = write_report({"b": 1, "a": [0.5]}, tmp_path / "r.json")

        text = path.read_text()

        assert json.loads(text) == {"a": [0.5], "b": 1}
        assert text.index('"a"') < text.index('"b"')
