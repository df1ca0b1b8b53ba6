"""Deterministic file output tests: hashing, CSV quoting, JSON, SVG plots."""

import json
import math
import os
import re

import numpy as np
import pytest

from schatten_lab import reporting
from schatten_lab.dyadic import GridError
from schatten_lab.spectra import SingularSpectrum


class TestConfigHash:
    def test_key_order_does_not_matter(self):
        a = {"n": 2, "N": 64, "weight": {"kind": "constant", "value": 1.0}}
        b = {"weight": {"value": 1.0, "kind": "constant"}, "N": 64, "n": 2}
        assert reporting.config_hash(a) == reporting.config_hash(b)

    def test_different_configs_differ(self):
        assert reporting.config_hash({"n": 1}) != reporting.config_hash({"n": 2})

    def test_stamp_fields(self):
        cfg = {"n": 2}
        doc = reporting.stamp(cfg, rows=3)
        assert doc["config"] == cfg
        assert doc["config_sha256"] == reporting.config_hash(cfg)
        assert doc["rows"] == 3
        assert re.fullmatch(r"[0-9a-f]{64}", doc["config_sha256"])


class TestCsv:
    def test_crlf_line_endings(self):
        text = reporting.render_csv([["a", "b"], ["1", "2"]])
        assert text == "a,b\r\n1,2\r\n"

    def test_quoting_of_special_fields(self):
        # RFC 4180: quote fields holding separators, quotes or newlines,
        # and double embedded quotes
        rows = [["plain", "with,comma", 'with"quote', "with\nnewline"]]
        text = reporting.render_csv(rows)
        assert text == 'plain,"with,comma","with""quote","with\nnewline"\r\n'

    def test_write_csv_and_sidecar(self, tmp_path):
        path = str(tmp_path / "out.csv")
        got = reporting.write_csv(path, [["k"], ["1"]], sidecar={"config": {}, "x": 1})
        assert got == path
        assert open(path, newline="").read() == "k\r\n1\r\n"
        meta = json.load(open(path + ".meta.json"))
        assert meta["x"] == 1
        leftovers = [f for f in os.listdir(tmp_path) if "tmp" in f]
        assert leftovers == []


class TestJson:
    def test_sorted_keys_and_newline(self):
        text = reporting.render_json({"b": 1, "a": 2})
        assert text == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_non_ascii_preserved(self):
        assert "µ" in reporting.render_json({"unit": "µm"})

    def test_write_json(self, tmp_path):
        path = str(tmp_path / "x.json")
        reporting.write_json(path, {"v": [1, 2]})
        assert json.load(open(path)) == {"v": [1, 2]}


def circle_points(svg: str) -> np.ndarray:
    pts = re.findall(r'<circle cx="([-\d.]+)" cy="([-\d.]+)"', svg)
    return np.array([[float(x), float(y)] for x, y in pts])


def reference_segment(svg: str) -> np.ndarray:
    m = re.search(
        r'<line x1="([-\d.]+)" y1="([-\d.]+)" x2="([-\d.]+)" y2="([-\d.]+)"[^>]*dash',
        svg,
    )
    assert m is not None
    return np.array([float(g) for g in m.groups()]).reshape(2, 2)


class TestSvg:
    VALUES = np.array([1.0, 0.5, 0.25])

    def test_three_points_slope_matches_loglog_fit(self):
        svg = reporting.render_svg_loglog(self.VALUES, 1.0, "demo")
        pts = circle_points(svg)
        assert len(pts) == 3
        # pixel slope of the dashed line encodes data slope -1.0 exactly,
        # which calibrates pixels per decade on both axes
        (x1, y1), (x2, y2) = reference_segment(svg)
        ref_pixel_slope = (y2 - y1) / (x2 - x1)
        fit_pixel_slope = np.polyfit(pts[:, 0], pts[:, 1], 1)[0]
        recovered = -fit_pixel_slope / ref_pixel_slope
        k = np.arange(1, 4)
        oracle = np.polyfit(np.log10(k), np.log10(self.VALUES), 1)[0]
        # coordinates are rounded to hundredths of a pixel in the file
        assert recovered == pytest.approx(oracle, rel=1e-3)
        assert -1.5 < recovered < -0.9

    def test_reference_line_anchored_at_first_value(self):
        svg = reporting.render_svg_loglog(self.VALUES, 0.5, "demo")
        pts = circle_points(svg)
        seg = reference_segment(svg)
        assert seg[0] == pytest.approx(pts[0], abs=0.02)

    def test_first_two_points_parallel_reference_exponent_one(self):
        # s2/s1 = 1/2 over one doubling of k is the k^-1 law exactly
        svg = reporting.render_svg_loglog(self.VALUES, 1.0, "demo")
        pts = circle_points(svg)
        (x1, y1), (x2, y2) = reference_segment(svg)
        ref = (y2 - y1) / (x2 - x1)
        seg = (pts[1, 1] - pts[0, 1]) / (pts[1, 0] - pts[0, 0])
        assert seg == pytest.approx(ref, rel=1e-3)

    def test_desc_carries_version_and_exponent(self):
        svg = reporting.render_svg_loglog(self.VALUES, 0.5, "demo")
        assert f"schatten-lab {reporting.TOOL_VERSION}" in svg
        assert "0.5" in svg
        assert "demo" in svg

    def test_zero_values_dropped(self):
        svg = reporting.render_svg_loglog(np.array([1.0, 0.5, 0.0]), 1.0, "t")
        assert len(circle_points(svg)) == 2

    def test_all_zero_rejected(self):
        with pytest.raises(GridError):
            reporting.render_svg_loglog(np.zeros(3), 1.0, "t")

    def test_decade_tick_label(self):
        svg = reporting.render_svg_loglog(self.VALUES, 1.0, "t")
        assert "1e0" in svg


class TestEmitPlot:
    def spectrum(self):
        return SingularSpectrum(np.array([1.0, 0.5, 0.25]), 4)

    def test_writes_svg_and_csv_twin(self, tmp_path):
        path = str(tmp_path / "spec.svg")
        svg_path, csv_path = reporting.emit_plot(self.spectrum(), 1.0, path)
        assert svg_path == path
        assert csv_path == str(tmp_path / "spec.csv")
        assert open(csv_path, newline="").read().startswith("k,s_k\r\n1,1\r\n")
        assert "<svg" in open(svg_path).read()

    def test_sidecars_written(self, tmp_path):
        path = str(tmp_path / "spec.svg")
        reporting.emit_plot(self.spectrum(), 1.0, path, sidecar=reporting.stamp({"n": 1}))
        for name in ("spec.svg.meta.json", "spec.csv.meta.json"):
            meta = json.load(open(tmp_path / name))
            assert meta["config"] == {"n": 1}
            assert meta["version"] == reporting.TOOL_VERSION

    def test_empty_spectrum_rejected(self, tmp_path):
        empty = SingularSpectrum(np.array([]), 0)
        with pytest.raises(GridError):
            reporting.emit_plot(empty, 1.0, str(tmp_path / "x.svg"))

    def test_rerun_byte_identical(self, tmp_path):
        a = str(tmp_path / "a.svg")
        b = str(tmp_path / "b.svg")
        reporting.emit_plot(self.spectrum(), 0.5, a, sidecar=reporting.stamp({}))
        reporting.emit_plot(self.spectrum(), 0.5, b, sidecar=reporting.stamp({}))
        assert open(a, "rb").read() == open(b, "rb").read()
        assert open(a + ".meta.json", "rb").read() == open(b + ".meta.json", "rb").read()
