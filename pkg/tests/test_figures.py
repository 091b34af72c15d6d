import numpy as np
import pytest

from snrge import SnrLabel
from snrge.figures import emit_line_chart, emit_scatter
from snrge.tsne import Projection2D


def sample_projection():
    rng = np.random.default_rng(0)
    points = rng.normal(size=(30, 2))
    labels = [SnrLabel.decibel(-15.0)] * 10 + [SnrLabel.decibel(10.0)] * 10 + [SnrLabel.noise()] * 10
    return Projection2D(points=points, labels=labels, final_kl=0.5)


def test_scatter_legend_and_csv(tmp_path):
    proj = sample_projection()
    path = tmp_path / "scatter.svg"
    emit_scatter(proj, path)
    svg = path.read_text()
    assert svg.count("legend-entry") == 3
    assert "-15dB" in svg and "10dB" in svg and "noise" in svg
    csv_lines = (tmp_path / "scatter.csv").read_text().splitlines()
    assert csv_lines[0] == "x,y,label"
    assert len(csv_lines) == 31


def test_scatter_rerender_is_byte_identical(tmp_path):
    proj = sample_projection()
    emit_scatter(proj, tmp_path / "a.svg")
    emit_scatter(proj, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_line_chart(tmp_path):
    series = [
        ("frequency", [-15, -10, -5], [0.5, 0.6, 0.7]),
        ("pixels", [-15, -10, -5], [0.4, 0.45, 0.5]),
    ]
    path = tmp_path / "chart.svg"
    emit_line_chart(series, path, title="scores", xlabel="SNR (dB)", ylabel="score")
    svg = path.read_text()
    assert svg.count("legend-entry") == 2
    assert svg.count("<polyline") == 2
    csv_lines = (tmp_path / "chart.csv").read_text().splitlines()
    assert csv_lines[0] == "series,x,y"
    assert len(csv_lines) == 7


def test_line_chart_rerender_identical(tmp_path):
    series = [("a", [0, 1, 2], [1.0, 0.5, 0.25])]
    emit_line_chart(series, tmp_path / "x.svg")
    emit_line_chart(series, tmp_path / "y.svg")
    assert (tmp_path / "x.svg").read_bytes() == (tmp_path / "y.svg").read_bytes()


def test_empty_inputs_error(tmp_path):
    with pytest.raises(ValueError):
        emit_line_chart([], tmp_path / "no.svg")
    with pytest.raises(ValueError):
        emit_scatter(Projection2D(np.zeros((0, 2)), [], 0.0), tmp_path / "no.svg")


def test_svg_is_wellformed_xml(tmp_path):
    import xml.etree.ElementTree as ET

    proj = sample_projection()
    emit_scatter(proj, tmp_path / "wf.svg")
    ET.parse(tmp_path / "wf.svg")
    emit_line_chart([("s", [0, 1], [1, 2])], tmp_path / "wf2.svg")
    ET.parse(tmp_path / "wf2.svg")
