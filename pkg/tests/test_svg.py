"""SVG export: deterministic markup, correct element counts, sane geometry."""

import xml.etree.ElementTree as ET

import numpy as np

from ritzgeo import svg


def _parse(text):
    # strip the xmlns so tags come back unqualified
    return ET.fromstring(text.replace('xmlns="http://www.w3.org/2000/svg"', ""))


def _tags(text, tag):
    return [el for el in _parse(text).iter() if el.tag == tag]


def test_render_polylines_is_byte_deterministic():
    ts = np.linspace(0.0, 1.0, 50)
    series = [(ts, np.sin(3 * ts), "a"), (ts, np.cos(3 * ts), "b")]
    assert svg.render_polylines(series, title="x") == svg.render_polylines(
        series, title="x"
    )


def test_polyline_count_and_palette_cycle():
    ts = np.linspace(0.0, 1.0, 10)
    series = [(ts, ts * k) for k in range(13)]
    out = svg.render_polylines(series)
    lines = _tags(out, "polyline")
    assert len(lines) == 13
    strokes = [el.get("stroke") for el in lines]
    assert strokes[0] == svg.PALETTE[0]
    # 13 series on an 11-color palette wraps around
    assert strokes[11] == svg.PALETTE[0]
    assert strokes[12] == svg.PALETTE[1]


def test_axis_mapping_pins_extremes_to_margins():
    # data spanning [0,2]x[-1,3]: extremes land exactly on the frame edges
    ts = np.array([0.0, 1.0, 2.0])
    ys = np.array([-1.0, 3.0, -1.0])
    out = svg.render_polylines([(ts, ys)])
    pts = _tags(out, "polyline")[0].get("points").split()
    first = [float(v) for v in pts[0].split(",")]
    second = [float(v) for v in pts[1].split(",")]
    assert first[0] == svg.MARGIN
    assert first[1] == svg.HEIGHT - svg.MARGIN
    assert second[1] == svg.MARGIN
    last = [float(v) for v in pts[2].split(",")]
    assert last[0] == svg.WIDTH - svg.MARGIN


def test_constant_series_padded_instead_of_dividing_by_zero():
    ts = np.zeros(5)
    out = svg.render_polylines([(ts, ts)])
    pts = _tags(out, "polyline")[0].get("points").split()
    coords = np.array([[float(v) for v in p.split(",")] for p in pts])
    assert np.isfinite(coords).all()
    # zero-span axes get a +-0.5 pad, centering the point
    assert np.allclose(coords[:, 0], svg.WIDTH / 2)
    assert np.allclose(coords[:, 1], svg.HEIGHT / 2)


def test_labels_and_title_rendered_as_text():
    ts = np.linspace(0.0, 1.0, 4)
    out = svg.render_polylines([(ts, ts, "energy")], title="convergence")
    texts = [el.text for el in _tags(out, "text")]
    assert "energy" in texts
    assert "convergence" in texts


def test_cells_rendered_beneath_frame_with_gray_levels():
    ts = np.linspace(0.0, 1.0, 4)
    cells = [(0.0, 0.0, 0.5, 0.5, 0.0), (0.5, 0.5, 0.5, 0.5, 1.0)]
    out = svg.render_polylines([(ts, ts)], cells=cells)
    rects = _tags(out, "rect")
    # white background + 2 cells + frame
    assert len(rects) == 4
    fills = [el.get("fill") for el in rects]
    assert fills[1] == "rgb(255,255,255)"  # gray=0
    assert fills[2] == "rgb(89,89,89)"  # gray=1 -> 255*(1-0.65)
    # cells appear before the frame, so curves draw on top
    assert fills[3] == "none"


def test_path_svg_one_polyline_per_column():
    ts = np.linspace(0.0, 1.0, 20)
    out = svg.path_svg(ts, [np.sin(ts), np.cos(ts)], ["theta1", "theta2"])
    assert len(_tags(out, "polyline")) == 2
    texts = [el.text for el in _tags(out, "text")]
    assert "theta1" in texts and "theta2" in texts


def test_overhead_svg_elevation_grid_is_40_by_40():
    ts = np.linspace(0.0, 1.0, 30)
    out = svg.overhead_svg(ts, ts**2, elevation_fn=lambda p: p[0] + p[1] + 2.0)
    rects = _tags(out, "rect")
    # background + 1600 shading cells + frame
    assert len(rects) == 1600 + 2
    assert len(_tags(out, "polyline")) == 1


def test_overhead_svg_without_elevation_has_no_cells():
    ts = np.linspace(0.0, 1.0, 30)
    out = svg.overhead_svg(ts, ts**2)
    assert len(_tags(out, "rect")) == 2


def test_snapshots_svg_one_curve_per_time():
    x = np.linspace(0.0, 1.0, 40)
    ts = np.array([0.0, 0.5, 1.0])
    rows = [np.sin(np.pi * x) * (1 - t) for t in ts]
    out = svg.snapshots_svg(ts, x, rows)
    assert len(_tags(out, "polyline")) == 3
    texts = [el.text for el in _tags(out, "text")]
    assert "t=0.00" in texts and "t=1.00" in texts


def test_output_is_wellformed_xml():
    ts = np.linspace(0.0, 1.0, 5)
    out = svg.overhead_svg(ts, ts, elevation_fn=lambda p: 1.0)
    root = _parse(out)
    assert root.tag == "svg"
    assert root.get("width") == f"{svg.WIDTH:.0f}"
