import pytest

from parasgd.analysis import UNREACHED, SpeedupPoint, SweepGrid
from parasgd.render import UNREACHED_MARK, heatmap_svg, line_chart_svg, write_svg


def small_grid() -> SweepGrid:
    points = {
        (K, tau): SpeedupPoint(K=K, tau=tau, S=0.0, C_b=1.0, N_a=100, M_a=M_a)
        for (K, tau), M_a in {(1, 1): 100, (1, 10): 12, (4, 1): 30, (4, 10): UNREACHED}.items()
    }
    return SweepGrid(workers=(1, 4), taus=(1, 10), points=points, N_a=100, target=0.7)


def test_heatmap_svg():
    svg = heatmap_svg(small_grid(), title="K & tau")
    assert svg.startswith("<svg") and svg.endswith("</svg>\n")
    assert svg.count('stroke="#ffffff" stroke-width="2"/>') == 4
    assert svg.count(UNREACHED_MARK) == 1
    assert ">3.33<" in svg and ">0.83<" in svg
    assert "K &amp; tau" in svg


def test_line_chart_svg(tmp_path):
    series = [("naive", [(0.0, 4.0), (10.0, 0.1)]), ("sparknet", [(0.0, 2.5), (10.0, 1.2)])]
    svg = line_chart_svg(series, "Speedup against S", "S", "speedup", log_x=True)
    assert svg.count("<polyline") == 2
    assert ">naive<" in svg and ">sparknet<" in svg

    path = tmp_path / "chart.svg"
    write_svg(str(path), svg)
    assert path.read_text() == svg


def test_line_chart_needs_points():
    with pytest.raises(ValueError):
        line_chart_svg([("empty", [])], "t", "x", "y")
    # a flat series still renders
    assert "<polyline" in line_chart_svg([("flat", [(1.0, 0.0), (1.0, 0.0)])], "t", "x", "y")
