import math

import numpy as np
import pytest

from cutfem.forms import STEEL
from cutfem.geometry import ring
from cutfem.io import fmt, nodal_von_mises, read_csv, write_csv, write_field_vtk, write_json
from cutfem.mesh import build_active_mesh, build_background
from cutfem.space import FESpace


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 2.0**-1074, 1e308, -123456.789):
        assert float(fmt(v)) == v
    assert fmt(float("inf")) == "inf" and fmt(float("nan")) == "nan"
    assert fmt(True) == "1" and fmt(None) == ""


def test_csv_round_trip_and_determinism(tmp_path):
    rows = [{"a": 1, "b": math.pi}, {"a": 2, "b": 1e-300, "c": "x"}]
    write_csv(tmp_path / "1.csv", rows)
    write_csv(tmp_path / "2.csv", rows)
    assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "2.csv").read_bytes()
    back = read_csv(tmp_path / "1.csv")
    assert float(back[0]["b"]) == math.pi
    assert back[1]["c"] == "x" and back[0]["c"] == ""


def test_json_numpy(tmp_path):
    write_json(tmp_path / "m.json", {"a": np.arange(3), "b": np.float64(0.5), "c": float("inf")})
    assert '"a": [' in (tmp_path / "m.json").read_text()


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_vtk_field(tmp_path, family):
    rep = ring(0.5, 1.0, segments=16)
    V = FESpace(build_active_mesh(build_background(family, rep.bbox, 0.25), rep), 2)
    u = V.interpolate(lambda x, y: (1e-3 * x, 0 * y))
    vm = nodal_von_mises(V, u, STEEL)
    assert vm.shape == (V.n_nodes,) and np.all(vm >= 0)
    write_field_vtk(tmp_path / "f.vtk", V, u, STEEL, polylines=[np.array([[0, 0], [1, 1]])])
    text = (tmp_path / "f.vtk").read_text()
    assert text.startswith("# vtk DataFile Version")
    assert "displacement" in text and "von_mises" in text
