"""Command line interface: config parsing, runs, exit codes, VTK output."""

import csv
import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tdbem.cli import ConfigError, main, parse_config, write_vtu
from tdbem.mesh import icosahedron, save_mesh


@pytest.fixture(scope="module")
def ico_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("mesh") / "ico.off"
    save_mesh(icosahedron(), path)
    return str(path)


def write_cfg(tmp_path, name, lines):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestParseConfig:
    def test_values_comments_blank_lines(self, tmp_path):
        path = write_cfg(tmp_path, "a.cfg", [
            "# a comment",
            "mesh = some/path.off",
            "",
            "N = 5 10",
            "solver.tol = 1e-6  # trailing comment",
        ])
        cfg = parse_config(path)
        assert cfg["mesh"] == "some/path.off"
        assert cfg["N"] == "5 10"
        assert cfg["solver.tol"] == "1e-6"

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            parse_config("/nonexistent/config.cfg")

    def test_malformed_line(self, tmp_path):
        path = write_cfg(tmp_path, "bad.cfg", ["mesh path.off"])
        with pytest.raises(ConfigError):
            parse_config(path)


class TestExitCodes:
    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "none.cfg")]) == 2

    def test_bad_n_is_config_error(self, tmp_path, ico_path):
        cfg = write_cfg(tmp_path, "n.cfg", [f"mesh = {ico_path}", "N = 2", "T = 2"])
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "out")]) == 2

    def test_unknown_method_is_config_error(self, tmp_path, ico_path):
        cfg = write_cfg(tmp_path, "m.cfg", [
            f"mesh = {ico_path}", "N = 4", "T = 2", "solver.method = sor",
        ])
        assert main(["convergence", "--config", cfg, "--out", str(tmp_path / "out")]) == 2

    def test_missing_mesh_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, "mm.cfg", ["mesh = /none.off", "N = 4"])
        assert main(["bench", "--config", cfg, "--out", str(tmp_path / "out")]) == 2


class TestVTU:
    def read(self, path):
        root = ET.parse(path).getroot()
        piece = root.find("UnstructuredGrid/Piece")
        pts = np.array(piece.find("Points/DataArray").text.split(), float).reshape(-1, 3)
        vals = np.array(piece.find("PointData/DataArray").text.split(), float)
        return piece, pts, vals

    def test_vertex_cells(self, tmp_path):
        pts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
        vals = np.array([1.0, 2.0, 3.0])
        path = str(tmp_path / "a.vtu")
        write_vtu(path, pts, vals)
        piece, rpts, rvals = self.read(path)
        assert int(piece.get("NumberOfPoints")) == 3
        assert int(piece.get("NumberOfCells")) == 3
        assert np.allclose(rpts, pts)
        assert np.allclose(rvals, vals)

    def test_structured_quads(self, tmp_path):
        s = np.linspace(0, 1, 3)
        pts = np.array([[a, b, 0.0] for a in s for b in s])
        vals = np.arange(9.0)
        path = str(tmp_path / "b.vtu")
        write_vtu(path, pts, vals, dims=(3, 3))
        piece, rpts, rvals = self.read(path)
        assert int(piece.get("NumberOfCells")) == 4
        types = piece.find("Cells/DataArray[@Name='types']").text.split()
        assert set(types) == {"9"}
        conn = np.array(
            piece.find("Cells/DataArray[@Name='connectivity']").text.split(), int
        ).reshape(-1, 4)
        # first quad connects the first structured cell
        assert list(conn[0]) == [0, 3, 4, 1]


class TestRuns:
    def test_convergence_run(self, tmp_path, ico_path):
        out = str(tmp_path / "conv")
        cfg = write_cfg(tmp_path, "c.cfg", [
            f"mesh = {ico_path}",
            "N = 4", "p = 0", "T = 2",
            "rhs = sphere-n0",
            "solver.method = gmres",
            "solver.tol = 1e-6",
        ])
        assert main(["convergence", "--config", cfg, "--out", out]) == 0
        with open(os.path.join(out, "convergence.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert rows[0]["N"] == "4"
        assert float(rows[0]["error"]) > 0.0
        assert int(rows[0]["iterations"]) > 0
        with open(os.path.join(out, "convergence_manifest.json")) as fh:
            man = json.load(fh)
        assert "versions" in man or any("numpy" in str(k) for k in man)

    def test_bench_run(self, tmp_path, ico_path):
        out = str(tmp_path / "bench")
        cfg = write_cfg(tmp_path, "b.cfg", [
            f"mesh = {ico_path}",
            "N = 4", "p = 0", "T = 2",
            "bench.methods = gmres dgmres",
            "solver.tol = 1e-6",
        ])
        assert main(["bench", "--config", cfg, "--out", out]) == 0
        with open(os.path.join(out, "bench.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["method"] for r in rows] == ["gmres", "dgmres"]
        assert all(int(r["iterations"]) > 0 for r in rows)

    def test_solve_run(self, tmp_path, ico_path):
        out = str(tmp_path / "solve")
        cfg = write_cfg(tmp_path, "s.cfg", [
            f"mesh = {ico_path}",
            "N = 4", "p = 0", "T = 2",
            "solver.method = gmres",
            "solver.tol = 1e-6",
            "field.origin = 0 0 1.5",
            "field.span1 = 0.5 0 0",
            "field.span2 = 0 0.5 0",
            "field.n1 = 2", "field.n2 = 2",
            "field.times = 1.0",
        ])
        assert main(["solve", "--config", cfg, "--out", out]) == 0
        x = np.load(os.path.join(out, "coefficients.npy"))
        assert x.shape == (4 * 12,)
        assert os.path.exists(os.path.join(out, "field_0000.vtu"))
        with open(os.path.join(out, "solve_manifest.json")) as fh:
            man = json.load(fh)
        assert int(man["iterations"]) >= 1
