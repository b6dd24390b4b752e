"""Command line driver: convergence study, solver benchmark, scattering solve.

Configuration is a flat ASCII key = value file with dotted section keys
(solver.method = fgmres-recursive).  Every run writes a manifest with the
resolved configuration and package versions next to its outputs.  Exit
codes: 0 success, 2 configuration error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .assembly import assemble_rhs
from .block_system import assemble_system
from .mesh import load_mesh
from .potential import FieldGrid, eval_total_field
from .reference import (
    IncidentWave,
    incident_neumann,
    l2_spacetime_error,
    reference_n0,
    reference_n1,
    sph_harm_real,
)
from .solvers import SolverConfig, dgmres, fgmres, gmres, recursive_preconditioner
from .temporal_basis import TimeGrid

__all__ = ["main", "parse_config", "ConfigError", "run_convergence",
           "run_solver_bench", "run_scattering"]


class ConfigError(ValueError):
    pass


class SolverFailure(RuntimeError):
    pass


def parse_config(path: str) -> dict:
    """Flat key = value file; '#' starts a comment; values stay strings."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    out: dict = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{ln}: empty key")
            out[key] = val
    return out


def _get(cfg: dict, key: str, default=None, cast=str):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required config key: {key}")
        return default
    try:
        return cast(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"config key {key}: {exc}") from exc


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _validate_common(cfg: dict) -> tuple:
    mesh_path = _get(cfg, "mesh")
    if not os.path.exists(mesh_path):
        raise ConfigError(f"mesh file not found: {mesh_path}")
    p = _get(cfg, "p", 1, int)
    if p < 0:
        raise ConfigError(f"config key p: degree {p} must be >= 0")
    T = _get(cfg, "T", 6.0, float)
    if T <= 0:
        raise ConfigError(f"config key T: horizon {T} must be positive")
    eps = _get(cfg, "solver.tol", 1e-5, float)
    if eps <= 0:
        raise ConfigError(f"config key solver.tol: tolerance {eps} must be positive")
    return mesh_path, T, p, eps


def _check_n(n: int) -> int:
    if n < 3:
        raise ConfigError(f"config key N: timestep count {n} must be >= 3")
    return n


_SIGNALS = {
    "sin3t": (
        lambda t: np.sin(3 * t) * t * t * np.exp(-t),
        lambda t: (3 * np.cos(3 * t) * t * t + np.sin(3 * t) * (2 * t - t * t)) * np.exp(-t),
    ),
    "sin2pit": (
        lambda t: np.sin(2 * np.pi * t) * t**3 * np.exp(-2 * t),
        lambda t: (2 * np.pi * np.cos(2 * np.pi * t) * t**3
                   + np.sin(2 * np.pi * t) * (3 * t**2 - 2 * t**3)) * np.exp(-2 * t),
    ),
}


def _sphere_rhs(selector: str, signal: str):
    """Boundary data callback and space-time reference for the sphere studies."""
    g, gdot = _SIGNALS[signal]
    if selector == "sphere-n0":
        def data(X, t):
            return np.full(len(X), g(t))

        cache: dict = {}

        def ref(X, t):
            if t not in cache:
                cache[t] = reference_n0(g, float(t), gdot=gdot)
            return np.full(len(X), cache[t])

        return data, ref
    if selector == "sphere-n1":
        def data(X, t):
            xs = X / np.linalg.norm(X, axis=1, keepdims=True)
            return g(t) * sph_harm_real(1, 0, xs)

        cache = {}

        def ref(X, t):
            if t not in cache:
                cache[t] = reference_n1(g, float(t))
            xs = X / np.linalg.norm(X, axis=1, keepdims=True)
            return cache[t] * sph_harm_real(1, 0, xs)

        return data, ref
    raise ConfigError(f"unknown rhs selector: {selector}")


def _solver_cfg(cfg: dict, eps: float) -> SolverConfig:
    method = _get(cfg, "solver.method", "fgmres-recursive")
    if method not in ("gmres", "dgmres", "fgmres-recursive"):
        raise ConfigError(f"config key solver.method: unknown method {method}")
    inner = tuple(_int_list(_get(cfg, "solver.inner_iterations", "2 10")))
    return SolverConfig(
        method=method,
        restart=_get(cfg, "solver.restart", 50, int),
        tol=eps,
        max_iter=_get(cfg, "solver.max_iter", 20000, int),
        deflate_per_restart=_get(cfg, "solver.deflate", 4, int),
        max_deflation=_get(cfg, "solver.max_deflation", 20, int),
        recursion_depth=_get(cfg, "solver.recursion_depth", 2, int),
        inner_iterations=inner,
    )


def _solve(A, b, scfg: SolverConfig):
    apply_A = lambda v: A.matvec(v)
    if scfg.method == "gmres":
        x, hist = gmres(apply_A, b, scfg)
    elif scfg.method == "dgmres":
        x, hist, _ = dgmres(apply_A, b, scfg)
    else:
        prec = recursive_preconditioner(A, scfg)
        x, hist = fgmres(apply_A, b, scfg, precond=prec)
    if hist and hist[-1] > scfg.tol:
        raise SolverFailure(f"solver stopped at residual {hist[-1]:.3e} > {scfg.tol:.3e}")
    return x, hist


def _write_manifest(outdir: str, name: str, resolved: dict) -> None:
    import scipy

    manifest = dict(resolved)
    manifest["versions"] = {
        "tdbem": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": sys.version.split()[0],
    }
    with open(os.path.join(outdir, name), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def run_convergence(cfg: dict, outdir: str, workers: int) -> list[dict]:
    mesh_path, T, p, eps = _validate_common(cfg)
    mesh = load_mesh(mesh_path)
    selector = _get(cfg, "rhs", "sphere-n0")
    signal = _get(cfg, "rhs.signal", "sin3t" if selector == "sphere-n0" else "sin2pit")
    n_values = [_check_n(n) for n in _int_list(_get(cfg, "N", "5 10 20 40"))]
    data, ref = _sphere_rhs(selector, signal)
    scfg = _solver_cfg(cfg, eps)

    rows = []
    for n in n_values:
        grid = TimeGrid(T=T, N=n, p=p)
        t0 = time.monotonic()
        A = assemble_system(mesh, grid, workers=workers)
        t_asm = time.monotonic() - t0
        b = assemble_rhs(mesh, grid, data)
        t0 = time.monotonic()
        x, hist = _solve(A, b, scfg)
        t_solve = time.monotonic() - t0
        err = l2_spacetime_error(mesh, grid, x, ref)
        rows.append(dict(N=n, p=p, error=err, iterations=len(hist),
                         assembly_s=t_asm, solve_s=t_solve))
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "convergence.csv"), "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wr.writeheader()
        wr.writerows(rows)
    _write_manifest(outdir, "convergence_manifest.json", dict(cfg, workers=workers))
    return rows


_BENCH_METHODS = {
    "gmres": dict(method="gmres"),
    "dgmres": dict(method="dgmres"),
    "fgmres-recursive": dict(method="fgmres-recursive"),
}


def run_solver_bench(cfg: dict, outdir: str, workers: int) -> list[dict]:
    mesh_path, T, p, eps = _validate_common(cfg)
    mesh = load_mesh(mesh_path)
    selector = _get(cfg, "rhs", "sphere-n0")
    signal = _get(cfg, "rhs.signal", "sin3t")
    n_values = [_check_n(n) for n in _int_list(_get(cfg, "N", "20"))]
    methods = _get(cfg, "bench.methods", "gmres dgmres fgmres-recursive").split()
    data, _ = _sphere_rhs(selector, signal)

    rows = []
    for n in n_values:
        grid = TimeGrid(T=T, N=n, p=p)
        A = assemble_system(mesh, grid, workers=workers)
        b = assemble_rhs(mesh, grid, data)
        for method in methods:
            if method not in _BENCH_METHODS:
                raise ConfigError(f"config key bench.methods: unknown method {method}")
            scfg = _solver_cfg(dict(cfg, **{"solver.method": method}), eps)
            t0 = time.monotonic()
            try:
                _, hist = _solve(A, b, scfg)
                iters = len(hist)
            except SolverFailure:
                iters = -1
            rows.append(dict(method=method, N=n, iterations=iters,
                             wall_s=time.monotonic() - t0))
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "bench.csv"), "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wr.writeheader()
        wr.writerows(rows)
    _write_manifest(outdir, "bench_manifest.json", dict(cfg, workers=workers))
    return rows


def write_vtu(path: str, points: np.ndarray, values: np.ndarray, dims=None) -> None:
    """ASCII VTK XML unstructured grid with one point array 'u_total'.

    dims = (n1, n2) emits quad cells of a structured slice; otherwise the
    points become vertex cells.
    """
    points = np.atleast_2d(points)
    npts = len(points)
    cells = []
    if dims is not None:
        n1, n2 = dims
        for a in range(n1 - 1):
            for b in range(n2 - 1):
                base = a * n2 + b
                cells.append((base, base + n2, base + n2 + 1, base + 1))
        ctype = 9  # VTK_QUAD
    else:
        cells = [(i,) for i in range(npts)]
        ctype = 1  # VTK_VERTEX
    offs = np.cumsum([len(c) for c in cells])
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0"?>\n')
        fh.write('<VTKFile type="UnstructuredGrid" version="0.1" byte_order="LittleEndian">\n')
        fh.write(f'<UnstructuredGrid><Piece NumberOfPoints="{npts}" NumberOfCells="{len(cells)}">\n')
        fh.write('<Points><DataArray type="Float64" NumberOfComponents="3" format="ascii">\n')
        for pt in points:
            fh.write(f"{pt[0]:.12g} {pt[1]:.12g} {pt[2]:.12g}\n")
        fh.write('</DataArray></Points>\n<Cells>\n')
        fh.write('<DataArray type="Int64" Name="connectivity" format="ascii">\n')
        for c in cells:
            fh.write(" ".join(str(i) for i in c) + "\n")
        fh.write('</DataArray>\n<DataArray type="Int64" Name="offsets" format="ascii">\n')
        fh.write(" ".join(str(o) for o in offs) + "\n")
        fh.write('</DataArray>\n<DataArray type="UInt8" Name="types" format="ascii">\n')
        fh.write(" ".join(str(ctype) for _ in cells) + "\n")
        fh.write('</DataArray>\n</Cells>\n')
        fh.write('<PointData Scalars="u_total">\n')
        fh.write('<DataArray type="Float64" Name="u_total" format="ascii">\n')
        for v in np.asarray(values).ravel():
            fh.write(f"{v:.12g}\n")
        fh.write('</DataArray>\n</PointData>\n</Piece></UnstructuredGrid></VTKFile>\n')


def _field_grid_from_config(cfg: dict, T: float) -> tuple[FieldGrid, tuple]:
    origin = np.array([float(v) for v in _get(cfg, "field.origin", "0 0 2").split()])
    span1 = np.array([float(v) for v in _get(cfg, "field.span1", "4 0 0").split()])
    span2 = np.array([float(v) for v in _get(cfg, "field.span2", "0 4 0").split()])
    n1 = _get(cfg, "field.n1", 33, int)
    n2 = _get(cfg, "field.n2", 33, int)
    s = np.linspace(0.0, 1.0, n1)
    u = np.linspace(0.0, 1.0, n2)
    pts = (origin[None, None, :] + s[:, None, None] * span1[None, None, :]
           + u[None, :, None] * span2[None, None, :]).reshape(-1, 3)
    times = np.array([float(v) for v in
                      _get(cfg, "field.times", " ".join(str(t) for t in np.linspace(0, T, 5))).split()])
    return FieldGrid(points=pts, times=times), (n1, n2)


def run_scattering(cfg: dict, outdir: str, workers: int) -> np.ndarray:
    mesh_path, T, p, eps = _validate_common(cfg)
    mesh = load_mesh(mesh_path)
    n = _check_n(_get(cfg, "N", 20, int))
    grid = TimeGrid(T=T, N=n, p=p)
    wave = IncidentWave(
        amplitude=_get(cfg, "wave.amplitude", 0.02, float),
        wave_vector=tuple(float(v) for v in
                          _get(cfg, "wave.k", f"{-np.pi/np.sqrt(2)} 0 {-np.pi/np.sqrt(2)}").split()),
        omega=_get(cfg, "wave.omega", float(np.pi), float),
        phi0=_get(cfg, "wave.phi0", 0.0, float),
        m_f=_get(cfg, "wave.m_f", float(6 * np.pi), float),
        m_t=_get(cfg, "wave.m_t", float(8 * np.pi), float),
    )

    def data(X, t):
        nq = len(X) // mesh.num_triangles
        nrm = mesh.normals[np.arange(len(X)) // nq]
        return incident_neumann(wave, X, nrm, t)

    t0 = time.monotonic()
    A = assemble_system(mesh, grid, workers=workers)
    t_asm = time.monotonic() - t0
    b = assemble_rhs(mesh, grid, data)
    scfg = _solver_cfg(cfg, eps)
    t0 = time.monotonic()
    x, hist = _solve(A, b, scfg)
    t_solve = time.monotonic() - t0

    os.makedirs(outdir, exist_ok=True)
    np.save(os.path.join(outdir, "coefficients.npy"), x)
    if _get(cfg, "field.enable", "1") not in ("0", "false", "no"):
        fgrid, dims = _field_grid_from_config(cfg, T)
        fgrid.validate(mesh)
        field = eval_total_field(wave, mesh, grid, x, fgrid)
        for a, t in enumerate(fgrid.times):
            write_vtu(os.path.join(outdir, f"field_{a:04d}.vtu"),
                      fgrid.points, field[a], dims)
    _write_manifest(outdir, "solve_manifest.json",
                    dict(cfg, workers=workers, iterations=len(hist),
                         assembly_s=t_asm, solve_s=t_solve))
    return x


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="tdbem", description=__doc__)
    ap.add_argument("subcommand", choices=["convergence", "bench", "solve"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="out")
    args = ap.parse_args(argv)

    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("TDBEM_WORKERS", "1"))
    try:
        cfg = parse_config(args.config)
        if args.subcommand == "convergence":
            run_convergence(cfg, args.out, workers)
        elif args.subcommand == "bench":
            run_solver_bench(cfg, args.out, workers)
        else:
            run_scattering(cfg, args.out, workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
