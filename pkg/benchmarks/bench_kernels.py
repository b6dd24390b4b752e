"""Benchmark the compiled assembly kernel against the NumPy fallback.

Times pair_block_contributions on identical inputs for both backends and
prints the speedup, plus an agreement check on the computed values.
"""

import argparse
import time

import numpy as np

from tdbem._kernels import _fallback
from tdbem.assembly import PsiPack
from tdbem.kernel_weights import tables_for
from tdbem.mesh import load_mesh
from tdbem.quadrature import pair_rule_regular
from tdbem.temporal_basis import TimeGrid

try:
    from tdbem._kernels import _core
except ImportError:
    _core = None


def make_inputs(mesh_path: str, n_pairs: int, p: int, q: int, seed: int = 0):
    mesh = load_mesh(mesh_path)
    grid = TimeGrid(T=6.0, N=10, p=p)
    pack = PsiPack.build(tables_for(grid), grid, 4, 2)
    rng = np.random.default_rng(seed)
    ex = rng.integers(0, mesh.num_triangles, n_pairs)
    # distinct pairs only: the tensor rule assumes separated triangles
    ey = (ex + 1 + rng.integers(0, mesh.num_triangles - 1, n_pairs)) % mesh.num_triangles
    xhat, yhat, wq = pair_rule_regular(q)
    args = (
        mesh.corners[ex], mesh.corners[ey],
        2.0 * mesh.areas[ex], 2.0 * mesh.areas[ey],
        np.einsum("pd,pd->p", mesh.normals[ex], mesh.normals[ey]),
        mesh.curls[ey], mesh.curls[ex], xhat, yhat, wq, pack,
    )
    return args


def bench(fn, args, repeats: int) -> tuple[float, np.ndarray]:
    out = fn(*args)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mesh", default="meshes/sphere320.off")
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--q", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    inputs = make_inputs(args.mesh, args.pairs, args.p, args.q)
    t_py, out_py = bench(_fallback.pair_block_contributions, inputs, args.repeats)
    print(f"python fallback: {t_py * 1e3:9.2f} ms for {args.pairs} pairs")
    if _core is None:
        print("compiled backend not available")
        return
    t_c, out_c = bench(_core.pair_block_contributions, inputs, args.repeats)
    diff = np.max(np.abs(out_py - out_c))
    scale = np.max(np.abs(out_py))
    print(f"compiled:        {t_c * 1e3:9.2f} ms for {args.pairs} pairs")
    print(f"speedup: {t_py / t_c:.1f}x   max abs diff: {diff:.2e} (scale {scale:.2e})")


if __name__ == "__main__":
    main()
