"""Block Hessenberg representation of the global space-time Galerkin matrix.

The global matrix couples test block row kt and ansatz block column it, each
holding (p+1) x (p+1) spatial sub-blocks indexed by the local polynomial
orders (m2 test, m1 ansatz).  Shift invariance of the temporal weights makes
inner blocks depend only on kt - it, so only O(N) canonical positions are
assembled; everything else is resolved through an index with a reuse key and
a sign.  Assembly distributes block positions over an in-process worker pool
with a deterministic diagonal-wise ownership plan.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import QuadratureConfig, assemble_subblocks
from .kernel_weights import PrototypeTables, is_zero_pair, tables_for
from .mesh import SurfaceMesh
from .temporal_basis import TimeGrid

__all__ = [
    "BlockHessenbergMatrix",
    "DistributionPlan",
    "plan_distribution",
    "assemble_system",
    "reconstruct_dense",
    "n_tilde_z",
    "inner_nonzero_count",
]


def n_tilde_z(grid: TimeGrid, diameter: float) -> int:
    """Non-zero block count of the first matrix column."""
    return min(grid.N, int(np.ceil(2.0 * diameter / grid.dt)) + 2)


def inner_nonzero_count(n: int, ntz: int) -> int:
    """Closed-form count of non-zero inner block positions.

    Inner positions are 2 <= it, kt <= N-1 with -1 <= kt - it < ntz.
    """
    return (n * n - n - 4) // 2 - ((n - ntz - 2) * max(n - ntz - 1, 0)) // 2


def _is_inner(grid: TimeGrid, t: int) -> bool:
    return 1 < t < grid.N


def canonical_position(grid: TimeGrid, kt: int, it: int) -> tuple[int, int] | None:
    """Canonical assembled block position for (kt, it), or None when zero.

    Inner positions reuse the second-column block on the same diagonal
    (kt - it >= 0) or the first superdiagonal block (2, 3).
    """
    if kt - it <= -2:
        return None
    if _is_inner(grid, kt) and _is_inner(grid, it):
        if kt >= it:
            return (kt - it + 2, 2)
        return (2, 3)
    return (kt, it)


@dataclass(frozen=True)
class DistributionPlan:
    """Diagonal-wise ownership of block positions across P workers."""

    P: int
    n_z: int
    n_tilde_z: int
    owners: dict  # (kt, it) -> worker rank

    def rank_loads(self, grid: TimeGrid) -> np.ndarray:
        loads = np.zeros(self.P, dtype=np.int64)
        for (kt, it), r in self.owners.items():
            if _is_inner(grid, kt) and _is_inner(grid, it):
                loads[r] += 1
        return loads


def plan_distribution(grid: TimeGrid, mesh: SurfaceMesh, P: int) -> DistributionPlan:
    """Assign non-zero block positions to workers, diagonal-wise.

    Inner positions are flattened diagonal by diagonal (kt - it = -1, 0, 1,
    ...) and cut into P contiguous chunks of near-equal size, so identical
    blocks mostly co-locate and a diagonal is split between neighboring
    ranks only when balance requires it.  Boundary positions then go to the
    least-loaded ranks.
    """
    if P < 1:
        raise ValueError(f"worker count {P} must be >= 1")
    n = grid.N
    ntz = n_tilde_z(grid, mesh.diameter)
    inner = []
    for d in range(-1, ntz):
        for it in range(2, n):
            kt = it + d
            if 2 <= kt <= n - 1:
                inner.append((kt, it))
    n_z = len(inner)
    owners: dict = {}
    base, extra = divmod(n_z, P)
    start = 0
    loads = np.zeros(P, dtype=np.int64)
    for rank in range(P):
        size = base + (1 if rank < extra else 0)
        for pos in inner[start : start + size]:
            owners[pos] = rank
        loads[rank] = size
        start += size

    boundary = []
    for kt in range(1, n + 1):
        for it in range(1, n + 1):
            if _is_inner(grid, kt) and _is_inner(grid, it):
                continue
            if kt - it <= -2 or kt - it >= ntz:
                continue
            boundary.append((kt, it))
    for pos in sorted(boundary):
        rank = int(np.argmin(loads))
        owners[pos] = rank
        loads[rank] += 1
    return DistributionPlan(P=P, n_z=n_z, n_tilde_z=ntz, owners=owners)


@dataclass
class BlockHessenbergMatrix:
    """Global matrix as canonical sparse sub-blocks plus reuse metadata.

    unique_blocks maps (kt, it) canonical positions to the full
    (p+1) x (p+1) nested list of CSR sub-blocks; inner canonical positions
    store only m1 <= m2 and resolve the rest by the sign rule
    A^{m2,m1} = (-1)^{m1+m2} A^{m1,m2}.
    """

    grid: TimeGrid
    M: int
    diameter: float
    unique_blocks: dict = field(default_factory=dict)
    plan: DistributionPlan | None = None

    @property
    def shape(self) -> tuple[int, int]:
        n = self.grid.L * self.M
        return (n, n)

    def is_zero_position(self, kt: int, it: int) -> bool:
        """Structural zero: Hessenberg band plus the causality distance cut."""
        if kt - it <= -2:
            return True
        if is_zero_pair(self.grid, kt, it):
            return True
        lo = self.grid.t_formal(kt - 2) - self.grid.t_formal(it)
        return lo > self.diameter

    def resolve(self, kt: int, it: int, m2: int, m1: int):
        """Stored sub-block and sign for logical sub-block (kt, it, m2, m1)."""
        pos = canonical_position(self.grid, kt, it)
        if pos is None or self.is_zero_position(kt, it):
            return None, 1.0
        stored = self.unique_blocks.get(pos)
        if stored is None:
            return None, 1.0
        if _is_inner(self.grid, kt) and _is_inner(self.grid, it) and m1 > m2:
            return stored[m1][m2], float((-1) ** (m1 + m2))
        return stored[m2][m1], 1.0

    def sub_block(self, kt: int, it: int, m2: int, m1: int) -> sp.csr_matrix:
        blk, sign = self.resolve(kt, it, m2, m1)
        if blk is None:
            return sp.csr_matrix((self.M, self.M))
        return sign * blk

    def matvec(self, x: np.ndarray, rows=None, cols=None) -> np.ndarray:
        """y = A x, optionally restricted to block row/column ranges.

        rows and cols are inclusive (lo, hi) ranges of block indices kt/it;
        the result vector covers the row range only and x must cover the
        column range only.  Worker partial results are summed in rank order,
        which keeps the value independent of the partition.
        """
        grid = self.grid
        np1 = grid.p + 1
        m = self.M
        rlo, rhi = rows if rows is not None else (1, grid.N)
        clo, chi = cols if cols is not None else (1, grid.N)
        nrow = (rhi - rlo + 1) * np1 * m
        if len(x) != (chi - clo + 1) * np1 * m:
            raise ValueError("matvec dimension mismatch")
        ranks = {}
        for kt in range(rlo, rhi + 1):
            for it in range(clo, chi + 1):
                if self.is_zero_position(kt, it):
                    continue
                rank = self.plan.owners.get((kt, it), 0) if self.plan else 0
                ranks.setdefault(rank, []).append((kt, it))
        y = np.zeros(nrow)
        for rank in sorted(ranks):
            part = np.zeros(nrow)
            for kt, it in ranks[rank]:
                for m2 in range(np1):
                    row = ((kt - rlo) * np1 + m2) * m
                    for m1 in range(np1):
                        col = ((it - clo) * np1 + m1) * m
                        blk, sign = self.resolve(kt, it, m2, m1)
                        if blk is None:
                            continue
                        part[row : row + m] += sign * (blk @ x[col : col + m])
            y += part
        return y

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.matvec(x)


def _assemble_position(args):
    mesh, grid, kt, it, config = args
    tables = tables_for(grid)
    return (kt, it), assemble_subblocks(mesh, grid, tables, kt, it, config)


def assemble_system(
    mesh: SurfaceMesh,
    grid: TimeGrid,
    tables: PrototypeTables | None = None,
    config: QuadratureConfig = QuadratureConfig(),
    plan: DistributionPlan | None = None,
    workers: int | None = None,
) -> BlockHessenbergMatrix:
    """Assemble all canonical blocks of the global matrix.

    Block positions are computed independently (one worker each, in the
    process pool when workers > 1), so the assembled values are identical
    for every worker count.
    """
    if workers is None:
        workers = int(os.environ.get("TDBEM_WORKERS", "1"))
    if plan is None:
        plan = plan_distribution(grid, mesh, max(1, workers))
    if tables is None:
        tables = tables_for(grid)
    A = BlockHessenbergMatrix(grid=grid, M=mesh.num_vertices, diameter=mesh.diameter, plan=plan)

    positions = set()
    for kt in range(1, grid.N + 1):
        for it in range(1, grid.N + 1):
            if A.is_zero_position(kt, it):
                continue
            pos = canonical_position(grid, kt, it)
            if pos is not None:
                positions.add(pos)
    todo = sorted(positions)
    if workers > 1:
        args = [(mesh, grid, kt, it, config) for kt, it in todo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, blocks in pool.map(_assemble_position, args, chunksize=1):
                A.unique_blocks[key] = blocks
    else:
        for kt, it in todo:
            A.unique_blocks[(kt, it)] = assemble_subblocks(mesh, grid, tables, kt, it, config)

    # inner canonical positions keep only m1 <= m2; the rest is sign reuse
    np1 = grid.p + 1
    for (kt, it), blocks in A.unique_blocks.items():
        if _is_inner(grid, kt) and _is_inner(grid, it):
            for m2 in range(np1):
                for m1 in range(m2 + 1, np1):
                    blocks[m2][m1] = None
    return A


def reconstruct_dense(A: BlockHessenbergMatrix, cap: int = 20000) -> np.ndarray:
    """Materialize the full matrix entrywise through the block index."""
    n = A.grid.L * A.M
    if n > cap:
        raise ValueError(f"dense reconstruction of size {n} exceeds cap {cap}")
    np1 = A.grid.p + 1
    m = A.M
    out = np.zeros((n, n))
    for kt in range(1, A.grid.N + 1):
        for it in range(1, A.grid.N + 1):
            for m2 in range(np1):
                for m1 in range(np1):
                    blk, sign = A.resolve(kt, it, m2, m1)
                    if blk is None:
                        continue
                    r = ((kt - 1) * np1 + m2) * m
                    c = ((it - 1) * np1 + m1) * m
                    out[r : r + m, c : c + m] = sign * blk.toarray()
    return out
