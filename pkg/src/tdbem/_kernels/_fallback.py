"""Pure-NumPy implementation of the assembly hot kernel.

Vectorized over a chunk of triangle pairs sharing one reference rule.  All
per-pair reductions are independent of the chunk composition, which keeps
assembled values bit-identical for any chunking of the pair list.
"""

import numpy as np

_INV4PI = 1.0 / (4.0 * np.pi)


def _eval_table(pack, t, a):
    """Evaluate packed piecewise Chebyshev table t at offsets a (any shape)."""
    out = np.zeros_like(a)
    if not pack.active[t]:
        return out
    lo = pack.lo[t]
    width = pack.width[t]
    nsub = pack.nsub[t]
    inside = (a >= lo) & (a <= lo + nsub * width)
    if not np.any(inside):
        return out
    ai = a[inside]
    idx = np.minimum(((ai - lo) / width).astype(np.int64), nsub - 1)
    x = np.clip(2.0 * (ai - lo - idx * width) / width - 1.0, -1.0, 1.0)
    coeffs = pack.coeffs[t]
    deg = coeffs.shape[1] - 1
    b1 = np.zeros_like(ai)
    b2 = np.zeros_like(ai)
    for k in range(deg, 0, -1):
        b1, b2 = 2.0 * x * b1 - b2 + coeffs[idx, k], b1
    out[inside] = x * b1 - b2 + coeffs[idx, 0]
    return out


def _eval_weight(pack, t, r):
    """Weight value at distances r: offset shift plus symmetry folding."""
    a = r + pack.delta
    if not pack.fold[t]:
        return _eval_table(pack, t, a)
    pos = _eval_table(pack, t, np.abs(a))
    return np.where(a >= 0.0, pack.sp[t] * pos, pack.sn[t] * pos)


def pair_block_contributions(cx, cy, a2x, a2y, ndot, curly, curlx, xhat, yhat, wq, pack):
    """Per-pair Galerkin contributions for one reference rule.

    cx, cy: (npair, 3, 3) chart corners; a2x, a2y: (npair,) doubled areas;
    ndot: (npair,) normal dot products; curly, curlx: (npair, 3, 3) surface
    curls per chart vertex; xhat, yhat: (nq, 2) reference points; wq: (nq,)
    reference weights; pack: PsiPack with the temporal weight tables.
    Returns (npair, p+1, p+1, 3, 3) values [pair, m2, m1, a(y), b(x)].
    """
    np1 = pack.p + 1
    X = (
        cx[:, None, 0, :]
        + xhat[None, :, 0, None] * (cx[:, 1] - cx[:, 0])[:, None, :]
        + xhat[None, :, 1, None] * (cx[:, 2] - cx[:, 1])[:, None, :]
    )
    Y = (
        cy[:, None, 0, :]
        + yhat[None, :, 0, None] * (cy[:, 1] - cy[:, 0])[:, None, :]
        + yhat[None, :, 1, None] * (cy[:, 2] - cy[:, 1])[:, None, :]
    )
    r = np.sqrt(np.sum((X - Y) ** 2, axis=2))  # (npair, nq)
    common = (_INV4PI * (a2x * a2y))[:, None] * wq[None, :] / r
    shx = np.column_stack([1.0 - xhat[:, 0], xhat[:, 0] - xhat[:, 1], xhat[:, 1]])
    shy = np.column_stack([1.0 - yhat[:, 0], yhat[:, 0] - yhat[:, 1], yhat[:, 1]])
    curl_dot = np.einsum("pad,pbd->pab", curly, curlx)

    out = np.empty((len(cx), np1, np1, 3, 3))
    for m2 in range(np1):
        for m1 in range(np1):
            t = (m2 * np1 + m1) * 2
            psi = _eval_weight(pack, t, r)
            psit = _eval_weight(pack, t + 1, r)
            S = np.einsum("pq,qa,qb->pab", common * psi, shy, shx)
            s = (common * psit).sum(axis=1)
            out[:, m2, m1] = ndot[:, None, None] * S + curl_dot * s[:, None, None]
    return out
