"""Backend selection for the hot assembly kernels.

The compiled Cython extension is used when available; setting the
environment variable TDBEM_FORCE_PY (to any non-empty value) forces the
pure-NumPy fallback.  Both backends implement the same contract:

pair_block_contributions(cx, cy, a2x, a2y, ndot, curly, curlx, xhat, yhat,
                         wq, pack)
    -> values of shape (npair, p+1, p+1, 3, 3)

where entry [pair, m2, m1, a, b] is the contribution of one triangle pair to
sub-block (m2, m1) at (row dof = chart vertex a of the y triangle, col dof =
chart vertex b of the x triangle).
"""

import os

if os.environ.get("TDBEM_FORCE_PY"):
    from . import _fallback as _impl

    backend_name = "python"
else:
    try:
        from . import _core as _impl

        backend_name = "compiled"
    except ImportError:
        from . import _fallback as _impl

        backend_name = "python"

pair_block_contributions = _impl.pair_block_contributions

__all__ = ["pair_block_contributions", "backend_name"]
