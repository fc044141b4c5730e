"""NumPy reference implementations of the hot kernels.

Signatures mirror ``_ckernels.pyx`` exactly; ``kernels.py`` picks one.
"""

from __future__ import annotations

import numpy as np


def sq_euclidean(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d0 = x[:, 0, None] - y[None, :, 0]
    d1 = x[:, 1, None] - y[None, :, 1]
    return d0 * d0 + d1 * d1


def _neg_softmin(base: np.ndarray, axis: int) -> np.ndarray:
    # log-sum-exp along axis with max shift
    m = base.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(base - m).sum(axis=axis))


def sinkhorn_log(
    C: np.ndarray,
    log_a: np.ndarray,
    log_b: np.ndarray,
    eps: float,
    tol: float,
    max_iter: int,
    f: np.ndarray,
    g: np.ndarray,
    history: np.ndarray,
) -> int:
    """Alternating log-domain updates of ``f`` and ``g`` in place.

    Returns the number of completed (f, g) sweeps. ``history[k]`` receives
    the row-marginal L-inf error before sweep ``k``; column marginals are
    exact after every sweep so this is the full residual.
    """
    a = np.exp(log_a)
    inv = 1.0 / eps
    for it in range(max_iter + 1):
        f_new = -eps * _neg_softmin(log_b[None, :] + (g[None, :] - C) * inv, axis=1)
        res = np.max(np.abs(a * np.expm1((f - f_new) * inv)))
        history[it] = res
        if it == max_iter or (it > 0 and res <= tol):
            return it
        f[:] = f_new
        g[:] = -eps * _neg_softmin(log_a[:, None] + (f[:, None] - C) * inv, axis=0)
    return max_iter
