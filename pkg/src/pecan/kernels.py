"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

Two inner loops dominate large runs: propagating visited-node relevance
through the edge set (a transposed sparse matrix-vector product) and
collapsing token-level attention into per-summary-point rows. Both ship in
two implementations:

* ``*_numba`` — ``@njit`` compiled, used by default when numba imports;
* ``*_numpy`` — vectorized numpy, always available.

Set ``PECAN_NUMBA=0`` (or ``false``/``off``) before import to force the
numpy path. ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("PECAN_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "off", "no")

try:  # pragma: no cover - exercised implicitly by import
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return decorator


USE_NUMBA = NUMBA_AVAILABLE and _WANT_NUMBA


# -- relevance propagation: z = E^T r ------------------------------------


def propagate_scores_numpy(
    indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray, r: np.ndarray
) -> np.ndarray:
    """z[dst] = sum over edges (src->dst) of r[src] * weight.

    CSR keyed by source node; only rows with nonzero relevance contribute.
    """
    n = r.shape[0]
    z = np.zeros(n, dtype=np.float64)
    src_ids = np.nonzero(r)[0]
    for i in src_ids:
        lo, hi = indptr[i], indptr[i + 1]
        np.add.at(z, indices[lo:hi], r[i] * weights[lo:hi])
    return z


@njit(cache=True)
def _propagate_scores_numba(indptr, indices, weights, r, out):  # pragma: no cover - jitted
    for i in range(r.shape[0]):
        ri = r[i]
        if ri == 0.0:
            continue
        for k in range(indptr[i], indptr[i + 1]):
            out[indices[k]] += ri * weights[k]


def propagate_scores_numba(
    indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray, r: np.ndarray
) -> np.ndarray:
    out = np.zeros(r.shape[0], dtype=np.float64)
    _propagate_scores_numba(indptr, indices, weights, r, out)
    return out


# -- span means over token-level attention --------------------------------


def span_means_numpy(attn: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Row m = mean of attn rows in [starts[m], ends[m])."""
    m = starts.shape[0]
    out = np.empty((m, attn.shape[1]), dtype=np.float64)
    for j in range(m):
        out[j] = attn[starts[j] : ends[j]].mean(axis=0)
    return out


@njit(cache=True)
def _span_means_numba(attn, starts, ends, out):  # pragma: no cover - jitted
    k = attn.shape[1]
    for j in range(starts.shape[0]):
        lo, hi = starts[j], ends[j]
        span = hi - lo
        for c in range(k):
            acc = 0.0
            for t in range(lo, hi):
                acc += attn[t, c]
            out[j, c] = acc / span


def span_means_numba(attn: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    out = np.empty((starts.shape[0], attn.shape[1]), dtype=np.float64)
    _span_means_numba(
        np.ascontiguousarray(attn, dtype=np.float64),
        starts.astype(np.int64),
        ends.astype(np.int64),
        out,
    )
    return out


# -- dispatch --------------------------------------------------------------

if USE_NUMBA:
    propagate_scores = propagate_scores_numba
    span_means = span_means_numba
else:
    propagate_scores = propagate_scores_numpy
    span_means = span_means_numpy


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def warmup() -> None:
    """Trigger JIT compilation on tiny inputs so timed paths stay flat."""
    if not USE_NUMBA:
        return
    indptr = np.array([0, 1], dtype=np.int64)
    indices = np.array([0], dtype=np.int64)
    weights = np.array([1.0])
    propagate_scores(indptr, indices, weights, np.array([1.0]))
    span_means(np.ones((2, 2)), np.array([0], dtype=np.int64), np.array([2], dtype=np.int64))
