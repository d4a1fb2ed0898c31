"""Hot numeric kernels: grouped tallies, missing-aware SMA, pairwise Pearson.

Two interchangeable implementations exist for every kernel: a numba
``@njit`` loop and a vectorized pure-numpy path.  The active backend is
chosen at import time from the ``BELIEFSTREAM_KERNELS`` environment
variable: ``numba`` (require numba, error if missing), ``numpy`` (force
the fallback), or ``auto`` (default: numba when importable).

``benchmarks/bench_kernels.py`` times both paths side by side.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError

ENV_VAR = "BELIEFSTREAM_KERNELS"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAS_NUMBA = False


# ---------------------------------------------------------------------------
# cell counts: per-cell bullish/bearish tallies over a filtered corpus
# ---------------------------------------------------------------------------

def _cell_counts_loop(cell_idx, labels, n_cells):
    bull = np.zeros(n_cells, np.int64)
    bear = np.zeros(n_cells, np.int64)
    for i in range(cell_idx.shape[0]):
        c = cell_idx[i]
        if labels[i] > 0:
            bull[c] += 1
        elif labels[i] < 0:
            bear[c] += 1
    return bull, bear


def _cell_counts_numpy(cell_idx, labels, n_cells):
    bull = np.bincount(cell_idx[labels > 0], minlength=n_cells)
    bear = np.bincount(cell_idx[labels < 0], minlength=n_cells)
    return bull.astype(np.int64), bear.astype(np.int64)


# ---------------------------------------------------------------------------
# SMA over a series with NaN missing values
# ---------------------------------------------------------------------------
# Window at position t covers the `window` previous positions t-1..t-window
# (or t..t-window+1 when include_current).  Output is NaN when fewer than
# min_obs of the window's values are present.  Both implementations add
# lagged values in the same ascending-lag order so results match bit for bit.

def _sma_missing_loop(values, window, min_obs, include_current):
    n = values.shape[0]
    out = np.full(n, np.nan)
    start = 0 if include_current else 1
    for t in range(n):
        s = 0.0
        c = 0
        for q in range(start, start + window):
            j = t - q
            if j < 0:
                break
            v = values[j]
            if not np.isnan(v):
                s += v
                c += 1
        if c >= min_obs:
            out[t] = s / c
    return out


def _sma_missing_numpy(values, window, min_obs, include_current):
    n = values.shape[0]
    present = ~np.isnan(values)
    filled = np.where(present, values, 0.0)
    sums = np.zeros(n)
    cnts = np.zeros(n, np.int64)
    start = 0 if include_current else 1
    for q in range(start, start + window):
        if q == 0:
            sums += filled
            cnts += present
        elif q < n:
            sums[q:] += filled[:-q]
            cnts[q:] += present[:-q]
    out = np.full(n, np.nan)
    ok = cnts >= min_obs
    np.divide(sums, cnts, out=out, where=ok)
    return out


# ---------------------------------------------------------------------------
# pairwise-complete Pearson correlation matrix
# ---------------------------------------------------------------------------

def _pairwise_pearson_loop(data, min_overlap):
    n, t = data.shape
    out = np.full((n, n), np.nan)
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i):
            cnt = 0
            mx = 0.0
            my = 0.0
            for k in range(t):
                x = data[i, k]
                y = data[j, k]
                if not (np.isnan(x) or np.isnan(y)):
                    cnt += 1
                    mx += x
                    my += y
            if cnt < min_overlap or cnt == 0:
                continue
            mx /= cnt
            my /= cnt
            sxx = 0.0
            syy = 0.0
            sxy = 0.0
            for k in range(t):
                x = data[i, k]
                y = data[j, k]
                if not (np.isnan(x) or np.isnan(y)):
                    dx = x - mx
                    dy = y - my
                    sxx += dx * dx
                    syy += dy * dy
                    sxy += dx * dy
            if sxx > 0.0 and syy > 0.0:
                r = sxy / np.sqrt(sxx * syy)
                if r > 1.0:
                    r = 1.0
                elif r < -1.0:
                    r = -1.0
                out[i, j] = r
                out[j, i] = r
    return out


def _pearson_pair_numpy(x, y, min_overlap):
    m = ~(np.isnan(x) | np.isnan(y))
    cnt = int(m.sum())
    if cnt < min_overlap or cnt == 0:
        return np.nan
    xs = x[m]
    ys = y[m]
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx <= 0.0 or syy <= 0.0:
        return np.nan
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _pairwise_pearson_numpy(data, min_overlap):
    n = data.shape[0]
    out = np.full((n, n), np.nan)
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i):
            r = _pearson_pair_numpy(data[i], data[j], min_overlap)
            out[i, j] = r
            out[j, i] = r
    return out


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _resolve_backend() -> str:
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ConfigError(f"{ENV_VAR} must be auto, numba, or numpy (got {choice!r})")
    if choice == "numpy":
        return "numpy"
    if choice == "numba" and not HAS_NUMBA:
        raise ConfigError(f"{ENV_VAR}=numba but numba is not importable")
    return "numba" if HAS_NUMBA else "numpy"


BACKEND = _resolve_backend()

NUMPY_IMPL = {
    "cell_counts": _cell_counts_numpy,
    "sma_missing": _sma_missing_numpy,
    "pairwise_pearson": _pairwise_pearson_numpy,
}

if HAS_NUMBA:
    NUMBA_IMPL = {
        "cell_counts": njit(cache=True)(_cell_counts_loop),
        "sma_missing": njit(cache=True)(_sma_missing_loop),
        "pairwise_pearson": njit(cache=True)(_pairwise_pearson_loop),
    }
else:  # pragma: no cover
    NUMBA_IMPL = None

_ACTIVE = NUMBA_IMPL if BACKEND == "numba" else NUMPY_IMPL


def backend() -> str:
    """Name of the kernel backend selected at import time."""
    return BACKEND


def cell_counts(cell_idx: np.ndarray, labels: np.ndarray, n_cells: int):
    """Tally bullish (label>0) and bearish (label<0) rows per cell index."""
    return _ACTIVE["cell_counts"](
        np.ascontiguousarray(cell_idx, np.int64),
        np.ascontiguousarray(labels, np.int8),
        n_cells,
    )


def sma_missing(
    values: np.ndarray, window: int, min_obs: int, include_current: bool = False
) -> np.ndarray:
    """Trailing moving average of the previous `window` values, NaN-aware."""
    return _ACTIVE["sma_missing"](
        np.ascontiguousarray(values, np.float64), window, min_obs, include_current
    )


def pairwise_pearson(data: np.ndarray, min_overlap: int) -> np.ndarray:
    """Pairwise-complete Pearson matrix of the rows of `data` (NaN = missing)."""
    return _ACTIVE["pairwise_pearson"](
        np.ascontiguousarray(data, np.float64), min_overlap
    )
