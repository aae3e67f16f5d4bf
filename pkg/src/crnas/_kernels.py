"""Hot loops for birth-death simulation.

Each kernel has a numba ``@njit`` version and a numpy fallback with the same
signature. The numba path is used unless ``CRNAS_DISABLE_NUMBA`` is set to a
non-empty value other than ``0`` or numba is not importable. Both paths are
exact Gillespie simulations but draw from different random streams, so results
agree in distribution, not bit for bit.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CRNAS_DISABLE_NUMBA", "") in ("", "0")


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------- numpy


def bd_path_numpy(x0, birth, death, times, seed):
    """One trajectory from ``x0`` observed at sorted ``times``."""
    rng = np.random.default_rng(seed)
    total = birth + death
    out = np.empty(len(times), dtype=np.int64)
    x = int(x0)
    t = 0.0
    j = 0
    n = len(times)
    while j < n:
        if x == 0 or total <= 0.0:
            out[j:] = x
            break
        t += rng.exponential(1.0 / (x * total))
        while j < n and times[j] < t:
            out[j] = x
            j += 1
        if rng.random() * total < birth:
            x += 1
        else:
            x -= 1
    return out


def bd_endpoints_numpy(x0, birth, death, t_end, seed):
    """Independent runs ``i`` from ``x0[i]`` to ``t_end[i]``; returns final counts.

    Vectorized across runs: every live run advances one event per sweep.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x0, dtype=np.int64)
    t_end = np.asarray(t_end, dtype=float)
    t = np.zeros(x.size)
    total = birth + death
    if total <= 0.0:
        return x
    pb = birth / total
    live = np.flatnonzero((x > 0) & (t_end > 0))
    while live.size:
        t_new = t[live] + rng.exponential(1.0, live.size) / (x[live] * total)
        fire = t_new <= t_end[live]
        idx = live[fire]
        t[idx] = t_new[fire]
        x[idx] += np.where(rng.random(idx.size) < pb, 1, -1)
        live = idx[x[idx] > 0]
    return x


# --------------------------------------------------------------------------- numba

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _bd_path_nb(x0, birth, death, times, seed):
        np.random.seed(seed)
        total = birth + death
        n = times.shape[0]
        out = np.empty(n, dtype=np.int64)
        x = x0
        t = 0.0
        j = 0
        while j < n:
            if x == 0 or total <= 0.0:
                for i in range(j, n):
                    out[i] = x
                break
            t += np.random.exponential(1.0) / (x * total)
            while j < n and times[j] < t:
                out[j] = x
                j += 1
            if np.random.random() * total < birth:
                x += 1
            else:
                x -= 1
        return out

    @njit(cache=True, nogil=True)
    def _bd_endpoints_nb(x0, birth, death, t_end, seed):
        np.random.seed(seed)
        total = birth + death
        out = x0.copy()
        if total <= 0.0:
            return out
        for i in range(x0.shape[0]):
            x = x0[i]
            t = 0.0
            te = t_end[i]
            while x > 0:
                t += np.random.exponential(1.0) / (x * total)
                if t > te:
                    break
                if np.random.random() * total < birth:
                    x += 1
                else:
                    x -= 1
            out[i] = x
        return out


def bd_path(x0, birth, death, times, seed, use_numba=None):
    use = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    times = np.ascontiguousarray(times, dtype=np.float64)
    if use:
        return _bd_path_nb(np.int64(x0), float(birth), float(death), times, np.int64(seed))
    return bd_path_numpy(int(x0), float(birth), float(death), times, seed)


def bd_endpoints(x0, birth, death, t_end, seed, use_numba=None):
    use = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    x0 = np.ascontiguousarray(x0, dtype=np.int64)
    t_end = np.ascontiguousarray(np.broadcast_to(t_end, x0.shape), dtype=np.float64)
    if use:
        return _bd_endpoints_nb(x0, float(birth), float(death), t_end, np.int64(seed))
    return bd_endpoints_numpy(x0, float(birth), float(death), t_end, seed)
