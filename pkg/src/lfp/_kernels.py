"""Hot numeric kernels, JIT-compiled with numba when available.

Set ``LFP_NO_NUMBA=1`` to force the plain NumPy/Python implementations.
Both paths run the exact same code; the flag only controls whether the
functions are wrapped with ``numba.njit``.  ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

import numpy as np


def _hysteresis_runs_impl(probs, on_threshold, off_threshold):
    """Find maximal frame runs that cross ``on_threshold`` and stay at or
    above ``off_threshold``.

    Returns an (n_runs, 2) int64 array of [start, end) frame indices.
    """
    n = probs.shape[0]
    starts = np.empty(n, np.int64)
    ends = np.empty(n, np.int64)
    count = 0
    active = False
    start = 0
    for i in range(n):
        p = probs[i]
        if not active:
            if p >= on_threshold:
                active = True
                start = i
        elif p < off_threshold:
            starts[count] = start
            ends[count] = i
            count += 1
            active = False
    if active:
        starts[count] = start
        ends[count] = n
        count += 1
    out = np.empty((count, 2), np.int64)
    for k in range(count):
        out[k, 0] = starts[k]
        out[k, 1] = ends[k]
    return out


def _levenshtein_counts_impl(ref_ids, hyp_ids):
    """Minimum-cost word alignment with unit costs.

    Among all minimum-cost alignments, picks the one with the most
    substitutions (substitution preferred over an insertion+deletion pair).
    Returns (total_cost, substitutions).
    """
    n = ref_ids.shape[0]
    m = hyp_ids.shape[0]
    cost = np.empty((n + 1, m + 1), np.int64)
    subs = np.empty((n + 1, m + 1), np.int64)
    cost[0, 0] = 0
    subs[0, 0] = 0
    for j in range(1, m + 1):
        cost[0, j] = j
        subs[0, j] = 0
    for i in range(1, n + 1):
        cost[i, 0] = i
        subs[i, 0] = 0
        for j in range(1, m + 1):
            if ref_ids[i - 1] == hyp_ids[j - 1]:
                best_c = cost[i - 1, j - 1]
                best_s = subs[i - 1, j - 1]
            else:
                best_c = cost[i - 1, j - 1] + 1
                best_s = subs[i - 1, j - 1] + 1
            c = cost[i - 1, j] + 1  # deletion
            s = subs[i - 1, j]
            if c < best_c or (c == best_c and s > best_s):
                best_c = c
                best_s = s
            c = cost[i, j - 1] + 1  # insertion
            s = subs[i, j - 1]
            if c < best_c or (c == best_c and s > best_s):
                best_c = c
                best_s = s
            cost[i, j] = best_c
            subs[i, j] = best_s
    return cost[n, m], subs[n, m]


def _numba_wanted() -> bool:
    if os.environ.get("LFP_NO_NUMBA", "").strip().lower() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_wanted()

if NUMBA_ENABLED:
    from numba import njit

    hysteresis_runs = njit(cache=True)(_hysteresis_runs_impl)
    levenshtein_counts = njit(cache=True)(_levenshtein_counts_impl)
else:
    hysteresis_runs = _hysteresis_runs_impl
    levenshtein_counts = _levenshtein_counts_impl
