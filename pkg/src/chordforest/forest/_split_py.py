"""Pure-numpy split-search kernel (fallback backend).

The compiled kernel in ``_split_cy.pyx`` must stay bit-identical to this
module: same stable sort permutation, same prefix-sum accumulation order,
same gain expression, same strictly-greater tie handling.  Any change here
must be mirrored there (the parity test suite enforces it).
"""

from __future__ import annotations

import numpy as np


def best_split(X, y, samples, start, end, features, min_leaf):
    """Best (feature, threshold) by SSE decrease over a node's sample range.

    ``samples[start:end]`` are row indices into ``X``/``y``.  Thresholds are
    midpoints between consecutive distinct sorted values; candidate splits
    must leave at least ``min_leaf`` rows on each side.  Returns
    ``(feature, threshold, gain)`` with ``feature == -1`` when no split has
    positive gain.  Ties in gain resolve to the lowest feature index, then
    the lowest threshold.
    """
    m = end - start
    if m < 2:
        return -1, 0.0, 0.0
    seg = samples[start:end]
    xs_all = X[seg][:, features]
    ys_node = y[seg]

    order = np.argsort(xs_all, axis=0, kind="stable")
    xs = np.take_along_axis(xs_all, order, axis=0)
    ys = ys_node[order]

    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    total_sum = csum[-1]
    total_sq = csq[-1]
    sse_parent = total_sq - total_sum * total_sum / m

    nl = np.arange(1, m, dtype=np.float64)[:, None]
    nr = m - nl
    sl = csum[:-1]
    sql = csq[:-1]
    sr = total_sum - sl
    sqr = total_sq - sql
    gain = sse_parent - (sql - sl * sl / nl) - (sqr - sr * sr / nr)

    valid = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return -1, 0.0, 0.0
    masked = np.where(valid, gain, -np.inf)
    # column-major flatten = feature-major traversal; argmax keeps the first
    # maximum, i.e. lowest feature index then lowest threshold
    flat_idx = int(np.argmax(masked.ravel(order="F")))
    col, pos = divmod(flat_idx, m - 1)
    best_gain = float(masked[pos, col])
    if not best_gain > 0.0:
        return -1, 0.0, 0.0
    threshold = float((xs[pos, col] + xs[pos + 1, col]) / 2.0)
    return int(features[col]), threshold, best_gain


def partition(X, samples, start, end, feature, threshold):
    """Stable in-place partition of ``samples[start:end]`` by x <= threshold.

    Returns the number of rows routed left.  Relative order is preserved on
    both sides so traversal stays identical across backends.
    """
    seg = samples[start:end]
    left = X[seg, feature] <= threshold
    n_left = int(np.count_nonzero(left))
    samples[start:end] = np.concatenate([seg[left], seg[~left]])
    return n_left
