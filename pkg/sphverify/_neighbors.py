"""Fixed-radius neighbor search.

Neighbors are stored as flat pair arrays (``dst``, ``src``) sorted by
destination and then by source index; every reduction over neighbors sums in
this order, which keeps runs reproducible.

The default backend is a cell list with cell size equal to the cutoff over
the bounding box padded by one cell; each destination scans its own cell
and the eight surrounding ones. The ``kdtree`` backend uses scipy's cKDTree
and returns the same pairs.
"""

import numpy as np
from scipy.spatial import cKDTree


class NeighborLists:
    """Sorted destination/source pairs with CSR offsets."""

    def __init__(self, dst, src, n_dst):
        order = np.lexsort((src, dst))
        self.dst = np.asarray(dst, dtype=np.int64)[order]
        self.src = np.asarray(src, dtype=np.int64)[order]
        self.n_dst = n_dst
        self.offsets = np.searchsorted(self.dst, np.arange(n_dst + 1))

    def __len__(self):
        return len(self.dst)

    def __getitem__(self, i):
        """Source indices neighboring destination i."""
        return self.src[self.offsets[i]:self.offsets[i + 1]]

    def counts(self):
        return np.diff(self.offsets)

    def sum(self, values):
        """Sum per-pair values onto their destinations.

        values has shape (n_pairs, ...) and the result (n_dst, ...).
        """
        values = np.asarray(values, dtype=float)
        trailing = values.shape[1:]
        flat = values.reshape(len(values), -1)
        out = np.empty((self.n_dst, flat.shape[1]))
        for k in range(flat.shape[1]):
            out[:, k] = np.bincount(
                self.dst, weights=flat[:, k], minlength=self.n_dst)
        return out.reshape((self.n_dst, *trailing))


def _cell_pairs(dst_pos, src_pos, cutoff):
    lo = np.minimum(dst_pos.min(axis=0), src_pos.min(axis=0)) - cutoff
    src_cell = np.floor((src_pos - lo) / cutoff).astype(np.int64)
    dst_cell = np.floor((dst_pos - lo) / cutoff).astype(np.int64)
    ny = max(src_cell[:, 1].max(), dst_cell[:, 1].max()) + 2
    src_key = src_cell[:, 0] * ny + src_cell[:, 1]
    order = np.argsort(src_key, kind='stable')
    sorted_key = src_key[order]
    n_dst = len(dst_pos)
    dsts, srcs = [], []
    for ox in (-1, 0, 1):
        for oy in (-1, 0, 1):
            key = (dst_cell[:, 0] + ox) * ny + dst_cell[:, 1] + oy
            start = np.searchsorted(sorted_key, key, side='left')
            count = np.searchsorted(sorted_key, key, side='right') - start
            total = count.sum()
            if not total:
                continue
            first = np.repeat(np.cumsum(count) - count, count)
            within = np.arange(total) - first
            dsts.append(np.repeat(np.arange(n_dst), count))
            srcs.append(order[np.repeat(start, count) + within])
    if not dsts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(dsts), np.concatenate(srcs)


def _kdtree_pairs(dst_pos, src_pos, cutoff):
    lists = cKDTree(src_pos).query_ball_point(dst_pos, r=cutoff)
    count = np.fromiter(map(len, lists), dtype=np.int64, count=len(lists))
    dst = np.repeat(np.arange(len(dst_pos)), count)
    src = np.fromiter((j for nb in lists for j in nb), dtype=np.int64,
                      count=count.sum())
    return dst, src


_BACKENDS = {"cells": _cell_pairs, "kdtree": _kdtree_pairs}


def build_neighbors(positions, cutoff, sources=None, method="cells"):
    """Find all sources strictly closer than cutoff to each destination.

    Parameters
    ----------
    positions : (n, 2) array
        Destination positions.
    cutoff : float
        Search radius, normally the kernel support radius.
    sources : (m, 2) array, optional
        Source positions. When omitted the destinations are their own
        sources and self pairs are excluded.
    method : str
        ``cells`` or ``kdtree``.

    Returns
    -------
    NeighborLists
    """
    if method not in _BACKENDS:
        raise ValueError(f"Unsupported neighbor search method {method}")
    dst_pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    same = sources is None
    src_pos = dst_pos if same else np.asarray(sources, dtype=float).reshape(-1, 2)
    if not len(dst_pos) or not len(src_pos):
        return NeighborLists(np.zeros(0, dtype=np.int64),
                             np.zeros(0, dtype=np.int64), len(dst_pos))
    dst, src = _BACKENDS[method](dst_pos, src_pos, cutoff)
    r2 = np.sum((dst_pos[dst] - src_pos[src])**2, axis=1)
    keep = r2 < cutoff * cutoff
    if same:
        keep &= dst != src
    return NeighborLists(dst[keep], src[keep], len(dst_pos))
