"""Lattice bookkeeping: row-major site indexing and displacement classes.

A displacement class is every unordered site pair {x, x+delta} of the box for
one canonical delta. Long-range samplers walk the classes in a fixed order, so
two samplers fed the same stream see the same uniform for the same pair.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import Boundary, LatticeBox


def site_index(coords: np.ndarray, side: int) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.int64)
    d = coords.shape[-1]
    strides = side ** np.arange(d - 1, -1, -1, dtype=np.int64)
    return coords @ strides


def lattice_distance(a: np.ndarray, b: np.ndarray, box: LatticeBox) -> np.ndarray:
    """Euclidean distance between coordinate rows under the box boundary."""
    diff = np.abs(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64))
    if box.boundary is Boundary.TORUS:
        diff = np.minimum(diff, box.side - diff)
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class DisplacementClasses:
    delta: np.ndarray   # (K, d) canonical displacement per class
    sqnorm: np.ndarray  # (K,) squared Euclidean length under the boundary metric
    count: np.ndarray   # (K,) number of unordered pairs in the class
    self_inverse: np.ndarray  # (K,) torus classes where delta == -delta mod side

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(self.sqnorm.astype(np.float64))

    def __len__(self):
        return int(self.count.size)


@lru_cache(maxsize=32)
def displacement_classes(box: LatticeBox) -> DisplacementClasses:
    d, n = box.d, box.side
    if box.boundary is Boundary.FREE:
        span = np.indices((2 * n - 1,) * d).reshape(d, -1).T - (n - 1)
        # keep delta whose first nonzero coordinate is positive
        nz = span != 0
        first = np.argmax(nz, axis=1)
        lead = span[np.arange(span.shape[0]), first]
        delta = span[nz.any(axis=1) & (lead > 0)]
        count = np.prod(n - np.abs(delta), axis=1)
        sq = np.sum(delta * delta, axis=1)
        self_inv = np.zeros(delta.shape[0], dtype=bool)
    else:
        span = np.indices((n,) * d).reshape(d, -1).T[1:]
        neg = (-span) % n
        span_key = site_index(span, n)
        neg_key = site_index(neg, n)
        keep = span_key <= neg_key
        delta = span[keep]
        self_inv = (span_key == neg_key)[keep]
        count = np.where(self_inv, n ** d // 2, n ** d)
        wrap = np.minimum(delta, n - delta)
        sq = np.sum(wrap * wrap, axis=1)
    return DisplacementClasses(delta.astype(np.int64), sq.astype(np.int64),
                               count.astype(np.int64), self_inv)


def class_pairs(box: LatticeBox, delta: np.ndarray, self_inverse: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """All (src, dst) site indices of one displacement class, in a fixed order."""
    n = box.side
    delta = np.asarray(delta, dtype=np.int64)
    if box.boundary is Boundary.FREE:
        lo = np.maximum(0, -delta)
        extent = n - np.abs(delta)
        start = np.indices(tuple(extent)).reshape(box.d, -1).T + lo
        return site_index(start, n), site_index(start + delta, n)
    start = box.coords()
    src = site_index(start, n)
    dst = site_index((start + delta) % n, n)
    if self_inverse:
        keep = src < dst
        return src[keep], dst[keep]
    return src, dst


def class_pairs_at(box: LatticeBox, delta: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairs number `idx` of a free-boundary class without materialising it."""
    if box.boundary is not Boundary.FREE:
        raise ValueError("direct pair indexing needs a free boundary")
    n = box.side
    delta = np.asarray(delta, dtype=np.int64)
    lo = np.maximum(0, -delta)
    extent = tuple(int(e) for e in n - np.abs(delta))
    start = np.stack(np.unravel_index(np.asarray(idx, dtype=np.int64), extent), axis=-1) + lo
    return site_index(start, n), site_index(start + delta, n)


def nn_pairs(box: LatticeBox) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbour pairs, axis by axis, in a fixed order."""
    srcs, dsts = [], []
    for axis in range(box.d):
        delta = np.zeros(box.d, dtype=np.int64)
        delta[axis] = 1
        if box.boundary is Boundary.TORUS and box.side == 2:
            s, t = class_pairs(box, delta, self_inverse=True)
        else:
            s, t = class_pairs(box, delta)
        srcs.append(s)
        dsts.append(t)
    return np.concatenate(srcs), np.concatenate(dsts)


def face_sites(box: LatticeBox) -> tuple[np.ndarray, np.ndarray]:
    """Sites with first coordinate 0 and side-1 (left and right faces)."""
    coords = box.coords()
    return np.flatnonzero(coords[:, 0] == 0), np.flatnonzero(coords[:, 0] == box.side - 1)
