"""Dense GF(2) elimination for matrices too large for :class:`BinMatrix`.

Inputs and outputs are ``uint8`` arrays of zeros and ones; rows are packed into
``uint64`` words internally.
"""

from __future__ import annotations

import numpy as np


def _pack(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.uint8)
    rows, cols = a.shape
    nbytes = -(-cols // 64) * 8
    packed = np.zeros((rows, nbytes), dtype=np.uint8)
    if cols:
        packed[:, : -(-cols // 8)] = np.packbits(a, axis=1, bitorder="little")
    return packed.view(np.uint64)


def _unpack(words: np.ndarray, cols: int) -> np.ndarray:
    raw = words.view(np.uint8)
    return np.unpackbits(raw, axis=1, bitorder="little", count=cols).astype(np.uint8)


def rref(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (matrix, pivot columns)."""
    a = np.asarray(a)
    rows, cols = a.shape
    m = _pack(a)
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        w, b = divmod(c, 64)
        colbits = (m[r:, w] >> np.uint64(b)) & np.uint64(1)
        nz = np.flatnonzero(colbits)
        if nz.size == 0:
            continue
        sel = r + nz[0]
        if sel != r:
            m[[r, sel]] = m[[sel, r]]
        hit = np.flatnonzero((m[:, w] >> np.uint64(b)) & np.uint64(1))
        hit = hit[hit != r]
        if hit.size:
            # rows at and below r are zero left of column c, so earlier words are untouched
            m[hit, w:] ^= m[r, w:]
        pivots.append(c)
        r += 1
    return _unpack(m, cols), pivots


def rank(a: np.ndarray) -> int:
    return len(rref(a)[1])


def nullspace(a: np.ndarray) -> np.ndarray:
    """Basis of ``{x : a x = 0}`` as rows of a ``(n - rank) x n`` matrix."""
    red, pivots = rref(a)
    n = red.shape[1]
    pivot_set = set(pivots)
    free = [c for c in range(n) if c not in pivot_set]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    basis[np.arange(len(free)), free] = 1
    if pivots:
        basis[:, pivots] = red[: len(pivots)][:, free].T
    return basis


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product over GF(2); exact while inner dimension stays below 2**24."""
    prod = np.asarray(a, dtype=np.float32) @ np.asarray(b, dtype=np.float32)
    return (prod.astype(np.int64) & 1).astype(np.uint8)
