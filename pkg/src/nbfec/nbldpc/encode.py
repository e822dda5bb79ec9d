"""Systematic encoding through a cached reduced row-echelon form of H."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _rref(H, mul, inv):
    """In-place RREF over GF(2^m); returns the pivot column of each pivot row."""
    n_rows, n_cols = H.shape
    pivots = np.full(n_rows, -1, np.int64)
    r = 0
    for col in range(n_cols):
        if r == n_rows:
            break
        p = -1
        for i in range(r, n_rows):
            if H[i, col] != 0:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for j in range(n_cols):
                t = H[r, j]
                H[r, j] = H[p, j]
                H[p, j] = t
        s = inv[H[r, col]]
        if s != 1:
            for j in range(n_cols):
                H[r, j] = mul[s, H[r, j]]
        nz = np.flatnonzero(H[r])
        for i in range(n_rows):
            f = H[i, col]
            if i == r or f == 0:
                continue
            for j in nz:
                H[i, j] ^= mul[f, H[r, j]]
        pivots[r] = col
        r += 1
    return pivots[:r]


@numba.njit(cache=True)
def _encode(info, info_pos, par_pos, P, mul, out):
    # parity symbol of pivot row i = sum_j P[i, j] * info[j] (char 2: minus is plus)
    for j in range(info.size):
        out[info_pos[j]] = info[j]
    for i in range(par_pos.size):
        acc = 0
        for j in range(info.size):
            a = info[j]
            if a != 0:
                acc ^= mul[P[i, j], a]
        out[par_pos[i]] = acc


class SystematicEncoder:
    """
    Encoder for a QC code.

    The information symbols occupy the non-pivot columns of the RREF of H,
    so ``k = n - rank(H)`` even when H is rank deficient.
    """

    def __init__(self, code):
        gf = code.gf
        H = code.dense_H().astype(np.int64)
        pivots = _rref(H, gf.mul_table, gf.inv_table)
        self.rank = int(pivots.size)
        is_piv = np.zeros(code.n, dtype=bool)
        is_piv[pivots] = True
        self.parity_pos = pivots.astype(np.int64)
        self.info_pos = np.flatnonzero(~is_piv).astype(np.int64)
        self.P = np.ascontiguousarray(H[: self.rank][:, self.info_pos])
        self._mul = gf.mul_table
        self.n = code.n

    @property
    def k(self) -> int:
        return self.info_pos.size

    def encode(self, info) -> np.ndarray:
        info = np.asarray(info, dtype=np.int64)
        if info.shape != (self.k,):
            raise ValueError(f"expected {self.k} information symbols, got {info.shape}")
        out = np.zeros(self.n, dtype=np.int64)
        _encode(info, self.info_pos, self.parity_pos, self.P, self._mul, out)
        return out


def encode(info, code) -> np.ndarray:
    """Systematic codeword for ``info`` (length ``code.k``)."""
    return code.encoder.encode(info)
