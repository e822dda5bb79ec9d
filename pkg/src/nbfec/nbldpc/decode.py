"""
Row-layered q-ary belief propagation.

Messages are log-domain vectors over GF(2^m) normalized so their maximum is
0. A check node of degree d is processed by forward-backward XOR
convolution of the coefficient-permuted incoming messages: in the
probability domain (with per-step max normalization) for sum-product, in
the max-plus semiring for the min-sum variant. Rows are visited block row
by block row; within a layer no two rows share a variable, so the
sequential sweep equals a parallel update of the layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..demod import LLR_CLAMP, full_llr_vectors

MAX_ITERS = 15


@dataclass
class DecoderResult:
    decided: np.ndarray
    iterations: int
    syndrome_ok: bool


@numba.njit(cache=True, inline="always")
def _xor_conv(a, b, out, M, minsum):
    if minsum:
        for z in range(M):
            best = -1e300
            for x in range(M):
                v = a[x] + b[x ^ z]
                if v > best:
                    best = v
            out[z] = best
        mx = out.max()
        for z in range(M):
            out[z] -= mx
    else:
        for z in range(M):
            acc = 0.0
            for x in range(M):
                acc += a[x] * b[x ^ z]
            out[z] = acc
        mx = out.max()
        if mx > 0.0:
            for z in range(M):
                out[z] /= mx


@numba.njit(cache=True)
def _decode(chan, row_ptr, edge_var, edge_coef, mul, max_iters, minsum, floor):
    n, M = chan.shape
    n_rows = row_ptr.size - 1
    n_edges = edge_var.size
    P = chan.copy()
    for v in range(n):
        mx = P[v].max()
        for a in range(M):
            P[v, a] -= mx
    R = np.zeros((n_edges, M))
    dmax = 0
    for r in range(n_rows):
        d = row_ptr[r + 1] - row_ptr[r]
        if d > dmax:
            dmax = d
    Q = np.empty((dmax, M))
    T = np.empty((dmax, M))
    F = np.empty((dmax, M))
    B = np.empty((dmax, M))
    E = np.empty(M)
    dec = np.zeros(n, np.int64)
    it = 0
    ok = False
    for it in range(1, max_iters + 1):
        for r in range(n_rows):
            e0 = row_ptr[r]
            d = row_ptr[r + 1] - e0
            for k in range(d):
                e = e0 + k
                v = edge_var[e]
                h = edge_coef[e]
                mx = -1e300
                for a in range(M):
                    Q[k, a] = P[v, a] - R[e, a]
                    if Q[k, a] > mx:
                        mx = Q[k, a]
                # message on h * x_v
                for a in range(M):
                    val = Q[k, a] - mx
                    if minsum:
                        T[k, mul[h, a]] = val
                    else:
                        T[k, mul[h, a]] = np.exp(val)
            F[0] = T[0]
            for k in range(1, d - 1):
                _xor_conv(F[k - 1], T[k], F[k], M, minsum)
            B[d - 1] = T[d - 1]
            for k in range(d - 2, 0, -1):
                _xor_conv(B[k + 1], T[k], B[k], M, minsum)
            for k in range(d):
                if k == 0:
                    E[:] = B[1]
                elif k == d - 1:
                    E[:] = F[d - 2]
                else:
                    _xor_conv(F[k - 1], B[k + 1], E, M, minsum)
                e = e0 + k
                v = edge_var[e]
                h = edge_coef[e]
                # constraint h * x_v = sum of the other terms
                mx = -1e300
                for a in range(M):
                    if minsum:
                        val = E[mul[h, a]]
                    else:
                        p = E[mul[h, a]]
                        val = np.log(p) if p > 0.0 else -1e300
                    R[e, a] = val
                    if val > mx:
                        mx = val
                pmx = -1e300
                for a in range(M):
                    val = R[e, a] - mx
                    if val < -floor:
                        val = -floor
                    R[e, a] = val
                    P[v, a] = Q[k, a] + val
                    if P[v, a] > pmx:
                        pmx = P[v, a]
                for a in range(M):
                    P[v, a] -= pmx
        ok = True
        for v in range(n):
            best = 0
            tie = False
            for a in range(1, M):
                if P[v, a] > P[v, best]:
                    best = a
                    tie = False
                elif P[v, a] == P[v, best]:
                    tie = True
            dec[v] = best
            if tie:
                # an undetermined decision never counts as converged
                ok = False
        for r in range(n_rows):
            if not ok:
                break
            s = 0
            for e in range(row_ptr[r], row_ptr[r + 1]):
                s ^= mul[edge_coef[e], dec[edge_var[e]]]
            if s != 0:
                ok = False
                break
        if ok:
            break
    return dec, it, ok


def decode(llrs, code, max_iters: int = MAX_ITERS, minsum: bool = False) -> DecoderResult:
    """
    Decode one codeword.

    Parameters
    ----------
    llrs : ndarray, shape (n, M-1)
        Nonbinary LLR vectors relative to symbol 0.
    code : QCCode
    max_iters : int
        Iteration cap; decoding stops early once the syndrome is zero.
    minsum : bool
        Use max-log (min-sum) check-node updates instead of sum-product.

    Returns
    -------
    DecoderResult
        ``syndrome_ok`` is set only when the decided word has zero syndrome
        and every position has a unique most likely symbol (ties go to the
        lowest index but are reported as not converged, so uninformative
        input never passes as decoded).
    """
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape != (code.n, code.M - 1):
        raise ValueError(f"expected LLRs of shape {(code.n, code.M - 1)}, got {llrs.shape}")
    chan = np.ascontiguousarray(full_llr_vectors(llrs))
    dec, it, ok = _decode(chan, code.row_ptr, code.edge_var, code.edge_coef,
                          code.gf.mul_table, int(max_iters), bool(minsum), 2.0 * LLR_CLAMP)
    return DecoderResult(dec, int(it), bool(ok))


def post_fec_ser(tx, decided) -> float:
    """Fraction of GF symbols decided wrongly (accepts lists of blocks)."""
    if isinstance(decided, DecoderResult):
        decided = decided.decided
    tx = np.concatenate([np.ravel(t) for t in tx]) if isinstance(tx, (list, tuple)) else np.ravel(tx)
    if isinstance(decided, (list, tuple)):
        decided = np.concatenate([np.ravel(d.decided if isinstance(d, DecoderResult) else d)
                                  for d in decided])
    decided = np.ravel(decided)
    if tx.shape != decided.shape:
        raise ValueError("transmitted and decided streams differ in length")
    return float(np.mean(tx != decided))
