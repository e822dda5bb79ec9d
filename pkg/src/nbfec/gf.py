"""
Arithmetic over GF(2^m).

Field elements are integers 0..2^m-1 where bit i is the coefficient of
alpha^i in the polynomial basis. Addition is XOR; multiplication and
inversion go through log/antilog tables built from a fixed primitive
polynomial.

For every m the primitive polynomial is the one with the smallest integer
representation (x^3 + x + 1 for m = 3, x^8 + x^4 + x^3 + x^2 + 1 for m = 8).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


class FieldError(ValueError):
    """Invalid field configuration or operand."""


def _order_of_x(poly: int, m: int) -> int:
    """Multiplicative order of x modulo ``poly`` (0 if x is not invertible)."""
    size = 1 << m
    a = 1
    for k in range(1, size):
        a <<= 1
        if a & size:
            a ^= poly
        if a == 1:
            return k
    return 0


def smallest_primitive_poly(m: int) -> int:
    """Smallest primitive polynomial of degree ``m`` as an integer."""
    for poly in range((1 << m) | 1, 1 << (m + 1), 2):
        if _order_of_x(poly, m) == (1 << m) - 1:
            return poly
    raise FieldError(f"no primitive polynomial of degree {m}")  # pragma: no cover


class GF2m:
    """
    Log/antilog tables for GF(2^m), 1 <= m <= 8.

    Attributes
    ----------
    m : int
        Extension degree.
    size : int
        Number of elements M = 2^m.
    poly : int
        Primitive polynomial (bit m set).
    exp : ndarray
        ``exp[k] = alpha^k`` for k in 0..2(M-1), doubled to skip a modulo.
    log : ndarray
        ``log[a]`` for a != 0; ``log[0]`` is unused (-1).
    mul_table, inv_table : ndarray
        Full multiplication table and inverses (``inv_table[0] = 0`` is a
        placeholder, zero has no inverse).
    """

    def __init__(self, m: int):
        if not isinstance(m, (int, np.integer)) or not 1 <= m <= 8:
            raise FieldError(f"extension degree must be in 1..8, got {m!r}")
        self.m = int(m)
        self.size = 1 << self.m
        self.poly = smallest_primitive_poly(self.m)

        q = self.size
        order = q - 1
        exp = np.zeros(2 * order + 1, dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        a = 1
        for k in range(order):
            exp[k] = a
            log[a] = k
            a <<= 1
            if a & q:
                a ^= self.poly
        exp[order:2 * order] = exp[:order]
        exp[2 * order] = exp[0]
        self.exp = exp
        self.log = log

        nz = np.arange(1, q)
        mul = np.zeros((q, q), dtype=np.int64)
        mul[1:, 1:] = exp[log[nz][:, None] + log[nz][None, :]]
        self.mul_table = mul
        inv = np.zeros(q, dtype=np.int64)
        inv[1:] = exp[(order - log[nz]) % order]
        self.inv_table = inv
        for arr in (self.exp, self.log, self.mul_table, self.inv_table):
            arr.setflags(write=False)

    def __repr__(self):
        return f"GF2m(m={self.m}, poly=0b{self.poly:b})"

    @property
    def primitive_element(self) -> int:
        return 2 if self.size > 2 else 1

    def add(self, a, b):
        return np.bitwise_xor(a, b)

    def mul(self, a, b):
        return self.mul_table[a, b]

    def inv(self, a):
        if np.any(np.asarray(a) == 0):
            raise FieldError("zero has no multiplicative inverse")
        return self.inv_table[a]

    def div(self, a, b):
        return self.mul_table[a, self.inv(b)]

    def pow(self, a: int, k: int) -> int:
        if a == 0:
            return 0 if k > 0 else 1
        return int(self.exp[(self.log[a] * k) % (self.size - 1)])


@lru_cache(maxsize=None)
def build_field(m: int) -> GF2m:
    """Cached field tables for GF(2^m)."""
    return GF2m(m)
