"""Arithmetic over GF(2^w) for 1 <= w <= 16.

Scalar and numpy-vectorised operations share the same log/antilog tables.
Addition is XOR, so subtraction is the same operation.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

MAX_WIDTH = 16

# One fixed primitive polynomial per width, bit i = coefficient of x^i.
PRIMITIVE_POLYNOMIALS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}


class FieldMismatchError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


def _poly_mod(a: int, b: int) -> int:
    db = b.bit_length() - 1
    while a and a.bit_length() - 1 >= db:
        a ^= b << (a.bit_length() - 1 - db)
    return a


def is_irreducible(poly: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2 over GF(2)."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for cand in range(1 << d, 1 << (d + 1)):
            if _poly_mod(poly, cand) == 0:
                return False
    return True


class GF:
    """The field GF(2^w) defined by a fixed reduction polynomial.

    Use :func:`field` to get the shared instance for a width.
    """

    def __init__(self, w: int, poly: int | None = None):
        if not 1 <= w <= MAX_WIDTH:
            raise ValueError(f"field width must be in [1, {MAX_WIDTH}], got {w}")
        if poly is None:
            poly = PRIMITIVE_POLYNOMIALS[w]
        if poly.bit_length() - 1 != w or not is_irreducible(poly):
            raise ValueError(f"{poly:#x} is not an irreducible polynomial of degree {w}")
        self.w = w
        self.poly = poly
        self.order = 1 << w
        self.dtype = np.int64

        n = self.order - 1
        exp = np.zeros(2 * n, dtype=self.dtype)
        log = np.zeros(self.order, dtype=self.dtype)
        x = 1
        for i in range(n):
            if i and x == 1:
                raise ValueError(f"{poly:#x} is irreducible but not primitive")
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.order:
                x ^= poly
        exp[n:] = exp[:n]
        self._exp = exp
        self._log = log
        exp.setflags(write=False)
        log.setflags(write=False)

    def __repr__(self):
        return f"GF(2^{self.w}, poly={self.poly:#x})"

    def __eq__(self, other):
        return isinstance(other, GF) and (self.w, self.poly) == (other.w, other.poly)

    def __hash__(self):
        return hash((self.w, self.poly))

    def __call__(self, value: int) -> Element:
        return Element(int(value), self)

    # scalar and elementwise ops; accept ints or integer arrays

    def add(self, a, b):
        return a ^ b

    sub = add

    def mul(self, a, b):
        if np.isscalar(a) and np.isscalar(b):
            if a == 0 or b == 0:
                return 0
            return int(self._exp[self._log[a] + self._log[b]])
        a = np.asarray(a, dtype=self.dtype)
        b = np.asarray(b, dtype=self.dtype)
        r = self._exp[self._log[a] + self._log[b]]
        return np.where((a == 0) | (b == 0), 0, r)

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return int(self._exp[(self.order - 1 - self._log[a]) % (self.order - 1)])

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if e == 0:
            return 1
        if a == 0:
            return 0
        return int(self._exp[(self._log[a] * e) % (self.order - 1)])

    # matrices

    def matmul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=self.dtype)
        b = np.asarray(b, dtype=self.dtype)
        if a.shape[-1] != b.shape[0]:
            raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
        if self.w == 1:
            return (a @ b) & 1
        out = np.zeros(a.shape[:-1] + b.shape[1:], dtype=self.dtype)
        for k in range(a.shape[-1]):
            out ^= self.mul(a[..., k, None], b[k])
        return out

    def inverse(self, m) -> np.ndarray:
        """Gauss-Jordan inverse of a square matrix."""
        m = np.array(m, dtype=self.dtype)
        n = m.shape[0]
        if m.shape != (n, n):
            raise ValueError(f"expected a square matrix, got {m.shape}")
        aug = np.concatenate([m, np.eye(n, dtype=self.dtype)], axis=1)
        for col in range(n):
            nz = np.nonzero(aug[col:, col])[0]
            if nz.size == 0:
                raise SingularMatrixError("matrix is singular")
            pivot = col + nz[0]
            if pivot != col:
                aug[[col, pivot]] = aug[[pivot, col]]
            aug[col] = self.mul(aug[col], self.inv(int(aug[col, col])))
            rows = np.nonzero(aug[:, col])[0]
            rows = rows[rows != col]
            if rows.size:
                aug[rows] ^= self.mul(aug[rows, col, None], aug[col][None, :])
        return aug[:, n:]

    def rank(self, m) -> int:
        m = np.array(m, dtype=self.dtype)
        rank = 0
        rows, cols = m.shape
        for col in range(cols):
            nz = np.nonzero(m[rank:, col])[0]
            if nz.size == 0:
                continue
            pivot = rank + nz[0]
            m[[rank, pivot]] = m[[pivot, rank]]
            m[rank] = self.mul(m[rank], self.inv(int(m[rank, col])))
            below = np.nonzero(m[rank + 1:, col])[0] + rank + 1
            if below.size:
                m[below] ^= self.mul(m[below, col, None], m[rank][None, :])
            rank += 1
            if rank == rows:
                break
        return rank


@functools.lru_cache(maxsize=None)
def field(w: int) -> GF:
    return GF(w)


@dataclass(frozen=True)
class Element:
    """A single field symbol bound to its field; mixing fields raises."""

    value: int
    field: GF

    def __post_init__(self):
        if not 0 <= self.value < self.field.order:
            raise ValueError(f"{self.value} is not an element of {self.field}")

    def _check(self, other: Element):
        if not isinstance(other, Element):
            raise TypeError(f"expected a field Element, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatchError(f"{self.field} vs {other.field}")

    def __add__(self, other):
        self._check(other)
        return Element(self.value ^ other.value, self.field)

    __sub__ = __add__

    def __mul__(self, other):
        self._check(other)
        return Element(self.field.mul(self.value, other.value), self.field)

    def __truediv__(self, other):
        self._check(other)
        return Element(self.field.div(self.value, other.value), self.field)

    def inverse(self) -> Element:
        return Element(self.field.inv(self.value), self.field)

    def __int__(self):
        return self.value


def add(a: Element, b: Element) -> Element:
    return a + b


def mul(a: Element, b: Element) -> Element:
    return a * b


def inv(a: Element) -> Element:
    return a.inverse()
