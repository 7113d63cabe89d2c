"""Capacity-achieving PIR over an (N, K, alpha) MDS array-coded store.

Each file is a (B, K, alpha) array whose B rows (sub-stripes) are encoded
independently; server i stores block i of every encoded row. Rows B..B+S-1
are virtual all-zero rows that are never stored. The user picks a random
M x S query matrix with distinct entries per row, and server i receives it
with the desired file's row shifted by +i mod (B+S). Each server returns,
per query column, the XOR of the addressed blocks of every file, and omits
columns that only address virtual rows.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .codes import MDSArrayCode


class ProtocolError(ValueError):
    pass


class DecodeError(ProtocolError):
    pass


class EnumerationCapError(ProtocolError):
    pass


@dataclass(frozen=True)
class SystemParams:
    n: int
    k: int
    alpha: int
    m: int
    code: MDSArrayCode = field(repr=False, compare=False)

    def __post_init__(self):
        if not self.n > self.k >= 1:
            raise ProtocolError(f"need N > K >= 1, got N={self.n}, K={self.k}")
        if self.m < 1:
            raise ProtocolError(f"need at least one file, got M={self.m}")
        if (self.code.n, self.code.k, self.code.alpha) != (self.n, self.k, self.alpha):
            raise ProtocolError(
                f"code is ({self.code.n}, {self.code.k}, {self.code.alpha}), "
                f"system is ({self.n}, {self.k}, {self.alpha})"
            )

    @cached_property
    def gcd(self) -> int:
        return math.gcd(self.n, self.k)

    @cached_property
    def b(self) -> int:
        """Sub-stripes per file."""
        return (self.n - self.k) // self.gcd

    @cached_property
    def s(self) -> int:
        """Columns of the query matrix."""
        return self.k // self.gcd

    @cached_property
    def modulus(self) -> int:
        return self.b + self.s

    @cached_property
    def file_symbols(self) -> int:
        return self.alpha * self.b * self.k

    @cached_property
    def omega_size(self) -> int:
        return math.perm(self.modulus, self.s) ** self.m

    @property
    def gf(self):
        return self.code.gf

    def file_shape(self) -> tuple[int, int, int]:
        return (self.b, self.k, self.alpha)


def derive_params(n: int, k: int, alpha: int, m: int, code: MDSArrayCode) -> SystemParams:
    return SystemParams(n, k, alpha, m, code)


def _as_grid(entries) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(x) for x in row) for row in entries)


def _check_rows(grid, m: int, s: int, modulus: int):
    if len(grid) != m or any(len(row) != s for row in grid):
        raise ProtocolError(f"query must be {m} x {s}")
    for row in grid:
        if len(set(row)) != s:
            raise ProtocolError(f"query row {row} has repeated entries")
        if any(not 0 <= x < modulus for x in row):
            raise ProtocolError(f"query row {row} has entries outside [0, {modulus})")


@dataclass(frozen=True)
class QueryMatrix:
    """The user's secret M x S matrix, an element of the query space."""

    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_grid(self.entries))

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    def validate(self, params: SystemParams) -> QueryMatrix:
        _check_rows(self.entries, params.m, params.s, params.modulus)
        return self

    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)


@dataclass(frozen=True)
class ServerQuery:
    """What server ``server`` receives: a matrix from the same query space."""

    entries: tuple[tuple[int, ...], ...]
    server: int

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_grid(self.entries))

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    def validate(self, params: SystemParams) -> ServerQuery:
        _check_rows(self.entries, params.m, params.s, params.modulus)
        return self

    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)


@dataclass(frozen=True)
class Response:
    """Blocks for the non-pruned query columns, in column order."""

    present: tuple[bool, ...]
    blocks: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "present", tuple(bool(p) for p in self.present))
        if self.blocks.ndim != 2 or self.blocks.shape[0] != sum(self.present):
            raise ProtocolError(
                f"{sum(self.present)} present positions but blocks have shape {self.blocks.shape}"
            )

    @property
    def symbols(self) -> int:
        return int(self.blocks.size)

    def full(self, alpha: int) -> np.ndarray:
        """(S, alpha) array with pruned positions filled by zero blocks."""
        out = np.zeros((len(self.present), alpha), dtype=self.blocks.dtype)
        out[np.array(self.present, dtype=bool)] = self.blocks
        return out

    def __eq__(self, other):
        return (
            isinstance(other, Response)
            and self.present == other.present
            and np.array_equal(self.blocks, other.blocks)
        )


class ServerShard:
    """Column ``index`` of the encoded store: shape (M, B, alpha)."""

    def __init__(self, index: int, data: np.ndarray, params: SystemParams):
        self.index = index
        self.data = data
        self.params = params

    def block(self, file: int, row: int) -> np.ndarray:
        if row >= self.params.b:
            return np.zeros(self.params.alpha, dtype=self.data.dtype)
        return self.data[file, row]


class EncodedStore:
    """All N shards; ``shards[i, l, j]`` is block i of encoded row j of file l."""

    def __init__(self, shards: np.ndarray, params: SystemParams):
        expected = (params.n, params.m, params.b, params.alpha)
        if shards.shape != expected:
            raise ProtocolError(f"store shape {shards.shape}, expected {expected}")
        self.shards = shards
        self.params = params

    def shard(self, i: int) -> ServerShard:
        return ServerShard(i, self.shards[i], self.params)

    def codeword(self, file: int, row: int) -> np.ndarray:
        return self.shards[:, file, row]


def encode_system(files: Sequence[np.ndarray], params: SystemParams) -> EncodedStore:
    if len(files) != params.m:
        raise ProtocolError(f"expected {params.m} files, got {len(files)}")
    stack = np.asarray(np.stack([np.asarray(f) for f in files]), dtype=params.gf.dtype)
    if stack.shape[1:] != params.file_shape():
        raise ProtocolError(f"file shape {stack.shape[1:]}, expected {params.file_shape()}")
    if stack.size and (stack.min() < 0 or stack.max() >= params.gf.order):
        raise ProtocolError("file symbols outside the field")
    codewords = params.code.encode_stripe(stack)  # (M, B, N, alpha)
    return EncodedStore(np.ascontiguousarray(codewords.transpose(2, 0, 1, 3)), params)


def sample_query_matrix(params: SystemParams, rng: np.random.Generator) -> QueryMatrix:
    """Uniform draw from the query space: each row an ordered S-subset."""
    rows = []
    for _ in range(params.m):
        pool = list(range(params.modulus))
        # partial Fisher-Yates
        for pos in range(params.s):
            pick = pos + int(rng.integers(params.modulus - pos))
            pool[pos], pool[pick] = pool[pick], pool[pos]
        rows.append(tuple(pool[: params.s]))
    return QueryMatrix(tuple(rows))


def build_server_query(q: QueryMatrix, theta: int, i: int, params: SystemParams) -> ServerQuery:
    if not 0 <= theta < params.m:
        raise ProtocolError(f"file index {theta} out of range [0, {params.m})")
    if not 0 <= i < params.n:
        raise ProtocolError(f"server index {i} out of range [0, {params.n})")
    rows = list(q.entries)
    rows[theta] = tuple((x + i) % params.modulus for x in rows[theta])
    return ServerQuery(tuple(rows), i)


def prunable(sq, params: SystemParams) -> tuple[bool, ...]:
    """True for columns whose every entry addresses a virtual zero row."""
    return tuple(min(col) >= params.b for col in zip(*sq.entries))


def answer(shard: ServerShard, sq: ServerQuery, params: SystemParams) -> Response:
    """Server-side response: column j is the XOR over all files of the addressed blocks."""
    sq.validate(params)
    q = sq.array()
    padded = np.concatenate(
        [shard.data, np.zeros((params.m, params.s, params.alpha), dtype=shard.data.dtype)], axis=1
    )
    picked = padded[np.arange(params.m)[:, None], q]  # (M, S, alpha)
    summed = np.bitwise_xor.reduce(picked, axis=0)
    present = q.min(axis=0) < params.b
    return Response(tuple(present), summed[present])


def response_length(sq: ServerQuery, params: SystemParams) -> int:
    return params.alpha * sum(not p for p in prunable(sq, params))


def designated_rows(q: QueryMatrix, theta: int, params: SystemParams) -> np.ndarray:
    """(N, S) array of the desired file's row index each server addresses per column."""
    row = np.array(q.entries[theta], dtype=np.int64)
    return (row[None, :] + np.arange(params.n)[:, None]) % params.modulus


@dataclass
class DecodePlan:
    zero_sets: list[tuple[int, ...]]
    stripe_sets: list[tuple[int, ...]]


def decode_plan(q: QueryMatrix, theta: int, params: SystemParams) -> DecodePlan:
    d = designated_rows(q, theta, params)
    zero_sets = [tuple(np.nonzero(d[:, j] >= params.b)[0].tolist()) for j in range(params.s)]
    stripe_sets = [tuple(np.nonzero((d == t).any(axis=1))[0].tolist()) for t in range(params.b)]
    return DecodePlan(zero_sets, stripe_sets)


def decode_file(
    responses: Sequence[Response], q: QueryMatrix, theta: int, params: SystemParams
) -> np.ndarray:
    """Recover file ``theta`` as a (B, K, alpha) array from all N responses."""
    if len(responses) != params.n:
        raise DecodeError(f"expected {params.n} responses, got {len(responses)}")
    q.validate(params)
    code = params.code
    received = np.empty((params.n, params.s, params.alpha), dtype=params.gf.dtype)
    for i, resp in enumerate(responses):
        expected = prunable(build_server_query(q, theta, i, params), params)
        if resp.present != tuple(not p for p in expected):
            raise DecodeError(f"server {i} presence bitmap {resp.present} disagrees with the query")
        if resp.blocks.shape[1:] != (params.alpha,):
            raise DecodeError(f"server {i} sent blocks of shape {resp.blocks.shape[1:]}")
        received[i] = resp.full(params.alpha)

    d = designated_rows(q, theta, params)
    plan = decode_plan(q, theta, params)
    wanted = {}  # (row, server) -> block of the desired file's codeword
    for j, zset in enumerate(plan.zero_sets):
        if len(zset) != params.k:
            raise DecodeError(f"column {j} has {len(zset)} interference-only servers, expected {params.k}")
        interference = code.reencode_full({i: received[i, j] for i in zset})
        for i in range(params.n):
            if i not in zset:
                wanted[(int(d[i, j]), i)] = received[i, j] ^ interference[i]

    out = np.empty(params.file_shape(), dtype=params.gf.dtype)
    for t, uset in enumerate(plan.stripe_sets):
        if len(uset) != params.k:
            raise DecodeError(f"sub-stripe {t} has {len(uset)} code symbols, expected {params.k}")
        out[t] = code.erasure_decode({i: wanted[(t, i)] for i in uset})
    return out


def enumerate_omega(params: SystemParams, cap: int = 10**6):
    """Yield every query matrix in the query space, refusing if it exceeds ``cap``."""
    if params.omega_size > cap:
        raise EnumerationCapError(f"query space has {params.omega_size} elements, cap is {cap}")
    rows = list(itertools.permutations(range(params.modulus), params.s))
    for combo in itertools.product(rows, repeat=params.m):
        yield QueryMatrix(combo)


@dataclass
class PrivacyVerdict:
    ok: bool
    omega_size: int
    checked: int
    failures: list[tuple[int, int, int]]


def privacy_enumeration_check(params: SystemParams, cap: int = 10**6) -> PrivacyVerdict:
    """Check that Q -> Q^(i, theta) permutes the query space for every (i, theta).

    A permutation means every server sees the same (uniform) distribution
    whichever file is requested; failures lists offending (i, theta0, theta1).
    """
    omega = [q.entries for q in enumerate_omega(params, cap)]
    reference = Counter(omega)
    failures = []
    checked = 0
    for i in range(params.n):
        seen = []
        for theta in range(params.m):
            images = Counter(
                build_server_query(QueryMatrix(e), theta, i, params).entries for e in omega
            )
            seen.append(images)
            checked += 1
            if images != reference:
                failures.append((i, theta, -1))
        for t0, t1 in itertools.combinations(range(params.m), 2):
            if seen[t0] != seen[t1]:
                failures.append((i, t0, t1))
    return PrivacyVerdict(not failures, len(omega), checked, failures)


def exhaustive_mean_download(params: SystemParams, theta: int = 0, cap: int = 10**6) -> Fraction:
    """Exact mean of the total response length over the whole query space."""
    total = 0
    count = 0
    for q in enumerate_omega(params, cap):
        total += sum(
            response_length(build_server_query(q, theta, i, params), params) for i in range(params.n)
        )
        count += 1
    return Fraction(total, count)
