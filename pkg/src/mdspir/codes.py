"""Linear (N, K, alpha) MDS array codes described by a systematic generator.

A codeword is an (N, alpha) array: column c is the alpha-symbol block stored
on node c. A stripe is the (K, alpha) data array, and the codeword is the row
vector ``stripe.ravel() @ G`` reshaped to (N, alpha), where G is the
K*alpha x N*alpha generator matrix.
"""

from __future__ import annotations

import itertools
import re
from typing import Callable, Iterable, Mapping

import numpy as np

from .gf import GF, SingularMatrixError, field


class CodeError(ValueError):
    pass


class InsufficientBlocksError(CodeError):
    pass


class InconsistentBlocksError(CodeError):
    pass


class MDSArrayCode:
    """An (N, K, alpha) linear array code given by its generator matrix.

    Parameters
    ----------
    n, k, alpha : int
        Number of nodes, data nodes and symbols per node.
    gf : GF
        Symbol field.
    generator : array of shape (k * alpha, n * alpha)
        Must be systematic in the first k block-columns.
    family : str
        Short name used by :meth:`descriptor`.
    """

    family = "custom"

    def __init__(self, n: int, k: int, alpha: int, gf: GF, generator, **info):
        if not 0 < k < n:
            raise CodeError(f"need 0 < K < N, got N={n}, K={k}")
        if alpha < 1:
            raise CodeError(f"alpha must be positive, got {alpha}")
        generator = np.asarray(generator, dtype=gf.dtype)
        if generator.shape != (k * alpha, n * alpha):
            raise CodeError(f"generator shape {generator.shape} does not match ({k * alpha}, {n * alpha})")
        if not np.array_equal(generator[:, : k * alpha], np.eye(k * alpha, dtype=gf.dtype)):
            raise CodeError("generator is not systematic")
        self.n = n
        self.k = k
        self.alpha = alpha
        self.gf = gf
        self.generator = generator
        self.generator.setflags(write=False)
        self.info = info
        self._decoders: dict[tuple[int, ...], np.ndarray] = {}

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor()!r})"

    def descriptor(self) -> str:
        return f"{self.family}:n={self.n},k={self.k},alpha={self.alpha},w={self.gf.w}"

    def block(self, row: int, col: int) -> np.ndarray:
        """The alpha x alpha block of G at block-row ``row``, block-column ``col``."""
        a = self.alpha
        return self.generator[row * a:(row + 1) * a, col * a:(col + 1) * a]

    def _columns(self, cols: Iterable[int]) -> np.ndarray:
        a = self.alpha
        return np.concatenate([np.arange(c * a, (c + 1) * a) for c in cols])

    def encode_stripe(self, stripe) -> np.ndarray:
        """Encode one (K, alpha) stripe, or a batch of shape (..., K, alpha)."""
        stripe = np.asarray(stripe, dtype=self.gf.dtype)
        if stripe.shape[-2:] != (self.k, self.alpha):
            raise CodeError(f"stripe shape {stripe.shape[-2:]} does not match ({self.k}, {self.alpha})")
        lead = stripe.shape[:-2]
        flat = stripe.reshape(lead + (self.k * self.alpha,))
        return self.gf.matmul(flat, self.generator).reshape(lead + (self.n, self.alpha))

    def _decoder(self, cols: tuple[int, ...]) -> np.ndarray:
        inv = self._decoders.get(cols)
        if inv is None:
            sub = self.generator[:, self._columns(cols)]
            try:
                inv = self.gf.inverse(sub)
            except SingularMatrixError:
                raise CodeError(f"columns {cols} do not determine the data; code is not MDS") from None
            self._decoders[cols] = inv
        return inv

    def _split(self, available: Mapping[int, np.ndarray]):
        cols = sorted(available)
        if len(cols) < self.k:
            raise InsufficientBlocksError(f"need {self.k} columns, got {len(cols)}")
        for c in cols:
            if not 0 <= c < self.n:
                raise CodeError(f"column index {c} out of range [0, {self.n})")
        blocks = {}
        for c in cols:
            b = np.asarray(available[c], dtype=self.gf.dtype)
            if b.shape != (self.alpha,):
                raise CodeError(f"block {c} has shape {b.shape}, expected ({self.alpha},)")
            blocks[c] = b
        return cols, blocks

    def erasure_decode(self, available: Mapping[int, np.ndarray]) -> np.ndarray:
        """Recover the (K, alpha) stripe from any K or more code columns.

        Extra columns beyond the first K (by index) are checked against the
        re-encoded codeword and a mismatch raises InconsistentBlocksError.
        """
        cols, blocks = self._split(available)
        use = tuple(cols[: self.k])
        received = np.concatenate([blocks[c] for c in use])
        stripe = self.gf.matmul(received, self._decoder(use)).reshape(self.k, self.alpha)
        if len(cols) > self.k:
            codeword = self.encode_stripe(stripe)
            for c in cols[self.k:]:
                if not np.array_equal(codeword[c], blocks[c]):
                    raise InconsistentBlocksError(f"column {c} disagrees with columns {use}")
        return stripe

    def reencode_full(self, available: Mapping[int, np.ndarray]) -> np.ndarray:
        return self.encode_stripe(self.erasure_decode(available))

    def repair(self, failed: int, helpers: Iterable[int], fetch: Callable[[int], np.ndarray]):
        """Rebuild column ``failed``; returns ``(block, symbols_downloaded)``.

        ``fetch(c)`` returns the block held by helper c. This default strategy
        downloads whole blocks from the K lowest-indexed helpers and
        re-encodes, so bandwidth is K * alpha. Codes with cheaper repair
        override this method.
        """
        helpers = sorted(set(helpers))
        if failed in helpers:
            raise CodeError(f"failed column {failed} cannot be its own helper")
        if not 0 <= failed < self.n:
            raise CodeError(f"column index {failed} out of range [0, {self.n})")
        if len(helpers) < self.k:
            raise InsufficientBlocksError(f"repair needs {self.k} helpers, got {len(helpers)}")
        downloaded = {}
        bandwidth = 0
        for c in helpers[: self.k]:
            block = np.asarray(fetch(c), dtype=self.gf.dtype)
            bandwidth += block.size
            downloaded[c] = block
        return self.reencode_full(downloaded)[failed], bandwidth

    def is_mds(self) -> bool:
        """Exhaustively check that every K-subset of block-columns is invertible."""
        ka = self.k * self.alpha
        for cols in itertools.combinations(range(self.n), self.k):
            if self.gf.rank(self.generator[:, self._columns(cols)]) < ka:
                return False
        return True


def _stacked_generator(gf: GF, n: int, k: int) -> np.ndarray:
    # Vandermonde rows x^r at points 0..n-1, made systematic.
    points = np.arange(n)
    v = np.array([[gf.pow(int(x), r) for x in points] for r in range(k)], dtype=gf.dtype)
    return gf.matmul(gf.inverse(v[:, :k]), v)


class StackedRSCode(MDSArrayCode):
    """alpha independent copies of a systematic Reed-Solomon code.

    Every alpha x alpha block of G is a scalar multiple of the identity, so
    symbol r of each node only mixes with symbol r of the other nodes.
    """

    family = "stacked-rs"

    def __init__(self, n: int, k: int, alpha: int, w: int = 8):
        gf = field(w)
        if gf.order <= n:
            raise CodeError(f"GF(2^{w}) is too small for N={n}; need 2^w > N")
        if not 0 < k < n:
            raise CodeError(f"need 0 < K < N, got N={n}, K={k}")
        self.scalar_generator = _stacked_generator(gf, n, k)
        generator = np.kron(self.scalar_generator, np.eye(alpha, dtype=gf.dtype))
        super().__init__(n, k, alpha, gf, generator)


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p ** 0.5) + 1))


class EvenOddCode(MDSArrayCode):
    """Binary EVENODD code: K data columns, row parity and diagonal parity.

    With prime p >= K each column holds p - 1 bits; data columns K..p-1 and
    row p - 1 are imaginary zeros.
    """

    family = "evenodd"

    def __init__(self, k: int, p: int):
        if not is_prime(p):
            raise CodeError(f"EVENODD needs a prime p, got {p}")
        if not 1 <= k <= p:
            raise CodeError(f"EVENODD needs 1 <= K <= p, got K={k}, p={p}")
        gf = field(1)
        alpha = p - 1
        n = k + 2
        g = np.zeros((k * alpha, n * alpha), dtype=gf.dtype)
        row_par = k * alpha
        diag_par = (k + 1) * alpha
        for j in range(k):
            for r in range(alpha):
                g[j * alpha + r, j * alpha + r] = 1
                g[j * alpha + r, row_par + r] = 1
        for out in range(alpha):
            for j in range(k):
                src = (out - j) % p
                if src < alpha:
                    g[j * alpha + src, diag_par + out] ^= 1
                # adjuster S: the diagonal p-1, added to every diagonal parity bit
                if j >= 1:
                    g[j * alpha + (p - 1 - j), diag_par + out] ^= 1
        self.p = p
        super().__init__(n, k, alpha, gf, g)

    def descriptor(self) -> str:
        return f"{self.family}:k={self.k},p={self.p}"


def make_stacked_rs(n: int, k: int, alpha: int, w: int = 8) -> StackedRSCode:
    return StackedRSCode(n, k, alpha, w)


def make_evenodd(k: int, p: int | None = None) -> EvenOddCode:
    """EVENODD over GF(2); p defaults to the smallest prime above K."""
    if p is None:
        p = k + 1
        while not is_prime(p):
            p += 1
    return EvenOddCode(k, p)


_DESCRIPTOR = re.compile(r"^(?P<family>[a-z-]+):(?P<args>[a-z]+=\d+(,[a-z]+=\d+)*)$")


def code_from_descriptor(text: str) -> MDSArrayCode:
    """Inverse of :meth:`MDSArrayCode.descriptor` for the shipped families."""
    m = _DESCRIPTOR.match(text.strip())
    if not m:
        raise CodeError(f"malformed code descriptor {text!r}")
    args = dict(kv.split("=") for kv in m["args"].split(","))
    args = {key: int(val) for key, val in args.items()}
    try:
        if m["family"] == StackedRSCode.family:
            return StackedRSCode(args["n"], args["k"], args["alpha"], args.get("w", 8))
        if m["family"] == EvenOddCode.family:
            return EvenOddCode(args["k"], args["p"])
    except KeyError as exc:
        raise CodeError(f"descriptor {text!r} is missing {exc.args[0]!r}") from None
    raise CodeError(f"unknown code family {m['family']!r}")
