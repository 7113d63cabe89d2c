"""In-process N-server cluster: hosting, retrieval sessions, failure and repair.

Queries and responses are serialized through :mod:`mdspir.wire` even though
everything runs in one process, so the download accounting is the wire cost.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import wire
from .analysis import TheoryInputs, msr_mbr_params
from .protocol import (
    DecodeError,
    EncodedStore,
    ProtocolError,
    QueryMatrix,
    ServerShard,
    SystemParams,
    answer,
    build_server_query,
    decode_file,
    encode_system,
    response_length,
    sample_query_matrix,
)


class ClusterError(ProtocolError):
    pass


class ServerFailedError(ClusterError):
    pass


@dataclass
class SessionReport:
    session_id: int
    theta: int
    l: list[int]
    total: int
    overhead_bits: int
    ok: bool | None  # None when the session was measured without decoding

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass
class RepairReport:
    failed: int
    helpers: list[int]
    bandwidth_symbols: int
    gamma_msr: Fraction
    ratio: Fraction
    restored: bool = True

    def to_dict(self) -> dict:
        return {
            "failed": self.failed,
            "helpers": self.helpers,
            "bandwidth_symbols": self.bandwidth_symbols,
            "gamma_msr": float(self.gamma_msr),
            "gamma_msr_exact": str(self.gamma_msr),
            "ratio": float(self.ratio),
            "ratio_exact": str(self.ratio),
            "restored": self.restored,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def files_from_bytes(streams: Sequence[bytes], params: SystemParams) -> list[np.ndarray]:
    """Frame each byte stream as one file of L symbols, zero-padded."""
    if len(streams) != params.m:
        raise ClusterError(f"expected {params.m} files, got {len(streams)}")
    w = params.gf.w
    out = []
    for idx, data in enumerate(streams):
        try:
            symbols = wire.bytes_to_symbols(data, w, params.file_symbols)
        except wire.WireError as exc:
            raise ClusterError(f"file {idx}: {exc}") from None
        out.append(symbols.reshape(params.file_shape()))
    return out


def file_to_bytes(file: np.ndarray, params: SystemParams) -> bytes:
    return wire.symbols_to_bytes(np.asarray(file).ravel(), params.gf.w)


def capacity_bytes(params: SystemParams) -> int:
    return params.file_symbols * params.gf.w // 8


class Cluster:
    """N simulated servers holding one shard each.

    Retrieval needs every server live. At most N - K servers may be down at
    once; fail/repair must not overlap a retrieval session.
    """

    def __init__(self, store: EncodedStore):
        self.params = store.params
        self._shards: list[np.ndarray | None] = [store.shards[i].copy() for i in range(self.params.n)]
        self.sessions: list[SessionReport] = []
        self.repairs: list[RepairReport] = []

    @classmethod
    def from_files(cls, files: Sequence[np.ndarray], params: SystemParams) -> Cluster:
        return cls(encode_system(files, params))

    @property
    def failed(self) -> list[int]:
        return [i for i, s in enumerate(self._shards) if s is None]

    def is_live(self, i: int) -> bool:
        self._check_index(i)
        return self._shards[i] is not None

    def _check_index(self, i: int):
        if not 0 <= i < self.params.n:
            raise ClusterError(f"server index {i} out of range [0, {self.params.n})")

    def shard_data(self, i: int) -> np.ndarray:
        self._check_index(i)
        data = self._shards[i]
        if data is None:
            raise ServerFailedError(f"server {i} has failed")
        return data

    def store(self) -> EncodedStore:
        if self.failed:
            raise ServerFailedError(f"servers {self.failed} are down")
        return EncodedStore(np.stack(self._shards), self.params)

    def _serve(self, i: int, message: bytes) -> bytes:
        # server side: sees only its own shard and the query bytes
        sq = wire.decode_server_query(message)
        if sq.server != i:
            raise ClusterError(f"query for server {sq.server} delivered to server {i}")
        resp = answer(ServerShard(i, self.shard_data(i), self.params), sq, self.params)
        return wire.encode_response(resp, self.params.gf.w)

    def retrieve(
        self,
        theta: int,
        rng: np.random.Generator | None = None,
        query: QueryMatrix | None = None,
        decode: bool = True,
    ):
        """Run one PIR session for file ``theta``; returns (file, SessionReport).

        With ``decode=False`` only the query/response exchange runs and the
        returned file is None.
        """
        params = self.params
        if not 0 <= theta < params.m:
            raise ClusterError(f"file index {theta} out of range [0, {params.m})")
        if self.failed:
            raise ServerFailedError(f"retrieval needs all servers; {self.failed} are down")
        if query is None:
            if rng is None:
                raise ClusterError("need either a random generator or an explicit query")
            query = sample_query_matrix(params, rng)
        query.validate(params)

        responses = []
        lengths = []
        overhead = 0
        for i in range(params.n):
            sq = build_server_query(query, theta, i, params)
            reply = self._serve(i, wire.encode_server_query(sq))
            resp, w = wire.decode_response(reply)
            if w != params.gf.w:
                raise DecodeError(f"server {i} packed symbols at {w} bits")
            if resp.symbols != response_length(sq, params):
                raise DecodeError(f"server {i} sent {resp.symbols} symbols, expected {response_length(sq, params)}")
            responses.append(resp)
            lengths.append(resp.symbols)
            overhead += wire.response_overhead_bits(reply, resp.symbols, w)
        decoded = decode_file(responses, query, theta, params) if decode else None
        report = SessionReport(len(self.sessions), theta, lengths, sum(lengths), overhead, True if decode else None)
        self.sessions.append(report)
        return decoded, report

    def fail_server(self, i: int) -> Cluster:
        self._check_index(i)
        if self._shards[i] is None:
            raise ClusterError(f"server {i} has already failed")
        if len(self.failed) + 1 > self.params.n - self.params.k:
            raise ClusterError(
                f"failing server {i} would leave fewer than K={self.params.k} live servers"
            )
        self._shards[i] = None
        return self

    def repair_server(self, i: int, helpers: Iterable[int] | None = None) -> tuple[Cluster, int]:
        """Rebuild server ``i`` stripe by stripe; returns (cluster, symbols downloaded)."""
        self._check_index(i)
        if self._shards[i] is not None:
            raise ClusterError(f"server {i} is live; nothing to repair")
        params = self.params
        if helpers is None:
            helpers = [h for h in range(params.n) if h != i and self._shards[h] is not None]
        helpers = sorted(set(helpers))
        for h in helpers:
            if self._shards[h] is None:
                raise ServerFailedError(f"helper {h} has failed")
        if len(helpers) < params.k:
            raise ClusterError(f"repair needs {params.k} live helpers, got {len(helpers)}")

        rebuilt = np.empty((params.m, params.b, params.alpha), dtype=params.gf.dtype)
        bandwidth = 0
        for f, row in itertools.product(range(params.m), range(params.b)):
            block, bw = params.code.repair(i, helpers, lambda h: self._shards[h][f, row])
            rebuilt[f, row] = block
            bandwidth += bw
        self._shards[i] = rebuilt

        stripes = params.m * params.b
        inputs = TheoryInputs(n=params.n, k=params.k, d=len(helpers), total_size=params.k * params.alpha)
        gamma_msr = stripes * msr_mbr_params(inputs).gamma_msr
        report = RepairReport(i, helpers, bandwidth, gamma_msr, Fraction(bandwidth) / gamma_msr)
        self.repairs.append(report)
        return self, bandwidth


def ingest(streams: Sequence[bytes], params: SystemParams) -> Cluster:
    """Frame M byte streams into files of L symbols and encode them onto a cluster."""
    return Cluster.from_files(files_from_bytes(streams, params), params)


def retrieve(cluster: Cluster, theta: int, rng=None, query=None, decode=True):
    return cluster.retrieve(theta, rng, query, decode)


def fail_server(cluster: Cluster, i: int) -> Cluster:
    return cluster.fail_server(i)


def repair_server(cluster: Cluster, i: int, helpers=None):
    return cluster.repair_server(i, helpers)
