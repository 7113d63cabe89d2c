import json
from fractions import Fraction

import numpy as np
import pytest

from mdspir import wire
from mdspir.analysis import expected_download
from mdspir.codes import make_evenodd, make_stacked_rs
from mdspir.protocol import (
    DecodeError,
    QueryMatrix,
    build_server_query,
    derive_params,
    enumerate_omega,
    sample_query_matrix,
)
from mdspir.storage import (
    Cluster,
    ClusterError,
    ServerFailedError,
    capacity_bytes,
    fail_server,
    file_to_bytes,
    ingest,
    repair_server,
    retrieve,
)

EXAMPLE_Q = QueryMatrix([[0, 2, 4], [1, 3, 0]])


def params_for(n, k, alpha=1, m=2, w=8):
    return derive_params(n, k, alpha, m, make_stacked_rs(n, k, alpha, w=w))


def random_cluster(params, seed=0):
    rng = np.random.default_rng(seed)
    files = [rng.integers(0, params.gf.order, params.file_shape()) for _ in range(params.m)]
    return Cluster.from_files(files, params), files


def test_ingest_empty():
    p = params_for(5, 3, 2, m=1)
    c = ingest([b""], p)
    assert not c.store().shards.any()


@pytest.mark.parametrize("w", [8, 3, 16])
def test_ingest_round_trip_bytes(w):
    p = params_for(5, 3, 4, m=2, w=w)
    size = capacity_bytes(p)
    blobs = [bytes(range(size)), b"hello"]
    c = ingest(blobs, p)
    rng = np.random.default_rng(1)
    for theta, blob in enumerate(blobs):
        got, report = retrieve(c, theta, rng)
        raw = file_to_bytes(got, p)
        assert raw[: len(blob)] == blob
        assert not any(raw[len(blob):])
        assert report.ok


def test_ingest_errors():
    p = params_for(5, 3, 1, m=2)
    with pytest.raises(ClusterError):
        ingest([b"x"], p)
    with pytest.raises(ClusterError):
        ingest([b"x" * (capacity_bytes(p) + 1), b""], p)


@pytest.mark.parametrize("alpha", [1, 2, 4])
def test_forced_worked_example_query(alpha):
    p = params_for(5, 3, alpha)
    c, files = random_cluster(p)
    got, report = c.retrieve(0, query=EXAMPLE_Q)
    assert np.array_equal(got, files[0])
    assert report.total == 12 * alpha == sum(report.l)
    assert report.l == [2 * alpha] * 3 + [3 * alpha] * 2


def test_exhaustive_mean_matches_expected_download():
    p = params_for(5, 3, 2)
    c, files = random_cluster(p, 3)
    total = 0
    for q in enumerate_omega(p):
        got, report = c.retrieve(1, query=q)
        assert np.array_equal(got, files[1])
        total += report.total
    assert Fraction(total, p.omega_size) == expected_download(5, 3, 2, 2)


def test_accounting_is_wire_cost():
    p = params_for(5, 3, 2, w=3)
    c, _ = random_cluster(p)
    rng = np.random.default_rng(4)
    for _ in range(20):
        q_rng_state = rng.integers(1 << 30)
        _, report = c.retrieve(0, np.random.default_rng(q_rng_state))
        q = sample_query_matrix(p, np.random.default_rng(q_rng_state))
        bits = 0
        for i in range(5):
            msg = c._serve(i, wire.encode_server_query(build_server_query(q, 0, i, p)))
            resp, w = wire.decode_response(msg)
            assert resp.symbols == report.l[i]
            bits += 8 * len(msg)
        assert bits == report.total * 3 + report.overhead_bits


def test_session_json_line():
    p = params_for(5, 3, 1)
    c, _ = random_cluster(p)
    _, report = c.retrieve(0, query=EXAMPLE_Q)
    record = json.loads(report.to_json())
    assert set(record) == {"session_id", "theta", "l", "total", "overhead_bits", "ok"}
    assert record["l"] == [2, 2, 2, 3, 3] and record["ok"] is True
    _, second = c.retrieve(1, np.random.default_rng(0), decode=False)
    assert second.session_id == 1 and second.ok is None


def test_retrieve_errors():
    p = params_for(5, 3, 1)
    c, _ = random_cluster(p)
    with pytest.raises(ClusterError):
        c.retrieve(2, np.random.default_rng(0))
    with pytest.raises(ClusterError):
        c.retrieve(0)


def test_fail_server_rules():
    p = params_for(5, 3, 1)
    c, _ = random_cluster(p)
    fail_server(c, 1)
    with pytest.raises(ServerFailedError):
        c.shard_data(1)
    with pytest.raises(ClusterError):
        c.fail_server(1)
    c.fail_server(4)
    assert c.failed == [1, 4]
    with pytest.raises(ServerFailedError):
        c.retrieve(0, np.random.default_rng(0))
    with pytest.raises(ClusterError):
        c.fail_server(0)
    with pytest.raises(ClusterError):
        c.fail_server(5)


def test_repair_bandwidth_and_ratio():
    p = params_for(5, 3, 1)
    c, _ = random_cluster(p)
    before = c.shard_data(2).copy()
    c.fail_server(2)
    _, bw = repair_server(c, 2)
    assert bw == 12 == p.m * p.b * p.k * p.alpha
    assert np.array_equal(c.shard_data(2), before)
    rep = c.repairs[-1]
    assert rep.helpers == [0, 1, 3, 4]
    assert rep.ratio == Fraction(3 * 2, 4)
    d = json.loads(rep.to_json())
    assert d["ratio_exact"] == "3/2" and d["bandwidth_symbols"] == 12


@pytest.mark.parametrize("code", ["rs", "evenodd"])
def test_repair_every_index_then_retrieve(code):
    if code == "rs":
        p = params_for(6, 4, 2)
    else:
        p = derive_params(5, 3, 4, 2, make_evenodd(3, 5))
    c, files = random_cluster(p, 8)
    snapshot = c.store().shards.copy()
    baseline, _ = c.retrieve(1, query=QueryMatrix([tuple(range(p.s))] * 2))
    for i in range(p.n):
        c.fail_server(i)
        c.repair_server(i)
        assert np.array_equal(c.store().shards, snapshot)
        got, _ = c.retrieve(1, query=QueryMatrix([tuple(range(p.s))] * 2))
        assert np.array_equal(got, baseline)
        assert np.array_equal(got, files[1])


def test_repair_two_failures_with_explicit_helpers():
    p = params_for(5, 3, 2)
    c, _ = random_cluster(p)
    snap = c.store().shards.copy()
    c.fail_server(0)
    c.fail_server(3)
    with pytest.raises(ServerFailedError):
        c.repair_server(0, helpers=[1, 2, 3])
    _, bw = c.repair_server(0, helpers=[1, 2, 4])
    assert bw == p.m * p.b * 3 * 2
    assert c.repairs[-1].ratio == 1  # D = K: full download is optimal
    c.repair_server(3)
    assert np.array_equal(c.store().shards, snap)


def test_repair_errors():
    p = params_for(5, 3, 1)
    c, _ = random_cluster(p)
    with pytest.raises(ClusterError):
        c.repair_server(0)
    c.fail_server(0)
    with pytest.raises(ClusterError):
        c.repair_server(0, helpers=[1, 2])


def test_corrupt_response_detected():
    p = params_for(5, 3, 1)
    c, _ = random_cluster(p)
    original = c._serve

    def short(i, message):
        reply = original(i, message)
        return reply if i else reply[:-1]

    c._serve = short
    with pytest.raises(wire.WireError):
        c.retrieve(0, query=EXAMPLE_Q)

    def wrong_length(i, message):
        sq = wire.decode_server_query(message)
        entries = list(sq.entries)
        entries[0] = (2, 3, 4)  # asks for nothing
        return original(i, wire.encode_server_query(type(sq)(entries, i)))

    c._serve = wrong_length
    with pytest.raises(DecodeError):
        c.retrieve(0, query=EXAMPLE_Q)
