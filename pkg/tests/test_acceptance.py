"""Acceptance criteria, one test (or group) per criterion.

Each test prints a PASS line on success; the conftest hook prints a
PASS/FAIL summary line per criterion at the end of the run.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from mdspir.analysis import (
    FIGURE_M,
    FIGURES,
    TheoryInputs,
    capacity_mds,
    comparison_table,
    empirical_rate,
    expected_download,
    msr_mbr_params,
    ordering_checks,
)
from mdspir.codes import make_evenodd, make_stacked_rs
from mdspir.protocol import (
    QueryMatrix,
    answer,
    build_server_query,
    derive_params,
    enumerate_omega,
    exhaustive_mean_download,
    privacy_enumeration_check,
    sample_query_matrix,
)
from mdspir.storage import Cluster

EXAMPLE_Q = QueryMatrix([[0, 2, 4], [1, 3, 0]])


def criterion(n, title):
    return pytest.mark.criterion(n, title)


def report(n, detail):
    print(f"criterion {n}: PASS  {detail}")


def random_cluster(params, rng):
    files = [rng.integers(0, params.gf.order, params.file_shape()) for _ in range(params.m)]
    return Cluster.from_files(files, params), files


@criterion(1, "exact capacity over all 3600 query matrices at (5,3,2)")
@pytest.mark.parametrize("alpha", [1, 2, 4])
def test_c1_exact_capacity(alpha):
    p = derive_params(5, 3, alpha, 2, make_stacked_rs(5, 3, alpha))
    cluster, files = random_cluster(p, np.random.default_rng(alpha))
    start = time.perf_counter()
    total = 0
    count = 0
    for q in enumerate_omega(p):
        got, rep = cluster.retrieve(0, query=q)
        assert np.array_equal(got, files[0])
        total += rep.total
        count += 1
    elapsed = time.perf_counter() - start
    mean = Fraction(total, count)
    assert count == 3600
    assert mean == Fraction(48 * alpha, 5) == expected_download(5, 3, 2, alpha)
    assert empirical_rate(p.file_symbols, mean) == Fraction(5, 8) == capacity_mds(5, 3, 2)
    assert elapsed < 10
    report(1, f"alpha={alpha}: mean {mean}, rate 5/8, {elapsed:.1f}s")


@criterion(1, "exact capacity over all 3600 query matrices at (5,3,2)")
def test_c1_alpha_32_count():
    # the worked example's node size; 48*32/5 = 1536/5
    p = derive_params(5, 3, 32, 2, make_stacked_rs(5, 3, 32))
    mean = exhaustive_mean_download(p)
    assert mean == Fraction(1536, 5) == expected_download(5, 3, 2, 32)
    assert Fraction(p.file_symbols) / mean == Fraction(5, 8)
    report(1, "alpha=32: mean 1536/5")


@criterion(2, "worked example query listings, pruning pattern and 12*alpha download")
@pytest.mark.parametrize("alpha", [1, 2, 32])
def test_c2_worked_example(alpha):
    p = derive_params(5, 3, alpha, 2, make_stacked_rs(5, 3, alpha))
    listings = [
        ((0, 2, 4), (1, 3, 0)),
        ((1, 3, 0), (1, 3, 0)),
        ((2, 4, 1), (1, 3, 0)),
        ((3, 0, 2), (1, 3, 0)),
        ((4, 1, 3), (1, 3, 0)),
    ]
    for i, rows in enumerate(listings):
        assert build_server_query(EXAMPLE_Q, 0, i, p).entries == rows
    cluster, files = random_cluster(p, np.random.default_rng(0))
    store = cluster.store()
    got, rep = cluster.retrieve(0, query=EXAMPLE_Q)
    assert np.array_equal(got, files[0])
    assert rep.l == [2 * alpha] * 3 + [3 * alpha] * 2
    assert rep.total == 12 * alpha
    present = [answer(store.shard(i), build_server_query(EXAMPLE_Q, 0, i, p), p).present for i in range(5)]
    assert present == [(True, False, True)] * 3 + [(True, True, True)] * 2
    report(2, f"alpha={alpha}: total {rep.total}")


def grid_cells():
    for n, k in [(4, 2), (5, 2), (5, 3), (6, 4), (7, 3)]:
        for alpha in (1, 2, 4):
            yield f"rs({n},{k},a={alpha})", lambda n=n, k=k, a=alpha: make_stacked_rs(n, k, a)
        if n == k + 2:
            yield f"evenodd({n},{k})", lambda k=k: make_evenodd(k)


@criterion(3, "round-trip grid, 50 retrievals per cell and file index, bit-exact")
def test_c3_round_trip_grid():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    cells = 0
    sessions = 0
    for label, make in grid_cells():
        code = make()
        for m in (1, 2, 3):
            p = derive_params(code.n, code.k, code.alpha, m, code)
            for theta in range(m):
                for _ in range(50):
                    cluster, files = random_cluster(p, rng)
                    got, rep = cluster.retrieve(theta, rng)
                    assert np.array_equal(got, files[theta]), (label, m, theta)
                    sessions += 1
            cells += 1
    elapsed = time.perf_counter() - start
    assert cells == 54
    assert elapsed < 120
    report(3, f"{cells} cells, {sessions} sessions, {elapsed:.1f}s")


def enumerable_configs():
    for n in range(2, 9):
        for k in range(1, n):
            for m in range(1, 6):
                p = derive_params(n, k, 1, m, make_stacked_rs(n, k, 1))
                if p.omega_size <= 10**4:
                    yield p


@criterion(4, "privacy bijection on every configuration with at most 10^4 query matrices")
def test_c4_privacy():
    configs = list(enumerable_configs())
    seen = {(p.n, p.k, p.m) for p in configs}
    assert {(4, 2, 1), (4, 2, 2), (4, 2, 3), (5, 3, 2)} <= seen
    for p in configs:
        verdict = privacy_enumeration_check(p, cap=10**4)
        assert verdict.ok, (p.n, p.k, p.m, verdict.failures[:3])
        assert verdict.omega_size == p.omega_size
    report(4, f"{len(configs)} configurations")


@criterion(5, "per-server symbol count equals alpha times unpruned columns over 10^4 sessions")
def test_c5_response_length():
    configs = [(5, 3, 2, 2), (4, 2, 1, 3), (7, 3, 1, 2), (6, 4, 3, 3)]
    rng = np.random.default_rng(5)
    sessions = 0
    for n, k, alpha, m in configs:
        p = derive_params(n, k, alpha, m, make_stacked_rs(n, k, alpha))
        cluster, _ = random_cluster(p, rng)
        for _ in range(10**4 // len(configs)):
            q = sample_query_matrix(p, rng)
            theta = int(rng.integers(m))
            _, rep = cluster.retrieve(theta, query=q, decode=False)
            a = q.array()
            for i in range(n):
                shifted = a.copy()
                shifted[theta] = (shifted[theta] + i) % p.modulus
                expected = alpha * int((shifted.min(axis=0) < p.b).sum())
                assert rep.l[i] == expected
            sessions += 1
    assert sessions == 10**4
    report(5, f"{sessions} sessions")


@criterion(6, "MSR repair parameters and the 2^8 repair bandwidth, ratio 2/3")
def test_c6_msr():
    p = msr_mbr_params(TheoryInputs(k=3, d=4, total_size=192, n=5))
    assert p.gamma_msr == 128
    m, b_call = 2, 1
    assert m * b_call * p.gamma_msr == 2**8
    assert Fraction(p.gamma_msr, 192) == Fraction(2, 3)
    # per-stripe accounting at the example's alpha = 32: size K*alpha per stripe
    alpha, b = 32, 2
    q = msr_mbr_params(TheoryInputs(k=3, d=4, total_size=3 * alpha, n=5))
    assert m * b * q.gamma_msr == 2**8
    assert Fraction(m * b * q.gamma_msr, m * alpha * b * 3) == Fraction(2, 3)
    report(6, "gamma_MSR = 128, M*B*gamma = 256, ratio 2/3")


@criterion(7, "comparison table values and ordering chains on the figure grids")
def test_c7_table_and_orderings():
    for n in range(3, 61):
        for k in range(1, n):
            rows = {r.index: r for r in comparison_table(n, k, 3)}
            assert rows[7].sub_packetization == Fraction(k * (n - k), math.gcd(n, k))
            assert rows[7].bandwidth_ratio == rows[8].bandwidth_ratio == Fraction(k * (n - k), n - 1)
            for i in (1, 2, 4):
                assert rows[i].bandwidth_ratio == 1
    assert {r.index: r for r in comparison_table(5, 3, 2)}[7].sub_packetization == 6
    links = 0
    for name, spec in sorted(FIGURES.items()):
        for n in spec.n_values:
            k, s = spec.point(n)
            for link in ordering_checks(n, k, FIGURE_M, s):
                if link.asserted and (link.precondition_met or link.chain.startswith("L")):
                    assert link.holds, (name, n, link)
                    links += 1
    report(7, f"{links} links hold across figures 1-8")


def shipped_codes():
    for n in range(3, 9):
        for k in range(1, n):
            for alpha in (1, 2):
                yield make_stacked_rs(n, k, alpha)
    for k, p in [(1, 2), (2, 3), (3, 5), (4, 5), (5, 7), (6, 7)]:
        yield make_evenodd(k, p)


@criterion(8, "every shipped code with N <= 8 decodes all erasure patterns")
def test_c8_mds_exhaustive():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    codes = 0
    patterns = 0
    for code in shipped_codes():
        stripes = rng.integers(0, code.gf.order, (100, code.k, code.alpha))
        codewords = code.encode_stripe(stripes)
        for cols in itertools.combinations(range(code.n), code.k):
            for stripe, cw in zip(stripes, codewords):
                got = code.erasure_decode({c: cw[c] for c in cols})
                assert np.array_equal(got, stripe), (code.descriptor(), cols)
            patterns += 1
        codes += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 30
    report(8, f"{codes} codes, {patterns} patterns, {elapsed:.1f}s")


@criterion(9, "cited constructions covered analytically by the table rows")
def test_c9_analytic_substitutes():
    n, k = 5, 3
    base = Fraction(k * (n - k), math.gcd(n, k))
    rows = {r.index: r for r in comparison_table(n, k, 2)}
    assert rows[1].sub_packetization == (k - 1) * base and rows[1].bandwidth_ratio == 1
    assert rows[2].sub_packetization == 2 ** (k + 1) * base and rows[2].field_bound == 2
    rows = {r.index: r for r in comparison_table(12, 9, 2, 2)}
    assert rows[3].applicable
    assert rows[3].sub_packetization == 3 ** (12 // 2 - 1) * Fraction(9 * 3, 3)
    assert rows[3].bandwidth_ratio == 1 + Fraction(1 * 2, 11)
    report(9, "rows 1-3 evaluated from closed forms")
