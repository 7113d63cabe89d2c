"""Closed-form capacities, regenerating-code parameters and protocol comparisons.

Everything is exact (``Fraction``); floats only appear when writing CSV.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def capacity_replicated(n: int, m: int) -> Fraction:
    if n < 1 or m < 1:
        raise ValueError("need N >= 1 and M >= 1")
    return 1 / sum(Fraction(1, n**e) for e in range(m))


def capacity_mds(n: int, k: int, m: int) -> Fraction:
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= K < N, got N={n}, K={k}")
    if m < 1:
        raise ValueError("need M >= 1")
    ratio = Fraction(k, n)
    return 1 / sum(ratio**e for e in range(m))


def sub_stripes(n: int, k: int) -> tuple[int, int]:
    """(B, S) for an (N, K) system."""
    g = math.gcd(n, k)
    return (n - k) // g, k // g


def expected_download(n: int, k: int, m: int, alpha: int) -> Fraction:
    """Mean total symbols downloaded per retrieval, over uniform queries."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= K < N, got N={n}, K={k}")
    _, s = sub_stripes(n, k)
    return alpha * s * n * (1 - Fraction(k, n) ** m)


def empirical_rate(file_symbols, mean_download) -> Fraction:
    mean_download = _frac(mean_download)
    if mean_download <= 0:
        raise ValueError("mean download must be positive")
    return _frac(file_symbols) / mean_download


@dataclass(frozen=True)
class TheoryInputs:
    """Parameters for the regenerating-code formulas.

    ``total_size`` is the amount of data the code spreads over the N nodes;
    ``d`` the repair degree. ``n`` and ``s`` are optional where unused.
    """

    k: int
    d: int
    total_size: Fraction | int
    n: Optional[int] = None
    m: Optional[int] = None
    s: Optional[Fraction | int] = None

    def __post_init__(self):
        if self.d < self.k:
            raise ValueError(f"repair degree D={self.d} is below K={self.k}")
        if self.n is not None and self.d > self.n - 1:
            raise ValueError(f"repair degree D={self.d} exceeds N-1={self.n - 1}")
        if self.total_size <= 0:
            raise ValueError("total size must be positive")


class RegeneratingParams(NamedTuple):
    alpha_msr: Fraction
    gamma_msr: Fraction
    alpha_mbr: Fraction
    gamma_mbr: Fraction


def msr_mbr_params(inputs: TheoryInputs) -> RegeneratingParams:
    size = _frac(inputs.total_size)
    k, d = inputs.k, inputs.d
    mbr = 2 * size * d / (2 * k * d - k * k + k)
    return RegeneratingParams(size / k, size * d / (k * (d - k + 1)), mbr, mbr)


@dataclass(frozen=True)
class ProtocolRow:
    index: int
    name: str
    sub_packetization: Optional[Fraction]
    field_relation: str  # ">" or "="
    field_bound: Optional[Fraction]
    bandwidth_ratio: Optional[Fraction]
    rate: Fraction
    constraint: str
    applicable: bool
    note: str = ""


def _power(base: int, exponent: Fraction) -> tuple[int, bool]:
    """base ** exponent, rounding a fractional exponent up; flag tells if exact."""
    exponent = _frac(exponent)
    if exponent.denominator == 1:
        return base ** int(exponent), True
    return base ** math.ceil(exponent), False


def comparison_table(n: int, k: int, m: int, s=None) -> list[ProtocolRow]:
    """The eight (N, K) PIR protocols compared on L, field size, repair and rate.

    ``s`` is the grouping factor of the epsilon-MSR code (row 3); when it is
    None that row is emitted as not applicable with empty metrics.
    """
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= K < N, got N={n}, K={k}")
    r = n - k
    g = math.gcd(n, k)
    base = Fraction(k * r, g)
    cap = capacity_mds(n, k, m)
    gamma_mds = Fraction(k * r, n - 1)
    pm_ok = n >= 2 * k - 1
    l_pm = (k - 1) * base

    rows = [
        ProtocolRow(1, "new-pm-msr", l_pm, ">", Fraction(n), Fraction(1), cap, "N >= 2K-1", pm_ok),
        ProtocolRow(
            2, "new-binary-mds", 2 ** (k + 1) * base, "=", Fraction(2), Fraction(1), cap, "N-K = 2", r == 2
        ),
    ]

    if s is None:
        rows.append(ProtocolRow(3, "new-eps-msr", None, ">", None, None, cap, "N/s > N-K, s >= 2, s | N", False,
                                "no grouping factor s given"))
    else:
        s = _frac(s)
        l3, exact = _power(r, n / s - 1)
        ok = n / s > r and s >= 2 and s.denominator == 1 and n % s.numerator == 0
        rows.append(ProtocolRow(
            3, "new-eps-msr", l3 * base, ">", s * r, 1 + (s - 1) * Fraction(r - 1, n - 1), cap,
            "N/s > N-K, s >= 2, s | N", ok, "" if exact else "exponent N/s-1 rounded up",
        ))

    l4, exact4 = _power(r, Fraction(n, r))
    rows.append(ProtocolRow(
        4, "new-optimal-node-capacity", l4 * base, ">", Fraction(n), Fraction(1), cap, "", True,
        "" if exact4 else "exponent N/(N-K) rounded up",
    ))
    rows.append(ProtocolRow(
        5, "pm-msr-dorkson", l_pm, ">", Fraction(n), Fraction(1), 1 - Fraction(2 * k - 2, n), "N >= 2K-1", pm_ok
    ))
    rows.append(ProtocolRow(
        6, "pm-msr-lavauzelle", l_pm, ">", Fraction(n), Fraction(1),
        1 - Fraction(4 * k - 2, 3 * n - 2 * k + 4), "N >= 2K-1", pm_ok,
    ))
    rows.append(ProtocolRow(7, "zhu-zhou", base, ">", Fraction(n), gamma_mds, cap, "", True))
    rows.append(ProtocolRow(8, "banawan-ulukus", Fraction(k * n**m), ">", Fraction(n), gamma_mds, cap, "", True))
    return rows


@dataclass(frozen=True)
class Link:
    """One claimed relation between two table entries, evaluated."""

    chain: str
    left: str
    relation: str
    right: str
    left_value: Optional[Fraction]
    right_value: Optional[Fraction]
    holds: Optional[bool]
    precondition_met: bool
    asserted: bool


_RELATIONS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    ">": lambda a, b: a > b,
}


def ordering_checks(n: int, k: int, m: int, s=None) -> list[Link]:
    """Evaluate the claimed orderings of L, field size, repair ratio and rate.

    Links whose case condition does not apply to (N, K, s) are omitted. Links
    with ``asserted=False`` are boundary tie-breaks that are reported only.
    ``precondition_met`` is False for L links when M < N.
    """
    rows = {row.index: row for row in comparison_table(n, k, m, s)}
    r = n - k
    cap = capacity_mds(n, k, m)
    links: list[Link] = []
    s = _frac(s) if s is not None else None
    # row-3 links need N/s > N-K and s >= 2; fractional s is allowed here
    has_s = s is not None and n / s > r and s >= 2

    def add(chain, left, rel, right, lv, rv, pre=True, asserted=True):
        holds = None if lv is None or rv is None else _RELATIONS[rel](lv, rv)
        links.append(Link(chain, left, rel, right, lv, rv, holds, pre, asserted))

    def L(i):
        return rows[i].sub_packetization

    def G(i):
        return rows[i].bandwidth_ratio

    def R(i):
        return rows[i].rate

    def Q(i):
        return rows[i].field_bound

    # repair-bandwidth ratio
    for i in (1, 2, 4, 5, 6):
        add("gamma", "1", "=", f"gamma{i}", Fraction(1), G(i))
    if has_s:
        add("gamma", "gamma1", "<=", "gamma3", G(1), G(3))
        add("gamma", "gamma1", "<", "gamma3", G(1), G(3), asserted=r >= 2 and s >= 2)
        add("gamma", "gamma3", "<", "gamma7", G(3), G(7))
    else:
        add("gamma", "gamma1", "<", "gamma7", G(1), G(7), asserted=k * r > n - 1)
    add("gamma", "gamma7", "=", "gamma8", G(7), G(8))

    # retrieval rate
    for i in (1, 2, 3, 4, 7, 8):
        add("rate", "C_MDS", "=", f"R{i}", cap, R(i))
    # R6 - R5 has the sign of (K-2)(N-2K+2), so the strict claim needs K >= 3
    pm = n >= 2 * k - 1 and k >= 3
    add("rate", "R8", ">", "R6", R(8), R(6), pre=pm)
    add("rate", "R6", ">", "R5", R(6), R(5), pre=pm)

    # field size (bounds: q2 = 2, q3 > s(N-K), the rest > N)
    for i in (5, 6, 7, 8, 4):
        add("field", "q1", "=", f"q{i}", Q(1), Q(i))
    add("field", "q2", "<", "q1", Q(2), Q(1))
    if has_s and s < Fraction(n, r):
        add("field", "q2", "<", "q3", Q(2), Q(3))
        add("field", "q3", "<=", "q1", Q(3), Q(1))

    # sub-packetization
    big_m = m >= n
    if r == 2 and has_s and 2 <= s < Fraction(n, 2):
        for a, rel, b in ((7, "<", 3), (3, "<=", 4), (4, "<", 2), (2, "<", 8)):
            add("L:N-K=2", f"L{a}", rel, f"L{b}", L(a), L(b), pre=big_m)
    elif 2 < r < k - 1:
        for a in (3, 4):
            if a == 3 and not has_s:
                continue
            add("L:2<N-K<K-1", "L7", "<", f"L{a}", L(7), L(a), pre=big_m)
            add("L:2<N-K<K-1", f"L{a}", "<", "L8", L(a), L(8), pre=big_m)
    elif r >= k - 1:
        for a, rel, b in ((7, "<", 1), (1, "=", 5), (5, "=", 6), (1, "<", 4), (4, "<", 8)):
            add("L:N-K>=K-1", f"L{a}", rel, f"L{b}", L(a), L(b), pre=big_m)

    if has_s:
        lo = Fraction(n * r, 2 * n - k)
        if 2 <= s <= min(lo, Fraction(k, r)):
            add("L3-vs-L4", "L4", "<=", "L3", L(4), L(3), asserted=False)
        if 2 <= r < 1 + math.sqrt(k + 1) and lo < s < Fraction(n, r):
            add("L3-vs-L4", "L3", "<", "L4", L(3), L(4), asserted=False)
    return links


# figure sweeps: x-axis N, with K and s derived per figure
@dataclass(frozen=True)
class FigureSpec:
    name: str
    metric: str  # "L" or "gamma"
    n_values: tuple[int, ...]
    describe: str

    def point(self, n: int) -> tuple[int, Optional[Fraction]]:
        """(K, s) at this N."""
        kind = self.name
        if kind in ("fig1", "fig5"):
            return n - 2, Fraction(n, 4)
        if kind in ("fig2", "fig6"):
            return n - 3, Fraction(n, 6)
        if kind in ("fig3", "fig7"):
            return n // 2, None
        if kind in ("fig4", "fig8"):
            return 2 * n // 3, Fraction(2)
        raise ValueError(kind)


FIGURES = {
    "fig1": FigureSpec("fig1", "L", tuple(range(8, 61)), "N-K=2, s=N/4, M=30"),
    "fig2": FigureSpec("fig2", "L", tuple(range(12, 61)), "N-K=3, s=N/6, M=30"),
    "fig3": FigureSpec("fig3", "L", tuple(range(6, 61, 2)), "K/N=1/2, M=30"),
    "fig4": FigureSpec("fig4", "L", tuple(range(6, 61, 6)), "K/N=2/3, s=2, M=30"),
    "fig5": FigureSpec("fig5", "gamma", tuple(range(8, 61)), "N-K=2, s=N/4"),
    "fig6": FigureSpec("fig6", "gamma", tuple(range(12, 61)), "N-K=3, s=N/6"),
    "fig7": FigureSpec("fig7", "gamma", tuple(range(6, 61, 2)), "K/N=1/2"),
    "fig8": FigureSpec("fig8", "gamma", tuple(range(6, 61, 6)), "K/N=2/3, s=2"),
}

FIGURE_M = 30


def _fmt(x) -> str:
    if x is None:
        return ""
    x = _frac(x)
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def figure_rows(name: str, n_values=None, m: int = FIGURE_M) -> list[dict]:
    spec = FIGURES[name]
    out = []
    for n in n_values or spec.n_values:
        k, s = spec.point(n)
        table = comparison_table(n, k, m, s)
        row = {"figure": name, "N": n, "K": k, "M": m, "s": s}
        for prow in table:
            key = f"{spec.metric}{prow.index}"
            row[key] = prow.sub_packetization if spec.metric == "L" else prow.bandwidth_ratio
        out.append(row)
    return out


def figure_csv(name: str, n_values=None, m: int = FIGURE_M) -> str:
    rows = figure_rows(name, n_values, m)
    metric = FIGURES[name].metric
    header = ["figure", "N", "K", "M", "s"] + [f"{metric}{i}" for i in range(1, 9)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([row["figure"], row["N"], row["K"], row["M"]] + [_fmt(row[h]) for h in header[4:]])
    return buf.getvalue()


def table_csv(n: int, k: int, m: int, s=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["protocol", "name", "L", "q_relation", "q_bound", "gamma_bar", "rate", "constraint", "applicable", "note"])
    for row in comparison_table(n, k, m, s):
        writer.writerow([
            row.index, row.name, _fmt(row.sub_packetization), row.field_relation, _fmt(row.field_bound),
            _fmt(row.bandwidth_ratio), _fmt(row.rate), row.constraint, int(row.applicable), row.note,
        ])
    return buf.getvalue()
