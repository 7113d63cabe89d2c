"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error (bad parameters for the
data, I/O, decode failures).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis, wire
from .codes import CodeError, MDSArrayCode, code_from_descriptor, is_prime, make_evenodd, make_stacked_rs
from .protocol import (
    EncodedStore,
    ProtocolError,
    QueryMatrix,
    SystemParams,
    enumerate_omega,
)
from .storage import Cluster, capacity_bytes, file_to_bytes, ingest

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
DEFAULT_CAP = 10**6


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_atomic(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_code(args) -> MDSArrayCode:
    """Validate the code flags against each other and construct the code."""
    if args.code == "evenodd":
        if args.w is not None and args.w != 1:
            raise UsageError("evenodd is binary; --w must be 1")
        if args.n is not None and args.k is not None and args.n != args.k + 2:
            raise UsageError(f"evenodd needs N = K + 2, got N={args.n}, K={args.k}")
        if args.p is not None and not is_prime(args.p):
            raise UsageError(f"--p must be prime, got {args.p}")
        code = make_evenodd(args.k, args.p)
        if args.alpha is not None and args.alpha != code.alpha:
            raise UsageError(f"evenodd with p={code.p} has alpha={code.alpha}, not {args.alpha}")
        return code
    if args.n is None:
        raise UsageError("--n is required for stacked-rs")
    return make_stacked_rs(args.n, args.k, args.alpha or 1, args.w or 8)


def _params(args) -> SystemParams:
    code = build_code(args)
    return SystemParams(code.n, code.k, code.alpha, args.m, code)


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def shard_bytes(shard: np.ndarray, w: int) -> bytes:
    return wire.pack_symbols(shard.ravel(), w)


def save_cluster(cluster: Cluster, out: Path, file_lengths: list[int], seed=None):
    params = cluster.params
    out.mkdir(parents=True, exist_ok=True)
    shards = []
    for i in range(params.n):
        data = shard_bytes(cluster.shard_data(i), params.gf.w)
        name = f"shard_{i:03d}.bin"
        _write_atomic(out / name, data)
        shards.append({"file": name, "sha256": _digest(data)})
    manifest = {
        "format": FORMAT_VERSION,
        "code": params.code.descriptor(),
        "params": {
            "n": params.n, "k": params.k, "alpha": params.alpha, "m": params.m,
            "b": params.b, "s": params.s, "l": params.file_symbols, "w": params.gf.w,
        },
        "file_lengths": file_lengths,
        "seed": seed,
        "shards": shards,
    }
    _write_atomic(out / MANIFEST, (json.dumps(manifest, indent=2) + "\n").encode())


def load_cluster(path: Path) -> tuple[Cluster, dict, list[int]]:
    """Load a snapshot. Missing or corrupted shards come back as failed servers."""
    try:
        manifest = json.loads((path / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest in {path}: {exc}") from None
    if manifest.get("format") != FORMAT_VERSION:
        raise DataError(f"unsupported snapshot format {manifest.get('format')!r}")
    code = code_from_descriptor(manifest["code"])
    p = manifest["params"]
    params = SystemParams(p["n"], p["k"], p["alpha"], p["m"], code)
    count = params.m * params.b * params.alpha
    shards = np.zeros((params.n, params.m, params.b, params.alpha), dtype=params.gf.dtype)
    bad = []
    for i, entry in enumerate(manifest["shards"]):
        try:
            data = (path / entry["file"]).read_bytes()
        except OSError:
            bad.append(i)
            continue
        if _digest(data) != entry["sha256"]:
            bad.append(i)
            continue
        shards[i] = wire.unpack_symbols(data, params.gf.w, count).reshape(shards.shape[1:])
    if len(bad) > params.n - params.k:
        raise DataError(f"{len(bad)} shards missing or corrupt; data is lost")
    cluster = Cluster(EncodedStore(shards, params))
    for i in bad:
        cluster.fail_server(i)
    return cluster, manifest, bad


def parse_query(text: str) -> QueryMatrix:
    try:
        return QueryMatrix(tuple(tuple(int(x) for x in row.split(",")) for row in text.split(";")))
    except ValueError:
        raise UsageError(f"cannot parse query {text!r}; expected rows like '0,2,4;1,3,0'") from None


def parse_range(text: str) -> list[int]:
    try:
        parts = [int(x) for x in text.split(":")]
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected start:stop[:step]") from None
    if len(parts) not in (2, 3):
        raise UsageError(f"bad range {text!r}; expected start:stop[:step]")
    start, stop = parts[:2]
    step = parts[2] if len(parts) == 3 else 1
    return list(range(start, stop + 1, step))


def cmd_encode(args) -> int:
    params = _params(args)
    if args.inputs:
        if len(args.inputs) != params.m:
            raise UsageError(f"--m is {params.m} but {len(args.inputs)} input files were given")
        try:
            streams = [Path(p).read_bytes() for p in args.inputs]
        except OSError as exc:
            raise DataError(str(exc)) from None
    else:
        rng = np.random.default_rng(args.seed)
        size = capacity_bytes(params)
        streams = [rng.integers(0, 256, size, dtype=np.uint8).tobytes() for _ in range(params.m)]
    cluster = ingest(streams, params)
    save_cluster(cluster, Path(args.out), [len(s) for s in streams], args.seed)
    print(json.dumps({
        "out": str(args.out), "code": params.code.descriptor(), "b": params.b, "s": params.s,
        "l": params.file_symbols, "capacity_bytes": capacity_bytes(params),
    }))
    return 0


def cmd_retrieve(args) -> int:
    cluster, manifest, bad = load_cluster(Path(args.cluster))
    if bad:
        raise DataError(f"shards {bad} are missing or corrupt; run repair first")
    params = cluster.params
    if args.theta is None or not 0 <= args.theta < params.m:
        raise DataError(f"--theta must be in [0, {params.m}), got {args.theta}")
    query = parse_query(args.query) if args.query else None
    rng = np.random.default_rng(args.seed)
    decoded, report = cluster.retrieve(args.theta, rng, query)
    data = file_to_bytes(decoded, params)[: manifest["file_lengths"][args.theta]]
    if args.out:
        _write_atomic(Path(args.out), data)
    print(report.to_json())
    return 0


def _random_cluster(params: SystemParams, rng) -> Cluster:
    files = [rng.integers(0, params.gf.order, params.file_shape()) for _ in range(params.m)]
    return Cluster.from_files(files, params)


def bench_rate(params: SystemParams, mode: str, sessions: int, seed, cap: int = DEFAULT_CAP, decode: bool = True):
    """Mean measured download and the resulting rate, run through a simulated cluster.

    Exhaustive mode runs one session per query matrix (file 0); Monte Carlo
    samples ``sessions`` sessions with a random file each time.
    """
    rng = np.random.default_rng(seed)
    cluster = _random_cluster(params, rng)
    total = 0
    count = 0
    if mode == "exhaustive":
        for q in enumerate_omega(params, cap):
            _, report = cluster.retrieve(0, query=q, decode=decode)
            total += report.total
            count += 1
    elif mode == "monte-carlo":
        for _ in range(sessions):
            theta = int(rng.integers(params.m))
            _, report = cluster.retrieve(theta, rng, decode=decode)
            total += report.total
            count += 1
    else:
        raise UsageError(f"unknown mode {mode!r}")
    mean = Fraction(total, count)
    return mean, analysis.empirical_rate(params.file_symbols, mean), count


def cmd_bench_rate(args) -> int:
    params = _params(args)
    if args.mode == "exhaustive" and params.omega_size > args.cap:
        raise DataError(f"query space has {params.omega_size} elements, above the cap {args.cap}; use --cap or monte-carlo")
    mean, rate, count = bench_rate(params, args.mode, args.sessions, args.seed, args.cap, decode=not args.no_decode)
    cap = analysis.capacity_mds(params.n, params.k, params.m)
    lines = [
        "N,K,M,alpha,sessions,mean_download,empirical_rate,capacity,mode",
        f"{params.n},{params.k},{params.m},{params.alpha},{count},{float(mean)!r},{float(rate)!r},{float(cap)!r},{args.mode}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _emit(text: str, out):
    if out:
        _write_atomic(Path(out), text.encode())
    else:
        sys.stdout.write(text)


def cmd_compare(args) -> int:
    if args.sweep == "table":
        if args.n is None or args.k is None:
            raise UsageError("--sweep table needs --n and --k")
        s = Fraction(args.s) if args.s is not None else None
        text = analysis.table_csv(args.n, args.k, args.m, s)
    else:
        n_values = parse_range(args.range) if args.range else None
        text = analysis.figure_csv(args.sweep, n_values, args.m)
    _emit(text, args.out)
    return 0


def cmd_repair(args) -> int:
    path = Path(args.cluster)
    cluster, manifest, bad = load_cluster(path)
    params = cluster.params
    i = args.failed
    if not 0 <= i < params.n:
        raise DataError(f"--failed must be in [0, {params.n}), got {i}")
    if i not in bad:
        cluster.fail_server(i)
    helpers = [int(h) for h in args.helpers.split(",")] if args.helpers else None
    cluster.repair_server(i, helpers)
    report = cluster.repairs[-1]
    data = shard_bytes(cluster.shard_data(i), params.gf.w)
    entry = manifest["shards"][i]
    report.restored = _digest(data) == entry["sha256"]
    if not report.restored:
        print(report.to_json())
        raise DataError(f"rebuilt shard {i} does not match the manifest digest")
    _write_atomic(path / entry["file"], data)
    print(report.to_json())
    return 0


def _add_code_flags(p):
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=int)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--code", choices=["stacked-rs", "evenodd"], default="stacked-rs")
    p.add_argument("--w", type=int, help="field width for stacked-rs (default 8)")
    p.add_argument("--p", type=int, help="prime for evenodd (default: smallest prime above K)")
    p.add_argument("--seed", type=int, default=0)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdspir", description="PIR from MDS array-coded storage")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode M files onto a simulated cluster snapshot")
    _add_code_flags(p)
    p.add_argument("inputs", nargs="*", help="input files (default: M random files)")
    p.add_argument("--out", required=True, help="snapshot directory")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("retrieve", help="privately retrieve one file from a snapshot")
    p.add_argument("cluster")
    p.add_argument("--theta", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--query", help="force the query matrix, rows separated by ';'")
    p.add_argument("--out", help="where to write the retrieved bytes")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("bench-rate", help="measure the retrieval rate against capacity")
    _add_code_flags(p)
    p.add_argument("--mode", choices=["exhaustive", "monte-carlo"], default="exhaustive")
    p.add_argument("--sessions", type=int, default=10**5)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="largest query space to enumerate")
    p.add_argument("--no-decode", action="store_true", help="measure downloads without decoding")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_rate)

    p = sub.add_parser("compare", help="emit protocol comparison tables and figure sweeps as CSV")
    p.add_argument("--sweep", choices=["table", *analysis.FIGURES], default="table")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int, default=analysis.FIGURE_M)
    p.add_argument("--s", help="epsilon-MSR grouping factor (table only)")
    p.add_argument("--range", help="override the N values of a figure sweep, start:stop[:step]")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("repair", help="rebuild one server of a snapshot")
    p.add_argument("cluster")
    p.add_argument("--failed", type=int, required=True)
    p.add_argument("--helpers", help="comma-separated helper servers (default: all others)")
    p.set_defaults(func=cmd_repair)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mdspir: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ProtocolError, CodeError, OSError, ValueError) as exc:
        print(f"mdspir: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
