"""Command-line front end: ``sucdict {build,query,verify,experiment}``."""
from __future__ import annotations

import argparse
import json
import os
import struct
import sys
import time
from collections import Counter

from . import experiments
from .concat import P_MAX
from .dictionary import DictParams, Dictionary
from .errors import RetriesExhausted, SucdError

KEYS_MAGIC = b"SUCDKEYS"
VALUES_MAGIC = b"SUCDVALS"

EXIT_OK, EXIT_BOUND, EXIT_BUILD = 0, 2, 3


def threads() -> int:
    """Parallelism cap from SUCD_THREADS; the harness itself runs trials serially."""
    try:
        return max(1, int(os.environ.get("SUCD_THREADS", "1")))
    except ValueError:
        return 1


def write_ints(path: str, xs, magic: bytes = KEYS_MAGIC) -> None:
    xs = list(xs)
    with open(path, "wb") as f:
        f.write(magic + struct.pack("<Q", len(xs)))
        f.write(struct.pack(f"<{len(xs)}Q", *xs))


def read_ints(path: str) -> list[int]:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 or data[:8] not in (KEYS_MAGIC, VALUES_MAGIC):
        raise ValueError(f"{path}: not a key/value file")
    (count,) = struct.unpack_from("<Q", data, 8)
    if len(data) != 16 + 8 * count:
        raise ValueError(f"{path}: length does not match count {count}")
    return list(struct.unpack_from(f"<{count}Q", data, 16))


def _emit(rep: dict, as_json: bool, summary: str) -> None:
    if as_json:
        print(json.dumps(rep, sort_keys=True, default=_jsonable))
    else:
        print(summary)


def _jsonable(x):
    if hasattr(x, "item"):
        return x.item()
    if isinstance(x, (set, tuple)):
        return list(x)
    return str(x)


def _load_dict(path: str) -> Dictionary:
    with open(path, "rb") as f:
        return Dictionary.from_bytes(f.read())


# -- commands ---------------------------------------------------------------------------

def cmd_build(a) -> int:
    keys = read_ints(a.keys)
    values = read_ints(a.values) if a.values else None
    t0 = time.perf_counter()
    try:
        params = DictParams(a.universe, len(keys), a.sigma, B=a.bucket_size, retries=a.retries)
        d = Dictionary.build(keys, values, params, a.seed)
    except RetriesExhausted as e:
        rep = {"command": "build", "error": str(e), "attempts": getattr(e, "log", [])}
        _emit(rep, a.json, f"build failed: {e}")
        return EXIT_BUILD
    except (SucdError, ValueError) as e:
        _emit({"command": "build", "error": str(e)}, a.json, f"build failed: {e}")
        return EXIT_BUILD
    blob = d.to_bytes()
    with open(a.out, "wb") as f:
        f.write(blob)
    space = d.space_report()
    rep = {"command": "build",
           "params": {"U": a.universe, "n": len(keys), "sigma": a.sigma, "B": params.B, "seed": a.seed},
           "timings": {"build_s": time.perf_counter() - t0}, "space": space,
           "attempts": d.attempts_log, "bytes": len(blob)}
    _emit(rep, a.json, f"built n={len(keys)} U={a.universe} in attempt {d.attempt}: "
                       f"{space['total_bits']} bits, redundancy {space['main_redundancy_bits']:.1f} "
                       f"(budget {space['budget_bits']:.0f})")
    return EXIT_OK


def cmd_query(a) -> int:
    d = _load_dict(a.dict)
    ks = read_ints(a.batch) if a.batch else [a.key]
    answers, hist = [], Counter()
    for k in ks:
        v = d.query(k)
        hist[d.query_probes] += 1
        answers.append({"key": k, "value": v, "probes": d.query_probes})
    rep = {"command": "query", "answers": answers,
           "probe_histogram": {str(k): v for k, v in sorted(hist.items())}}
    lines = [f"{r['key']}: {'absent' if r['value'] is None else r['value']} ({r['probes']} probes)"
             for r in answers]
    _emit(rep, a.json, "\n".join(lines))
    return EXIT_OK


def cmd_verify(a) -> int:
    d = _load_dict(a.dict)
    keys = read_ints(a.keys)
    values = read_ints(a.values) if a.values else [0] * len(keys)
    want = dict(zip(keys, values))
    t0 = time.perf_counter()
    wrong, hist = 0, Counter()
    for x in range(d.params.U):
        got = d.query(x)
        hist[d.query_probes] += 1
        wrong += got != want.get(x)
    worst = max(hist)
    access = d.store.max_probes
    ok = wrong == 0 and access <= P_MAX
    rep = {"command": "verify", "params": {"U": d.params.U, "n": d.params.n},
           "timings": {"verify_s": time.perf_counter() - t0}, "wrong": wrong,
           "max_probes": worst, "max_access_probes": access, "access_probe_limit": P_MAX,
           "probe_histogram": {str(k): v for k, v in sorted(hist.items())},
           "passed": ok}
    _emit(rep, a.json, f"verified {d.params.U} queries: {wrong} wrong, max probes {worst} "
                       f"(per access {access}, limit {P_MAX})")
    return EXIT_OK if ok else EXIT_BOUND


def cmd_experiment(a) -> int:
    try:
        rep = experiments.run(a.name, a.trials, a.seed)
    except SucdError as e:
        _emit({"command": "experiment", "name": a.name, "error": str(e)}, a.json, f"failed: {e}")
        return EXIT_BUILD
    summary = f"{a.name}: {'ok' if rep['passed'] else 'BOUND VIOLATED'}"
    if "success_rates" in rep:
        summary += " " + json.dumps(rep["success_rates"])
    _emit(rep, a.json, summary)
    return EXIT_OK if rep["passed"] else EXIT_BOUND


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sucdict")
    ap.add_argument("--json", action="store_true", help="machine-readable report")
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("build")
    b.add_argument("--keys", required=True)
    b.add_argument("--values")
    b.add_argument("--out", required=True)
    b.add_argument("--universe", type=int, required=True)
    b.add_argument("--sigma", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--bucket-size", type=int)
    b.add_argument("--retries", type=int, default=20)
    b.set_defaults(fn=cmd_build)

    q = sub.add_parser("query")
    q.add_argument("--dict", required=True)
    g = q.add_mutually_exclusive_group(required=True)
    g.add_argument("--key", type=int)
    g.add_argument("--batch")
    q.set_defaults(fn=cmd_query)

    v = sub.add_parser("verify")
    v.add_argument("--dict", required=True)
    v.add_argument("--keys", required=True)
    v.add_argument("--values")
    v.set_defaults(fn=cmd_verify)

    e = sub.add_parser("experiment")
    e.add_argument("--name", required=True, choices=sorted(experiments.EXPERIMENTS))
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(fn=cmd_experiment)

    for p in (b, q, v, e):
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    a = parser().parse_args(argv)
    return a.fn(a)


if __name__ == "__main__":
    sys.exit(main())
