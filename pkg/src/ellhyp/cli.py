"""Command-line driver: gamma values, single verifications, suites and Fubini checks.

Exit codes: 0 pass, 1 usage error, 2 identity failed, 3 quadrature did not converge.
Setting ELLHYP_CACHE_DIR caches verification reports on disk, keyed by the request.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .efun import DEFAULT_POLICY, Base, BaseError, EllipticGammaPole, GammaVariant, _exponent_pairs, egamma, variant_base
from .quad import QuadPolicy

EXIT = {"pass": 0, "fail": 2, "no-converge": 3}
USAGE = 1
CACHE_ENV = "ELLHYP_CACHE_DIR"


class UsageError(Exception):
    pass


def parse_complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return complex(float(text[0]), float(text[1]))
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"not a complex number: {text!r}") from None


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _policy(args) -> QuadPolicy | None:
    if not args.grid and args.workers == 1:
        return None
    n0, n_max, rtol = 32, None, None
    if args.grid:
        parts = args.grid.split(",")
        try:
            n0 = int(parts[0])
            n_max = int(parts[1]) if len(parts) > 1 and parts[1] else None
            rtol = float(parts[2]) if len(parts) > 2 and parts[2] else None
        except ValueError:
            raise UsageError(f"--grid expects N0[,NMAX[,RTOL]], got {args.grid!r}") from None
    for v in (n0, n_max):
        if v is not None and (v < 8 or v & (v - 1)):
            raise UsageError("grid sizes must be powers of two >= 8")
    return QuadPolicy(n0, n_max, rtol, args.workers)


def _signs(items) -> dict:
    out = {}
    for item in items or ():
        name, _, val = item.partition("=")
        if val not in ("1", "+1", "-1"):
            raise UsageError(f"--sign expects NAME=+1 or NAME=-1, got {item!r}")
        out[name] = int(val)
    return out


def _base(args, entry) -> Base:
    if args.p is None and args.q is None:
        return entry.default_base()
    d = entry.default_base()
    p = parse_complex(args.p) if args.p is not None else d.p
    q = parse_complex(args.q) if args.q is not None else d.q
    if p.imag == 0:
        p = p.real
    if q.imag == 0:
        q = q.real
    try:
        return Base(p, q)
    except BaseError as exc:
        raise UsageError(str(exc)) from None


# ----------------------------------------------------------------- gamma


def cmd_gamma(args) -> int:
    x = parse_complex(args.x)
    try:
        base = Base(parse_complex(args.p), parse_complex(args.q))
        b = variant_base(base, args.variant)
        value = egamma(x, b.p, b.q)
    except (BaseError, EllipticGammaPole) as exc:
        raise UsageError(str(exc)) from None
    pq = b.p * b.q
    refl = abs(value * egamma(pq / x, b.p, b.q) - 1.0)
    out = {
        "variant": args.variant, "x": [x.real, x.imag],
        "base": {"p": [complex(b.p).real, complex(b.p).imag], "q": [complex(b.q).real, complex(b.q).imag]},
        "value": [value.real, value.imag],
        "truncation": {
            "eps": DEFAULT_POLICY.eps,
            "terms_numerator": int(_exponent_pairs(b.p, b.q, abs(pq / x), DEFAULT_POLICY.eps, DEFAULT_POLICY.max_terms).size),
            "terms_denominator": int(_exponent_pairs(b.p, b.q, abs(x), DEFAULT_POLICY.eps, DEFAULT_POLICY.max_terms).size),
            "reflection_residual": refl,
        },
    }
    _dump(out, args.json)
    return 0


# ---------------------------------------------------------------- verify


def _read_params(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read parameters from {path}: {exc}") from None
    if isinstance(doc, dict) and "params" in doc:
        doc = doc["params"]
    out = {}
    for k, v in doc.items():
        if isinstance(v, dict) and "value" in v:
            v = v["value"]
        out[k] = parse_complex(v)
    return out


def _cache_key(request: dict) -> str:
    blob = json.dumps({"version": __version__, **request}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def run_verify(identity: str, n: int, m, base: Base | None, seed: int | None, params: dict | None,
               signs: dict, policy: QuadPolicy | None, timing: bool) -> dict:
    """Instantiate and verify; returns the JSON report (possibly from the on-disk cache)."""
    from .catalog import instantiate, verify

    cache_dir = os.environ.get(CACHE_ENV)
    key = None
    if cache_dir:
        key = _cache_key({"identity": identity, "n": n, "m": m,
                          "base": None if base is None else [str(complex(base.p)), str(complex(base.q))],
                          "seed": seed, "params": {k: str(v) for k, v in (params or {}).items()},
                          "signs": signs, "policy": None if policy is None else repr(policy), "timing": timing})
        hit = Path(cache_dir) / f"{key}.json"
        if hit.is_file():
            return json.loads(hit.read_text())
    inst = instantiate(identity, n, m, base, params=params, seed=seed, signs=signs)
    report = verify(inst, policy, timing=timing).to_json()
    if key:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        (Path(cache_dir) / f"{key}.json").write_text(json.dumps(report, sort_keys=True))
    return report


def cmd_verify(args) -> int:
    from .catalog import AdmissibilityError, get_entry

    try:
        entry = get_entry(args.identity)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    if args.seed is not None and args.params:
        raise UsageError("give either --seed or --params, not both")
    params = _read_params(args.params) if args.params else None
    seed = None if params is not None else (0 if args.seed is None else args.seed)
    try:
        report = run_verify(entry.name, args.n, args.m, _base(args, entry), seed, params,
                            _signs(args.sign), _policy(args), not args.no_timing)
    except (ValueError, AdmissibilityError, BaseError) as exc:
        raise UsageError(str(exc)) from None
    _dump(report, args.json)
    if args.json not in (None, "-"):
        print(f"{report['identity']} n={report['n']} rel_err={report['rel_err']:.3e} "
              f"tol={report['tolerance']:.0e} {report['verdict']}")
    return EXIT[report["verdict"]]


# ----------------------------------------------------------------- suite


def suite_rows(kind: str, seeds: int, include_slow: bool = False) -> list:
    """(identity, n, m, signs, seed) rows of the smoke or full matrix."""
    from .catalog import _load

    rows = []
    for e in _load():
        if e.doc.get("slow") and not include_slow:
            continue
        if kind == "smoke" and e.kind == "fubini_pair":
            continue
        for n, m in e.supported:
            if kind == "smoke" and max(s.dim for s in e.specs(n, m)) > 1:
                continue
            variants = [{}] + [{k: -1} for k in e.signed]
            for signs in variants:
                for seed in range(seeds):
                    rows.append((e.name, n, m, signs, seed))
    return rows


def cmd_suite(args) -> int:
    rows = suite_rows(args.suite, args.seeds, args.slow)
    policy = _policy(args)

    def run(row):
        name, n, m, signs, seed = row
        try:
            return run_verify(name, n, m, None, seed, None, signs, policy, not args.no_timing)
        except Exception as exc:  # a broken row is reported, not fatal to the suite
            return {"identity": name, "n": n, "m": m, "signs": signs, "seed": seed,
                    "verdict": "error", "error": f"{type(exc).__name__}: {exc}"}

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        reports = list(pool.map(run, rows))  # map keeps row order
    order = sorted(range(len(rows)), key=lambda i: (rows[i][0], rows[i][1], rows[i][2] or 0,
                                                      sorted(rows[i][3].items()), rows[i][4]))
    reports = [reports[i] for i in order]
    counts = {}
    for r in reports:
        counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
    out = {"suite": args.suite, "seeds": args.seeds, "rows": reports, "counts": counts}
    if not args.no_timing:
        out["seconds"] = round(time.perf_counter() - t0, 3)
    _dump(out, args.json)
    for r in reports:
        err = r.get("rel_err")
        err = "-" if err is None or (isinstance(err, float) and math.isnan(err)) else f"{err:.2e}"
        signs = "".join(f" {k}={v:+d}" for k, v in sorted(r.get("signs", {}).items()))
        m = "" if r.get("m") is None else f" m={r['m']}"
        print(f"{r['identity']:<20} n={r['n']}{m}{signs} seed={r['seed']} rel_err={err} {r['verdict']}",
              file=sys.stderr)
    bad = [r["verdict"] for r in reports if r["verdict"] != "pass"]
    if not bad:
        return 0
    return 3 if all(v == "no-converge" for v in bad) else 2


# ---------------------------------------------------------------- fubini


def cmd_fubini(args) -> int:
    from . import fubini

    if args.list:
        print("\n".join(fubini.list_cases()))
        return 0
    if args.identity:
        from .catalog import get_entry

        try:
            e = get_entry(args.identity)
            rels = e.relations(args.n, args.m)
            specs = e.specs(args.n, args.m)
        except (KeyError, ValueError) as exc:
            raise UsageError(str(exc.args[0])) from None
        cases = [(s.name, fubini.graph_from_spec(s, rels), rels, None) for s in specs]
    elif args.case:
        try:
            g, rels, doc = fubini.load_case(args.case)
        except (KeyError, OSError, json.JSONDecodeError) as exc:
            raise UsageError(str(exc)) from None
        cases = [(doc.get("name", args.case), g, rels, doc.get("expect"))]
    else:
        raise UsageError("give --case, --identity or --list")
    out, admissible = [], True
    for name, g, rels, expect in cases:
        try:
            v = fubini.check_admissibility(g, rels)
        except fubini.PathOverflow as exc:
            raise UsageError(str(exc)) from None
        row = {"case": name, "graph": g.summary(), **v.to_json()}
        row["offending"] = row["offending"][: args.max_witnesses]
        if g.n:
            args_ = fubini.prefactor_arguments(g.map_labels(lambda mo: fubini.relations_reduce(mo, rels))
                                               if len(rels) else g)
            row["prefactor_arguments"] = {k: {"distinct": len(c), "total": sum(c.values())} for k, c in args_.items()}
        if expect is not None:
            row["expected"] = expect
        admissible = admissible and v.admissible
        out.append(row)
    _dump(out if len(out) > 1 else out[0], args.json)
    return 0 if admissible else 2


def cmd_list(args) -> int:
    from .catalog import list_identities

    _dump(list_identities(), args.json)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ellhyp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="JSON file whose keys mirror the long flag names")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gamma", help="evaluate an elliptic gamma function")
    g.add_argument("--variant", choices=[v.value for v in GammaVariant], default="pq")
    g.add_argument("--x", required=True)
    g.add_argument("--p", required=True)
    g.add_argument("--q", required=True)
    g.add_argument("--json", default="-")
    g.set_defaults(func=cmd_gamma)

    def common(sp):
        sp.add_argument("--grid", help="N0[,NMAX[,RTOL]] refinement policy")
        sp.add_argument("--workers", type=int, default=1, help="threads per grid evaluation")
        sp.add_argument("--no-timing", action="store_true", help="omit wall-clock seconds (byte-stable output)")
        sp.add_argument("--json", help="write the JSON report here ('-' for stdout)")

    v = sub.add_parser("verify", help="check one identity instance")
    v.add_argument("--identity", required=True)
    v.add_argument("--n", type=int, default=1)
    v.add_argument("--m", type=int)
    v.add_argument("--p")
    v.add_argument("--q")
    v.add_argument("--seed", type=int)
    v.add_argument("--params", help="JSON file of free parameters")
    v.add_argument("--sign", action="append", help="NAME=+1|-1 for signed square-root parameters")
    common(v)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("suite", help="run the smoke or full matrix")
    s.add_argument("--suite", choices=["smoke", "full"], default="smoke")
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    s.add_argument("--slow", action="store_true", help="include entries marked slow")
    common(s)
    s.set_defaults(func=cmd_suite)

    f = sub.add_parser("fubini", help="Fubini admissibility of a graph case or catalog entry")
    f.add_argument("--case", help="corpus case name or path to a case JSON file")
    f.add_argument("--identity")
    f.add_argument("--n", type=int, default=1)
    f.add_argument("--m", type=int)
    f.add_argument("--list", action="store_true")
    f.add_argument("--max-witnesses", type=int, default=10)
    f.add_argument("--json", default="-")
    f.set_defaults(func=cmd_fubini)

    ls = sub.add_parser("list", help="list catalog identities")
    ls.add_argument("--json", default="-")
    ls.set_defaults(func=cmd_list)
    return ap


def _config_tokens(cfg: dict) -> list:
    toks = []
    for k, val in cfg.items():
        flag = "--" + k.lstrip("-").replace("_", "-")
        if val is True:
            toks.append(flag)
        elif val is False or val is None:
            continue
        else:
            for item in (val if isinstance(val, list) else [val]):
                toks += [flag, str(item)]
    return toks


def _apply_config(ap: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    """Config keys become flags placed right after the subcommand, so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return ap.parse_args(argv)
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    cmds = {"gamma", "verify", "suite", "fubini", "list"}
    pos = next((i for i, t in enumerate(rest) if t in cmds), None)
    if pos is None:
        raise UsageError("a subcommand is required")
    return ap.parse_args(rest[: pos + 1] + _config_tokens(cfg) + rest[pos + 1:])


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(ap, argv)
        return args.func(args)
    except SystemExit as exc:  # argparse errors
        return USAGE if exc.code not in (0, None) else 0
    except UsageError as exc:
        print(f"ellhyp: error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
