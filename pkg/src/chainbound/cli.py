"""Command-line entry point: ``chainbound {bound,simulate,verify,chain-inspect,phi-fit}``.

Exit codes: 0 success or verification pass, 1 dominance failure,
2 usage or configuration error, 3 numerical domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .bounds import (
    BlockPartition, best_report, martingale_block_bound, poly_martingale_model,
    theorem1_bound, u0_of_C, v_r,
)
from .chaining import as_conjugate, build_chain, chain_L, chain_terms, default_gamma, k_profile
from .config import BoundSpec, ConfigError, RunConfig, SimSpec, parse_grid
from .entropy import FiniteMetricSpace
from .errors import ChainboundError, DomainError, NoOnset
from .phi import PhiFunction, bphi_norm_mgf, natural_phi, phi_n, power_type, subgaussian, zeta
from .presets import resolve_preset
from .sim import (
    empirical_tail, example_A_suprema, poly_martingale_suprema, sample_example_A,
    sample_gaussian, sample_normalized_sum, write_suprema,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ChainboundError):
    pass


# parsing helpers


def parse_phi(spec: str) -> PhiFunction:
    name, _, arg = spec.partition(":")
    try:
        if name == "subgaussian":
            return subgaussian(float(arg) if arg else 1.0)
        if name == "power":
            return power_type(float(arg))
        if name == "natural":
            with open(arg) as fh:
                return PhiFunction.from_json(fh.read())
    except (ValueError, OSError) as e:
        raise UsageError(f"--phi {spec!r}: {e}") from None
    raise UsageError(f"--phi {spec!r}: expected subgaussian, power:<r> or natural:<path>")


def load_space(spec: str) -> FiniteMetricSpace:
    if spec.startswith("preset:"):
        return resolve_preset(spec[len("preset:"):])
    try:
        return FiniteMetricSpace.load(spec)
    except OSError as e:
        raise UsageError(f"--space: {e}") from None


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _emit(rows: list[dict], columns: list[str], fmt: str, out, extra: dict | None = None):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
        text = buf.getvalue()
    else:
        payload = {"meta": {"created": time.strftime("%Y-%m-%dT%H:%M:%S"), "version": __version__}}
        payload.update(extra or {})
        payload["rows"] = [{c: _json_safe(r.get(c)) for c in columns} for r in rows]
        text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _read_rows(path: str) -> list[dict]:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return json.loads(text)["rows"]
    return list(csv.DictReader(io.StringIO(text)))


# subcommands

BOUND_COLUMNS = ["u", "C", "N", "delta", "phi_star", "bound", "flags"]


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "space", None):
        cfg.space = args.space
    if getattr(args, "phi", None):
        cfg.phi = args.phi
    b = cfg.bound
    if getattr(args, "u", None):
        b.u = args.u
    if getattr(args, "C", None):
        b.C = args.C
    if getattr(args, "mode", None):
        b.mode = args.mode
    if getattr(args, "optimize", False):
        b.optimize = True
    if getattr(args, "delta_grid", None):
        cfg.chaining.delta_grid = args.delta_grid
    if getattr(args, "max_depth", None) is not None:
        cfg.chaining.max_depth = args.max_depth
    return cfg.validate()


def cmd_bound(args) -> int:
    cfg = _config_from_args(args)
    b = cfg.bound
    mode, _, marg = b.mode.partition(":")
    if mode == "martingale":
        d = int(marg) if marg else 1
        return _martingale_rows(d, b, args)
    if cfg.space is None:
        raise UsageError("missing --space (or space: in the config)")
    space = load_space(cfg.space)
    phi = parse_phi(cfg.phi)
    if mode == "t2-fixed":
        phi = phi_n(phi, int(marg))
    elif mode == "t2-uniform":
        phi = zeta(phi, int(marg))
    elif mode != "t1":
        raise UsageError(f"--mode {b.mode!r}: expected t1, t2-fixed:n, t2-uniform:n or martingale[:d]")
    table = as_conjugate(phi)
    ch = cfg.chaining
    profile = k_profile(space, ch.delta_grid, tuple(ch.strategies), tuple(ch.rhos), ch.max_depth)
    onsets = {}
    for C in b.C:
        try:
            onsets[C] = u0_of_C(profile, table, C)
        except NoOnset:
            onsets[C] = None
    rows = []
    for u in b.u:
        try:
            reports = [theorem1_bound(space, profile, table, C, u, u0=onsets[C], mode=b.mode) for C in b.C]
        except DomainError as e:
            raise DomainError(f"u = {u:g}: {e}") from None
        chosen = [best_report(reports)] if b.optimize else reports
        for r in chosen:
            rows.append({"u": r.u, "C": r.C, "N": r.covering_count, "delta": r.delta_used,
                         "phi_star": r.conj_value, "bound": r.bound, "flags": r.flags,
                         "u0": r.u0})
    _emit(rows, BOUND_COLUMNS, args.format, args.out,
          {"experiment": cfg.experiment, "mode": b.mode, "K0": profile.K0,
           "u0": {repr(k): v for k, v in onsets.items()}})
    return EXIT_OK


def _martingale_rows(d: int, b: BoundSpec, args) -> int:
    model = poly_martingale_model(d)
    part = BlockPartition(b.Q, b.n_max, start=1 if d == 1 else 2)
    rows = []
    for u in b.u:
        try:
            mb = martingale_block_bound(model, part, u, b.C_doob)
        except DomainError as e:
            raise DomainError(f"u = {u:g}: {e}") from None
        rows.append({"u": mb.u, "C": b.C_doob, "N": len(mb.blocks), "delta": None,
                     "phi_star": float(-np.log(mb.per_block.max())), "bound": mb.total, "flags": ""})
    _emit(rows, BOUND_COLUMNS, args.format, args.out, {"mode": f"martingale:{d}"})
    return EXIT_OK


TAIL_COLUMNS = ["u", "count", "p_hat", "ci_lo", "ci_hi"]


def _suprema(kind: str, replicates: int, seed: int, u: list[float], two_sided: bool) -> np.ndarray:
    name, _, arg = kind.partition(":")
    try:
        if name == "gaussian":
            cov = np.loadtxt(arg, delimiter=",", ndmin=2)
            X = sample_gaussian(cov, replicates, seed)
        elif name == "exampleA":
            n = int(arg)
            if u[0] > 0.5:
                return example_A_suprema(n, replicates, seed, floor=0.999 * u[0], two_sided=two_sided)
            X = sample_example_A(n, replicates, seed)
        elif name == "polymart":
            d, n = (int(v) for v in arg.split(","))
            model = poly_martingale_model(d)
            sup = poly_martingale_suprema(d, n, replicates, seed,
                                          lambda m: model.sigma(m) * v_r(m, model.r),
                                          n_min=1 if d == 1 else 2)
            if two_sided:
                raise UsageError("--two-sided is not available for polymart")
            return sup
        elif name == "sum":
            base, n = arg.rsplit(",", 1)
            bname, _, m = base.partition(":")
            X = sample_normalized_sum(bname, int(m), int(n), replicates, seed)
        else:
            raise UsageError(f"--kind {kind!r}: unknown field kind")
    except (ValueError, OSError) as e:
        raise UsageError(f"--kind {kind!r}: {e}") from None
    return np.abs(X).max(axis=1) if two_sided else X.max(axis=1)


def cmd_simulate(args) -> int:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    sim = cfg.sim or SimSpec(kind=None, replicates=None, seed=None)
    kind = args.kind or sim.kind
    replicates = args.replicates if args.replicates is not None else sim.replicates
    seed = args.seed if args.seed is not None else sim.seed
    u = args.u or sim.u or cfg.bound.u
    if kind is None or replicates is None or seed is None:
        raise UsageError("simulate needs --kind, --replicates and --seed")
    u = parse_grid(u, "--u")
    sup = _suprema(kind, int(replicates), int(seed), u, args.two_sided or sim.two_sided)
    tail = empirical_tail(sup, u)
    if args.raw:
        write_suprema(args.raw, sup)
    rows = [dict(zip(TAIL_COLUMNS, r)) for r in tail.rows()]
    _emit(rows, TAIL_COLUMNS, args.format, args.out,
          {"kind": kind, "replicates": int(replicates), "seed": int(seed)})
    return EXIT_OK


VERIFY_COLUMNS = ["u", "bound", "ci_hi", "dominated", "log_ratio", "in_range"]


def cmd_verify(args) -> int:
    brows = _read_rows(args.bound)
    trows = _read_rows(args.tail)
    best: dict = {}
    for r in brows:
        u = float(r["u"])
        flagged = "below_u0" in str(r.get("flags") or "")
        cur = best.get(u)
        cand = (flagged, float(r["bound"]))
        if cur is None or cand < cur:
            best[u] = cand
    tail = {float(r["u"]): float(r["ci_hi"]) for r in trows}
    if set(best) != set(tail):
        raise UsageError(f"u grids differ: bound has {sorted(best)}, tail has {sorted(tail)}")
    rows = []
    checked = 0
    ok = True
    for u in sorted(best):
        flagged, bound = best[u]
        ci_hi = tail[u]
        dom = bound >= ci_hi
        if not flagged:
            checked += 1
            ok &= dom
        ratio = math.log(bound / ci_hi) if ci_hi > 0 and bound > 0 else math.inf
        rows.append({"u": u, "bound": bound, "ci_hi": ci_hi, "dominated": dom,
                     "log_ratio": ratio, "in_range": not flagged})
    if checked == 0:
        raise UsageError("no u at or above the onset u0(C): nothing to verify")
    _emit(rows, VERIFY_COLUMNS, args.format, args.out, {"pass": bool(ok)})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_chain_inspect(args) -> int:
    space = load_space(args.space)
    t0 = args.t0
    if t0 not in space.labels:
        try:
            t0 = type(space.labels[0])(t0)
        except (TypeError, ValueError):
            pass
    idx = int(space.index([t0])[0])
    delta = float(args.delta)
    chain = build_chain(space, idx, delta, "dyadic", max_depth=args.max_depth)
    gamma = default_gamma(max(chain.depth, 1), args.rho)
    if args.strategy == "refine":
        chain = build_chain(space, idx, delta, "refine", gamma=gamma, max_depth=args.max_depth)
    P = chain.projections(space)
    ball = np.asarray(chain.ball)
    terms = chain_terms(space, chain, gamma)
    L = chain_L(space, chain, gamma)
    worst = int(np.argmax(terms.sum(axis=0))) if terms.size else 0
    rows = []
    for m, lev in enumerate(chain.levels):
        rows.append({
            "level": m,
            "size": len(lev),
            "max_proj_dist": float(space.dist[ball, P[m]].max()),
            "L_term": float(terms[m - 1, worst]) if m > 0 else 0.0,
        })
    _emit(rows, ["level", "size", "max_proj_dist", "L_term"], args.format, args.out,
          {"L": L, "argmax": space.labels[chain.ball[worst]],
           "chain": json.loads(chain.to_json(space, gamma))})
    return EXIT_OK


def _load_matrix(path: str) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.strip().split(",") if v.strip()]
        skip = 0
    except ValueError:
        skip = 1
    return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)


def cmd_phi_fit(args) -> int:
    try:
        X = _load_matrix(args.data)
    except (OSError, ValueError) as e:
        raise UsageError(f"--data: {e}") from None
    if args.norm_phi:
        phi = parse_phi(args.norm_phi)
        rows = [{"index": j, "tau": bphi_norm_mgf(X[:, j], phi).value} for j in range(X.shape[1])]
        _emit(rows, ["index", "tau"], args.format, args.out, {"phi": args.norm_phi})
        return EXIT_OK
    grid = parse_grid(args.lambda_grid, "--lambda-grid")
    phi = natural_phi(X, grid)
    if args.format == "json":
        text = phi.to_json() + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        rows = [{"lambda": float(l), "phi": float(v)} for l, v in zip(phi.grid, phi.values)]
        _emit(rows, ["lambda", "phi"], "csv", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chainbound", description="Chaining tail bounds for suprema of random fields.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--config", help="YAML run configuration")

    b = sub.add_parser("bound", help="tail bound reports")
    common(b)
    b.add_argument("--space", help="distance CSV/JSON or preset:<name>")
    b.add_argument("--phi", help="subgaussian[:s2] | power:<r> | natural:<path>")
    b.add_argument("--u", help="u grid: a,b,c or lo:hi:n")
    b.add_argument("--C", help="C grid")
    b.add_argument("--mode", help="t1 | t2-fixed:n | t2-uniform:n | martingale[:d]")
    b.add_argument("--optimize", action="store_true", help="keep only the best C per u")
    b.add_argument("--delta-grid", dest="delta_grid")
    b.add_argument("--max-depth", dest="max_depth", type=int)
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("simulate", help="Monte-Carlo tail of the supremum")
    common(s)
    s.add_argument("--kind", help="gaussian:<cov.csv> | exampleA:<n> | polymart:<d>,<n> | sum:<base>:<m>,<n>")
    s.add_argument("--replicates", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--u")
    s.add_argument("--two-sided", dest="two_sided", action="store_true")
    s.add_argument("--raw", help="write per-replicate suprema (binary)")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check bound dominance over an empirical tail")
    common(v)
    v.add_argument("--bound", required=True)
    v.add_argument("--tail", required=True)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("chain-inspect", help="describe one chaining sequence")
    common(c)
    c.add_argument("--space", required=True)
    c.add_argument("--t0", required=True)
    c.add_argument("--delta", type=float, default=1.0)
    c.add_argument("--strategy", choices=["dyadic", "refine"], default="dyadic")
    c.add_argument("--rho", type=float, default=0.75)
    c.add_argument("--max-depth", dest="max_depth", type=int)
    c.set_defaults(func=cmd_chain_inspect)

    f = sub.add_parser("phi-fit", help="natural phi or B(phi) norms from samples")
    common(f)
    f.add_argument("--data", required=True, help="CSV of replicate x index samples")
    f.add_argument("--lambda-grid", dest="lambda_grid", default="0.05:3:60")
    f.add_argument("--norm-phi", dest="norm_phi", help="report per-column norms under this phi")
    f.set_defaults(func=cmd_phi_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"chainbound: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as e:
        print(f"chainbound: numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ChainboundError as e:
        print(f"chainbound: numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
