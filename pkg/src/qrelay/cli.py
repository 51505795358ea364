"""Command-line front end.

Four commands: ``validate`` a channel-spec file, ``rate`` (maximize the
partial decode-forward rate), ``simulate`` (block-Markov coding run),
and ``check`` (randomized verification of the operator lemmas and
typical-projector bounds).

Reports go to stdout as a human table or, with ``--json``, as a single
JSON document whose digest makes runs reproducible byte for byte: the
document contains the command, full config echo, seed, tool version and
results; wall-clock time is printed to stderr only, so identical seeds
give identical bytes.

Exit codes: 0 success, 1 validation/check failure, 2 runtime cap
exceeded, 3 parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, channels, coding_sim, optimizer, qops, relay_model, typicality
from .errors import ParseError, SizeCap

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CAP = 2
EXIT_PARSE = 3

# Hidden hook for mutation-testing the lemma suite; never set in normal use.
_HN_COEFF_ENV = "QRELAY_HN_T_COEFF"


def _digest(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _emit(command: str, config: dict, results: dict, as_json: bool, human_lines) -> None:
    payload = {"command": command, "version": __version__,
               "config": config, "results": results}
    payload["digest"] = _digest(payload)
    if as_json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        for line in human_lines:
            print(line)
        print(f"digest: {payload['digest']}")


def _load_channel(path: str):
    """Returns (channel, None) or (None, exit_code) after printing diagnostics."""
    try:
        doc = channels.parse_spec_text(channels.read_spec_text(path))
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return None, EXIT_PARSE
    diags = channels.spec_diagnostics(doc)
    if diags:
        for code, where, detail in diags:
            print(f"{code} at {where}: {detail}", file=sys.stderr)
        return None, EXIT_VALIDATION
    return channels.channel_from_spec_dict(doc), None


def cmd_validate(args) -> int:
    try:
        doc = channels.parse_spec_text(channels.read_spec_text(args.path))
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    diags = channels.spec_diagnostics(doc)
    results = {
        "clean": not diags,
        "diagnostics": [{"code": c, "where": w, "detail": d} for c, w, d in diags],
    }
    lines = [f"{d['code']} at {d['where']}: {d['detail']}" for d in results["diagnostics"]]
    lines.append("clean" if results["clean"] else f"{len(diags)} violation(s)")
    _emit("validate", {"path": args.path}, results, args.json, lines)
    return EXIT_OK if results["clean"] else EXIT_VALIDATION


def cmd_rate(args) -> int:
    channel, err = _load_channel(args.path)
    if err is not None:
        return err
    cfg = optimizer.OptimizerConfig(
        u_size=args.u_size,
        restarts=args.restarts,
        max_iters=args.max_iters,
        seed=args.seed,
        mode="grid" if args.grid is not None else "multistart-local",
        grid_resolution=args.grid if args.grid is not None else 16,
        threads=args.threads,
    )
    report = optimizer.optimize_rate(channel, cfg)
    config = {
        "path": args.path, "u_size": cfg.resolved_u_size(channel),
        "restarts": cfg.restarts, "max_iters": cfg.max_iters, "seed": cfg.seed,
        "mode": cfg.mode, "grid_resolution": cfg.grid_resolution, "threads": cfg.threads,
    }
    results = report.to_json_dict()
    q = report.quantities
    lines = [
        f"partial decode-forward rate: {q.pdf_rate:.6f} bits/use",
        f"  I(XX1;B)      = {q.i_xx1_b:.6f}",
        f"  I(U;B1|X1)    = {q.i_u_b1_given_x1:.6f}",
        f"  I(X;B|X1,U)   = {q.i_x_b_given_x1u:.6f}",
        f"preset direct transmission: {report.preset_direct:.6f}",
        f"preset full decode-forward: {report.preset_df:.6f}",
        f"best distribution p(u,x,x1): {np.array2string(report.best_dist.probs, precision=4)}",
    ]
    _emit("rate", config, results, args.json, lines)
    return EXIT_OK


def cmd_simulate(args) -> int:
    channel, err = _load_channel(args.path)
    if err is not None:
        return err
    if args.dist_file is not None:
        try:
            with open(args.dist_file, "r", encoding="utf-8") as fh:
                probs = np.asarray(json.load(fh), dtype=float)
            dist = relay_model.InputDistribution(probs)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            print(f"parse error in dist file: {exc}", file=sys.stderr)
            return EXIT_PARSE
    else:
        u_size = args.u_size if args.u_size is not None else channel.x_size
        dist = relay_model.InputDistribution.uniform(u_size, channel.x_size, channel.x1_size)
    cfg = coding_sim.SimulationConfig(
        n=args.n, b=args.blocks,
        rates=coding_sim.RateSplit(r_m=args.rm, r_ell=args.rl),
        delta=args.delta, trials=args.trials, seed=args.seed,
        mode="exact" if args.mode == "exact" else "hn_bound",
        genie=not args.chained,
        threads=args.threads,
    )
    try:
        report = coding_sim.run_simulation(channel, dist, cfg)
    except SizeCap as exc:
        print(f"size cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    config = dict(report.config)
    config.update({"path": args.path, "dist_file": args.dist_file,
                   "u_size": dist.u_size, "threads": args.threads})
    results = report.to_json_dict()
    lines = [
        f"blocks: {cfg.b}, n = {cfg.n}, |M| = {config['m_count']}, |L| = {config['l_count']}, "
        f"mode = {cfg.mode}, {'genie' if cfg.genie else 'chained'}",
        f"relay error per block:       {['%.4f' % v for v in report.relay_error_mean]}",
        f"  95% half-widths:           {['%.4f' % v for v in report.relay_error_ci]}",
        f"destination error per window: {['%.4f' % v for v in report.dest_error_mean]}",
        f"  95% half-widths:           {['%.4f' % v for v in report.dest_error_ci]}",
        f"effective rate factor (b-1)/b = {report.effective_rate_factor:.4f}",
    ]
    if report.hn_components is not None:
        h = report.hn_components
        lines.append(f"bound components per window: alpha={h['alpha']} beta={h['beta']} "
                     f"(A)={h['term_a']} (B)={h['term_b']} total={h['total']}")
    _emit("simulate", config, results, args.json, lines)
    return EXIT_OK


def _parse_dims(spec: str):
    lo, _, hi = spec.partition("..")
    lo, hi = int(lo), int(hi or lo)
    if lo < 2 or hi < lo:
        raise ValueError(f"bad dims range {spec!r}")
    return lo, hi


def _random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def _random_contraction(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(g)
    vals = rng.uniform(0.0, 1.0, size=d)
    return (q * vals) @ q.conj().T


def run_check_suites(dims=(2, 16), instances=100, seed=0, hn_t_coeff=4.0) -> list:
    """Randomized verification of the four operator lemmas and the three
    typical-projector bounds.  Returns one dict per suite."""
    lo, hi = dims
    rng = np.random.default_rng(seed)
    tol = 1e-9
    suites = []

    def record(name, margins):
        worst = float(np.min(margins))
        suites.append({"name": name, "instances": len(margins),
                       "worst_margin": worst, "pass": bool(worst >= -tol)})

    margins = []
    for _ in range(instances):
        d = int(rng.integers(lo, hi + 1))
        lam = _random_contraction(rng, d)
        rho, sig = _random_density(rng, d), _random_density(rng, d)
        lhs = float(np.trace(lam @ rho).real)
        rhs = float(np.trace(lam @ sig).real) + qops.trace_norm(rho - sig)
        margins.append(rhs - lhs)
    record("trace-substitution", margins)

    margins = list(coding_sim.hn_adversarial_margins(t_coeff=hn_t_coeff))
    while len(margins) < instances:
        d = int(rng.integers(lo, hi + 1))
        s = _random_contraction(rng, d)
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        margins.append(coding_sim.check_hayashi_nagaoka(s, (g @ g.conj().T) / d, t_coeff=hn_t_coeff))
    record("hayashi-nagaoka", margins[:instances])

    margins = []
    for _ in range(instances):
        da = int(rng.integers(lo, min(hi, 8) + 1))
        db = int(rng.integers(lo, min(hi, 8) + 1))
        margins.append(coding_sim.check_union_bound(
            _random_contraction(rng, da), _random_contraction(rng, db)))
    record("operator-union-bound", margins)

    margins = []
    for _ in range(instances):
        d = int(rng.integers(lo, min(hi, 8) + 1))
        k = int(rng.integers(2, 5))
        w = rng.dirichlet(np.ones(k))
        ens = [(float(w[i]), _random_density(rng, d)) for i in range(k)]
        rep = coding_sim.check_gentle_operator(ens, _random_contraction(rng, d))
        margins.append(rep.bound - rep.avg_trace_distance)
    record("gentle-operator-ensembles", margins)

    rank_margins, sandwich_margins, lower_margins = [], [], []
    for _ in range(instances):
        d = int(rng.integers(2, 4))
        n = int(rng.integers(2, 5))
        delta = float(rng.uniform(0.15, 0.6))
        rho = qops.validate_density(_random_density(rng, d), [d])
        params = typicality.TypicalityParams(n, delta)
        pi = typicality.average_typical_projector(rho, params)
        rep = typicality.projector_bounds_check(
            pi, None, qops.von_neumann_entropy(rho), params, raise_on_fail=False)
        rank_margins.append(rep.rank_bound - rep.rank)
        sandwich_margins.append(rep.sandwich_margin)
        lower_margins.append(rep.lower_margin)
    record("typicality-rank-bound", rank_margins)
    record("typicality-sandwich-bound", sandwich_margins)
    record("typicality-lower-bound", lower_margins)
    return suites


def cmd_check(args) -> int:
    try:
        dims = _parse_dims(args.dims)
    except ValueError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    hn_t_coeff = float(os.environ.get(_HN_COEFF_ENV, "4.0"))
    suites = run_check_suites(dims=dims, instances=args.instances, seed=args.seed,
                              hn_t_coeff=hn_t_coeff)
    all_pass = all(s["pass"] for s in suites)
    results = {"suites": suites, "all_pass": all_pass,
               "total_checks": sum(s["instances"] for s in suites)}
    config = {"dims": args.dims, "instances": args.instances, "seed": args.seed}
    lines = [
        f"{'PASS' if s['pass'] else 'FAIL'}  {s['name']:<28} "
        f"instances={s['instances']:<5d} worst margin={s['worst_margin']:+.3e}"
        for s in suites
    ]
    lines.append(f"{results['total_checks']} checks, "
                 + ("all PASS" if all_pass else "FAILURES present"))
    _emit("check", config, results, args.json, lines)
    return EXIT_OK if all_pass else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrelay",
        description="Achievable rates and block-Markov coding simulation "
                    "for relay channels with classical inputs and quantum outputs.")
    parser.add_argument("--version", action="version", version=f"qrelay {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a channel-spec file against every invariant")
    p.add_argument("path", help="spec file path or builtin:<name>")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rate", help="maximize the partial decode-forward rate")
    p.add_argument("path")
    p.add_argument("--u-size", type=int, default=None, dest="u_size")
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--max-iters", type=int, default=400, dest="max_iters")
    p.add_argument("--grid", type=int, default=None, metavar="RESOLUTION",
                   help="exhaustive simplex grid at this resolution instead of multistart search")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("simulate", help="run the b-block coding simulation")
    p.add_argument("path")
    p.add_argument("--n", type=int, required=True, help="block length")
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--rm", type=float, default=0.0, help="rate of the direct message part (bits/use)")
    p.add_argument("--rl", type=float, default=0.0, help="rate of the relayed message part (bits/use)")
    p.add_argument("--delta", type=float, default=0.5, help="typicality width (bits/symbol)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--mode", choices=["exact", "hn"], default="exact")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--genie", action="store_true", default=True,
                       help="destination knows the true previous partial message (default)")
    group.add_argument("--chained", action="store_true", default=False,
                       help="destination reuses its own previous decision")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--u-size", type=int, default=None, dest="u_size",
                   help="uniform input distribution with this u alphabet (default: x alphabet)")
    p.add_argument("--dist-file", default=None, dest="dist_file",
                   help="JSON nested array p[u][x][x1] overriding the uniform default")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="randomized lemma and projector-bound verification")
    p.add_argument("--dims", default="2..16", help="dimension range, e.g. 2..16")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    try:
        code = args.func(args)
    except SizeCap as exc:
        print(f"size cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    print(f"wall-clock: {time.monotonic() - t0:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
