"""Command-line front end: ``qtc <command> ...``.

Exit codes: 0 success, 1 input error, 2 an inequality or validation check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .entropy import fisher_information, relative_entropy
from .errors import QTCError
from .estimation import estimation_report, family_by_name
from .generator import (
    DBGenerator,
    is_depolarizing,
    mlsi_constant_depolarizing,
    read_generator,
    site_sum,
    spectral_gap,
    tensorize,
    validate,
)
from .inequalities import (
    chain_check,
    depolarizing_gauss_bound,
    exp_concentration_bound,
    gauss_concentration_bound,
    product_concentration_bound,
    tail_probability,
)
from .linalg import matrix_to_json, read_matrix, trace_norm
from .wasserstein import w1, w2_bracket

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2
SIG = 12


def fmt(x) -> str:
    """Fixed-precision float formatting shared by every report."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x == 0:
            return "0"
        return format(x, f".{SIG}g")
    return str(x)


def _round(obj):
    """Round floats in a JSON tree to SIG significant digits."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not np.isfinite(x) else float(format(x, f".{SIG}g"))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def parse_grid(text: str) -> np.ndarray:
    """'start:stop:step', inclusive of stop within 1e-12."""
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise QTCError(f"bad grid {text!r}; expected start:stop:step") from None
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise QTCError(f"bad grid {text!r}; expected start:stop:step with step > 0")
    a, b, h = parts
    n = int(np.floor((b - a) / h + 1e-12 / h)) + 1
    return np.round(a + h * np.arange(n), 12)


def thread_count(arg: int | None) -> int:
    if arg is None:
        env = os.environ.get("QTC_THREADS", "1")
        try:
            arg = int(env)
        except ValueError:
            raise QTCError(f"QTC_THREADS must be an integer, got {env!r}") from None
    if arg < 0:
        raise QTCError("threads must be >= 0")
    return arg or (os.cpu_count() or 1)


@contextmanager
def pool(threads: int):
    """Yield an order-preserving map function backed by a thread pool."""
    if threads <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=threads) as ex:
        yield ex.map


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json_text(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _csv_text(header_comment: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _load_generator(args) -> DBGenerator:
    return read_generator(args.generator)


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    gen = _load_generator(args)
    rep = validate(gen)
    out = {"command": "validate", "generator": args.generator, "dim": gen.dim, "nterms": gen.nterms,
           "ok": rep.ok, "checks": rep.checks}
    try:
        out["spectral_gap"] = spectral_gap(gen).spectral_gap
        out["primitive"] = True
    except QTCError:
        out["primitive"] = False
    _emit(_json_text(out), args.report)
    return EXIT_OK if rep.ok and out["primitive"] else EXIT_VIOLATION


def cmd_evolve(args) -> int:
    gen = _load_generator(args)
    rho = read_matrix(args.state, "full_rank")
    if rho.shape != gen.sigma.shape:
        raise QTCError("state and generator dimensions differ")
    rows = []
    for t in parse_grid(args.times):
        rt = gen.evolve(rho, float(t))
        rows.append((t, relative_entropy(rt, gen.sigma), fisher_information(gen, rt), trace_norm(rt - gen.sigma)))
    text = _csv_text(f"qtc {__version__} evolve generator={args.generator} state={args.state}",
                     ["t", "relative_entropy_D(rho_t||sigma)", "entropy_production_I(rho_t)",
                      "trace_norm_rho_t-sigma"], rows)
    _emit(text, args.report)
    return EXIT_OK


def cmd_wasserstein(args) -> int:
    gen = _load_generator(args)
    rho = read_matrix(args.rho, "full_rank")
    tau = read_matrix(args.tau, "full_rank") if args.tau else gen.sigma
    with pool(thread_count(args.threads)) as map_fn:
        if args.order == 1:
            res = w1(gen, rho, tau, args.variant, starts=args.starts, seed=args.seed, map_fn=map_fn)
        else:
            res = w2_bracket(gen, rho, tau, K=args.segments, K_max=args.k_max, starts=args.starts,
                             seed=args.seed, map_fn=map_fn)
    out = {"command": "wasserstein", "seed": args.seed, **res.to_json()}
    if args.order == 2:
        out["lower_bounds"] = res.info.get("lower_bounds", {})
        out["K"] = res.info.get("K")
        out["speed_variance"] = res.info.get("speed_variance")
    if args.certificate:
        cert = res.certificate
        if args.order == 1:
            payload = {"f": matrix_to_json(cert)}
        else:
            payload = {"K": cert.K, "states": [matrix_to_json(s) for s in cert.states]}
        Path(args.certificate).write_text(_json_text(payload))
        out["certificate_file"] = args.certificate
    _emit(_json_text(out), args.report)
    return EXIT_OK


def cmd_chain_check(args) -> int:
    if args.samples < 1:
        raise QTCError("chain-check needs --samples >= 1")
    gen = _load_generator(args)
    with pool(thread_count(args.threads)) as map_fn:
        reports = chain_check(gen, args.samples, seed=args.seed, K=args.segments, K_max=args.k_max,
                              starts=args.starts, r_grid=parse_grid(args.r_grid), map_fn=map_fn)
    wit_dir = None
    if args.report:
        report = Path(args.report)
        wit_dir = report.stem + "_witness"  # recorded relative to the report's directory
        os.makedirs(report.parent / wit_dir, exist_ok=True)
    rows = []
    for r in reports:
        wfile = ""
        if wit_dir is not None and r.witness:
            wfile = f"{wit_dir}/{r.name}.json"
            (Path(args.report).parent / wfile).write_text(
                _json_text({"inequality": r.name, "worst_margin": r.worst_margin, **r.witness}))
        rows.append((r.name, r.constant, r.worst_margin, wfile, r.constant_label, r.samples, r.ok))
    text = _csv_text(f"qtc {__version__} chain-check generator={args.generator} samples={args.samples} "
                     f"seed={args.seed}", ["inequality", "constant", "worst_margin", "witness_file",
                                           "constant_definition", "samples", "passed"], rows)
    _emit(text, args.report)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_VIOLATION


def cmd_concentration(args) -> int:
    gen = _load_generator(args)
    f = read_matrix(args.observable, "hermitian")
    if f.shape[0] != gen.dim:
        raise QTCError("observable and generator dimensions differ")
    r = parse_grid(args.r_grid)
    sigma = gen.sigma
    if args.type == "exp":
        bound = exp_concentration_bound(gen, f, r)
        label = "exp_bound_lambda=gap"
    elif args.type == "gauss":
        if args.c1 is None and not is_depolarizing(gen):
            raise QTCError("--c1 is required for non-depolarizing generators")
        c1 = args.c1 if args.c1 is not None else gen.lip_dim / mlsi_constant_depolarizing(sigma)
        bound = gauss_concentration_bound(gen, f, r, c1)
        label = f"gauss_bound_c1={fmt(c1)}"
    elif args.type == "depol":
        bound = depolarizing_gauss_bound(sigma, f, r)
        label = "depolarizing_gauss_bound_alpha1(sigma)"
    else:
        bound = product_concentration_bound(gen, f, args.n, r)
        label = f"product_bound_n={args.n}"
    if args.type == "product":
        tail = tail_probability(tensorize(gen, args.n).sigma, site_sum(f, args.n), r)
    else:
        tail = tail_probability(sigma, f, r)
    margin = np.asarray(bound) - np.asarray(tail)
    rows = list(zip(r, tail, bound, margin))
    text = _csv_text(f"qtc {__version__} concentration type={args.type} generator={args.generator} "
                     f"observable={args.observable}", ["r", "tail_probability", label, "margin"], rows)
    _emit(text, args.report)
    return EXIT_OK if np.all(margin >= -1e-9) else EXIT_VIOLATION


def cmd_estimate(args) -> int:
    fam = family_by_name(args.family)
    gen = read_generator(args.generator) if args.generator else None
    with pool(thread_count(args.threads)) as map_fn:
        rep = estimation_report(fam, args.theta, args.n, args.eps, args.trials, seed=args.seed, gen=gen,
                                map_fn=map_fn)
    out = {"command": "estimate", **rep.to_json(), "ok": rep.ok}
    _emit(_json_text(out), args.report)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qtc", description="Quantum transport-cost and concentration toolkit")
    p.add_argument("--version", action="version", version=f"qtc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, generator=True):
        if generator:
            sp.add_argument("--generator", required=True, help="generator JSON file")
        sp.add_argument("--report", help="output file (default: stdout)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (0 = auto; env QTC_THREADS)")
        return sp

    sp = common(sub.add_parser("validate", help="check the detailed-balance structure of a generator"))
    sp.set_defaults(func=cmd_validate)

    sp = common(sub.add_parser("evolve", help="entropy and distance along rho_t"))
    sp.add_argument("--state", required=True)
    sp.add_argument("--times", default="0:2:0.5")
    sp.set_defaults(func=cmd_evolve)

    sp = common(sub.add_parser("wasserstein", help="W1 by duality or a W2 bracket"))
    sp.add_argument("--rho", required=True)
    sp.add_argument("--tau", help="second state (default: invariant state)")
    sp.add_argument("--order", type=int, choices=(1, 2), default=1)
    sp.add_argument("--variant", choices=("lip", "lip2", "lipg", "liph", "clh"), default="lip")
    sp.add_argument("--segments", type=int, default=4)
    sp.add_argument("--k-max", type=int, default=32)
    sp.add_argument("--starts", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--certificate")
    sp.set_defaults(func=cmd_wasserstein)

    sp = common(sub.add_parser("chain-check", help="sweep the inequality chain over random states"))
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--segments", type=int, default=4)
    sp.add_argument("--k-max", type=int, default=8)
    sp.add_argument("--starts", type=int, default=4)
    sp.add_argument("--r-grid", default="0:3:0.1")
    sp.set_defaults(func=cmd_chain_check)

    sp = common(sub.add_parser("concentration", help="tail probability against a concentration bound"))
    sp.add_argument("--observable", required=True)
    sp.add_argument("--type", choices=("exp", "gauss", "depol", "product"), default="exp")
    sp.add_argument("--r-grid", default="0:3:0.1")
    sp.add_argument("--c1", type=float)
    sp.add_argument("--n", type=int, default=2)
    sp.set_defaults(func=cmd_concentration)

    sp = common(sub.add_parser("estimate", help="Monte Carlo error probability against the bounds"), generator=False)
    sp.add_argument("--family", choices=("diag", "rotation", "gibbs"), default="diag")
    sp.add_argument("--theta", type=float, default=0.3)
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--eps", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=100000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--generator", help="preparation generator (default: depolarizing(rho_theta))")
    sp.set_defaults(func=cmd_estimate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (QTCError, OSError) as exc:
        print(f"qtc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
