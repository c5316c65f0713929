"""Command line front end: seeded, file-based experiment runs.

Every subcommand writes the artifact its module documents (CSV or JSON,
floats at 12 significant digits) and prints a one-line summary. Identical
inputs and seed give byte-identical outputs, whatever --threads says: work
is split into fixed-size chunks with one child rng stream each, and chunk
results are merged in chunk order.

Exit codes: 0 on success, 1 on a runtime failure inside the library or on
IO, 2 on invalid configuration (bad flags, domain errors, missing seed).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import struct
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .increments import DiscretePQ, parse_law, rng_streams
from .ladder import estimate_ladder
from .path_sampler import contact_stats, sample_continuous, sample_pq, scaling_test
from .pq_exact import constants, transfer_matrix_Z
from .renewal_sim import MarkovRenewalProcess, green_function, partition_asymptotics
from .return_kernel import (
    build_continuous,
    build_pq,
    cache_path,
    load_kernel,
    save_kernel,
)
from .spectral import assemble_B, build_tilted, critical_beta, delta, free_energy, spectral_radius

_CHUNK = 10_000  # fixed sampling chunk so results never depend on --threads
_PATH_MAGIC = b"SWP1"


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _emit(text: str, out: str | None) -> None:
    """Artifact to --out or stdout; never both."""
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _summary(line: str, out: str | None) -> None:
    # keep stdout clean when it carries the artifact itself
    stream = sys.stderr if out is None else sys.stdout
    stream.write(line + "\n")


def _csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    def conv(v):
        if isinstance(v, np.ndarray):
            return [conv(x) for x in v.tolist()]
        if isinstance(v, (np.floating, float)):
            return float(_fmt(v))
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v

    return json.dumps(conv(obj), indent=2, sort_keys=True) + "\n"


def _resolve_nmax(law, nmax) -> int:
    # lattice tails need a longer tabulation before the analytic model
    # takes over, so the default is law-dependent
    if nmax is not None:
        return nmax
    return 8192 if isinstance(law, DiscretePQ) else 512


def _get_kernel(law, a: float, nodes: int, nmax):
    """Build the return kernel, going through the cache dir when set."""
    nmax = _resolve_nmax(law, nmax)
    if isinstance(law, DiscretePQ):
        return build_pq(law.p, int(a), n_max=nmax)
    if "STRIPWET_CACHE_DIR" in os.environ:
        path = cache_path(law, a, nmax, nodes)
        if path.exists():
            kernel = load_kernel(path)
            if kernel.nodes.size == nodes and kernel.n_max == nmax:
                return kernel
        kernel = build_continuous(law, a, n_quad_nodes=nodes, n_max=nmax)
        save_kernel(kernel, path)
        return kernel
    return build_continuous(law, a, n_quad_nodes=nodes, n_max=nmax)


def _sample_paths(law, a, beta, N, boundary, n_paths, seed, threads, nmax, nodes):
    """Chunked, thread-count-invariant path sampling."""
    n_chunks = (n_paths + _CHUNK - 1) // _CHUNK
    streams = rng_streams(seed, n_chunks)
    sizes = [min(_CHUNK, n_paths - i * _CHUNK) for i in range(n_chunks)]
    if isinstance(law, DiscretePQ):
        jobs = [
            (sample_pq, (law.p, int(a), beta, N, boundary, sizes[i], streams[i]))
            for i in range(n_chunks)
        ]
    else:
        kernel = _get_kernel(law, a, nodes, max(_resolve_nmax(law, nmax), N))
        jobs = [
            (
                sample_continuous,
                (law, a, beta, N, boundary, sizes[i], streams[i], kernel),
            )
            for i in range(n_chunks)
        ]
    if threads <= 1 or n_chunks == 1:
        chunks = [fn(*args) for fn, args in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda j: j[0](*j[1]), jobs))
    out = []
    for c in chunks:
        out.extend(c)
    return out


def _dump_paths(samples, path: str) -> None:
    """Binary full-path dump: magic, N, count, row-major float64 heights."""
    with open(path, "wb") as fh:
        fh.write(_PATH_MAGIC + struct.pack("<QQ", samples[0].N, len(samples)))
        for s in samples:
            fh.write(np.asarray(s.heights, dtype="<f8").tobytes())


def _parse_grid(spec: str) -> np.ndarray:
    lo, hi, n = spec.split(":")
    n = int(n)
    if n < 1:
        raise ValueError(f"grid needs at least one point, got {n}")
    return np.linspace(float(lo), float(hi), n)


def _parse_list(spec: str, cast=int) -> list:
    return [cast(tok) for tok in spec.split(",") if tok]


def cmd_kernel(args) -> int:
    law = parse_law(args.law)
    nmax = _resolve_nmax(law, args.nmax)
    if isinstance(law, DiscretePQ):
        kernel = build_pq(law.p, int(args.a), n_max=nmax)
    else:
        kernel = build_continuous(
            law, args.a, n_quad_nodes=args.nodes, n_max=nmax,
            truncation_height=args.truncation,
        )
    save_kernel(kernel, args.out)
    _summary(
        f"kernel {args.law} a={_fmt(args.a)}: {kernel.nodes.size} nodes, "
        f"n_max={kernel.n_max}, step_loss={_fmt(kernel.step_loss)} -> {args.out}",
        args.out,
    )
    return 0


def cmd_ladder(args) -> int:
    law = parse_law(args.law)
    rng = None
    if not isinstance(law, DiscretePQ):
        if args.seed is None:
            raise ValueError("--seed is mandatory for Monte Carlo ladder tables")
        rng, = rng_streams(args.seed, 1)
    tables = estimate_ladder(law, args.samples, args.x_max, rng=rng)
    grid = tables.grid
    asc = tables.asc_tail(grid)
    desc = tables.desc_tail(grid)
    err = tables.stderr if tables.stderr is not None else np.zeros_like(grid)
    rows = zip(grid, tables.U_values, tables.V_values, asc, desc, err)
    _emit(_csv_text(["x", "U", "V", "asc_tail", "desc_tail", "stderr"], rows), args.out)
    _summary(
        f"ladder {args.law}: {grid.size} grid points from {tables.sample_count} samples",
        args.out,
    )
    return 0


def cmd_free_energy(args) -> int:
    law = parse_law(args.law)
    kernel = _get_kernel(law, args.a, args.nodes, args.nmax)
    rows = []
    for beta in _parse_grid(args.beta_grid):
        F = free_energy(kernel, beta)
        residual = abs(math.exp(beta) * delta(kernel, F) - 1.0) if F > 0.0 else 0.0
        rows.append((beta, F, residual))
    _emit(_csv_text(["beta", "F", "delta_residual"], rows), args.out)
    _summary(f"free-energy {args.law}: {len(rows)} betas", args.out)
    return 0


def cmd_critical_point(args) -> int:
    law = parse_law(args.law)
    kernel = _get_kernel(law, args.a, args.nodes, args.nmax)
    beta_c = critical_beta(kernel)
    payload = {
        "beta_c": beta_c,
        "nodes": int(kernel.nodes.size),
        "refinement_delta": spectral_radius(assemble_B(kernel, 0.0)).residual,
    }
    _emit(_json_text(payload), args.out)
    _summary(f"critical-point {args.law} a={_fmt(args.a)}: beta_c={_fmt(beta_c)}", args.out)
    return 0


def cmd_simulate(args) -> int:
    law = parse_law(args.law)
    samples = _sample_paths(
        law, args.a, args.beta, args.N, args.boundary, args.paths,
        args.seed, args.threads, args.nmax, args.nodes,
    )
    rows = []
    for i, s in enumerate(samples):
        rows.append(
            (
                str(i),
                str(s.contact_set.size - 1),
                str(int(s.contact_set[-1])),
                str(s.L_A),
                str(s.R_A),
                s.heights[-1],
                np.max(s.heights),
            )
        )
    header = ["path", "n_contacts", "last_contact", "L_A", "R_A", "endpoint", "sup_height"]
    _emit(_csv_text(header, rows), args.out)
    if args.dump:
        _dump_paths(samples, args.dump)
    mean_c = np.mean([s.contact_set.size - 1 for s in samples])
    _summary(
        f"simulate {args.law} beta={_fmt(args.beta)} N={args.N} "
        f"{args.boundary}: {len(samples)} paths, mean contacts {_fmt(mean_c)}",
        args.out,
    )
    return 0


def cmd_scaling_test(args) -> int:
    law = parse_law(args.law)
    samples = _sample_paths(
        law, args.a, args.beta, args.N, args.boundary, args.paths,
        args.seed, args.threads, args.nmax, args.nodes,
    )
    rng, = rng_streams(args.seed + 1, 1)  # reference stream, disjoint from sampling
    if args.kind == "supercritical":
        levels = [0.25, 0.5, 0.75]
        quants = scaling_test(samples, "supercritical", sigma=law.sigma, quantiles=levels)
        payload = {"N": args.N, "t": levels, "ks": list(quants),
                   "n_paths": len(samples), "regime": "supercritical"}
    else:
        t_grid = _parse_list(args.t_grid, float)
        ks = scaling_test(
            samples, args.kind, t_grid=t_grid, sigma=law.sigma,
            N_ref=args.nref, n_ref_paths=args.ref_paths, rng=rng,
        )
        payload = {"N": args.N, "t": t_grid, "ks": list(ks),
                   "n_paths": len(samples), "regime": args.kind}
    _emit(_json_text(payload), args.out)
    _summary(
        f"scaling-test {args.kind} N={args.N}: " +
        " ".join(_fmt(v) for v in payload["ks"]),
        args.out,
    )
    return 0


def cmd_contact_stats(args) -> int:
    law = parse_law(args.law)
    samples = _sample_paths(
        law, args.a, args.beta, args.N, args.boundary, args.paths,
        args.seed, args.threads, args.nmax, args.nodes,
    )
    grid = _parse_list(args.grid, int) if args.grid else None
    stats = contact_stats(samples, grid=grid)
    if args.boundary == "free":
        header = ["L", "tail_max_contact"]
        rows = zip(stats["grid"].astype(str), stats["tail_max_contact"])
    else:
        header = ["L", "tail_L", "tail_R"]
        rows = zip(stats["grid"].astype(str), stats["tail_L"], stats["tail_R"])
    _emit(_csv_text(header, rows), args.out)
    _summary(
        f"contact-stats {args.boundary} N={args.N}: {stats['n_paths']} paths",
        args.out,
    )
    return 0


def cmd_renewal_check(args) -> int:
    law = parse_law(args.law)
    kernel = _get_kernel(law, args.a, args.nodes, args.nmax)
    tilted = build_tilted(kernel, args.beta)
    N_list = _parse_list(args.N_list, int)
    mrp = MarkovRenewalProcess(values=tilted.values, initial_state=0)
    series = green_function(mrp, max(N_list))
    if math.isfinite(tilted.C_beta) and tilted.C_beta > 0:
        tv = series.tv_to(tilted.mu / tilted.C_beta)
    else:
        tv = np.full(series.Z.shape[0], math.nan)  # no stationary law below beta_c
    rows = [(str(N), series.Z[N].sum(), tv[N]) for N in N_list]
    _emit(_csv_text(["N", "value", "TV"], rows), args.out)
    _summary(
        f"renewal-check beta={_fmt(args.beta)}: TV at N={max(N_list)} is "
        f"{_fmt(tv[max(N_list)])}",
        args.out,
    )
    return 0


def cmd_asymptotics(args) -> int:
    law = parse_law(args.law)
    kind = args.kind.replace("-", "_")
    N_list = _parse_list(args.N_list, int)
    kernel = None
    if not isinstance(law, DiscretePQ):
        nmax = max(_resolve_nmax(law, args.nmax), max(N_list))
        kernel = _get_kernel(law, args.a, args.nodes, nmax)
    values = partition_asymptotics(kind, law, args.a, args.beta, N_list, kernel=kernel)
    rows = []
    prev = None
    for N, u in zip(N_list, values):
        change = 0.0 if prev is None else abs(u / prev - 1.0)
        rows.append((str(N), u, change))
        prev = u
    _emit(_csv_text(["N", "value", "TV"], rows), args.out)
    _summary(f"asymptotics {args.kind}: value at N={N_list[-1]} is {_fmt(values[-1])}", args.out)
    return 0


def cmd_pq_exact(args) -> int:
    c = constants(args.p)
    payload = {
        "p": c.p,
        "beta_c_0": c.beta_c_0,
        "beta_c_1": c.beta_c_1,
        "beta_c_2": c.beta_c_2,
        "r": c.r,
        "c_K": c.c_K,
        "sumK": c.sumK,
        "C_1": c.C_1,
        "Delta_q": c.Delta_q,
        "cubic": list(c.cubic),
    }
    _emit(_json_text(payload), args.out)
    _summary(f"pq-exact p={_fmt(args.p)}: beta_c_1={_fmt(c.beta_c_1)}", args.out)
    return 0


def cmd_pq_z(args) -> int:
    log_z = transfer_matrix_Z(
        args.p, args.a, args.beta, args.N, boundary=args.boundary, start=args.start
    )
    sys.stdout.write(_fmt(log_z) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stripwet",
        description="Strip wetting model: spectral pipeline, renewal checks, exact sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, law=True, need_a=True, kernel_knobs=True):
        p.add_argument("--config", help="flat key=value file; flags override it")
        if law:
            p.add_argument("--law", required=True,
                           help="step law: pq:p=0.3, gauss:sigma=1.0, unif:hw=1.0")
        if need_a:
            p.add_argument("--a", type=float, required=True, help="strip upper edge")
        if kernel_knobs:
            p.add_argument("--nodes", type=int, default=64,
                           help="quadrature nodes on the strip (continuous laws)")
            p.add_argument("--nmax", type=int,
                           help="tabulated return-time horizon "
                                "(default 8192 lattice, 512 continuous)")
        p.add_argument("--out", help="artifact path (stdout when omitted)")

    p = sub.add_parser("kernel", help="build and cache a return kernel (binary)")
    common(p)
    p.add_argument("--truncation", type=float, help="excursion-space truncation height")
    p.set_defaults(fn=cmd_kernel, out_required=True)

    p = sub.add_parser(
        "ladder",
        help="ladder-height tables; CSV columns x,U,V,asc_tail,desc_tail,stderr",
    )
    common(p, need_a=False, kernel_knobs=False)
    p.add_argument("--x-max", type=float, default=8.0)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, help="mandatory for continuous laws (Monte Carlo)")
    p.set_defaults(fn=cmd_ladder)

    p = sub.add_parser("free-energy", help="F(beta) on a grid; CSV beta,F,delta_residual")
    common(p)
    p.add_argument("--beta-grid", required=True, help="lo:hi:n")
    p.set_defaults(fn=cmd_free_energy)

    p = sub.add_parser(
        "critical-point", help="beta_c by the spectral pipeline; JSON output"
    )
    common(p)
    p.set_defaults(fn=cmd_critical_point)

    def sampling(p):
        common(p)
        p.add_argument("--beta", type=float, required=True)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--paths", type=int, required=True)
        p.add_argument("--boundary", choices=["free", "constrained"], required=True)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; outputs are independent of this")

    p = sub.add_parser("simulate", help="exact path sampling; CSV one row per path")
    sampling(p)
    p.add_argument("--dump", help="optional binary dump of full height sequences")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser(
        "scaling-test",
        help="KS of rescaled marginals vs reference, or sup quantiles; JSON",
    )
    sampling(p)
    p.add_argument("--kind", choices=["meander", "excursion", "supercritical"],
                   required=True)
    p.add_argument("--t-grid", default="0.25,0.5,1.0", help="comma-separated times")
    p.add_argument("--nref", type=int, default=4096, help="reference walk length")
    p.add_argument("--ref-paths", type=int, default=100_000)
    p.set_defaults(fn=cmd_scaling_test)

    p = sub.add_parser(
        "contact-stats", help="empirical contact-extreme tails; CSV per level"
    )
    sampling(p)
    p.add_argument("--grid", help="comma-separated levels (default: 65 evenly spaced)")
    p.set_defaults(fn=cmd_contact_stats)

    p = sub.add_parser(
        "renewal-check",
        help="Green-function slices vs the stationary law; CSV N,value,TV",
    )
    common(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--N-list", required=True, help="comma-separated horizons")
    p.set_defaults(fn=cmd_renewal_check)

    p = sub.add_parser(
        "asymptotics",
        help="normalized partition values; CSV N,value,TV (TV = step change)",
    )
    common(p)
    p.add_argument("--kind", required=True,
                   choices=["localized", "deloc-constrained", "deloc-free"])
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--N-list", required=True, help="comma-separated horizons")
    p.set_defaults(fn=cmd_asymptotics)

    p = sub.add_parser("pq-exact", help="closed-form lattice constants; JSON")
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--json", action="store_true", help="accepted for compatibility")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_pq_exact)

    p = sub.add_parser("pq-z", help="exact lattice log partition function")
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--boundary", choices=["free", "constrained"], default="constrained")
    p.add_argument("--start", type=int, default=0)
    p.set_defaults(fn=cmd_pq_z)

    return parser


def _load_config(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Inject config-file values as defaults for the chosen subcommand."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return argv
    config = _load_config(argv[idx + 1])
    if not argv or argv[0].startswith("-"):
        return argv
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    subparser = sub_actions[0].choices.get(argv[0])
    if subparser is None:
        return argv
    defaults = {}
    for action in subparser._actions:
        if action.dest in config:
            raw = config[action.dest]
            if action.type is not None:
                defaults[action.dest] = action.type(raw)
            elif isinstance(action, argparse._StoreTrueAction):
                defaults[action.dest] = raw.lower() in ("1", "true", "yes")
            else:
                defaults[action.dest] = raw
            action.required = False
    subparser.set_defaults(**defaults)
    return argv


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        argv = _apply_config(parser, list(argv))
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"stripwet: {exc}\n")
        return 2
    if getattr(args, "out_required", False) and not args.out:
        sys.stderr.write("stripwet: this subcommand requires --out\n")
        return 2
    try:
        return args.fn(args)
    except ValueError as exc:
        sys.stderr.write(f"stripwet: {exc}\n")
        return 2
    except (RuntimeError, OSError) as exc:
        sys.stderr.write(f"stripwet: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
