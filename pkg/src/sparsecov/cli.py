"""Command-line entry point: ``sparsecov <subcommand> ...``.

Exit codes: 0 success, 1 usage or config error, 2 degenerate estimation.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import bench, doa, estimators, simulate
from .geometry import coarray, parse_array

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_sources(text: str):
    """``u:snr_db[,u:snr_db...]`` -> (u values, snr values)."""
    us, snrs = [], []
    for item in text.split(","):
        u, sep, snr = item.partition(":")
        if not sep:
            raise UsageError(f"source {item!r} must be written u:snr_db")
        try:
            us.append(float(u))
            snrs.append(float(snr))
        except ValueError:
            raise UsageError(f"malformed source {item!r}") from None
    return us, snrs


def _emit(text: str, out):
    if out:
        bench.write_text(out, text)
    else:
        sys.stdout.write(text)


def _scenario(args):
    us, snrs = parse_sources(args.sources)
    try:
        return simulate.Scenario.from_snr(us, snrs, args.noise_power, args.snapshots, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _array(args):
    try:
        return parse_array(args.array)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_geometry(args):
    arr = _array(args)
    co = coarray(arr)
    kind = "fully augmentable" if co.fully_augmentable else "partially augmentable"
    lines = [
        f"positions: {' '.join(map(str, arr.positions))}",
        f"L_S = {arr.n_sensors}",
        f"L_F = {arr.aperture}",
        f"coarray counts: {' '.join(map(str, co.counts))}",
        f"L_A = {co.hole_free_extent}",
        kind,
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args):
    X = simulate.generate_snapshots(_scenario(args), _array(args))
    lines = [f"{X.shape[0]} {X.shape[1]}"]
    lines += [" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row) for row in X]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _estimate(args):
    arr = _array(args)
    scen = _scenario(args)
    X = simulate.generate_snapshots(scen, arr)
    q = scen.n_sources
    name = args.estimator
    if name == "scm":
        return estimators.scm(X)
    if name == "toeplitz":
        return estimators.toeplitz_sample(X)
    D = estimators.dam(X, arr)
    if name == "dam":
        return D
    if q < 1:
        raise UsageError(f"{name} needs at least one source")
    if name == "pem":
        return estimators.pem(D, q, estimators.PemSettings(args.epsilon, args.max_iterations))
    return estimators.aem(D, q)


def cmd_estimate(args):
    _emit(estimators.format_matrix(_estimate(args)), args.out)
    return EXIT_OK


def cmd_spectrum(args):
    if args.estimator in ("scm", "toeplitz"):
        raise UsageError("spectra use augmented matrices: choose dam, pem or aem")
    cov = _estimate(args)
    q = len(parse_sources(args.sources)[0])
    if args.algorithm == "music":
        spec = doa.music_spectrum(cov, q, args.grid)
    else:
        spec = doa.mvdr_spectrum(cov, args.grid)
    _emit(spec.to_csv(), args.out)
    est = doa.find_peaks(spec, q)
    print("peaks: " + " ".join(f"{u:.6f}" for u in est.u_hat) + (" (deficient)" if est.deficient else ""),
          file=sys.stderr)
    return EXIT_OK


def cmd_bench(args):
    cfg = bench.load_config(args.config)
    log_entries = [] if args.trial_log else None
    table = bench.run_rmse_sweep(cfg, threads=args.threads, trial_log=log_entries)
    bench.write_text(args.out, table.to_csv())
    if args.trial_log:
        bench.write_text(args.trial_log, bench.trial_log_csv(cfg, log_entries))
    for r in table.rows:
        rmse = "empty" if r.trials_used == 0 else f"{r.rmse_u:.4g} ({r.rmse_db:.2f} dB)"
        print(f"snr={r.snr_db:>6g} T={r.snapshots:<4d} {r.estimator:>3s}-{r.algorithm:<5s} "
              f"rmse_u={rmse}  used={r.trials_used} discarded={r.trials_discarded}")
    return EXIT_OK


def cmd_eig_study(args):
    cfg = bench.load_config(args.config)
    res = bench.run_eig_study(cfg, args.realizations, args.bins, threads=args.threads)
    multi = len(res.cells) > 1
    for c in res.cells:
        path = args.out
        if multi:
            stem, dot, ext = args.out.rpartition(".")
            stem, ext = (stem, ext) if dot else (args.out, "csv")
            path = f"{stem}_snr{c.snr_db:g}dB_T{c.snapshots}.{ext}"
        bench.write_text(path, c.to_csv())
        print(f"snr={c.snr_db:g} T={c.snapshots}: {len(c.min_pos)} min+ / {len(c.min_abs_neg)} min|-| samples, "
              f"all-negative={c.all_negative}, KS={c.ks_distance:.4f} -> {path}")
    return EXIT_OK


def cmd_find_degenerate(args):
    cfg = bench.load_config(args.config)
    try:
        seed, w = bench.find_degenerate_dataset(cfg, args.max_search)
    except bench.DegenerateNotFoundError as exc:
        print(f"not-found: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"seed {seed}")
    print("eigenvalues " + " ".join(f"{x:.6g}" for x in w))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sparsecov", description="Sparse-array covariance estimation and DOA benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_flags(sp, need_sources=True):
        sp.add_argument("--array", required=True, help="ula:L | coprime:n1,s1,n2,s2 | pos:0,1,4")
        sp.add_argument("--sources", required=need_sources, default="", help="u:snr_db[,u:snr_db...]")
        sp.add_argument("--snapshots", type=int, default=25)
        sp.add_argument("--noise-power", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path (default stdout)")

    g = sub.add_parser("geometry", help="positions, coarray and augmentability")
    g.add_argument("--array", required=True)
    g.add_argument("--out")
    g.set_defaults(func=cmd_geometry)

    s = sub.add_parser("simulate", help="write a snapshot matrix")
    scenario_flags(s, need_sources=False)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="write a covariance estimate")
    scenario_flags(e)
    e.add_argument("--estimator", choices=["scm", "toeplitz", "dam", "pem", "aem"], default="aem")
    e.add_argument("--epsilon", type=float, default=1e-6)
    e.add_argument("--max-iterations", type=int, default=500)
    e.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("spectrum", help="MUSIC/MVDR spectrum as CSV")
    scenario_flags(sp)
    sp.add_argument("--estimator", choices=["dam", "pem", "aem"], default="aem")
    sp.add_argument("--algorithm", choices=list(bench.ALGORITHMS), default="music")
    sp.add_argument("--grid", type=int, default=doa.DEFAULT_GRID)
    sp.add_argument("--epsilon", type=float, default=1e-6)
    sp.add_argument("--max-iterations", type=int, default=500)
    sp.set_defaults(func=cmd_spectrum)

    b = sub.add_parser("bench", help="RMSE sweep from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--out", default="rmse.csv")
    b.add_argument("--trial-log")
    b.add_argument("--threads", type=int)
    b.set_defaults(func=cmd_bench)

    es = sub.add_parser("eig-study", help="noise-eigenvalue histograms from a config file")
    es.add_argument("--config", required=True)
    es.add_argument("--realizations", type=int)
    es.add_argument("--bins", type=int)
    es.add_argument("--out", default="eig_study.csv")
    es.add_argument("--threads", type=int)
    es.set_defaults(func=cmd_eig_study)

    fd = sub.add_parser("find-degenerate", help="search seeds for an all-negative noise spectrum")
    fd.add_argument("--config", required=True)
    fd.add_argument("--max-search", type=int)
    fd.set_defaults(func=cmd_find_degenerate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (estimators.DegenerateCaseError, estimators.NonConvergenceError) as exc:
        kind = "degenerate-case" if isinstance(exc, estimators.DegenerateCaseError) else "non-convergence"
        print(f"{kind}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UsageError, bench.ConfigError, doa.NotInvertibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
