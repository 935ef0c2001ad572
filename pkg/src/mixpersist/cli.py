"""Command-line front end: ``mixpersist <verb> [options]``.

Exit status is 0 on success, 1 when a registry run completes but one of its
checks fails, and 2 for usage, configuration or numerical errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import formats
from .config import ConfigError, ExperimentConfig, load_config
from .covariance import CovarianceError, DomainError
from .experiments import REGISTRY, get_entry, run_experiment, write_report
from .persistence import (
    EstimationError,
    GridPolicy,
    PersistenceQuery,
    estimate_persistence,
    exceedance_probability,
    exceedance_union_bound,
    exceedance_grid,
    fit_exponent,
    paired_exponent_gap,
)
from .processes import ProcessSpec, SpecError, TimeGrid
from .quadrature import QuadratureError
from .sampling import THREADS_ENV, BackendError, SeedPolicy, experiment_key, sample_process
from .spectral import h1_asymptotic_ratio, spectral_density

DEFAULT_SEED = ExperimentConfig.__dataclass_fields__["master_seed"].default


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def _seed(args, verb: str) -> SeedPolicy:
    name = args.experiment_id or verb
    return SeedPolicy(args.seed, experiment_key(name))


def _grid_policy(args) -> GridPolicy:
    return GridPolicy(args.grid, args.grid_points, args.t_min, True)


def _emit(args, name: str, text: str) -> None:
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    spec = ProcessSpec.parse(args.spec)
    if args.grid == "uniform":
        grid = TimeGrid.uniform(args.t_max, args.grid_points)
    else:
        grid = TimeGrid.lamperti(args.t_min, args.t_max, args.grid_points)
    batch = sample_process(spec, grid, args.paths, _seed(args, "simulate"), args.backend, _threads(args))
    if batch.fallback:
        print(f"note: {batch.fallback}", file=sys.stderr)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    if args.format == "csv":
        with open(os.path.join(out, "paths.csv"), "w", encoding="utf-8", newline="") as fh:
            formats.paths_to_csv(batch, fh)
    else:
        formats.write_paths(os.path.join(out, "paths.bin"), batch)
    return 0


def _query(args, spec) -> PersistenceQuery:
    return PersistenceQuery(
        spec, args.ladder, args.paths, _seed(args, args.verb), args.level, _grid_policy(args),
        backend=args.backend,
    )


def cmd_persistence(args) -> int:
    spec = ProcessSpec.parse(args.spec)
    q = _query(args, spec)
    if args.continuity != "grid":
        q = replace(q, continuity=args.continuity)
    est = estimate_persistence(q, _threads(args))
    _emit(args, "estimates.csv", formats.to_text(formats.estimates_to_csv, est))
    return 0


def cmd_fit(args) -> int:
    rows = []
    for path in args.estimates:
        with open(path, encoding="utf-8", newline="") as fh:
            est = formats.estimates_from_csv(fh)
        rows.append((os.path.basename(path), fit_exponent(est, args.burn_in)))
    _emit(args, "fits.csv", formats.to_text(formats.fits_to_csv, rows))
    return 0


def cmd_gap(args) -> int:
    mixed = ProcessSpec.parse(args.mixed)
    dominant = ProcessSpec.parse(args.dominant) if args.dominant else mixed.dominant()
    res = paired_exponent_gap(mixed, dominant, _query(args, mixed), args.burn_in, _threads(args))
    rows = [(mixed.descriptor(), res.mixed), (dominant.descriptor(), res.dominant)]
    text = formats.to_text(formats.fits_to_csv, rows)
    _emit(args, "fits.csv", text)
    print(f"gap: {res.gap:.6f}", file=sys.stderr)
    return 0


def cmd_exceedance(args) -> int:
    spec = ProcessSpec.parse(args.spec)
    est = exceedance_probability(
        spec, args.gamma, args.A, args.T, args.paths, _seed(args, "exceedance"), args.grid_points,
        args.backend, _threads(args),
    )
    bound = exceedance_union_bound(spec, args.gamma, exceedance_grid(args.A, args.T, args.grid_points).times)
    text = "p_hat,ci_low,ci_high,n_paths,union_bound\n"
    text += ",".join(formats._fmt(v) for v in (est.p_hat, est.ci_low, est.ci_high, est.n_paths, bound)) + "\n"
    _emit(args, "exceedance.csv", text)
    return 0


def cmd_spectral(args) -> int:
    spec = ProcessSpec.parse(args.spec)
    x = np.linspace(0.0, args.x_max, args.points)
    dens = spectral_density(spec, x)
    lines = ["x,p"] + [f"{formats._fmt(a)},{formats._fmt(b)}" for a, b in zip(dens.x, dens.p)]
    _emit(args, "spectral.csv", "\n".join(lines) + "\n")
    if args.alpha is not None:
        taus = np.logspace(np.log10(args.tau_min), np.log10(args.tau_max), args.points)
        ratio = h1_asymptotic_ratio(args.alpha, taus)
        lines = ["tau,ratio"] + [f"{formats._fmt(a)},{formats._fmt(b)}" for a, b in zip(taus, ratio)]
        _emit(args, "h1_ratio.csv", "\n".join(lines) + "\n")
    return 0


def cmd_run(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if args.entry and args.entry != cfg.entry:
            raise ConfigError(f"--entry {args.entry} conflicts with config entry {cfg.entry}")
    elif args.entry:
        cfg = get_entry(args.entry).default_config()
    else:
        raise ConfigError("run needs --config or --entry")
    overrides = {}
    if args.seed_given:
        overrides["master_seed"] = args.seed
    if args.out:
        overrides["out_dir"] = args.out
    if args.threads is not None or os.environ.get(THREADS_ENV):
        overrides["threads"] = _threads(args)
    cfg = replace(cfg, **overrides)
    report = run_experiment(cfg)
    write_report(report, cfg.out_dir)
    sys.stdout.write(report.summary())
    return 0 if report.ok else 1


def cmd_list(args) -> int:
    for name, entry in REGISTRY.items():
        print(f"{name}\t{entry.summary}")
    return 0


def cmd_describe(args) -> int:
    entry = get_entry(args.name)
    print(f"name: {entry.name}")
    print(f"summary: {entry.summary}")
    print(f"anchor: {entry.anchor}")
    print(f"expected: {entry.expected}")
    for role, spec in entry.roles.items():
        print(f"role {role}: {spec.descriptor()}")
    if entry.ladder:
        print("ladder: " + ", ".join(f"{t:g}" for t in entry.ladder))
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_u64, default=None, help="master seed (u64)")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (env {THREADS_ENV})")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--experiment-id", default=None, help="name hashed into the RNG key")


def _sampling(p, ladder=True) -> None:
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--grid", choices=("lamperti", "uniform"), default="lamperti")
    p.add_argument("--grid-points", type=int, default=4096)
    p.add_argument("--t-min", type=float, default=1e-3)
    p.add_argument("--backend", default="auto")
    if ladder:
        p.add_argument("--ladder", type=_floats, default=tuple(float(2**k) for k in range(4, 13)))
        p.add_argument("--level", type=float, default=1.0)
        p.add_argument("--burn-in", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixpersist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="sample paths to a binary container or CSV")
    p.add_argument("--spec", required=True)
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--format", choices=("bin", "csv"), default="bin")
    _sampling(p, ladder=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("persistence", help="persistence probabilities along a ladder")
    p.add_argument("--spec", required=True)
    p.add_argument("--continuity", choices=("grid", "bridge"), default="grid")
    _sampling(p)
    p.set_defaults(func=cmd_persistence)

    p = sub.add_parser("fit", help="fit exponents to estimate CSVs")
    p.add_argument("estimates", nargs="+")
    p.add_argument("--burn-in", type=int, default=2)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gap", help="paired exponent gap of a mixture and its dominant part")
    p.add_argument("--mixed", required=True)
    p.add_argument("--dominant", default=None)
    _sampling(p)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("exceedance", help="probability of leaving the envelope t^gamma")
    p.add_argument("--spec", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("-A", type=float, default=10.0)
    p.add_argument("-T", type=float, default=1000.0)
    _sampling(p, ladder=False)
    p.set_defaults(func=cmd_exceedance, grid_points=1024)

    p = sub.add_parser("spectral", help="spectral density and h1 asymptotic ratio tables")
    p.add_argument("--spec", required=True)
    p.add_argument("--x-max", type=float, default=20.0)
    p.add_argument("--points", type=int, default=81)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tau-min", type=float, default=1e3)
    p.add_argument("--tau-max", type=float, default=1e4)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("run", help="run a registry entry")
    p.add_argument("--config", default=None)
    p.add_argument("--entry", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list", help="list registry entries")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("describe", help="describe a registry entry")
    p.add_argument("name")
    p.set_defaults(func=cmd_describe)

    for p in sub.choices.values():
        _common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = DEFAULT_SEED
    try:
        return args.func(args)
    except (ConfigError, SpecError, EstimationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CovarianceError, DomainError, QuadratureError, BackendError, formats.FormatError) as exc:
        print(f"error in {type(exc).__module__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
