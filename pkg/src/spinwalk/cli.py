"""Config-driven experiment runner.

Every subcommand draws all randomness from --seed through the documented
stream derivation (splitmix64 mixing of (seed, subcommand tag, replica
index)), so outputs are byte-identical across platforms and thread counts.
CSV files use '.' decimals, '\\n' line endings and a header row; JSON reports
are pretty-printed with sorted keys. Partial outputs are removed on failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bessel, nonuniq, rng, skewprod, sphere_sde, stats, walk
from .config import ConfigError, format_float, load_config, model_from_args, model_from_config
from .model import ModelSpec, validate_assumptions
from .riemann import geometry_identity_suite, gradient_diagnostic


def _model_from(args) -> ModelSpec:
    if getattr(args, "config", None):
        return model_from_config(load_config(args.config))
    return model_from_args(args.model, d=args.d, b=args.b, a=args.a, u=args.u)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("SPINWALK_THREADS")
    return max(1, int(env)) if env else 1


class _Output:
    """Tracks written artifacts so a failing command leaves nothing behind."""

    def __init__(self):
        self.paths = []

    def csv(self, path, header, rows):
        self.paths.append(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(v if isinstance(v, str) else format_float(v) for v in row) + "\n")

    def json(self, path, payload):
        self.paths.append(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def cleanup(self):
        for p in self.paths:
            if os.path.exists(p):
                os.remove(p)


def _emit_reports(out: _Output, args, reports) -> int:
    payload = [r.to_dict() for r in reports]
    target = getattr(args, "report", None) or getattr(args, "out", None)
    if target:
        out.json(target, payload)
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0 if all(r.pass_ for r in reports) else 1


def _parallel_blocks(fn, n_blocks: int, threads: int):
    """fn(block_index) for every block; aggregation order is fixed, so the
    result is independent of the thread count."""
    if threads <= 1:
        return [fn(k) for k in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_blocks)))


def cmd_validate(args, out: _Output) -> int:
    model = _model_from(args)
    reports = validate_assumptions(model, n_samples=args.n_samples, tol=1e-10,
                                   rng=rng.stream(args.seed, "validate"))
    if args.geometry:
        reports += geometry_identity_suite(model, n_points=min(args.n_samples, 1000),
                                           rng=rng.stream(args.seed, "validate-geometry"))
        reports.append(gradient_diagnostic(model))
    return _emit_reports(out, args, reports)


def _walk_config(args, model) -> walk.WalkConfig:
    cfg = {}
    if getattr(args, "config", None):
        cfg = load_config(args.config).get("walk", {})
    return walk.WalkConfig(model=model, noise=cfg.get("noise", args.noise),
                           square_root=cfg.get("square_root", args.square_root))


def _walk_samples(args, wc, tag: str) -> np.ndarray:
    threads = _threads(args)
    block = 4096
    n_blocks = (args.replicas + block - 1) // block

    def run_block(kb):
        lo = kb * block
        hi = min(lo + block, args.replicas)
        law = walk.marginal_samples(wc, args.n, hi - lo,
                                    lambda k, lo=lo: rng.stream(args.seed, tag, lo + k))
        return law.samples

    return np.vstack(_parallel_blocks(run_block, n_blocks, threads))


def cmd_walk(args, out: _Output) -> int:
    model = _model_from(args)
    wc = _walk_config(args, model)
    samples = _walk_samples(args, wc, "walk")
    header = ["replica"] + [f"x{i + 1}" for i in range(model.d)]
    out.csv(args.out, header, ([str(k)] + list(samples[k]) for k in range(args.replicas)))
    return 0


def cmd_marginal(args, out: _Output) -> int:
    model = _model_from(args)
    wc = _walk_config(args, model)
    samples = _walk_samples(args, wc, "marginal")
    if args.out:
        header = ["replica"] + [f"x{i + 1}" for i in range(model.d)]
        out.csv(args.out, header, ([str(k)] + list(samples[k]) for k in range(args.replicas)))
    radii = np.linalg.norm(samples, axis=-1)
    rep = stats.ks_test_1d(radii, lambda x: bessel.bessel_cdf_t1(model.delta, x),
                           provenance=f"radial law of the scaled walk vs closed-form CDF, {model.describe()}")
    rep.name = "marginal_radial_ks"
    return _emit_reports(out, args, [rep])


def cmd_diffusion(args, out: _Output) -> int:
    model = _model_from(args)
    gen = rng.stream(args.seed, "diffusion")
    x0 = np.zeros(model.d)
    x0[0] = args.r0
    ends = skewprod.euler_direct_endpoints(model, x0, args.t, args.replicas, gen, h=args.dt)
    header = ["replica"] + [f"x{i + 1}" for i in range(model.d)]
    out.csv(args.out, header, ([str(k)] + list(ends[k]) for k in range(args.replicas)))
    return 0


def cmd_stationary(args, out: _Output) -> int:
    model = _model_from(args)
    law = sphere_sde.estimate_stationary(model, burn_in=args.burn_in, n_samples=args.replicas,
                                         thin=args.thin, rng=rng.stream(args.seed, "stationary"),
                                         h=args.dt, chains=args.chains)
    header = ["sample"] + [f"x{i + 1}" for i in range(model.d)]
    out.csv(args.out, header, ([str(k)] + list(law.samples[k]) for k in range(len(law.samples))))
    if args.density:
        if model.d != 2:
            raise ConfigError("--density requires a d=2 model")
        dens = sphere_sde.stationary_density_circle(model, n_grid=args.n_grid)
        out.csv(args.density, ["theta", "p"], zip(dens.theta, dens.p))
    return 0


def cmd_exit_law(args, out: _Output) -> int:
    lambdas = [float(s) for s in args.lambdas.split(",")]
    radius = args.a
    rows = []
    if args.walk:
        if getattr(args, "config", None):
            model = model_from_config(load_config(args.config))
        else:
            # --a is the exit radius in this subcommand; the rotation4d scale
            # keeps its default unless a config file sets it
            model = model_from_args(args.model, d=args.d, b=args.b, a=None, u=args.u)
        wc = _walk_config(args, model)
        law = walk.exit_stats(wc, args.n, radius, args.replicas,
                              lambda k: rng.stream(args.seed, "exit-law", k))
        times = law.samples[:, 0][~law.meta["censored"]]
        delta = model.delta
        source = "walk"
    else:
        delta = args.delta
        gen = rng.stream(args.seed, "exit-law")
        times = bessel.first_passage_time_batch(delta, radius, args.dt, gen, args.replicas,
                                                h_near=args.dt / 50.0)
        source = "closed_form"
    for lam in lambdas:
        mc = np.exp(-lam * times)
        cf = bessel.exit_time_laplace(delta, radius, lam)
        se = float(mc.std(ddof=1) / np.sqrt(mc.size))
        rows.append((lam, cf, float(mc.mean()), se, mc.size, source))
    out.csv(args.out, ["lambda", "closed_form", "mc_estimate", "std_err", "n_replicas", "source"],
            ((lam, cf, mc, se, str(n), src) for lam, cf, mc, se, n, src in rows))
    reports = []
    for lam, cf, mc, se, n, src in rows:
        dev = abs(mc - cf) / se if se else 0.0
        reports.append(stats.TestReport(
            name=f"exit_laplace_lambda_{lam}", statistic=dev, threshold=3.0, pass_=dev < 3.0,
            n=n, provenance=f"MC ({src}) Laplace transform of the exit time vs closed form (3 SE band)"))
    if args.report:
        out.json(args.report, [r.to_dict() for r in reports])
        return 0 if all(r.pass_ for r in reports) else 1
    return 0


def cmd_excursion(args, out: _Output) -> int:
    model = _model_from(args)
    gen = rng.stream(args.seed, "excursion")
    law = sphere_sde.estimate_stationary(model, burn_in=20.0, n_samples=4000, thin=2.0,
                                         rng=rng.stream(args.seed, "excursion-law"), chains=256)
    if args.level_low is not None and args.level_high is not None:
        condition = {"level_range": (args.level_low, args.level_high)}
    else:
        condition = {"min_lifetime": args.min_lifetime}
    rows = []
    reports = []
    for rec_id in range(args.records):
        rec = skewprod.sample_marked_excursion(model, condition, gen, law, step=args.step)
        reports.append(skewprod.split_at_max_check(rec))
        for t, xvec in zip(rec.mapped.times, rec.mapped.values):
            rows.append([str(rec_id), t] + list(xvec))
    header = ["record", "t"] + [f"x{i + 1}" for i in range(model.d)]
    out.csv(args.out, header, rows)
    if args.report:
        out.json(args.report, [r.to_dict() for r in reports])
    return 0 if all(r.pass_ for r in reports) else 1


def cmd_nonuniq(args, out: _Output) -> int:
    model = _model_from(args)
    if model.family == "isotropic":
        raise ConfigError("nonuniq requires a rotation family")
    p = np.array([float(s) for s in args.p.split(",")])
    reports = nonuniq.check_equivariance(model, p, rng=rng.stream(args.seed, "nonuniq-alg"))
    x, y, _dws = nonuniq.simulate_pair(model, p, np.zeros(model.d),
                                       np.arange(args.n + 1) * args.dt,
                                       rng.stream(args.seed, "nonuniq"))
    header = ["t"] + [f"x{i + 1}" for i in range(model.d)] + [f"y{i + 1}" for i in range(model.d)]
    rows = ([t] + list(xv) + list(yv) for t, xv, yv in zip(x.times, x.values, y.values))
    out.csv(args.out, header, rows)
    if args.report:
        out.json(args.report, [r.to_dict() for r in reports])
    return 0 if all(r.pass_ for r in reports) else 1


def cmd_report(args, out: _Output) -> int:
    merged = []
    for path in args.inputs:
        with open(path, "r", encoding="utf-8") as fh:
            merged.extend(json.load(fh))
    n_fail = sum(1 for r in merged if not r["pass"])
    for r in merged:
        flag = "PASS" if r["pass"] else "FAIL"
        print(f"[{flag}] {r['name']}: statistic={r['statistic']:.6g} threshold={r['threshold']:.6g}"
              + (f" p={r['p']:.4g}" if r.get("p") is not None else ""))
    if args.out:
        out.json(args.out, {"n_total": len(merged), "n_fail": n_fail, "reports": merged})
    return 0 if n_fail == 0 else 1


def _add_model_args(sp):
    sp.add_argument("--config", help="configuration file (overrides model flags)")
    sp.add_argument("--model", default="rotation2d", choices=("isotropic", "rotation2d", "rotation4d"))
    sp.add_argument("--d", type=int, default=None, help="dimension (isotropic only)")
    sp.add_argument("--b", type=float, default=None, help="rotation2d scale")
    sp.add_argument("--a", type=float, default=None, help="rotation4d scale")
    sp.add_argument("--u", type=float, default=1.0, help="radial eigenvalue U")


def _add_walk_args(sp):
    sp.add_argument("--n", type=int, default=10_000, help="walk length")
    sp.add_argument("--replicas", type=int, default=1000)
    sp.add_argument("--noise", default="gaussian", choices=walk.NOISES)
    sp.add_argument("--square-root", default="symmetric", choices=walk.ROOTS)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinwalk", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0, help="64-bit master seed")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (SPINWALK_THREADS fallback; results identical regardless)")
    # the same flags are accepted after the subcommand; SUPPRESS keeps the
    # pre-subcommand value when the flag is absent there
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=lambda **kw: argparse.ArgumentParser(parents=[common], **kw))

    sp = sub.add_parser("validate", help="model + geometry identity suites")
    _add_model_args(sp)
    sp.add_argument("--geometry", action="store_true")
    sp.add_argument("--n-samples", type=int, default=1000)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("walk", help="scaled walk endpoint samples")
    _add_model_args(sp)
    _add_walk_args(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_walk)

    sp = sub.add_parser("marginal", help="scaled walk endpoints + radial KS report")
    _add_model_args(sp)
    _add_walk_args(sp)
    sp.add_argument("--out")
    sp.add_argument("--report")
    sp.set_defaults(fn=cmd_marginal)

    sp = sub.add_parser("diffusion", help="direct Euler simulation of the ambient SDE")
    _add_model_args(sp)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--r0", type=float, default=0.0, help="starting radius along e1")
    sp.add_argument("--replicas", type=int, default=1000)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_diffusion)

    sp = sub.add_parser("stationary", help="sample the stationary angular law")
    _add_model_args(sp)
    sp.add_argument("--burn-in", type=float, default=sphere_sde.DEFAULT_BURN_IN)
    sp.add_argument("--thin", type=float, default=sphere_sde.DEFAULT_THIN)
    sp.add_argument("--dt", type=float, default=sphere_sde.DEFAULT_H)
    sp.add_argument("--chains", type=int, default=64)
    sp.add_argument("--n-grid", type=int, default=512)
    sp.add_argument("--replicas", type=int, default=10_000, help="number of samples")
    sp.add_argument("--out", required=True)
    sp.add_argument("--density", help="also solve and write the d=2 stationary density CSV")
    sp.set_defaults(fn=cmd_stationary)

    sp = sub.add_parser("exit-law", help="exit-time Laplace transform: closed form vs MC")
    # --a is the exit radius here; the rotation4d scale comes via --config
    sp.add_argument("--config", help="configuration file (model section)")
    sp.add_argument("--model", default="rotation2d", choices=("isotropic", "rotation2d", "rotation4d"))
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--b", type=float, default=None)
    sp.add_argument("--u", type=float, default=1.0)
    _add_walk_args(sp)
    sp.add_argument("--delta", type=float, default=1.25, help="radial dimension (pure-radial MC)")
    sp.add_argument("--walk", action="store_true", help="measure the walk's exit law instead")
    sp.add_argument("--a", type=float, default=1.0, help="exit radius")
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--lambda", "--lambdas", dest="lambdas", default="0.5,1,2",
                    help="comma-separated transform arguments")
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.set_defaults(fn=cmd_exit_law)

    sp = sub.add_parser("excursion", help="sample marked excursions")
    _add_model_args(sp)
    sp.add_argument("--min-lifetime", type=float, default=0.5)
    sp.add_argument("--level-low", type=float, default=None)
    sp.add_argument("--level-high", type=float, default=None)
    sp.add_argument("--records", type=int, default=10)
    sp.add_argument("--step", type=float, default=2e-3)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.set_defaults(fn=cmd_excursion)

    sp = sub.add_parser("nonuniq", help="shared-noise solution pair X and PX")
    _add_model_args(sp)
    sp.add_argument("--p", default="0,1,0,0", help="rotation direction, comma separated")
    sp.add_argument("--n", type=int, default=1000, help="Euler steps")
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.set_defaults(fn=cmd_nonuniq)

    sp = sub.add_parser("report", help="aggregate JSON reports; nonzero exit on failure")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = _Output()
    try:
        return args.fn(args, out)
    except (ConfigError, ValueError, RuntimeError) as exc:
        out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BaseException:
        out.cleanup()
        raise


if __name__ == "__main__":
    sys.exit(main())
