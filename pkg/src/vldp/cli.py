"""Command-line front end.

Every subcommand writes its CSV output(s) plus ``manifest.json`` into
``--out`` (default: current directory).  Exit codes: 0 success, 2
configuration error, 3 numerical failure (divergence or an optimizer run
that did not meet its tolerances).
"""
import argparse
from datetime import datetime, timezone
import hashlib
import json
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__
from .asymptotics import scaling_check, taylor_check
from .config import config_dict, dump_config, load_config
from .dynamics import default_threads, simulate_batch
from .errors import ConfigError, DomainError, NumericalError
from .grid import Grid
from .kernel import cached_weights
from .model import validate_spec
from .montecarlo import ldp_convergence_study, study_rows_csv
from .rate import SolverOptions, minimize_path_rate, minimize_scalar_rate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _floats(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="vldp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n_default=400, seed=True):
        sp.add_argument("--config", required=True, help="model config file (key = value)")
        sp.add_argument("--n", type=int, default=n_default, help="time steps (default %(default)s)")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--threads", type=int, default=None, help="worker cap (env VLDP_THREADS)")
        sp.add_argument("--dump-weights", metavar="CSV", default=None,
                        help="also write the kernel weight matrix (columns i,w0..w{n-1})")
        if seed:
            sp.add_argument("--seed", type=int, default=1)

    def solver(sp):
        sp.add_argument("--starts", type=int, default=8, help="deterministic optimizer starts")
        sp.add_argument("--extra-starts", type=int, default=0, help="random perturbation starts")

    sp = sub.add_parser("rate", help="terminal rate I_T(x); writes rate.csv and rate_minimizer.csv (t,fdot)")
    common(sp); solver(sp)
    sp.add_argument("--x", type=float, required=True)

    sp = sub.add_parser("path-rate", help="path rate Q(g); writes path_rate.csv and path_rate_minimizer.csv (t,fdot)")
    common(sp); solver(sp)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--x", type=float, help="linear target g(t) = x t / T")
    grp.add_argument("--target", help="CSV with header t,g holding the n + 1 grid values of g")

    sp = sub.add_parser("simulate", help="terminal log-prices; writes paths.csv (path_id,x_T[,x_0..x_n])")
    common(sp, 256)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--paths", type=int, default=10000)
    sp.add_argument("--full-paths", action="store_true")

    sp = sub.add_parser("ldp-check", help="eps log P(X_T >= c) ladder; writes ldp_check.csv and ldp_summary.csv")
    common(sp, 256); solver(sp)
    sp.add_argument("--c", type=float, required=True)
    sp.add_argument("--eps", type=_floats, default=[0.4, 0.2, 0.1, 0.05])
    sp.add_argument("--paths", type=int, default=1_000_000)
    sp.add_argument("--prefactor", type=float, default=0.5,
                    help="coefficient of the eps log eps term removed before the linear fit")

    sp = sub.add_parser("strike", help="scaling I(c) vs c^gamma I(1); writes strike.csv "
                        "(c,rate,c_pow_gamma_I1,rel_deviation,converged)")
    common(sp, seed=False); solver(sp)
    sp.add_argument("--cs", type=_floats, default=[0.5, 1.0, 2.0])

    sp = sub.add_parser("taylor", help="quadratic/cubic fit near 0; writes taylor.csv (x,rate,fit,residual + summary)")
    common(sp, seed=False); solver(sp)
    sp.add_argument("--xs", type=_floats, default=[0.02, 0.05, 0.1],
                    help="evaluation points; all-positive input is mirrored to +-x")

    sp = sub.add_parser("validate", help="assumption report; writes validation.csv (check,status,detail)")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=".")
    return p


def _csv_line(values):
    return ",".join(v if isinstance(v, str) else repr(float(v)) if isinstance(v, (float, np.floating))
                    else str(v) for v in values)


class _Run:
    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.status = EXIT_OK

    def write(self, name, text):
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.files.append(name)

    def register(self, name):
        self.files.append(name)

    def manifest(self, spec, started, t0):
        args = vars(self.args)
        entry = {
            "tool": "vldp",
            "version": __version__,
            "subcommand": self.args.command,
            "argv": self.argv,
            "config": config_dict(spec) if spec is not None else None,
            "config_text": dump_config(spec) if spec is not None else None,
            "grid": {"n_steps": args.get("n"), "horizon": spec.horizon if spec is not None else None},
            "seeds": {"seed": args.get("seed")},
            "threads": args.get("threads"),
            "started": started,
            "wall_clock_s": round(time.perf_counter() - t0, 6),
            "exit_code": self.status,
            "outputs": [{"file": f, "sha256": hashlib.sha256((self.out / f).read_bytes()).hexdigest()}
                        for f in self.files],
        }
        (self.out / "manifest.json").write_text(json.dumps(entry, indent=2) + "\n", encoding="utf-8")


def _opts(args):
    return SolverOptions(n_starts=args.starts, extra_starts=args.extra_starts, seed=getattr(args, "seed", 1) or 1)


def _minimizer_csv(res):
    grid = res.minimizer.grid
    lines = ["t,fdot"] + [_csv_line([t, v]) for t, v in zip(grid.times[:-1], res.minimizer.fdot)]
    return "\n".join(lines) + "\n"


def _result_csv(label, res):
    return ("quantity,value\n" + _csv_line([label, res.value]) + "\n"
            + _csv_line(["converged", int(res.converged)]) + "\n"
            + _csv_line(["gradient_norm", res.gradient_norm]) + "\n"
            + _csv_line(["n_starts", res.n_starts]) + "\n"
            + _csv_line(["touches_zero", int(res.touches_zero)]) + "\n")


def _cmd_rate(run, spec, grid):
    a = run.args
    res = minimize_scalar_rate(spec, grid, a.x, _opts(a))
    print(f"I_T({a.x!r}) = {res.value!r}" + ("" if res.converged else "  [not converged]"))
    run.write("rate.csv", _result_csv("rate", res))
    run.write("rate_minimizer.csv", _minimizer_csv(res))
    return res.converged


def _read_target(path, grid):
    data = np.genfromtxt(path, delimiter=",", names=True, encoding="utf-8")
    if data.dtype.names is None or "g" not in data.dtype.names:
        raise ConfigError("target CSV needs a header with a 'g' column")
    g = np.atleast_1d(data["g"]).astype(float)
    if g.shape != (grid.n_steps + 1,):
        raise ConfigError(f"target CSV must hold {grid.n_steps + 1} rows for --n {grid.n_steps}")
    return g


def _cmd_path_rate(run, spec, grid):
    a = run.args
    if a.target is not None:
        try:
            g = _read_target(a.target, grid)
        except OSError as exc:
            raise ConfigError(f"cannot read target {a.target}: {exc}") from exc
    else:
        g = a.x * grid.times / grid.horizon
    res = minimize_path_rate(spec, grid, g, _opts(a))
    print(f"Q(g) = {res.value!r}" + ("" if res.converged else "  [not converged]"))
    run.write("path_rate.csv", _result_csv("path_rate", res))
    run.write("path_rate_minimizer.csv", _minimizer_csv(res))
    return res.converged


def _cmd_simulate(run, spec, grid):
    a = run.args
    batch = simulate_batch(spec, grid, a.eps, a.paths, a.seed, full_paths=a.full_paths, threads=a.threads)
    batch.to_csv(run.out / "paths.csv")
    run.register("paths.csv")
    print(f"simulated {a.paths} paths at eps={a.eps!r}; mean x_T = {float(np.mean(batch.terminal_logprice))!r}")
    return True


def _cmd_ldp(run, spec, grid):
    a = run.args
    rate = minimize_scalar_rate(spec, grid, a.c, _opts(a))
    study = ldp_convergence_study(spec, grid, a.c, a.eps, a.paths, a.seed, rate=rate.value,
                                  prefactor=a.prefactor, threads=a.threads)
    run.write("ldp_check.csv", study_rows_csv(study))
    s = study.summary
    if s is None:
        line = f"summary withheld: fewer than two rungs with enough hits; solver I_T({a.c!r}) = {rate.value!r}"
        run.write("ldp_summary.csv", "quantity,value\n" + _csv_line(["rate", rate.value]) + "\n"
                  + "summary,withheld\n")
    else:
        line = (f"intercept={s.intercept!r} plain_intercept={s.intercept_plain!r} "
                f"-I_T(c)={-rate.value!r} rel_error={s.rel_error!r} points={s.n_points}")
        rows = [("intercept", s.intercept), ("slope", s.slope), ("intercept_plain", s.intercept_plain),
                ("prefactor", s.prefactor), ("rate", rate.value), ("rel_error", s.rel_error),
                ("n_points", s.n_points)]
        run.write("ldp_summary.csv", "quantity,value\n" + "".join(_csv_line(r) + "\n" for r in rows))
    print(study_rows_csv(study), end="")
    print(line)
    return rate.converged


def _cmd_strike(run, spec, grid):
    rep = scaling_check(spec, grid, run.args.cs, _opts(run.args))
    run.write("strike.csv", rep.to_csv())
    print(rep.to_csv(), end="")
    return all(r.converged for r in rep.rows)


def _cmd_taylor(run, spec, grid):
    xs = run.args.xs
    if all(x > 0 for x in xs):
        xs = sorted([-x for x in xs]) + sorted(xs)
    rep = taylor_check(spec, grid, xs, _opts(run.args))
    run.write("taylor.csv", rep.to_csv())
    print(rep.to_csv(), end="")
    return rep.converged


def _cmd_validate(run, spec):
    rep = validate_spec(spec)
    lines = ["check,status,detail"] + [f"{c.name},{c.status},\"{c.detail}\"" for c in rep.checks]
    lines.append(f"flags,info,\"{';'.join(sorted(rep.flags))}\"")
    run.write("validation.csv", "\n".join(lines) + "\n")
    print(rep)
    return rep.ok


COMMANDS = {"rate": _cmd_rate, "path-rate": _cmd_path_rate, "simulate": _cmd_simulate,
            "ldp-check": _cmd_ldp, "strike": _cmd_strike, "taylor": _cmd_taylor}


def dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    spec = None
    run = None
    try:
        spec = load_config(args.config)
        run = _Run(args, argv)
        if args.command == "validate":
            ok = _cmd_validate(run, spec)
            run.status = EXIT_OK if ok else EXIT_CONFIG
        else:
            if args.n < 1:
                raise ConfigError("--n must be positive")
            grid = Grid(args.n, spec.horizon)
            if args.dump_weights:
                cached_weights(spec.kernel, grid).to_csv(args.dump_weights)
            ok = COMMANDS[args.command](run, spec, grid)
            run.status = EXIT_OK if ok else EXIT_NUMERIC
    except (ConfigError, DomainError) as exc:
        print(f"vldp: configuration error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except NumericalError as exc:
        print(f"vldp: numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERIC
    else:
        status = run.status
    if run is not None:
        run.status = status
        run.manifest(spec, started, t0)
    return status


def replay_manifest(manifest_path, out_dir) -> int:
    """Re-run a recorded invocation into ``out_dir`` using the stored config snapshot."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = out_dir / "replay.cfg"
    cfg.write_text(manifest["config_text"], encoding="utf-8")
    argv = list(manifest["argv"])
    for flag, value in (("--config", str(cfg)), ("--out", str(out_dir))):
        if flag in argv:
            argv[argv.index(flag) + 1] = value
        else:
            argv += [flag, value]
    return dispatch(argv)


def main():
    sys.exit(dispatch())
