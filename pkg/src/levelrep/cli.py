"""Command-line driver: ensemble runs, statistics, model overlays and fits.

Data go to CSV files in ``--out``; progress and warnings go to stderr.  Each
run writes ``manifest.json`` listing its configuration, command line and the
sha256 of every output, so ``levelrep replay`` can rerun and check it.

Exit status: 0 on success, 2 on usage errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import math
import shlex
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import ConfigurationError, WindowError
from .ensemble import WIDTH_KINDS, ASPECT_CONVENTIONS, EnsembleConfig, config_from_mapping, load_config
from .fit import BracketWarning, fit_sqrt_coefficient, fit_t_min, fit_t_min_binned
from .io import build_manifest, read_csv, read_manifest, sha256_file, write_csv, write_curve, write_manifest
from .models.kernels import AnsatzParams, ansatz_kernel, gue_kernel, kepler_kernel, t_min_kepler, t_min_rectangle
from .models.spacing import (
    ansatz_cumulative_P,
    ansatz_cumulative_P_asymptote,
    ansatz_spacing_pdf,
    poisson_cumulative_P,
    poisson_spacing_pdf,
)
from .models.variance import ansatz_number_variance, rectangle_variance_ensemble
from .run import DEFAULT_CHUNK, LevelCountTally, default_threads, run_ensemble
from .spectra import write_raw_rows
from .stats import KernelTally, SpacingTally, VarianceTally

MANIFEST = "manifest.json"


class UsageError(Exception):
    """Bad or inconsistent command-line input (exit status 2)."""


# -- configuration from flags ----------------------------------------------


def _add_ensemble_flags(p: argparse.ArgumentParser, *, energy=True) -> None:
    g = p.add_argument_group("ensemble")
    g.add_argument("--config", metavar="FILE", help="key=value file; explicit flags override it")
    g.add_argument("--system", choices=("rect", "kepler"))
    if energy:
        g.add_argument("--energy", type=float, help="running energy in units of the mean spacing (default 1e4)")
    g.add_argument("--members", type=int, help="ensemble size (default 300000)")
    g.add_argument("--seed", type=int, help="64-bit seed (default 0)")
    g.add_argument("--window", type=float, help="observation window width W (default 100)")
    for name in ("alpha", "beta"):
        g.add_argument(f"--{name}-mean", type=float)
        g.add_argument(f"--{name}-spread", type=float)
        g.add_argument(f"--{name}-lower", type=float)
        g.add_argument(f"--{name}-upper", type=float)
    g.add_argument("--width-kind", choices=WIDTH_KINDS, help="spread is a standard deviation or a HWHM")
    g.add_argument("--aspect", choices=ASPECT_CONVENTIONS,
                   help="rectangle: sample the period parameter alpha or the side ratio")
    r = p.add_argument_group("run")
    r.add_argument("--out", required=True, metavar="DIR")
    r.add_argument("--threads", type=int, default=None, help="worker threads (default: available CPUs)")
    r.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK, help=argparse.SUPPRESS)
    r.add_argument("--strict-degeneracy", action="store_true", help="fail on near-degenerate level pairs")
    r.add_argument("--dump-raw", action="store_true", help="also write every unfolded level to levels.csv")
    r.add_argument("--quiet", action="store_true", help="no progress output")


def config_from_args(args) -> EnsembleConfig:
    try:
        return _config_from_args(args)
    except (ConfigurationError, UsageError):
        raise
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _config_from_args(args) -> EnsembleConfig:
    base = load_config(args.config) if args.config else None
    values = {}
    if args.system is not None:
        values["system"] = args.system
    system = values.get("system", base.system if base else "rect")
    other = "beta" if system == "rect" else "alpha"
    mine = "alpha" if system == "rect" else "beta"
    for key in ("mean", "spread", "lower", "upper"):
        if getattr(args, f"{other}_{key}") is not None:
            raise UsageError(f"--{other}-{key} does not apply to --system {system}; use --{mine}-{key}")
        v = getattr(args, f"{mine}_{key}")
        if v is not None:
            values[{"lower": "lower_cut", "upper": "upper_cut"}.get(key, key)] = v
    for flag, key in (("energy", "energy"), ("members", "member_count"), ("seed", "seed"),
                      ("window", "window_width"), ("width_kind", "width_kind"), ("aspect", "aspect")):
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return config_from_mapping(values, base)


def _theory_t_min(config: EnsembleConfig, energy: float | None = None) -> float:
    e = config.energy if energy is None else energy
    if config.system == "rect":
        return t_min_rectangle(e)
    return t_min_kepler(e, config.param_law.mean)


# -- one run = one output directory -----------------------------------------


class Run:
    """Output directory bookkeeping plus the manifest written at the end."""

    def __init__(self, args, command: str, argv):
        self.args = args
        self.command = command
        self.argv = list(argv)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.extra = {}
        self.t0 = time.perf_counter()
        self.progress = None if getattr(args, "quiet", True) else sys.stderr
        self.threads = getattr(args, "threads", None) or default_threads()

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def log(self, msg: str) -> None:
        if self.progress is not None:
            print(msg, file=self.progress)

    def ensemble(self, config, tallies):
        raw = None
        on_batch = None
        if getattr(self.args, "dump_raw", False):
            name = "levels.csv" if self.command != "sweep" else f"levels_E{config.energy:.17g}.csv"
            raw = open(self.path(name), "w", encoding="utf-8", newline="\n")
            raw.write("member_id,x\n")
            on_batch = lambda b: write_raw_rows(raw, b)  # noqa: E731
        self.log(f"{config.system} ensemble: energy={config.energy:g} members={config.member_count} "
                 f"window={config.window_width:g} seed={config.seed}")
        try:
            summary = run_ensemble(
                config, tallies, threads=self.threads, chunk_size=self.args.chunk_size,
                on_degeneracy="raise" if self.args.strict_degeneracy else "warn",
                progress=self.progress, on_batch=on_batch,
            )
        finally:
            if raw is not None:
                raw.close()
        return summary

    def finish(self, config) -> Path:
        manifest = build_manifest(
            self.command, self.argv, config, self.outputs, threads=self.threads,
            duration=time.perf_counter() - self.t0, extra=self.extra, out_dir=self.out,
        )
        return write_manifest(self.out / MANIFEST, manifest)


def _summary_dict(summary) -> dict:
    return {"members": summary.members, "chunks": summary.chunks,
            "degenerate_pairs": summary.degenerate_pairs, "degenerate_chunks": summary.degenerate_chunks}


def _write_report(path: Path, lines) -> None:
    path.write_text("".join(lines), encoding="utf-8")


def _fit_quietly(fn, *a, **kw):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BracketWarning)
        res = fn(*a, **kw)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return res


# -- subcommands --------------------------------------------------------------


def cmd_spacing(args, argv) -> int:
    config = config_from_args(args)
    if args.bin <= 0 or args.smax < args.bin:
        raise UsageError("need --bin > 0 and --smax >= --bin")
    if args.s <= 0:
        raise UsageError("--s must be > 0")
    run = Run(args, "spacing", argv)
    spacing = SpacingTally.regular(args.bin, args.smax, [args.s])
    count = LevelCountTally()
    summary = run.ensemble(config, [spacing, count])
    if spacing.total == 0:
        raise RuntimeError("the ensemble produced no spacings; widen the window or add members")
    hist = spacing.histogram()
    write_csv(run.path("histogram.csv"), ("s_mid", "density", "stderr"), (hist.s_mid, hist.density, hist.stderr))

    s_fine = np.linspace(0.0, args.smax, int(round(args.smax / args.bin)) * 10 + 1)
    t_theory = _theory_t_min(config)
    write_curve(run.path("model_poisson.csv"), s_fine, poisson_spacing_pdf(s_fine))
    write_curve(run.path("model_ansatz.csv"), s_fine, ansatz_spacing_pdf(s_fine, AnsatzParams(t_theory)))
    P, P_err = spacing.cumulative_P(args.s)
    report = [
        f"system = {config.system}\n",
        f"energy = {config.energy:.17g}\n",
        f"members = {config.member_count}\n",
        f"total_spacings = {hist.total_spacings}\n",
        f"mean_density = {count.density:.17g}\n",
        f"t_min_theory = {t_theory:.17g}\n",
        f"first_bin_density = {hist.density[0]:.17g}\n",
        f"first_bin_stderr = {hist.stderr[0]:.17g}\n",
        f"s = {args.s:.17g}\n",
        f"P = {P:.17g}\n",
        f"P_stderr = {P_err:.17g}\n",
    ]
    run.extra.update(_summary_dict(summary), mean_density=count.density, t_min_theory=t_theory)
    if not args.no_fit:
        res = _fit_quietly(fit_t_min, hist, tuple(args.bracket))
        write_curve(run.path("model_fit.csv"), s_fine, ansatz_spacing_pdf(s_fine, AnsatzParams(res.parameter)))
        report.append(res.report("t_min"))
        run.extra["t_min_fit"] = res.parameter
    _write_report(run.path("fit_report.txt"), report)
    run.finish(config)
    return 0


def cmd_sweep(args, argv) -> int:
    base = config_from_args(args)
    energies = sorted(set(args.energies))
    if not energies:
        raise UsageError("--energies needs at least one value")
    if args.s <= 0:
        raise UsageError("--s must be > 0")
    if args.s >= 1:
        print(f"warning: s={args.s} >= 1; the small-s asymptote is not valid there", file=sys.stderr)
    configs = [base.replace(energy=float(e)) for e in energies]
    run = Run(args, "sweep", argv)
    rows = []
    for cfg in configs:
        tally = SpacingTally.regular(args.s, args.s, [args.s])
        summary = run.ensemble(cfg, [tally])
        if tally.total == 0:
            raise RuntimeError(f"no spacings at energy {cfg.energy}")
        P, err = tally.cumulative_P(args.s)
        rows.append((cfg.energy, P, err))
        run.extra[f"E={cfg.energy:.17g}"] = _summary_dict(summary)
    E = np.array([r[0] for r in rows])
    P = np.array([r[1] for r in rows])
    err = np.array([r[2] for r in rows])
    write_csv(run.path("sweep.csv"), ("energy", "P", "stderr"), (E, P, err))

    E_fine = np.geomspace(E.min(), E.max(), 101) if E.size > 1 else E
    t_fine = np.array([_theory_t_min(base, e) for e in E_fine])
    write_curve(run.path("model_poisson.csv"), E_fine, np.full(E_fine.size, poisson_cumulative_P(args.s)))
    write_curve(run.path("model_exact.csv"), E_fine,
                np.array([ansatz_cumulative_P(args.s, AnsatzParams(t)) for t in t_fine]))
    write_curve(run.path("model_asymptote.csv"), E_fine,
                np.array([ansatz_cumulative_P_asymptote(args.s, AnsatzParams(t)) for t in t_fine]))
    report = [f"s = {args.s:.17g}\n", f"poisson = {poisson_cumulative_P(args.s):.17g}\n"]
    status = 0
    if not args.no_fit:
        if E.size < 3:
            print("error: the scaling fit needs at least three distinct energies (curves were written)",
                  file=sys.stderr)
            status = 1
        else:
            res = fit_sqrt_coefficient(np.column_stack([E, P, err]), args.s)
            write_curve(run.path("model_fit.csv"), E_fine, poisson_cumulative_P(args.s) - res.parameter / np.sqrt(E_fine))
            report.append(res.report("c"))
            run.extra["c_fit"] = res.parameter
    _write_report(run.path("fit_report.txt"), report)
    run.finish(base)
    return status


def _L_grid(args, config) -> np.ndarray:
    if args.L is not None:
        L = np.array(sorted(set(args.L)), dtype=float)
    else:
        if args.L_step <= 0 or args.L_max < args.L_min or args.L_min <= 0:
            raise UsageError("need 0 < --L-min <= --L-max and --L-step > 0")
        n = int(math.floor((args.L_max - args.L_min) / args.L_step + 1e-9)) + 1
        L = args.L_min + args.L_step * np.arange(n)
    if np.any(L <= 0):
        raise UsageError("interval widths must be > 0")
    if L.max() > config.window_width:
        raise UsageError(f"L={L.max():g} exceeds the window width {config.window_width:g}")
    return L


def cmd_variance(args, argv) -> int:
    config = config_from_args(args)
    L = _L_grid(args, config)
    if config.member_count < 2:
        raise UsageError("the number variance needs --members >= 2")
    run = Run(args, "variance", argv)
    tally = VarianceTally(L)
    summary = run.ensemble(config, [tally])
    curve = tally.curve()
    write_csv(run.path("variance.csv"), ("L", "sigma2", "stderr"), (curve.L_grid, curve.sigma2, curve.stderr))
    t_theory = _theory_t_min(config)
    write_curve(run.path("model_ansatz.csv"), L, ansatz_number_variance(L, t_theory))
    run.extra.update(_summary_dict(summary), t_min_theory=t_theory)
    if config.system == "rect" and not args.no_model:
        run.log("rectangle correlation-sum overlay ...")
        res = rectangle_variance_ensemble(L, config.energy, config.param_law, aspect=config.aspect,
                                          n_nodes=args.model_nodes)
        write_csv(run.path("model_rectangle.csv"), ("x", "value", "tail_bound"), (L, res.value, res.tail_bound))
        run.extra["rectangle_max_tail_bound"] = float(np.max(res.tail_bound))
    run.finish(config)
    return 0


def cmd_kernel(args, argv) -> int:
    config = config_from_args(args)
    if args.bin <= 0:
        raise UsageError("--bin must be > 0")
    if args.omega_max < args.bin:
        raise UsageError("--omega-max must be >= --bin")
    n = int(round(args.omega_max / args.bin))
    omega = args.bin * (np.arange(n) + 0.5)
    if omega[-1] + args.bin > config.window_width / 2:
        raise UsageError(f"kernel grid reaches {omega[-1] + args.bin:g}, beyond half the window "
                         f"({config.window_width / 2:g}); lower --omega-max or widen --window")
    run = Run(args, "kernel", argv)
    tally = KernelTally(omega, args.bin)
    summary = run.ensemble(config, [tally])
    est = tally.estimate()
    write_csv(run.path("kernel.csv"), ("omega", "k_smooth", "stderr"), (est.omega_grid, est.k_smooth, est.stderr))
    fine = np.linspace(0.0, omega[-1] + args.bin / 2, 10 * n + 1)
    t_theory = _theory_t_min(config)
    write_curve(run.path("model_ansatz.csv"), fine, ansatz_kernel(fine, AnsatzParams(t_theory)))
    write_curve(run.path("model_gue.csv"), fine, gue_kernel(fine))
    if config.system == "kepler":
        beta = config.param_law.mean
        vals = [kepler_kernel(w, config.energy, beta, args.kepler_terms).value for w in fine]
        write_curve(run.path("model_kepler.csv"), fine, vals)
    run.extra.update(_summary_dict(summary), reference_levels=est.reference_levels, t_min_theory=t_theory)
    run.finish(config)
    return 0


def _edges_from_mid(s_mid: np.ndarray) -> np.ndarray:
    if s_mid.size < 2:
        raise UsageError("histogram needs at least two bins")
    w = np.diff(s_mid)
    if not np.allclose(w, w[0], rtol=1e-9, atol=0):
        raise UsageError("histogram bins must have equal width")
    w0 = float(np.mean(w))
    return np.append(s_mid - w0 / 2, s_mid[-1] + w0 / 2)


def cmd_fit(args, argv) -> int:
    if (args.histogram is None) == (args.sweep is None):
        raise UsageError("give exactly one of --histogram or --sweep")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(args, "fit", argv)
    if args.histogram is not None:
        data = read_csv(args.histogram)
        try:
            s_mid, density, stderr = data["s_mid"], data["density"], data["stderr"]
        except KeyError as exc:
            raise UsageError(f"{args.histogram}: expected columns s_mid,density,stderr") from exc
        res = _fit_quietly(fit_t_min_binned, _edges_from_mid(s_mid), density, stderr, tuple(args.bracket))
        text = res.report("t_min")
        inputs = {"histogram": str(args.histogram), "sha256": sha256_file(args.histogram)}
    else:
        data = read_csv(args.sweep)
        try:
            pts = np.column_stack([data["energy"], data["P"], data["stderr"]])
        except KeyError as exc:
            raise UsageError(f"{args.sweep}: expected columns energy,P,stderr") from exc
        if np.unique(pts[:, 0]).size < 3:
            raise UsageError("the scaling fit needs at least three distinct energies")
        res = fit_sqrt_coefficient(pts, args.s)
        text = f"s = {args.s:.17g}\n" + res.report("c")
        inputs = {"sweep": str(args.sweep), "sha256": sha256_file(args.sweep)}
    _write_report(run.path("fit_report.txt"), [text])
    sys.stdout.write(text)
    run.extra["inputs"] = inputs
    run.finish({"fit": "t_min" if args.histogram is not None else "c"})
    return 0


def cmd_replay(args, argv) -> int:
    manifest = read_manifest(args.manifest)
    old_argv = list(manifest["argv"])
    out = args.out or tempfile.mkdtemp(prefix="levelrep-replay-")
    new_argv = _replace_out(old_argv, out)
    if args.threads is not None:
        new_argv = _replace_flag(new_argv, "--threads", str(args.threads))
    print("replaying: levelrep " + " ".join(shlex.quote(a) for a in new_argv), file=sys.stderr)
    status = main(new_argv)
    if status != 0:
        return status
    fresh = {f["path"]: f["sha256"] for f in read_manifest(Path(out) / MANIFEST)["outputs"]}
    bad = 0
    for f in manifest["outputs"]:
        got = fresh.get(f["path"])
        ok = got == f["sha256"]
        bad += not ok
        print(f"{'ok  ' if ok else 'DIFF'} {f['path']}")
    return 0 if bad == 0 else 1


def _replace_flag(argv, flag, value):
    out, i, found = [], 0, False
    while i < len(argv):
        a = argv[i]
        if a == flag:
            out += [flag, value]
            i += 2
            found = True
            continue
        if a.startswith(flag + "="):
            out.append(f"{flag}={value}")
            found = True
        else:
            out.append(a)
        i += 1
    if not found:
        out += [flag, value]
    return out


def _replace_out(argv, out):
    return _replace_flag(argv, "--out", str(out))


# -- parser -------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelrep", description="Level repulsion in parametric ensembles of "
                                     "integrable spectra: simulation, statistics and fits.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spacing", help="nearest-spacing histogram with model overlays and t_min fit")
    _add_ensemble_flags(p)
    p.add_argument("--bin", type=float, default=0.05)
    p.add_argument("--smax", type=float, default=5.0)
    p.add_argument("--s", type=float, default=0.05, help="also report the cumulative P(s)")
    p.add_argument("--bracket", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--no-fit", action="store_true")
    p.set_defaults(func=cmd_spacing)

    p = sub.add_parser("sweep", help="P(s) across running energies and the 1/sqrt(energy) fit")
    _add_ensemble_flags(p, energy=False)
    p.add_argument("--energies", type=_float_list, required=True, help="e.g. 2500,1e4,4e4")
    p.add_argument("--s", type=float, default=0.05)
    p.add_argument("--no-fit", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("variance", help="level number variance with analytic overlays")
    _add_ensemble_flags(p)
    p.add_argument("--L", type=_float_list, default=None, help="explicit interval widths")
    p.add_argument("--L-min", type=float, default=1.0)
    p.add_argument("--L-max", type=float, default=50.0)
    p.add_argument("--L-step", type=float, default=1.0)
    p.add_argument("--no-model", action="store_true", help="skip the rectangle correlation-sum overlay")
    p.add_argument("--model-nodes", type=int, default=48, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("kernel", help="empirical smooth kernel with model overlays")
    _add_ensemble_flags(p)
    p.add_argument("--bin", type=float, default=0.5)
    p.add_argument("--omega-max", type=float, default=30.0)
    p.add_argument("--kepler-terms", type=int, default=200)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("fit", help="refit t_min from a histogram CSV or c from a sweep CSV")
    p.add_argument("--histogram", metavar="CSV")
    p.add_argument("--sweep", metavar="CSV")
    p.add_argument("--bracket", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--s", type=float, default=0.05)
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest and compare checksums")
    p.add_argument("manifest")
    p.add_argument("--out", metavar="DIR", help="where to write the rerun (default: a temporary directory)")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("levelrep: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args, argv)
    except (UsageError, ConfigurationError, WindowError) as exc:
        print(f"levelrep {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # runtime failure: report, do not dump a traceback
        print(f"levelrep {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
