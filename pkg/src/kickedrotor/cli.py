"""``kr`` command-line front end.

Every subcommand writes its artifacts atomically into the output directory
(``--out``, else ``$KR_OUT_DIR``, else ``./kr_out``) and finishes with
``manifest.json``, which lists each artifact with its SHA-256 digest together
with the resolved configuration and seeds. Exit status is 0 on success, 2 on
usage or validation errors and 3 on runtime errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import anderson, classical, engine, experiments, scaling
from .core import EnsembleSpec, KRError, ValidationError, load_config, validate

log = logging.getLogger("kr")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


class Artifacts:
    """Stages output files in memory; :meth:`commit` writes them atomically.

    Nothing reaches the disk unless the command succeeds, and the manifest is
    always the last file written.
    """

    def __init__(self, out: Path):
        self.out = out
        self.staged: dict[str, str] = {}

    def _stage(self, name: str, text: str):
        self.staged[name] = text

    def csv(self, name: str, columns, rows):
        rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
        integral = [len(c) > 0 and bool(np.all(np.isfinite(c)) and np.all(c == np.round(c))
                                        and np.all(np.abs(c) < 2 ** 53)) for c in rows.T]
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(str(int(v)) if k else _fmt(v) for v, k in zip(row, integral)))
        self._stage(name, "\n".join(lines) + "\n")

    def json(self, name: str, data):
        self._stage(name, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")

    def table(self, name: str, table: experiments.Table):
        self.csv(name, table.columns, table.data)

    def _write(self, name: str, text: str):
        fd, tmp = tempfile.mkstemp(dir=self.out, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, self.out / name)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise

    def commit(self, command: str, argv, config: dict, seeds: dict, wall: float):
        self.out.mkdir(parents=True, exist_ok=True)
        digests = {}
        for name, text in sorted(self.staged.items()):
            self._write(name, text)
            digests[name] = hashlib.sha256(text.encode()).hexdigest()
        manifest = {
            "command": command,
            "argv": list(argv),
            "config": config,
            "seeds": seeds,
            "artifacts": digests,
            "code_version": _code_version(),
            "wall_time_s": wall,
        }
        self._write("manifest.json", json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")


# --- subcommands -------------------------------------------------------------

def cmd_classical(args, art: Artifacts):
    if not args.K >= 0:
        raise ValidationError(f"--K must be a non-negative kick strength, got {args.K}")
    est = classical.classical_diffusion(args.K, n_traj=args.n_traj, n_steps=args.steps,
                                        seed=args.seed)
    art.csv("classical.csv", ["step [kicks]", "mean_L2 [dimensionless]"],
            np.column_stack([est.steps, est.mean_L2]))
    art.json("summary.json", {"D": est.D, "D_stderr": est.stderr, "quasilinear_D": args.K ** 2 / 4})
    return {"K": args.K, "steps": args.steps, "n_traj": args.n_traj}


def _xi_from_distribution(Pi):
    # |u_n|^2 ~ Pi_n on the integer class lattice
    return anderson.envelope_xi(np.sqrt(np.clip(Pi, 0, None)), floor=1e-12)


def cmd_evolve(args, art: Artifacts):
    params, ensemble, _ = load_config(args.config)
    if args.members is not None:
        ensemble = EnsembleSpec(args.members, seed=args.seed)
    elif ensemble is not None and args.seed_given:
        ensemble = EnsembleSpec(ensemble.n_members, args.seed, ensemble.sample_beta,
                                ensemble.sample_phases)
    vp = validate(params)
    if ensemble is None:
        s = engine.evolve(params)
    else:
        s = engine.run_ensemble(params, ensemble, threads=args.threads)
    art.csv("series.csv", ["t [kicks]", "p2 [dimensionless]", "pi0 [probability]"],
            np.column_stack([s.times, s.p2, s.pi0]))
    art.csv("dist.csv", ["p [dimensionless]", "Pi [probability]"],
            np.column_stack([s.p_classes, s.distribution]))
    curve = scaling.TransportCurve(params.K, s.times, s.p2)
    summary = {
        "xi_sites": _xi_from_distribution(s.distribution),
        "p2_final": float(s.p2[-1]),
        "fgp_applicable": vp.fgp_applicable,
    }
    try:
        summary["beta_final"] = scaling.exponent_at(curve, window=0.5)
    except scaling.WindowTooNarrow:
        summary["beta_final"] = None
    try:
        fit = scaling.fit_distribution_shape(s.p_classes, s.distribution, bin_width=params.kbar)
        summary["shape"] = {"alpha": fit.alpha, "s": fit.s, "kl_divergence": fit.goodness}
    except scaling.FitDiverged as exc:
        summary["shape"] = {"error": str(exc)}
    art.json("summary.json", summary)
    return {"params": params.to_dict(), "ensemble": ensemble.to_dict() if ensemble else None}


def cmd_anderson_map(args, art: Artifacts):
    kappa = args.K / args.kbar
    onsite = anderson.pseudo_disorder(args.omega, args.kbar, args.beta, (), (args.half_width,))
    m = np.arange(-args.half_width, args.half_width + 1)
    art.csv("onsite.csv", ["m [site]", "E_m [dimensionless]"], np.column_stack([m, onsite]))
    table = anderson.hopping_coefficients(kappa, r_max=args.r_max, sign=anderson.PROSE_SIGN)
    r = np.array([k[0] for k in table])
    art.csv("hopping.csv", ["r [sites]", "t_r [dimensionless]"],
            np.column_stack([r, [table[(k,)] for k in r]]))
    rep = anderson.floquet_oracle(args.K, args.kbar, args.beta, M_small=args.m_small)
    art.json("oracle.json", rep.to_dict())
    return {"K": args.K, "kbar": args.kbar, "kappa": kappa, "beta_qm": args.beta,
            "omega": args.omega, "half_width": args.half_width, "r_max": args.r_max,
            "M_small": args.m_small}


def cmd_phase_diagram(args, art: Artifacts):
    eps = np.linspace(args.eps_min, args.eps_max, args.n_eps)
    Ks = np.linspace(args.K_min, args.K_max, args.n_K)
    params = experiments.quasiperiodic_params(Ks[0], eps[0], args.kicks, args.M)
    params = params.replace(kbar=args.kbar)
    spec = EnsembleSpec(args.members, seed=args.seed)
    pd = scaling.phase_diagram(eps, Ks, params, spec, t_eval=args.kicks, threads=args.threads)
    art.csv("beta.csv", ["epsilon [dimensionless]", "K [dimensionless]", "beta [dimensionless]"],
            list(pd.rows()))
    art.csv("critical_line.csv", ["epsilon [dimensionless]", "K [dimensionless]"],
            np.array(pd.critical_line, dtype=float).reshape(-1, 2))
    art.json("summary.json", {"t_eval": args.kicks, "critical_line": pd.critical_line})
    return {"params": params.to_dict(), "ensemble": spec.to_dict(),
            "epsilons": eps.tolist(), "Ks": Ks.tolist()}


def _parse_kc(value: str):
    if value in ("fit",):
        return "fit"
    if value in ("crossing", "none"):
        return None
    return float(value)


def _read_curves_csv(path: Path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    curves = []
    for K in np.unique(data[:, 0]):
        rows = data[data[:, 0] == K]
        order = np.argsort(rows[:, 1])
        curves.append(scaling.TransportCurve(float(K), rows[order, 1], rows[order, 2]))
    return curves


def cmd_scaling(args, art: Artifacts):
    K_c = _parse_kc(args.K_c)
    if args.curves:
        curves = _read_curves_csv(Path(args.curves))
        config = {"curves": str(args.curves), "K_c": args.K_c}
    else:
        Ks = np.linspace(args.K_min, args.K_max, args.n_K)
        curves = experiments.path_curves(Ks, args.seed, args.threads, args.members, args.kicks,
                                         progress=lambda K: log.info("curve K=%g done", K))
        config = {"Ks": Ks.tolist(), "members": args.members, "kicks": args.kicks,
                  "K_c": args.K_c, "path": {"K0": experiments.PATH_K0,
                                            "epsilon0": experiments.PATH_EPS0,
                                            "slope": experiments.PATH_SLOPE}}
    res = scaling.finite_time_scaling(curves, K_c=K_c, n_bootstrap=args.bootstrap, seed=args.seed)
    rows = [np.column_stack([np.full_like(u, K), u, y]) for K, u, y in zip(res.Ks, res.u, res.ln_lambda)]
    art.csv("lambda.csv", ["K [dimensionless]", "ln t^-1/3 [dimensionless]",
                           "ln Lambda [dimensionless]"], np.vstack(rows))
    rows = [np.column_stack([np.full_like(u, K), u + lx, y])
            for K, u, y, lx in zip(res.Ks, res.u, res.ln_lambda, res.ln_xi) if np.isfinite(lx)]
    art.csv("collapsed.csv", ["K [dimensionless]", "ln(xi t^-1/3) [dimensionless]",
                              "ln Lambda [dimensionless]"], np.vstack(rows))
    art.csv("xi.csv", ["K [dimensionless]", "ln xi [dimensionless]",
                       "branch [-1 localized, +1 diffusive]", "late beta [dimensionless]"],
            np.column_stack([res.Ks, res.ln_xi, res.branch, res.late_beta]))
    summary = res.summary()
    summary["skipped_K"] = [float(res.Ks[i]) for i in res.skipped]
    art.json("fit.json", summary)
    config["bootstrap"] = args.bootstrap
    return config


def cmd_collapse(args, art: Artifacts):
    times = tuple(int(t) for t in args.times.split(","))
    if len(times) < 2:
        raise ValidationError("--times needs at least two comma-separated values")
    s, dists = experiments.collapse_runs((args.K, args.epsilon), times, args.seed, args.threads,
                                         args.members)
    rep = scaling.critical_collapse(dists)
    art.csv("rescaled.csv", ["q = p t^-1/3 [dimensionless]"]
            + [f"t^1/3 rho(t={t}) [density]" for t in rep.times],
            np.column_stack([rep.q] + rep.rescaled))
    art.csv("raw.csv", ["p [dimensionless]"] + [f"Pi(t={t}) [probability]" for t in times],
            np.column_stack([s.p_classes] + [d[2] for d in dists]))
    art.json("report.json", {"max_l1": rep.max_l1,
                             "pairwise_l1": {f"{a}-{b}": v for (a, b), v in rep.pairwise.items()}})
    return {"K": args.K, "epsilon": args.epsilon, "times": list(times), "members": args.members}


def cmd_reproduce(args, art: Artifacts):
    recipe = experiments.RECIPES[args.figure]
    out = recipe(seed=args.seed, threads=args.threads)
    for name, table in out.tables.items():
        art.table(f"{name}.csv", table)
    art.json("summary.json", out.summary)
    return {"figure": args.figure, "recipe": out.config, "reduced_scale": out.reductions}


COMMANDS = {
    "classical": cmd_classical,
    "evolve": cmd_evolve,
    "anderson-map": cmd_anderson_map,
    "phase-diagram": cmd_phase_diagram,
    "scaling": cmd_scaling,
    "collapse": cmd_collapse,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads (results do not depend on it)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (default: $KR_OUT_DIR or ./kr_out)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="kr", parents=[common],
                                     description="Kicked rotor and Anderson localization toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("classical", parents=[common], help="Standard Map momentum diffusion")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--n-traj", type=int, default=10_000)

    p = sub.add_parser("evolve", parents=[common], help="quantum evolution from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--members", type=int, default=None,
                   help="override the ensemble size (uses --seed)")

    p = sub.add_parser("anderson-map", parents=[common],
                       help="pseudo-disorder, hopping table and Floquet oracle report")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--kbar", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.0, help="quasimomentum")
    p.add_argument("--omega", type=float, default=0.0, help="quasi-energy")
    p.add_argument("--half-width", type=int, default=256)
    p.add_argument("--r-max", type=int, default=20)
    p.add_argument("--m-small", type=int, default=64)

    p = sub.add_parser("phase-diagram", parents=[common], help="beta on an (epsilon, K) grid")
    p.add_argument("--eps-min", type=float, default=0.1)
    p.add_argument("--eps-max", type=float, default=0.8)
    p.add_argument("--n-eps", type=int, default=16)
    p.add_argument("--K-min", type=float, default=4.0)
    p.add_argument("--K-max", type=float, default=9.0)
    p.add_argument("--n-K", type=int, default=16)
    p.add_argument("--kbar", type=float, default=experiments.KBAR)
    p.add_argument("--members", type=int, default=24)
    p.add_argument("--kicks", type=int, default=300)
    p.add_argument("--M", type=int, default=512, help="basis half-width")

    p = sub.add_parser("scaling", parents=[common], help="finite-time scaling along the path")
    p.add_argument("--K-min", type=float, default=5.0)
    p.add_argument("--K-max", type=float, default=8.0)
    p.add_argument("--n-K", type=int, default=13)
    p.add_argument("--members", type=int, default=500)
    p.add_argument("--kicks", type=int, default=1000)
    p.add_argument("--K-c", default="crossing", help="'crossing', 'fit' or a number")
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--curves", default=None,
                   help="CSV with columns K,t,p2 to analyse instead of running the engine")

    p = sub.add_parser("collapse", parents=[common], help="rescaled momentum distributions")
    p.add_argument("--K", type=float, default=experiments.CRITICAL_POINT[0])
    p.add_argument("--epsilon", type=float, default=experiments.CRITICAL_POINT[1])
    p.add_argument("--times", default="300,1000")
    p.add_argument("--members", type=int, default=500)

    p = sub.add_parser("reproduce", parents=[common], help="canned desk-scale figure recipes")
    p.add_argument("figure", choices=sorted(experiments.RECIPES))
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    args.seed_given = hasattr(args, "seed")
    args.threads = getattr(args, "threads", 1)
    args.seed = getattr(args, "seed", 0)
    args.verbose = getattr(args, "verbose", False)
    out = Path(getattr(args, "out", None) or os.environ.get("KR_OUT_DIR") or "kr_out")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("kr: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION

    art = Artifacts(out)
    start = time.perf_counter()
    try:
        config = COMMANDS[args.command](args, art)
    except (ValueError, anderson.PoleInDomain, FileNotFoundError) as exc:
        print(f"kr: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KRError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"kr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        art.commit(args.command, argv, config, {"seed": args.seed, "threads": args.threads},
                   time.perf_counter() - start)
    except OSError as exc:
        print(f"kr: cannot write artifacts to {out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
