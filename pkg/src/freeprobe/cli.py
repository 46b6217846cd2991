"""Command-line driver: every experiment is a subcommand with JSON-able
configuration, mandatory seeds for anything stochastic, and CSV artifacts
with sidecar manifests.  Reruns of the same config and seed are
byte-identical in the primary CSV.

Exit codes: 0 ok, 2 configuration error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import importlib.metadata
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics, combinatorics, coulomb, scattering, transforms
from .equilibrium import Potential, solve_equilibrium
from .errors import ConfigError, FreeprobeError, NumericError
from .util import resolve_threads

STOCHASTIC = {"charfn", "scattering"}


@dataclass
class ExperimentConfig:
    """Resolved invocation: subcommand, parameters, seed, output prefix."""

    subcommand: str
    params: dict
    seed: int | None
    output_path: str
    plot: bool = True
    threads: int = 1
    dry_run: bool = False
    extra_outputs: list = field(default_factory=list)

    def validate(self):
        if self.subcommand in STOCHASTIC and self.seed is None:
            raise ConfigError(
                f"subcommand '{self.subcommand}' is stochastic: --seed is "
                "required and never defaulted")


# ---------------------------------------------------------------------------
# small IO helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[h]) for h in header) + "\n")
    return path


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            row = {}
            for h, p in zip(header, parts):
                try:
                    row[h] = float(p)
                except ValueError:
                    row[h] = p
            rows.append(row)
    return header, rows


def write_manifest(config: ExperimentConfig, outputs, wall_time):
    blob = json.dumps({"subcommand": config.subcommand, "params": config.params,
                       "seed": config.seed}, sort_keys=True)
    try:
        version = importlib.metadata.version("freeprobe")
    except importlib.metadata.PackageNotFoundError:
        version = "unknown"
    manifest = {
        "subcommand": config.subcommand,
        "params": config.params,
        "seed": config.seed,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "versions": {"freeprobe": version, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "wall_time_s": wall_time,
        "outputs": outputs,
    }
    path = config.output_path + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path


def _parse_potential(raw) -> Potential:
    if isinstance(raw, str):
        coeffs = [float(c) for c in raw.split(",")]
    else:
        coeffs = [float(c) for c in raw]
    return Potential(np.asarray(coeffs))


def _parse_grid(raw):
    if isinstance(raw, str):
        return [float(v) for v in raw.split(",")]
    return [float(v) for v in raw]


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def run_nc(config: ExperimentConfig):
    p = config.params
    outputs = []
    if p.get("count") is not None:
        n = int(p["count"])
        rows = []
        for m in range(1, n + 1):
            bell = combinatorics.count_partitions(m)
            cat = combinatorics.count_noncrossing(m)
            rows.append({"n": m, "bell": bell, "catalan": cat})
        print(f"{rows[-1]['bell']} (Bell) and {rows[-1]['catalan']} (Catalan)")
        if config.output_path:
            outputs.append(write_csv(config.output_path + ".csv",
                                     ["n", "bell", "catalan"], rows))
    elif p.get("enumerate") is not None:
        n = int(p["enumerate"])
        parts = [part.to_json() for part in combinatorics.iter_partitions(n)]
        path = config.output_path + ".json"
        with open(path, "w") as fh:
            json.dump(parts, fh)
        outputs.append(path)
        print(f"wrote {len(parts)} partitions")
    else:
        raise ConfigError("nc requires --count or --enumerate")
    return outputs


def run_transform(config: ExperimentConfig):
    p = config.params
    potential = _parse_potential(p["potential"])
    sol = solve_equilibrium(potential)
    kmin, kmax, knum = float(p.get("kmin", -3.0)), float(p.get("kmax", 3.0)), int(p.get("knum", 121))
    rows = []
    for k in np.linspace(kmin, kmax, knum):
        k = float(k)
        if abs(k) < 1e-9:
            continue
        r = transforms.r_eval(potential, sol.measure, k)
        rows.append({"k": k, "r": r, "blue": 1.0 / k + r})
    outputs = [write_csv(config.output_path + ".csv", ["k", "r", "blue"], rows)]
    mpath = config.output_path + ".measure.json"
    with open(mpath, "w") as fh:
        fh.write(sol.measure.to_json())
    outputs.append(mpath)
    if config.plot:
        from . import plots
        outputs.append(plots.transform_figure(rows, config.output_path + ".png"))
    return outputs


def run_equilibrium(config: ExperimentConfig):
    p = config.params
    potential = _parse_potential(p["potential"])
    sol = solve_equilibrium(potential, tol=float(p.get("tol", 1e-12)))
    m = sol.measure
    xs = np.linspace(m.a, m.b, int(p.get("nodes", 257)))
    rows = [{"x": float(x), "density": float(m.density(float(x)))} for x in xs]
    outputs = [write_csv(config.output_path + ".csv", ["x", "density"], rows)]
    spath = config.output_path + ".solution.json"
    with open(spath, "w") as fh:
        json.dump({"a": m.a, "b": m.b, "ell": sol.ell, "residual": sol.residual,
                   "measure": json.loads(m.to_json())}, fh, indent=1)
    outputs.append(spath)
    print(f"support [{m.a:.12g}, {m.b:.12g}], ell = {sol.ell:.12g}, "
          f"residual = {sol.residual:.3g}")
    if config.plot:
        from . import plots
        outputs.append(plots.density_figure(sol, config.output_path + ".png"))
    return outputs


def run_charfn(config: ExperimentConfig):
    p = config.params
    potential = _parse_potential(p["potential"])
    sol = solve_equilibrium(potential)
    k = float(p["k"])
    ns = [int(v) for v in _parse_grid(p.get("n", "32,64"))]
    samples = int(p.get("samples", 256))
    batches = int(p.get("batches", 50))
    reference = asymptotics.omega_via_r_integral(potential, sol, k)
    rows = []
    for i, n_dim in enumerate(ns):
        est, err = coulomb.mc_char_rank1(
            potential, n_dim, k, samples=samples, batches=batches,
            thin=int(p.get("sweeps", 2)),
            seed=np.random.SeedSequence([config.seed, i]).entropy)
        row = {"N": n_dim, "k": k, "estimate": est, "stderr": err,
               "reference": reference}
        if p.get("fermionic"):
            row["fermionic"] = coulomb.fermionic_char(potential, n_dim, k)
        rows.append(row)
    header = list(rows[0].keys())
    outputs = [write_csv(config.output_path + ".csv", header, rows)]
    if config.plot:
        from . import plots
        outputs.append(plots.charfn_figure(rows, config.output_path + ".png"))
    return outputs


def run_omega(config: ExperimentConfig):
    p = config.params
    potential = _parse_potential(p["potential"])
    sol = solve_equilibrium(potential)
    kmin, kmax, knum = float(p.get("kmin", -3.0)), float(p.get("kmax", 3.0)), int(p.get("knum", 241))
    rows = []
    for k in np.linspace(kmin, kmax, knum):
        ev = asymptotics.omega_eval(sol, potential, float(k))
        rows.append({"k": ev.k, "omega": ev.value, "branch": ev.branch,
                     "saddle_location": ev.saddle_location})
    outputs = [write_csv(config.output_path + ".csv",
                         ["k", "omega", "branch", "saddle_location"], rows)]
    if config.plot:
        from . import plots
        outputs.append(plots.omega_figure(rows, config.output_path + ".png"))
    return outputs


def run_scattering(config: ExperimentConfig):
    p = config.params
    potential = _parse_potential(p["potential"])
    n_dim, n_ch = int(p["N"]), int(p["M"])
    coupling = _parse_grid(p.get("coupling", [1.0] * n_ch))
    z = float(p.get("z", 0.0))
    eps_grid = _parse_grid(p["epsilon_grid"])
    samples = int(p.get("samples", 2000))
    channels = tuple(int(c) for c in _parse_grid(p.get("channels", "0,0,0,0")))
    tag = p.get("tag", "ensemble")
    model = scattering.ScatteringModel.diagonal_coupling(
        n_dim, n_ch, coupling, z, potential)
    ests, diag = scattering.mc_s_correlation(
        model, eps_grid, samples, config.seed, channels=channels,
        n_chains=int(p.get("n_chains", 32)), threads=config.threads)
    rows = [{"epsilon": e.epsilon, "re": e.value.real, "im": e.value.imag,
             "stderr": e.stderr, "ensemble_tag": tag} for e in ests]
    outputs = [write_csv(config.output_path + ".csv",
                         ["epsilon", "re", "im", "stderr", "ensemble_tag"], rows)]
    print(f"unitarity defect {diag['unitarity_defect']:.2e}, "
          f"acceptance {diag['acceptance_rate']:.2f}, samples {diag['samples']}")
    if config.plot:
        from . import plots
        outputs.append(plots.correlation_figure({tag: rows},
                                                config.output_path + ".png"))
    return outputs


def run_compare(config: ExperimentConfig):
    p = config.params
    _, rows_a = read_csv(p["report_a"])
    _, rows_b = read_csv(p["report_b"])
    sigma = float(p.get("sigma", 3.0))
    grid_col = "epsilon" if rows_a and "epsilon" in rows_a[0] else "k"
    ga = [r[grid_col] for r in rows_a]
    gb = [r[grid_col] for r in rows_b]
    if len(ga) != len(gb) or any(abs(x - y) > 1e-12 for x, y in zip(ga, gb)):
        raise ConfigError("reports do not share the same grid")
    points = []
    for ra, rb in zip(rows_a, rows_b):
        dv = math.hypot(ra["re"] - rb["re"], ra.get("im", 0.0) - rb.get("im", 0.0))
        err = math.hypot(ra["stderr"], rb["stderr"])
        points.append({grid_col: ra[grid_col], "z": dv / max(err, 1e-300)})
    max_z = max(pt["z"] for pt in points)
    verdict = "PASS" if max_z < sigma else "FAIL"
    report = {"sigma": sigma, "max_abs_z": max_z, "verdict": verdict,
              "points": points}
    path = config.output_path + ".json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1)
    print(f"{verdict}: max |z| = {max_z:.3f} against threshold {sigma}")
    return [path]


RUNNERS = {
    "nc": run_nc,
    "transform": run_transform,
    "equilibrium": run_equilibrium,
    "charfn": run_charfn,
    "omega": run_omega,
    "scattering": run_scattering,
    "compare": run_compare,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--out", default=None, help="output path prefix")
    sp.add_argument("--config", default=None, help="JSON file merged under the flags")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--dry-run", action="store_true")
    sp.add_argument("--plot", dest="plot", action="store_true", default=True)
    sp.add_argument("--no-plot", dest="plot", action="store_false")


def build_parser():
    ap = argparse.ArgumentParser(prog="freeprobe")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    nc = sub.add_parser("nc", help="partition counts and enumerations")
    nc.add_argument("--count", type=int, default=None)
    nc.add_argument("--enumerate", type=int, default=None)
    _add_common(nc)

    tr = sub.add_parser("transform", help="R-transform and Blue's function grid")
    tr.add_argument("--potential", default=None)
    tr.add_argument("--kmin", type=float, default=None)
    tr.add_argument("--kmax", type=float, default=None)
    tr.add_argument("--knum", type=int, default=None)
    _add_common(tr)

    eq = sub.add_parser("equilibrium", help="one-cut equilibrium measure")
    eq.add_argument("--potential", default=None)
    eq.add_argument("--nodes", type=int, default=None)
    eq.add_argument("--tol", type=float, default=None)
    _add_common(eq)

    cf = sub.add_parser("charfn", help="finite-N characteristic function estimates")
    cf.add_argument("--potential", default=None)
    cf.add_argument("--n", default=None, help="comma-separated matrix dimensions")
    cf.add_argument("--k", type=float, default=None)
    cf.add_argument("--samples", type=int, default=None)
    cf.add_argument("--sweeps", type=int, default=None)
    cf.add_argument("--batches", type=int, default=None)
    cf.add_argument("--fermionic", action="store_true", default=None)
    _add_common(cf)

    om = sub.add_parser("omega", help="large-N log characteristic function")
    om.add_argument("--potential", default=None)
    om.add_argument("--kmin", type=float, default=None)
    om.add_argument("--kmax", type=float, default=None)
    om.add_argument("--knum", type=int, default=None)
    _add_common(om)

    sc = sub.add_parser("scattering", help="S-matrix correlation experiment")
    sc.add_argument("--potential", default=None)
    sc.add_argument("--N", type=int, default=None)
    sc.add_argument("--M", type=int, default=None)
    sc.add_argument("--coupling", default=None)
    sc.add_argument("--z", type=float, default=None)
    sc.add_argument("--epsilon-grid", dest="epsilon_grid", default=None)
    sc.add_argument("--samples", type=int, default=None)
    sc.add_argument("--n-chains", dest="n_chains", type=int, default=None)
    sc.add_argument("--channels", default=None)
    sc.add_argument("--tag", default=None)
    _add_common(sc)

    cp = sub.add_parser("compare", help="pointwise z-score comparison of two reports")
    cp.add_argument("report_a")
    cp.add_argument("report_b")
    cp.add_argument("--sigma", type=float, default=None)
    _add_common(cp)
    return ap


COMMON_KEYS = {"out", "config", "seed", "threads", "dry_run", "plot", "subcommand"}


def resolve_config(args) -> ExperimentConfig:
    params = {}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        params.update(loaded)
    for key, value in vars(args).items():
        if key in COMMON_KEYS or value is None:
            continue
        params[key] = value
    seed = args.seed if args.seed is not None else params.pop("seed", None)
    out = args.out or params.pop("out", None) or f"freeprobe_{args.subcommand}"
    config = ExperimentConfig(
        subcommand=args.subcommand, params=params,
        seed=None if seed is None else int(seed),
        output_path=out, plot=args.plot,
        threads=resolve_threads(args.threads), dry_run=args.dry_run)
    config.validate()
    return config


def run(config: ExperimentConfig) -> int:
    """Execute a resolved config: artifacts plus manifest, or a dry-run plan."""
    config.validate()
    if config.dry_run:
        plan = {"subcommand": config.subcommand, "params": config.params,
                "seed": config.seed, "output_path": config.output_path,
                "threads": config.threads, "plot": config.plot}
        print(json.dumps(plan, indent=1, default=str))
        return 0
    start = time.time()
    outputs = RUNNERS[config.subcommand](config)
    write_manifest(config, outputs, time.time() - start)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        return run(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except FreeprobeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
