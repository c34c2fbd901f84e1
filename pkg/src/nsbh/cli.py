"""
Command line entry point.

Subcommands::

    nsbh solve CONFIG            run the solver and write the energy ledger
    nsbh verify --inequality ID  evaluate one inequality over a random ensemble
    nsbh uniqueness CONFIG       paired run plus Gronwall or Osgood audit
    nsbh norms SNAPSHOT --norm SPEC [--norm SPEC ...]

Exit status is 0 on success, 2 when a certification fails and 1 on usage or
configuration errors.  Outputs go to ``<base>/<timestamp>-seed<seed>/`` where
``<base>`` is ``--run-dir``, else ``$NSBH_RUN_DIR``, else ``./runs``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .axisym import AxisymmetricData, make_axisymmetric
from .ensembles import EnsembleSpec
from .filterbank import bank_for
from .grid import AnisoGrid, SpectralField, VectorField, set_workers
from .inequalities import (
    bernstein_slope,
    check_bernstein,
    check_commutator,
    check_embedding_l4h_linfv,
    check_lemma5_ensemble,
    check_product_rule,
    check_prop1_ensemble,
)
from .io import ConfigError, dumps, load_config, read_snapshot, write_snapshot
from .norms import norm, parse_norm_spec
from .solver import AdmissionError, SolverConfig, State, perturb, random_state, run
from .uniqueness import PairRun, gronwall_audit, osgood_audit, run_pair

EXIT_OK, EXIT_USAGE, EXIT_UNCERTIFIED = 0, 1, 2

PRODUCT_SETS = ((0.5, 0.5, 0.5, 1.0), (0.0, 0.5, -1.0, 1.0), (0.5, 0.5, 0.75, 0.75))

CONFIG_KEYS = {
    "grid": {"nh", "nv", "lh", "lv"},
    "solver": {"n_cutoff", "dt", "t_end", "s", "delta", "record_every", "certified", "c0",
               "dealias", "nonlinear", "buoyancy", "snapshots"},
    "init": {"generator", "seed", "u_norm", "rho_norm", "profile", "amplitude", "radial", "vertical",
             "rho_amplitude", "rho_radial", "rho_vertical"},
    "pair": {"eps", "kind", "seed", "c_fit", "compute_l"},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ----------------------------------------------------------------- helpers


def _run_dir(base: str | None, seed: int) -> Path:
    root = Path(base or os.environ.get("NSBH_RUN_DIR") or "runs")
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    path = root / f"{stamp}-seed{seed}"
    k = 1
    while path.exists():
        path = root / f"{stamp}-seed{seed}-{k}"
        k += 1
    path.mkdir(parents=True)
    return path


class _Outputs:
    """Writes files into a run directory and the manifest that lists them."""

    def __init__(self, base, seed, subcommand, config_echo, grid=None, threads=1):
        self.dir = _run_dir(base, seed)
        self.files = []
        self.t0 = time.perf_counter()
        self.manifest = {
            "tool": "nsbh",
            "version": __version__,
            "subcommand": subcommand,
            "config": config_echo,
            "seed": seed,
            "threads": threads,
            "grid": grid.to_dict() if grid is not None else None,
            "filter_bank": bank_for(grid).to_dict() if grid is not None else None,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        }

    def text(self, name: str, content: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(content)
        self.files.append(name)
        return p

    def path(self, name: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def close(self, status: str) -> Path:
        self.manifest["status"] = status
        self.manifest["outputs"] = sorted(self.files)
        self.manifest["created"] = _dt.datetime.now().isoformat(timespec="seconds")
        self.manifest["wall_clock_s"] = round(time.perf_counter() - self.t0, 3)
        p = self.dir / "manifest.json"
        p.write_text(dumps(self.manifest))
        return p


def _grid_from_config(cfg) -> AnisoGrid:
    return AnisoGrid(
        cfg.get("grid", "nh", int, 32),
        cfg.get("grid", "nv", int, 32),
        cfg.get("grid", "lh", float, 1.0),
        cfg.get("grid", "lv", float, 1.0),
    )


def _dt_value(x: str):
    return "auto" if x.strip() == "auto" else float(x)


def solver_config_from(cfg, grid: AnisoGrid) -> SolverConfig:
    try:
        return SolverConfig(
            grid=grid,
            n_cutoff=cfg.get("solver", "n_cutoff", float, grid.Nh / 3.0),
            dt=cfg.get("solver", "dt", _dt_value, 0.01),
            t_end=cfg.get("solver", "t_end", float, 1.0),
            s_index=cfg.get("solver", "s", float, 0.75),
            delta_index=cfg.get("solver", "delta", float, 0.5),
            record_every=cfg.get("solver", "record_every", int, 1),
            certified=cfg.getbool("solver", "certified", False),
            C0=cfg.get("solver", "c0", float, 0.1),
            dealias=cfg.getbool("solver", "dealias", True),
            nonlinear=cfg.getbool("solver", "nonlinear", True),
            buoyancy=cfg.getbool("solver", "buoyancy", True),
            axisymmetric=cfg.get("init", "generator", str, "random") == "axisymmetric",
            keep_snapshots=cfg.getbool("solver", "snapshots", False),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{cfg.where('solver')}: {exc}") from None


def initial_state_from(cfg, grid: AnisoGrid, n_cutoff: float) -> State:
    gen = cfg.get("init", "generator", str, "random")
    seed = cfg.get("init", "seed", int, 0)
    try:
        if gen == "random":
            return random_state(grid, seed, cfg.get("init", "u_norm", float, 0.05),
                                cfg.get("init", "rho_norm", float, 0.02), n_cutoff,
                                cfg.get("init", "profile", str, "power:2"))
        if gen == "zero":
            return State(0.0, VectorField.zeros(grid), SpectralField.zeros(grid))
        if gen == "axisymmetric":
            d = AxisymmetricData(
                **{k: cfg.get("init", k, float, getattr(AxisymmetricData, k))
                   for k in ("amplitude", "radial", "vertical", "rho_amplitude", "rho_radial", "rho_vertical")}
            )
            return make_axisymmetric(d, grid)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{cfg.where('init')}: {exc}") from None
    raise ConfigError(f"{cfg.where('init', 'generator')}: unknown generator {gen!r} "
                      "(expected random, zero or axisymmetric)")


def _load(path):
    cfg = load_config(path)
    cfg.check_keys(CONFIG_KEYS)
    return cfg


# ------------------------------------------------------------- subcommands


def cmd_solve(args) -> int:
    cfg = _load(args.config)
    grid = _grid_from_config(cfg)
    scfg = solver_config_from(cfg, grid)
    init = initial_state_from(cfg, grid, scfg.n_cutoff)
    seed = cfg.get("init", "seed", int, 0)
    out = _Outputs(args.run_dir, seed, "solve", cfg.echo(), grid, args.threads)
    try:
        res = run(scfg, init)
    except AdmissionError as exc:
        print(str(exc), file=sys.stderr)
        out.text("admission.json", dumps({"admitted": False, "message": str(exc)}))
        out.close("admission_failed")
        return EXIT_UNCERTIFIED
    out.text("ledger.csv", res.ledger.to_csv())
    out.text("admission.json", dumps(res.admission))
    for k, (t, X) in enumerate(res.snapshots):
        write_snapshot(out.path(f"snapshots/snap_{k:05d}.bin"), grid, t, X)
    write_snapshot(out.path("final.bin"), grid, res.final.t, res.final.stacked())
    last = res.ledger.rows[-1]
    summary = {"flagged": res.flagged, "t_final": res.final.t, "rows": len(res.ledger.rows),
               "final_row": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in last.items()},
               "tolerance": res.ledger.tolerance_formula}
    out.text("summary.json", dumps(summary))
    out.close("flagged" if res.flagged else "ok")
    print(out.dir)
    return EXIT_UNCERTIFIED if res.flagged else EXIT_OK


def _parse_grid(text: str) -> AnisoGrid:
    try:
        parts = [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--grid expects Nh,Nv (got {text!r})") from None
    if len(parts) != 2:
        raise UsageError(f"--grid expects Nh,Nv (got {text!r})")
    return AnisoGrid(parts[0], parts[1])


def _finite(r) -> bool:
    return r.n_samples > 0 and bool(np.isfinite(r.ratio))


VERIFY_PARAMS = {
    "bernstein": set(),
    "commutator": set(),
    "product": {"sigma", "sigma_p", "s", "s0"},
    "lemma5": {"s", "delta"},
    "prop1": {"s"},
    "embedding": {"s"},
}
VERIFY_DEFAULTS = {"s": 0.75, "delta": 0.5}


def _parse_params(items, kind: str) -> dict:
    allowed = VERIFY_PARAMS[kind]
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep:
            raise UsageError(f"--params expects key=value, got {item!r}")
        if key not in allowed:
            names = ", ".join(sorted(allowed)) or "none"
            raise UsageError(f"--params: unknown key {key!r} for {kind} (accepted: {names})")
        try:
            out[key] = float(val)
        except ValueError:
            raise UsageError(f"--params: bad value for {key!r}: {val!r}") from None
    if kind == "product" and out and set(out) != allowed:
        raise UsageError("--params for product needs all of sigma, sigma_p, s, s0")
    return out


def _summary_csv(reports) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(("inequality_id", "max_ratio", "lhs", "rhs_without_constant", "n_samples", "n_excluded"))
    for r in reports:
        wr.writerow((r.inequality_id, repr(r.ratio), repr(r.lhs), repr(r.rhs_without_constant),
                     r.n_samples, r.n_excluded))
    return buf.getvalue()


def cmd_verify(args) -> int:
    grid = _parse_grid(args.grid)
    kind = args.inequality
    params = _parse_params(args.params, kind)
    ens = EnsembleSpec(args.ensemble, args.profile, args.seed, grid,
                       vband=args.vband, hband=args.hband)
    s = params.get("s", VERIFY_DEFAULTS["s"])
    th = args.threads
    if kind == "bernstein":
        rep = check_bernstein(ens, threads=th)
        reps = [rep]
        body = {"report": rep.to_dict(), "slope": bernstein_slope(ens, threads=th)}
        ok = _finite(rep) and rep.extras["stable"]
    elif kind == "product":
        sets = [tuple(params[k] for k in ("sigma", "sigma_p", "s", "s0"))] if params else PRODUCT_SETS
        reps = [check_product_rule(ens, *p, shift=args.shift, threads=th) for p in sets]
        body = {"reports": [r.to_dict() for r in reps]}
        ok = all(_finite(r) for r in reps)
    elif kind == "commutator":
        rep = check_commutator(ens, threads=th)
        reps = [rep]
        body = {"report": rep.to_dict()}
        ok = _finite(rep)
    elif kind == "lemma5":
        res = check_lemma5_ensemble(ens, s, params.get("delta", VERIFY_DEFAULTS["delta"]), threads=th)
        reps = list(res.values())
        body = {k: v.to_dict() for k, v in res.items()}
        ok = _finite(res["transport"]) and res["buoyancy"].extras["holds_all"]
    elif kind == "prop1":
        reps = check_prop1_ensemble(ens, s, threads=th)
        body = {"reports": [r.to_dict() for r in reps]}
        ok = all(_finite(r) for r in reps)
    else:
        rep = check_embedding_l4h_linfv(ens, s, threads=th)
        reps = [rep]
        body = {"report": rep.to_dict()}
        ok = _finite(rep) and rep.extras["minkowski_all"]
    body["certified"] = bool(ok)
    body["inequality"] = kind
    body["params"] = params
    echo = {k: v for k, v in vars(args).items() if k not in ("func", "run_dir", "threads")}
    out = _Outputs(args.run_dir, args.seed, "verify", echo, grid, th)
    text = dumps(body)
    out.text("report.json", text)
    out.text("summary.csv", _summary_csv(reps))
    out.close("ok" if ok else "uncertified")
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_UNCERTIFIED


def cmd_uniqueness(args) -> int:
    cfg = _load(args.config)
    grid = _grid_from_config(cfg)
    scfg = solver_config_from(cfg, grid)
    init = initial_state_from(cfg, grid, scfg.n_cutoff)
    eps = cfg.get("pair", "eps", float, 1e-6)
    kind = cfg.get("pair", "kind", str, "white")
    pseed = cfg.get("pair", "seed", int, cfg.get("init", "seed", int, 0))
    C = cfg.get("pair", "c_fit", float, None)
    s = scfg.s_index
    gron = s > 0.5
    try:
        other = perturb(init, pseed, eps, kind, scfg.n_cutoff)
        pr = PairRun(scfg, init, other, perturbation=f"{kind}:{eps:g}",
                     compute_L=cfg.getbool("pair", "compute_l", gron))
    except ValueError as exc:
        raise ConfigError(f"{cfg.where('pair')}: {exc}") from None
    out = _Outputs(args.run_dir, pseed, "uniqueness", cfg.echo(), grid, args.threads)
    try:
        ds = run_pair(pr)
    except AdmissionError as exc:
        print(str(exc), file=sys.stderr)
        out.close("admission_failed")
        return EXIT_UNCERTIFIED
    out.text("series.csv", ds.to_csv())
    audit = gronwall_audit(ds, s, C=C) if gron else osgood_audit(ds, C=C)
    audit["kind"] = "gronwall" if gron else "osgood"
    audit["perturbation"] = pr.perturbation
    audit["series_flagged"] = ds.flagged
    audit["series_note"] = ds.note
    out.text("audit.json", dumps(audit))
    ok = bool(audit["certified"])
    out.close("ok" if ok else "uncertified")
    print(out.dir)
    return EXIT_OK if ok else EXIT_UNCERTIFIED


_FIELDS = {"u": slice(0, 3), "rho": slice(3, 4), "u1": slice(0, 1), "u2": slice(1, 2), "u3": slice(2, 3)}


def cmd_norms(args) -> int:
    try:
        grid, t, X = read_snapshot(args.snapshot)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    specs = [parse_norm_spec(s) for s in args.norm]
    if args.field not in _FIELDS:
        raise UsageError(f"--field must be one of {sorted(_FIELDS)}")
    sl = _FIELDS[args.field]
    comps = X[sl]
    if X.shape[0] < sl.stop:
        raise ConfigError(f"{args.snapshot}: snapshot has {X.shape[0]} components, field {args.field!r} needs {sl.stop}")
    if comps.shape[0] == 1:
        f = SpectralField(grid, comps[0])
    else:
        f = VectorField.from_arrays(grid, comps, divergence_free=True)
    body = {"snapshot": str(args.snapshot), "t": t, "field": args.field,
            "norms": {s.label(): norm(f, s) for s in specs}}
    out = _Outputs(args.run_dir, 0, "norms", {"snapshot": str(args.snapshot), "norms": args.norm,
                                             "field": args.field}, grid, args.threads)
    text = dumps(body)
    out.text("norms.json", text)
    out.close("ok")
    sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nsbh", description="Horizontal-dissipation Boussinesq toolkit")
    p.add_argument("--version", action="version", version=f"nsbh {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--threads", type=int, default=1, help="FFT and ensemble worker threads")
        sp.add_argument("--run-dir", default=None, help="base output directory (default $NSBH_RUN_DIR or ./runs)")

    sp = sub.add_parser("solve", help="run the solver from a config file")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="evaluate an inequality over a random ensemble")
    sp.add_argument("--inequality", required=True,
                    choices=("bernstein", "product", "commutator", "lemma5", "prop1", "embedding"))
    sp.add_argument("--grid", default="16,16", help="Nh,Nv")
    sp.add_argument("--ensemble", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--profile", default="white")
    sp.add_argument("--vband", type=int, default=None)
    sp.add_argument("--hband", type=int, default=None)
    sp.add_argument("--params", nargs="*", default=[], metavar="K=V",
                    help="inequality parameters, e.g. s=0.75 delta=0.5 or sigma=0.5 sigma_p=0.5 s=0.5 s0=1")
    sp.add_argument("--shift", action="store_true", help="dyadically rescale product-rule inputs")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("uniqueness", help="paired run with a Gronwall (s > 1/2) or Osgood (s = 1/2) audit")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_uniqueness)

    sp = sub.add_parser("norms", help="evaluate norm specs on a snapshot")
    sp.add_argument("snapshot")
    sp.add_argument("--norm", action="append", required=True, help="e.g. H:0:0.5, B:2,2:0:1, L:4h,infv")
    sp.add_argument("--field", default="u", help="u, rho, u1, u2 or u3")
    common(sp)
    sp.set_defaults(func=cmd_norms)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        set_workers(args.threads)
        try:
            return args.func(args)
        finally:
            set_workers(1)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
