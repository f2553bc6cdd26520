"""Command line entry point: ``thintube <subcommand> --config cfg.json``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, GaugeInconsistency, GuardFailure, SolverFailure, ThinTubeError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_GUARD = 0, 2, 3, 4


def _bands(cfg, out, threads):
    from .effective import effective_potentials
    from .experiments import default_e_max
    from .fiber import admissibility_check, build_band_data
    band = build_band_data(cfg.family, cfg.geometry, cfg.band, cfg.resolution.I_max, cfg.resolution.N, cfg.gap_tol)
    pots = effective_potentials(cfg.geometry, band)
    adm = admissibility_check(cfg.family, cfg.geometry, cfg.band, cfg.band + 2, n=cfg.resolution.N)
    k = band.k
    header = ["q", "E"] + [f"M1_{a}" for a in range(k)] + [f"M2_{a}{b}" for a in range(k) for b in range(k)] + \
        ["A", "B", "V_BH", "V_geom", "T11", "T12", "T22", "tail11", "tail22"]
    rows = []
    for j in range(band.n):
        rows.append([band.q[j], band.E[j], *band.M1[j], *band.M2[j].ravel(), band.A[j], band.B[j], band.V_BH[j],
                     pots.V_geom[j], band.T[j, 0, 0], band.T[j, 0, 1], band.T[j, 1, 1],
                     band.tail[j, 0, 0], band.tail[j, 1, 1]])
    _write(out, "bands.csv", header, rows)
    return {"gap": band.gap, "i_max": band.i_max, "truncation_error": band.truncation_error,
            "loop_sign": band.loop_sign, "E_max_default": default_e_max(band),
            "admissibility": {"gap": adm.gap, "q_at_min": adm.q_at_min, "crossings": adm.crossings}}


def _spectrum(cfg, out, threads, which):
    from .experiments import _map, effective_levels, tube_levels
    from .extrapolate import richardson

    def one(eps):
        if which == "tube":
            seq, _ = tube_levels(cfg, eps, cfg.count)
        else:
            seq, _ = effective_levels(cfg, eps, cfg.count, cfg.order)
        best, err = richardson(seq)
        return eps, seq[-1], best, err

    results = _map(one, cfg.eps, threads)
    rows = [[eps, i, best[i], raw[i], err[i]] for eps, raw, best, err in results for i in range(best.size)]
    _write(out, "eigenvalues.csv", ["eps", "index", "eigenvalue", "finest_grid", "extrapolation_error"], rows)
    return {"operator": which, "eps": list(cfg.eps), "levels": cfg.resolution.levels,
            "eigenvalues": {str(eps): best for eps, _, best, _ in results}}


def _compare(cfg, out, threads):
    from .experiments import run_spectrum_compare
    rep = run_spectrum_compare(cfg, threads)
    cols = ["eps", "order", "index", "full", "effective", "diff", "disc_err", "mesh_change", "status"]
    _write(out, "eigenvalues.csv", cols, [[r[c] for c in cols] for r in rep.rows])
    return rep.to_dict()


def _dynamics(cfg, out, threads):
    from .experiments import run_dynamics_compare
    rep = run_dynamics_compare(cfg, threads)
    rows = [[r["eps"], t, e, p] for r in rep["per_eps"] for t, e, p in zip(r["times"], r["err"], r["projected_err"])]
    _write(out, "dynamics.csv", ["eps", "t", "err", "projected_err"], rows)
    return rep


def _spacing(cfg, out, threads):
    from .experiments import run_level_spacing
    rep = run_level_spacing(cfg, threads)
    rows = []
    for r in rep["per_eps"]:
        vals = np.asarray(r["eigenvalues"])
        gaps = np.diff(vals, append=np.nan)
        rows += [[r["eps"], i, v, g] for i, (v, g) in enumerate(zip(vals, gaps))]
    _write(out, "spacings.csv", ["eps", "index", "eigenvalue", "spacing"], rows)
    return rep


def _write(out, name, header, rows):
    from .reports import write_csv
    write_csv(Path(out) / name, header, rows)


COMMANDS = {
    "bands": _bands,
    "effective-spectrum": lambda c, o, t: _spectrum(c, o, t, "effective"),
    "tube-spectrum": lambda c, o, t: _spectrum(c, o, t, "tube"),
    "compare": _compare,
    "dynamics": _dynamics,
    "spacing": _spacing,
}


def build_parser():
    p = argparse.ArgumentParser(prog="thintube", description="Thin-tube spectra versus effective 1D operators.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["validate-config"]:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment file")
        s.add_argument("--out", help="output directory (default: output.dir of the config)")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a dotted config key, value parsed as JSON")
        s.add_argument("--threads", type=int, default=1, help="parallel eps values")
        s.add_argument("--force-large", action="store_true", help="lift the tube problem-size cap")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = list(args.override)
    if args.force_large:
        overrides.append("force_large=true")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "validate-config":
            print(f"ok {cfg.config_hash}")
            return EXIT_OK
        from .reports import provenance, write_json
        out = Path(args.out) if args.out else cfg.output_dir
        result = COMMANDS[args.command](cfg, out, max(1, args.threads))
        write_json(out / "report.json", {"provenance": provenance(cfg, args.command), "result": result})
        print(f"wrote {out / 'report.json'}")
        return EXIT_OK
    except (ConfigError, GaugeInconsistency) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardFailure as exc:
        print(f"guard failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_GUARD
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ThinTubeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
