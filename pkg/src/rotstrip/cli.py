"""Batch command-line front end.

Subcommands: modes (eigen/damping tables), bl (build and evaluate the layer
operator), envelope (filtered amplitude evolution), direct (reference solve),
compare (direct vs assembled approximation), sweep (experiment specs).  All
input comes from --config (JSON, or simple key=value lines); outputs are flat
CSVs plus a JSON summary.  Exit code 0 iff every declared check passed.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

import numpy as np

from .params import Params
from .spectral import SpectralField
from .layers import BoundaryTrace, build_B, trace_residuals
from .harness import (
    ExperimentSpec,
    compare,
    envelope_csv,
    run,
    write_damping_csv,
    _EnvelopeOnly,
    _write_csv,
)
from .correctors import assemble_dirichlet_approx, assemble_wind_approx
from .direct import diagnostics_csv, snapshot_csv, solve_direct


def load_config(path) -> dict:
    """JSON if the file starts with '{', else simple key=value lines (values
    parsed as JSON where possible, kept as strings otherwise)."""
    with open(path) as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        return json.loads(text)
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        value = value.strip()
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            out[key.strip()] = value
    return out


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def parse_gamma(table: dict) -> SpectralField:
    """{"k1,k2,k3": amplitude} with amplitude a number or [re, im]."""
    coeffs = {}
    for key, v in table.items():
        k = tuple(int(c) for c in str(key).split(","))
        coeffs[k] = _as_complex(v)
    return SpectralField(coeffs)


def parse_trace(table: dict, side: int) -> BoundaryTrace:
    """{"mu,k1,k2": [v1, v2]} with entries numbers or [re, im] pairs."""
    out = {}
    for key, v in table.items():
        mu_s, k1, k2 = str(key).split(",")
        out[(float(mu_s), (int(k1), int(k2)))] = np.array(
            [_as_complex(v[0]), _as_complex(v[1])])
    return BoundaryTrace(side, out)


def params_from(cfg: dict) -> Params:
    return Params(
        epsilon=float(cfg.get("epsilon", 1e-3)),
        nu=float(cfg.get("nu", 1e-3)),
        beta=float(cfg.get("beta", 0.0)),
        N=int(cfg.get("N", 4)),
        M0=tuple(cfg.get("M0", ())),
    )


@contextlib.contextmanager
def seedless_guard(enabled: bool):
    """Assert no randomness is consumed: poison the usual numpy entry points
    for the duration of the command."""
    if not enabled:
        yield
        return
    names = ["random", "standard_normal", "normal", "uniform", "rand", "randn",
             "randint", "default_rng", "seed"]
    saved = {n: getattr(np.random, n) for n in names}

    def poison(name):
        def _fail(*a, **k):
            raise RuntimeError(f"--seedless violated: np.random.{name} was called")
        return _fail

    try:
        for n in names:
            setattr(np.random, n, poison(n))
        yield
    finally:
        for n, fn in saved.items():
            setattr(np.random, n, fn)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_modes(cfg, outdir):
    p = params_from(cfg)
    kmax = int(cfg.get("kmax", 3))
    modes = cfg.get("modes")
    if modes:
        modes = [tuple(int(c) for c in str(m).split(",")) for m in modes]
    else:
        modes = [(k1, k2, k3)
                 for k1 in range(-kmax, kmax + 1)
                 for k2 in range(-kmax, kmax + 1)
                 for k3 in range(-kmax, kmax + 1)
                 if (k1, k2, k3) != (0, 0, 0)]
    write_damping_csv(modes, p, os.path.join(outdir, "modes.csv"))
    return []


def cmd_bl(cfg, outdir):
    p = params_from(cfg)
    delta0 = parse_trace(cfg.get("delta0", {}), 0)
    delta1 = parse_trace(cfg.get("delta1", {}), 1)
    sol = build_B(delta0, delta1, p)
    rows = []
    for kind, groups in (("classical", sol.classical), ("quasi_resonant", sol.quasi_resonant)):
        for g in groups:
            for c in g.components:
                rows.append((kind, g.side, g.mu, g.k_h[0], g.k_h[1], c.sigma,
                             c.lam.real, c.lam.imag, c.alpha.real, c.alpha.imag))
    for layer in sol.resonant:
        for e in layer.entries:
            rows.append(("resonant", layer.side, e.mu, 0, 0, 0,
                         0.0, 0.0, e.amplitude.real, e.amplitude.imag))
    _write_csv(os.path.join(outdir, "bl_modes.csv"),
               ["kind", "side", "mu", "k1", "k2", "sigma",
                "re_lambda", "im_lambda", "re_alpha", "im_alpha"], rows)
    res = trace_residuals(sol, p, t=float(cfg.get("t", 0.1)))
    rrows = []
    for name in ("classical_bottom_at_top", "classical_top_at_bottom",
                 "quasi_bottom_at_top", "quasi_top_at_bottom"):
        for r in getattr(res, name):
            rrows.append((name, r["mu"], r["k_h"][0], r["k_h"][1], r["magnitude"]))
    for r in res.resonant_traces:
        rrows.append(("resonant", 0.0, 0, 0, r["magnitude"]))
    _write_csv(os.path.join(outdir, "bl_traces.csv"),
               ["part", "mu", "k1", "k2", "magnitude"], rrows)
    norms = {part: sol.part_norm_h(part, float(cfg.get("t", 0.1)))
             for part in ("classical", "quasi_resonant", "resonant")}
    with open(os.path.join(outdir, "bl_summary.json"), "w") as f:
        json.dump({"norms_h": norms}, f, indent=2)
    return []


def cmd_envelope(cfg, outdir):
    p = params_from(cfg)
    gamma = parse_gamma(cfg.get("gamma", {"1,0,1": 1.0}))
    t_end = float(cfg.get("t_end", 1.0))
    nt = int(cfg.get("nt", 21))
    envelope_csv(gamma, p, np.linspace(0.0, t_end, nt), os.path.join(outdir, "envelope.csv"))
    write_damping_csv(gamma.modes(), p, os.path.join(outdir, "modes.csv"))
    return []


def cmd_direct(cfg, outdir):
    p = params_from(cfg)
    gamma = parse_gamma(cfg.get("gamma", {}))
    sigma = parse_trace(cfg.get("sigma", {}), 1) if cfg.get("sigma") else None
    out = solve_direct(
        gamma, sigma, p,
        t_end=float(cfg.get("t_end", 0.1)),
        dt=p.epsilon / float(cfg.get("dt_factor", 10.0)),
        Nz=int(cfg.get("Nz", 256)),
        save_every=int(cfg.get("save_every", 10)),
    )
    for k_h, traj in sorted(out.items()):
        stem = f"mode_{k_h[0]}_{k_h[1]}"
        snapshot_csv(traj, os.path.join(outdir, f"{stem}_snapshots.csv"))
        diagnostics_csv(traj, os.path.join(outdir, f"{stem}_diagnostics.csv"))
    return []


def cmd_compare(cfg, outdir):
    p = params_from(cfg)
    case = cfg.get("case", "dirichlet")
    t_end = float(cfg.get("t_end", 0.2))
    Nz = int(cfg.get("Nz", 256))
    nt = int(cfg.get("nt", 9))
    if case == "dirichlet":
        gamma = parse_gamma(cfg.get("gamma", {"1,0,1": 1.0}))
        direct = solve_direct(gamma, None, p, t_end=t_end,
                              dt=p.epsilon / float(cfg.get("dt_factor", 10.0)),
                              Nz=Nz, save_every=int(cfg.get("save_every", 10)))
        approx = assemble_dirichlet_approx(gamma, p)
        target = approx if cfg.get("full_sum") else _EnvelopeOnly(approx)
    elif case == "wind":
        sigma = parse_trace(cfg.get("sigma", {"0.0,1,0": [1.0, 0.0]}), 1)
        direct = solve_direct(SpectralField({}), sigma, p, t_end=t_end,
                              dt=p.epsilon / float(cfg.get("dt_factor", 10.0)),
                              Nz=Nz, save_every=int(cfg.get("save_every", 10)))
        target = assemble_wind_approx(sigma, p)
    else:
        raise ValueError(f"unknown compare case {case!r}")
    res = compare(direct, target, np.linspace(0.0, t_end, nt))
    _write_csv(os.path.join(outdir, "error_curve.csv"), ["t", "error"],
               list(zip(res["times"], res["errors"])))
    with open(os.path.join(outdir, "compare_summary.json"), "w") as f:
        json.dump({"sup_error": res["sup_error"],
                   "part_norms": res["part_norms"],
                   "attribution_flags": res["attribution_flags"]}, f, indent=2, default=str)
    return [{"name": "attribution_complete", "value": len(res["attribution_flags"]),
             "tolerance": "no triangle-inequality violations",
             "passed": not res["attribution_flags"]}]


def cmd_sweep(cfg, outdir, parallel=1):
    cfg = dict(cfg)
    cfg.setdefault("out", outdir)
    spec = ExperimentSpec(**cfg)
    summary = run(spec, parallel=parallel)
    return summary["checks"] + [
        {"name": f"error:{e}", "value": e, "tolerance": "none", "passed": False}
        for e in summary["errors"]]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rotstrip",
        description="Batch experiments for the rotating-strip laboratory.")
    parser.add_argument("command", choices=["modes", "bl", "envelope", "direct",
                                            "compare", "sweep"])
    parser.add_argument("--config", help="JSON or key=value parameter file")
    parser.add_argument("--out", default="rotstrip_out", help="output directory")
    parser.add_argument("--parallel", type=int, default=1,
                        help="grid points to run concurrently (sweep only)")
    parser.add_argument("--seedless", action="store_true",
                        help="assert that no randomness is consumed")
    args = parser.parse_args(argv)

    cfg = load_config(args.config) if args.config else {}
    os.makedirs(args.out, exist_ok=True)

    with seedless_guard(args.seedless):
        if args.command == "sweep":
            checks = cmd_sweep(cfg, args.out, parallel=args.parallel)
        else:
            checks = {
                "modes": cmd_modes,
                "bl": cmd_bl,
                "envelope": cmd_envelope,
                "direct": cmd_direct,
                "compare": cmd_compare,
            }[args.command](cfg, args.out)

    summary = {"command": args.command, "out": args.out,
               "seedless": bool(args.seedless), "checks": checks,
               "all_passed": all(c["passed"] for c in checks)}
    with open(os.path.join(args.out, "run_summary.json"), "w") as f:
        json.dump(summary, f, indent=2, default=str)
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {c['name']}: {c['value']} (tolerance {c['tolerance']})")
    return 0 if summary["all_passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
