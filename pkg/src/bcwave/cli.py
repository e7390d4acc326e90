"""Batch driver: ``bcwave <subcommand> --config run.json --out dir``.

Exit codes: 0 ok, 2 configuration error, 3 numerical precondition
violated, 4 acceptance threshold failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import geomoptics as go
from . import io
from . import lightray as lr
from . import reconstruct as rc
from .config import ConfigError, RunConfig
from .connecting import DtnMatrix, assemble_dtn, blagoveshchenskii
from .control import ControlError, project
from .oracles import interior_kernel, truncation_energy
from .wave1d import CFLError, bump, dtn_trace, energy_trace, solve_forward

log = logging.getLogger("bcwave")

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_ACCEPTANCE = 0, 2, 3, 4


class AcceptanceFailure(RuntimeError):
    pass


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _dtn_for(cfg: RunConfig, args, t_max: float | None = None) -> DtnMatrix:
    """Assemble the DtN matrix; with de-crime the data come from a dx/2, dt/2 solve."""
    sg = cfg.spatial_grid()
    tg = cfg.time_grid(sg, t_max)
    if cfg["de_crime"]:
        sg, tg = cfg.spatial_grid(2), tg.refined(2)
    dtn = assemble_dtn(cfg.potential(sg), cfg.speed(sg), sg, tg, workers=cfg["workers"],
                       label=cfg["potential"]["family"])
    if cfg["noise"] > 0:
        dtn = rc.add_noise(dtn, cfg["noise"], args.seed)
    return dtn


# ---------------------------------------------------------------------------
# subcommands


def cmd_forward(cfg: RunConfig, out: Path, args) -> dict:
    sg = cfg.spatial_grid()
    tg = cfg.time_grid(sg)
    q, c = cfg.potential(sg), cfg.speed(sg)
    f = cfg.source()
    field = solve_forward(q, c, f, sg, tg)
    io.write_grid(out / "field.bcw", field.u)
    e = energy_trace(field, q, c).values
    io.write_series(out / "energy.csv", tg.t, e)
    io.write_series(out / "dtn.csv", tg.t, dtn_trace(field).samples)
    return {"max_abs_u": float(np.abs(field.u).max()), "n_t": tg.n_t, "dt": tg.dt, "n_x": sg.n_x}


def cmd_dtn(cfg: RunConfig, out: Path, args) -> dict:
    dtn = _dtn_for(cfg, args)
    dtn.save(out / "dtn.bcw")
    return {"n_t": dtn.tgrid.n_t, "dt": dtn.tgrid.dt, "causality_defect": dtn.causality_defect()}


def cmd_connect(cfg: RunConfig, out: Path, args) -> dict:
    sg = cfg.spatial_grid()
    tg = cfg.time_grid(sg)
    q, c = cfg.potential(sg), cfg.speed(sg)
    f, h = cfg.source("source"), cfg.source("source2")
    dtn = assemble_dtn(q, c, sg, tg, workers=cfg["workers"])
    kern = blagoveshchenskii(f, h, dtn)
    ref = interior_kernel(q, c, f, h, sg, kern.tgrid)
    io.write_grid(out / "kernel.bcw", kern.W)
    io.write_grid(out / "kernel_interior.bcw", ref)
    t = kern.tgrid.t
    io.write_csv(out / "diagonal.csv", ("t", "w_dtn", "w_interior"), zip(t, np.diagonal(kern.W), np.diagonal(ref)))
    scale = np.abs(ref).max()
    return {"rel_sup_error": float(np.abs(kern.W - ref).max() / scale) if scale > 0 else 0.0,
            "region_t_max": float(kern.tgrid.t_max)}


def cmd_control(cfg: RunConfig, out: Path, args) -> dict:
    sg = cfg.spatial_grid()
    ctl = cfg["control"]
    T = ctl["T"]
    tg = cfg.time_grid(sg, max(cfg["grid"]["t_max"], 2 * T))
    q, c = cfg.potential(sg), cfg.speed(sg)
    f = cfg.source()
    dtn = assemble_dtn(q, c, sg, tg, workers=cfg["workers"])
    rows = []
    for s in ctl["s_list"]:
        # null M means "size by knot spacing" for reconstruction; projections use 64
        sol = project(f, s, T, dtn, alpha=ctl["alpha"], M=ctl["M"] or 64)
        ref = truncation_energy(q, c, f, s, T, sg, tg)
        rows.append((s, sol.residual, ref, (sol.residual - ref) / ref if ref else np.nan, sol.alpha, sol.flagged))
    io.write_csv(out / "control.csv", ("s", "residual", "interior", "rel_err", "alpha", "flagged"), rows)
    return {"max_rel_err": float(max(abs(r[3]) for r in rows)), "T": T}


def cmd_reconstruct(cfg: RunConfig, out: Path, args) -> dict:
    ctl = cfg["control"]
    sg = cfg.spatial_grid()
    t_max = max(cfg["grid"]["t_max"], 2 * max(ctl["T_grid"]))
    dtn = _dtn_for(cfg, args, t_max)
    q_true = cfg.profile_fn("potential")
    sources = rc.default_sources(J=ctl["n_sources"], width=ctl["source_width"])
    res, pt, rf = rc.reconstruct(
        dtn,
        sources=sources,
        T_grid=ctl["T_grid"],
        s_grid=rc.default_s_grid(cfg["grid"]["ds"]),
        M=ctl["M"],
        knot_spacing=ctl["knot_spacing"],
        alpha=ctl["alpha"],
        workers=cfg["workers"],
        q_true=q_true,
    )
    res.export(out / "reconstruction.csv", out / "metrics.json")
    io.write_csv(out / "products.csv", ("x", "T", "j", "k", "B"),
                 ((pt.x[i], pt.T[n], j, k, pt.B[j, k, i, n])
                  for n in range(len(pt.T)) for i in range(len(pt.x))
                  for j in range(pt.B.shape[0]) for k in range(j, pt.B.shape[1])))
    m = res.metrics()
    m.update(n_flagged=int(np.sum(pt.flagged)), data_n_x=int(dtn.basis.get("n_x", sg.n_x)))
    return m


def cmd_go_residual(cfg: RunConfig, out: Path, args) -> dict:
    g = cfg["geomoptics"]
    qf = cfg.profile_fn("potential")
    if qf is None:
        raise ConfigError("go-residual needs an analytic potential family")
    q = lambda x: np.where((x >= 0) & (x <= 1), qf(np.clip(x, 0, 1)), 0.0)
    lo, hi = g["chi"]
    chi = lambda tau: bump(tau, lo, hi)
    grid = go.SpaceTimeBox(g["h"], g["T"], -0.1, 1.3)
    rows, slopes = [], {}
    for N in g["N"]:
        rep = go.residual_scaling(chi, q, N, g["sigma_list"], grid)
        rows += [(N, s, v) for s, v in zip(rep.sigma, rep.norms)]
        slopes[f"N{N}"] = rep.slope
    io.write_csv(out / "go_residual.csv", ("N", "sigma", "norm"), rows)
    cert = go.certify_nonvanishing(g["x0"], g["T"], qf)
    io.write_csv(out / "certificate_trace.csv", ("t", "re", "im"), zip(cert.trace_t, cert.trace.real, cert.trace.imag))
    return {"slopes": slopes, "certified": cert.certified, "sigma": cert.sigma,
            "abs_u": abs(cert.value), "abs_a0": abs(cert.amplitude), "history": cert.history}


def cmd_lrt(cfg: RunConfig, out: Path, args) -> dict:
    p = cfg["lightray"]
    center = (p["T"] / 2, 0.0, 0.0)
    fn = lr.bump_phantom(center, p["radius"]) if p["phantom"] == "bump" else lr.static_phantom(t_lo=0.1 * p["T"], t_hi=0.9 * p["T"])
    q = lr.SpacetimePotential.sample(fn, p["T"], p["X"], p["n_t"], p["n_x"])
    v = np.array([1.0, 0.0])
    y, data = lr.ray_data(q, v)
    io.write_grid(out / "ray_data_v10.bcw", data)
    rec = lr.invert_on_cone(q, band=p["band"], workers=cfg["workers"])
    io.write_grid(out / "q_cone.bcw", rec.q_cone)
    io.write_grid(out / "q_cone_ref.bcw", rec.q_cone_ref)
    rows = rec.residual_rows(q)
    io.write_csv(out / "spectral_residuals.csv", ("tau", "eta1", "eta2", "abs_err", "rel_err"), rows)
    admissible = all(abs(s.tau) <= np.hypot(*s.eta) + 1e-12 for s in rec.samples)
    energy = float(np.sum(rec.q_cone**2) / np.sum(q.q**2))
    return {"cone_rel_error": rec.rel_error, "max_slice_rel_err": max(r[4] for r in rows),
            "n_samples": len(rec.samples), "admissible": admissible, "energy_fraction": energy}


def cmd_check(cfg: RunConfig, out: Path, args) -> dict:
    from .checks import report, run_suite

    def show(r):
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.4g} (threshold {r.threshold:g})", flush=True)

    rep = report(run_suite(cfg, show))
    _dump(out / "check.json", rep)
    if not rep["passed"]:
        raise AcceptanceFailure("invariant suite failed: " +
                                ", ".join(c["name"] for c in rep["checks"] if not c["passed"]))
    return {"passed": True, "n_checks": len(rep["checks"])}


COMMANDS = {
    "forward": cmd_forward,
    "dtn": cmd_dtn,
    "connect": cmd_connect,
    "control": cmd_control,
    "reconstruct": cmd_reconstruct,
    "go-residual": cmd_go_residual,
    "lrt": cmd_lrt,
    "check": cmd_check,
}


def _versions() -> dict:
    try:
        own = metadata.version("bcwave")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"bcwave": own, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bcwave", description="Boundary control pipeline for the 1D wave equation.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="JSON run configuration (or a manifest.json)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, help="worker pool size")
    p.add_argument("--seed", type=int, default=0, help="noise seed (u64)")
    p.add_argument("--de-crime", action="store_true", help="generate DtN data at dx/2")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.de_crime:
        overrides["de_crime"] = True
    if args.out is not None:
        overrides["out"] = str(args.out)
    try:
        cfg = RunConfig.load(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, summary, message = EXIT_OK, {}, ""
    try:
        summary = COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        status, message = EXIT_CONFIG, f"config error: {exc}"
    except (CFLError, ControlError, lr.CoverageError, go.ResolutionError, io.GridFormatError,
            np.linalg.LinAlgError, ValueError) as exc:
        status, message = EXIT_PRECONDITION, f"precondition violated: {exc}"
    except AcceptanceFailure as exc:
        status, message = EXIT_ACCEPTANCE, str(exc)
    if message:
        print(message, file=sys.stderr)
    _dump(out / "manifest.json", {
        "manifest_version": 1,
        "command": args.command,
        "argv": list(sys.argv[1:] if argv is None else argv),
        "config": cfg.data,
        "config_sha256": cfg.digest(),
        "seed": args.seed,
        "versions": _versions(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "exit_status": status,
        "summary": summary,
    })
    if status == EXIT_OK:
        print(json.dumps(summary, sort_keys=True, default=_json_default))
    return status


if __name__ == "__main__":
    sys.exit(main())
