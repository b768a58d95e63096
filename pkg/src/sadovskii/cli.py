"""Command line entry point: ``sadovskii solve | study-scaling | diagnose | export``.

Options may also come from a flat ``key=value`` file given with ``--config``;
command-line values win over the file, the file over built-in defaults.
Only the output directory (``SADOVSKII_OUT``) and the thread cap
(``SADOVSKII_THREADS``) may be set from the environment.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .grid import impulse, mass
from .greens import stream_field_fast
from .io import (PatchFormatError, read_patch, write_patch, write_patch_csv, write_rows)
from .solver import (UNBOUNDED, Multipliers, SolverConfig, SolverError, config_dict,
                     find_multipliers, solve)
from .symmetry import is_steiner_symmetric

log = logging.getLogger("sadovskii")

EXIT_OK, EXIT_SOLVER, EXIT_ASSERT = 0, 1, 2

DEFAULTS = {
    "mu": None, "nu": 1.0, "n1": 128, "n2": 64, "window": None, "tol_e": 1e-9,
    "tol_a": 1e-6, "max_iter": 500, "init": "half-disc", "seed": 0, "out": "out",
    "checkpoint_every": 0, "resume": False, "fresh": False, "mu_list": None,
    "patch": None, "format": "csv", "threads": None, "verbose": 0,
}

_CASTS = {
    "mu": float, "nu": lambda s: UNBOUNDED if str(s).lower() in ("inf", "infinity", "none") else float(s),
    "n1": int, "n2": int, "window": float, "tol_e": float, "tol_a": float, "max_iter": int,
    "init": str, "seed": int, "out": str, "checkpoint_every": int,
    "resume": lambda s: str(s).lower() in ("1", "true", "yes", "on"),
    "fresh": lambda s: str(s).lower() in ("1", "true", "yes", "on"),
    "mu_list": lambda s: [float(x) for x in str(s).replace(",", " ").split()],
    "patch": str, "format": str, "threads": int, "verbose": int,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None

    def solver_config(self, mu: float | None = None) -> SolverConfig:
        o = self.options
        out = Path(o["out"])
        return SolverConfig(
            mu=o["mu"] if mu is None else mu, nu=o["nu"], n1=o["n1"], n2=o["n2"],
            window=o["window"], tol_e=o["tol_e"], tol_a=o["tol_a"], max_iter=o["max_iter"],
            init=o["init"], seed=o["seed"], checkpoint_every=o["checkpoint_every"],
            checkpoint_dir=str(out / "checkpoint") if o["checkpoint_every"] or o["resume"] else None)


def read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, val = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key not in _CASTS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        values[key] = _cast(key, val)
    return values


def _cast(key, val):
    try:
        return _CASTS[key](val)
    except (TypeError, ValueError):
        raise ConfigError(f"malformed value for {key}: {val!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sadovskii", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--config", default=None, help="flat key=value file")
        sp.add_argument("--out", default=S)
        sp.add_argument("--threads", type=int, default=S)
        sp.add_argument("-v", "--verbose", action="count", default=S)

    def solver_opts(sp):
        sp.add_argument("--nu", type=_CASTS["nu"], default=S, help="mass cap (inf for none)")
        sp.add_argument("--n1", type=int, default=S)
        sp.add_argument("--n2", type=int, default=S)
        sp.add_argument("--window", type=float, default=S, help="window half-width and height")
        sp.add_argument("--tol-e", dest="tol_e", type=float, default=S)
        sp.add_argument("--tol-a", dest="tol_a", type=float, default=S)
        sp.add_argument("--max-iter", dest="max_iter", type=int, default=S)
        sp.add_argument("--init", default=S, help="half-disc, rectangle, or a patch file")
        sp.add_argument("--seed", type=int, default=S)

    sp = sub.add_parser("solve", help="compute a maximiser")
    common(sp)
    solver_opts(sp)
    sp.add_argument("--mu", type=float, default=S)
    sp.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=S)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--resume", action="store_true", default=S)
    g.add_argument("--fresh", action="store_true", default=S)

    sp = sub.add_parser("study-scaling", help="solve over several impulses and fit exponents")
    common(sp)
    solver_opts(sp)
    sp.add_argument("--mu-list", dest="mu_list", type=_CASTS["mu_list"], default=S)

    sp = sub.add_parser("diagnose", help="run every check on a stored patch")
    common(sp)
    sp.add_argument("--patch", default=S)
    sp.add_argument("--nu", type=_CASTS["nu"], default=S)

    sp = sub.add_parser("export", help="convert a patch file to CSV and a boundary polyline")
    common(sp)
    sp.add_argument("--patch", default=S)
    sp.add_argument("--format", choices=["csv", "contour", "all"], default=S)
    return p


def parse_config(argv=None, env=None) -> RunConfig:
    env = os.environ if env is None else env
    ns = vars(_parser().parse_args(argv))
    sub = ns.pop("subcommand")
    cfg_path = ns.pop("config", None)
    opts = dict(DEFAULTS)
    if "SADOVSKII_OUT" in env:
        opts["out"] = env["SADOVSKII_OUT"]
    if "SADOVSKII_THREADS" in env:
        opts["threads"] = _cast("threads", env["SADOVSKII_THREADS"])
    if cfg_path:
        opts.update(read_config_file(cfg_path))
    opts.update(ns)
    if sub == "export" and "out" not in ns and (not cfg_path or "out" not in read_config_file(cfg_path)) \
            and "SADOVSKII_OUT" not in env:
        opts["out"] = None
    if opts["resume"] and opts["fresh"]:
        raise ConfigError("--resume and --fresh are mutually exclusive")
    _validate(sub, opts)
    return RunConfig(sub, opts)


def _validate(sub, o):
    if sub == "solve" and o["mu"] is None:
        raise ConfigError("mu is required for solve")
    if o["mu"] is not None and not o["mu"] > 0:
        raise ConfigError(f"mu must be positive, got {o['mu']}")
    if not o["nu"] > 0:
        raise ConfigError(f"nu must be positive, got {o['nu']}")
    for key in ("tol_e", "tol_a"):
        if not o[key] > 0:
            raise ConfigError(f"{key} must be positive, got {o[key]}")
    if o["window"] is not None and not o["window"] > 0:
        raise ConfigError(f"window must be positive, got {o['window']}")
    if o["n1"] < 4 or o["n1"] % 2 or o["n2"] < 4:
        raise ConfigError(f"n1 must be even and n1, n2 >= 4, got n1={o['n1']}, n2={o['n2']}")
    if o["max_iter"] < 0:
        raise ConfigError("max_iter must be non-negative")
    if sub == "study-scaling" and o["mu_list"] is None:
        raise ConfigError("mu_list is required for study-scaling")
    if sub in ("diagnose", "export") and o["patch"] is None:
        raise ConfigError(f"patch is required for {sub}")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _dump(path: Path, payload: dict):
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True, default=_json_default) + "\n")


CHECKS = {
    "pohozaev": 0.02,
    "speed_cross_check": 0.02,
}


def diagnose_patch(omega, m: Multipliers, psi=None) -> tuple[dict, object]:
    """All diagnostics for a patch; returns ``(payload, boundary_or_None)``."""
    if psi is None:
        psi = stream_field_fast(omega)
        if is_steiner_symmetric(omega):
            psi = psi.symmetrized()
    out = {"W": m.W, "gamma": m.gamma, "mass": mass(omega), "impulse": impulse(omega),
           "pohozaev": dg.pohozaev_residual(omega, m, psi),
           "speed_cross_check": dg.speed_cross_check(omega, m),
           "speed_formula": dg.speed_formula(omega),
           "binariness": dg.binariness(omega)}
    checks = {"pohozaev": out["pohozaev"] <= CHECKS["pohozaev"],
              "speed_cross_check": out["speed_cross_check"] <= CHECKS["speed_cross_check"]}
    boundary = None
    if is_steiner_symmetric(omega):
        out["central_speed_margin"] = dg.central_speed_margin(omega, m)
        checks["central_speed"] = out["central_speed_margin"] > 0
        tr = dg.touching_report(omega, m, psi)
        out["touching"] = {"verdict": tr.verdict, "radius": tr.radius,
                           "first_row_mass": tr.first_row_mass}
        checks["gamma_zero_iff_touching"] = (m.gamma == 0.0) == tr.touching
        try:
            boundary = dg.boundary_extract(omega, m, psi)
        except dg.DiagnosticError as exc:
            # not a level set of the multiplier-shifted stream function
            out["boundary"] = {"error": str(exc)}
            checks["boundary_identity"] = False
        else:
            out["boundary"] = {"rows": int(boundary.s.size), "a": boundary.a,
                               "max_residual_over_tolerance":
                                   float(np.max(boundary.residual / boundary.tolerance))}
            checks["boundary_identity"] = bool(np.all(boundary.residual <= boundary.tolerance))
        if tr.touching and boundary is not None:
            checks["first_row_vs_a"] = abs(boundary.l[0] - boundary.a) <= 2 * boundary.h1
            out["shape"] = dg.shape_report(omega, m, psi, boundary).to_dict()
    out["checks"] = checks
    return out, boundary


def _write_boundary(path: Path, boundary):
    rows = [] if boundary is None else zip(boundary.s, boundary.l)
    write_rows(path, ["s", "l"], rows)


def _contour_rows(boundary):
    if boundary is None or boundary.s.size == 0:
        return []
    right = list(zip(boundary.l, boundary.s))
    left = [(-l, s) for l, s in reversed(right)]
    pts = right + left
    if boundary.s.size and np.isfinite(boundary.a):
        pts = [(boundary.a, 0.0)] + pts + [(-boundary.a, 0.0), (boundary.a, 0.0)]
    return pts


def cmd_solve(rc: RunConfig) -> int:
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = rc.solver_config()
    try:
        rep = solve(cfg, resume=rc.resume)
        payload, boundary = diagnose_patch(rep.patch, rep.multipliers, rep.psi)
    except (SolverError, dg.DiagnosticError, PatchFormatError) as exc:
        _dump(out / "failure.json", {"error": type(exc).__name__, "message": str(exc)})
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_SOLVER
    write_patch(out / "patch.bin", rep.patch)
    _write_boundary(out / "boundary.csv", boundary)
    keys = ["iter", "E", "W", "gamma", "mass", "impulse", "symdiff", "energy_drop", "damped"]
    write_rows(out / "trace.csv", keys, ([r[k] for k in keys] for r in rep.trace))
    payload.update({"termination": rep.termination, "energy": rep.energy,
                    "iterations": len(rep.trace), "residuals": rep.residuals,
                    "config": config_dict(cfg)})
    payload["config"].pop("checkpoint_dir", None)
    _dump(out / "diagnostics.json", payload)
    log.info("solve: %s after %d iterations, W=%.8g gamma=%.3g", rep.termination,
             len(rep.trace), rep.multipliers.W, rep.multipliers.gamma)
    return EXIT_OK if rep.converged else EXIT_SOLVER


def cmd_study(rc: RunConfig) -> int:
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    if len(rc.mu_list) < 3:
        msg = "scaling study needs ≥ 3 points"
        _dump(out / "failure.json", {"error": "StudyError", "message": msg})
        print(msg, file=sys.stderr)
        return EXIT_SOLVER
    cfg = rc.solver_config(mu=rc.mu_list[0])
    try:
        study = dg.scaling_study(rc.mu_list, cfg)
    except (dg.StudyError, SolverError) as exc:
        _dump(out / "failure.json", {"error": type(exc).__name__, "message": str(exc)})
        print(exc, file=sys.stderr)
        return EXIT_SOLVER
    cols = ["mu", "mass", "W", "E", "radius", "gamma"]
    write_rows(out / "scaling.csv", cols, ([r[c] for c in cols] for r in study.rows))
    _dump(out / "diagnostics.json", {"slopes": study.slopes, "stderr": study.stderr,
                                     "within_bands": study.within_bands(), "rows": study.rows})
    return EXIT_OK


def cmd_diagnose(rc: RunConfig) -> int:
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        omega = read_patch(rc.patch)
        psi = stream_field_fast(omega)
        if is_steiner_symmetric(omega):
            psi = psi.symmetrized()
        m, _ = find_multipliers(psi, impulse(omega), rc.nu)
        payload, boundary = diagnose_patch(omega, m, psi)
    except (OSError, PatchFormatError, SolverError, dg.DiagnosticError) as exc:
        _dump(out / "failure.json", {"error": type(exc).__name__, "message": str(exc)})
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write_boundary(out / "boundary.csv", boundary)
    _dump(out / "diagnostics.json", payload)
    failed = [k for k, ok in payload["checks"].items() if not ok]
    for k, ok in payload["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {k}")
    return EXIT_ASSERT if failed else EXIT_OK


def cmd_export(rc: RunConfig) -> int:
    src = Path(rc.patch)
    out = Path(rc.out) if rc.out is not None else src.parent
    out.mkdir(parents=True, exist_ok=True)
    try:
        omega = read_patch(src)
    except (OSError, PatchFormatError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if rc.format in ("csv", "all"):
        write_patch_csv(out / f"{src.stem}.csv", omega)
    boundary = None
    if not omega.is_zero() and is_steiner_symmetric(omega):
        psi = stream_field_fast(omega).symmetrized()
        m, _ = find_multipliers(psi, impulse(omega))
        try:
            boundary = dg.boundary_extract(omega, m, psi)
        except dg.DiagnosticError as exc:
            print(f"contour skipped: {exc}", file=sys.stderr)
    write_rows(out / f"{src.stem}_contour.csv", ["x1", "x2"], _contour_rows(boundary))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "study-scaling": cmd_study,
            "diagnose": cmd_diagnose, "export": cmd_export}


def run(rc: RunConfig) -> int:
    logging.basicConfig(level=logging.WARNING - 10 * min(rc.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if rc.threads:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=rc.threads):
            return COMMANDS[rc.subcommand](rc)
    return COMMANDS[rc.subcommand](rc)


def main(argv=None) -> int:
    try:
        rc = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return run(rc)


if __name__ == "__main__":
    sys.exit(main())
