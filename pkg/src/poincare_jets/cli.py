"""Command-line front end: ``poincare-jets <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 certification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import db as dbmod
from .classify import classify_orbit
from .config import RunConfig, load_config
from .errors import (CertificationError, ConfigError, ConvergenceError, IntegrationError, JetError,
                     ResonanceError, ShapeError, SingularJetError, SupportError, TransversalityError)
from .flow import OrbitRecord, SectionChart, find_closed_orbit, poincare_jet
from .general_position import find_witness_times, is_k_general_tuple
from .models import model_from_dict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CERTIFICATION = 4

NUMERICAL = (IntegrationError, ConvergenceError, TransversalityError, SingularJetError,
             ResonanceError, SupportError, np.linalg.LinAlgError, FloatingPointError)


def _emit(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(dbmod._plain(obj), indent=2, sort_keys=True) + "\n")


# pipeline pieces (module level so worker processes can import them) ------------

def orbit_for_energy(cfg: RunConfig, energy: float):
    """Find, jet and classify the orbit at one energy; returns ``(kind, payload)``."""
    model = model_from_dict(cfg.model)
    sec = cfg.section
    chart = SectionChart(sec.index, sec.value, sec.period)
    seed = cfg.seed if cfg.seed is not None else [0.0] * (2 * model.dof - 2)
    guess = cfg.momentum_guess if cfg.momentum_guess is not None else math.sqrt(2 * abs(energy)) or 1.0
    tol = cfg.tolerances
    try:
        rec = find_closed_orbit(model, energy, seed, chart, momentum_guess=guess, max_iter=cfg.max_newton,
                                tol=tol.orbit, rtol=tol.integrator, atol=tol.integrator)
        if not rec.degenerate:
            poincare_jet(model, rec, max(cfg.k, 3), rtol=tol.integrator, atol=tol.integrator,
                         defect_tol=tol.symplectic)
            classify_orbit(rec, model, max(cfg.k, 3), tol.unit_circle, tol.resonance, tol.twist)
        else:
            rec.classification = {"verdict": "other", "reason": "degenerate"}
        rec.config_hash = cfg.config_hash()
        return "orbit", rec.to_json()
    except NUMERICAL as exc:
        return "orbit_failure", {"energy": float(energy), "error": type(exc).__name__, "message": str(exc)}


def _worker(args):
    cfg_json, energy = args
    return orbit_for_energy(RunConfig.model_validate_json(cfg_json), energy)


def run_classify(cfg: RunConfig, database: dbmod.OrbitDatabase, jobs: int = 1):
    t0 = time.perf_counter()
    energies = list(cfg.energies)
    if jobs > 1 and len(energies) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_worker, [(cfg.model_dump_json(), e) for e in energies]))
    else:
        results = [orbit_for_energy(cfg, e) for e in energies]
    h = cfg.config_hash()
    # single writer: only this process appends
    written = [database.append(kind, payload, h) for kind, payload in results]
    return {
        "schema_version": dbmod.SCHEMA_VERSION,
        "config_hash": h,
        "results": written,
        "wall_clock": time.perf_counter() - t0,
        "steps": {"orbits": sum(1 for k, _ in results if k == "orbit"),
                  "failures": sum(1 for k, _ in results if k == "orbit_failure")},
    }


def run_perturb(cfg: RunConfig, database: dbmod.OrbitDatabase, orbit_id=None):
    from .perturbation import (check_orbit_chart, choose_bump_times, deviation_jet,
                               make_fk_potential, pullback_flow_jet, submersion_rank_check,
                               verify_orbit_preserved, x_power)
    from .flow import default_arc

    spec = cfg.perturb
    if spec is None:
        raise ConfigError("config has no 'perturb' section")
    model = model_from_dict(cfg.model)
    h = cfg.config_hash()
    orbit_id = orbit_id or spec.orbit_id
    if orbit_id:
        env = database.find(orbit_id)
        if env is None or env["kind"] != "orbit":
            raise ConfigError(f"no orbit with id {orbit_id!r} in {database.path}")
        rec = OrbitRecord.from_json(env["payload"])
    else:
        if spec.energy is None:
            raise ConfigError("perturb needs an orbit_id or an energy")
        kind, payload = orbit_for_energy(cfg.model_copy(update={"k": 3}), spec.energy)
        if kind != "orbit":
            raise ConvergenceError(payload["message"])
        database.append(kind, payload, h)
        rec = OrbitRecord.from_json(payload)
    k = spec.k
    arc = spec.arc or default_arc(rec)
    x_star = check_orbit_chart(model, rec, arc)
    if spec.times == "auto":
        times, hw, _ = choose_bump_times(model, rec, k, arc)
    else:
        times, hw = list(spec.times), None
    rank = submersion_rank_check(model, rec, k, times=times, half_width=spec.half_width or hw,
                                 arc=arc, eps=spec.eps, h=spec.h)
    chart = rec.chart
    u = make_fk_potential(model.dof, times[0], rank.half_width, x_power(model.dof - 1, k), spec.eps,
                          spec.amplitude, k, arc, chart.index, x_star, chart.period)
    closure = verify_orbit_preserved(model, u, rec)
    dev = deviation_jet(model, u, rec, k, arc)
    pull = pullback_flow_jet(model, u, rec, k, arc)
    payload = {
        "orbit_id": rec.id,
        "k": k,
        "arc": arc,
        "amplitude": spec.amplitude,
        "potential": u.describe(),
        "closure_residual": closure,
        "lower_defect": dev.lower_defect,
        "top_norm": dev.top_norm,
        "deviation_top": dev.top.tolist(),
        "pullback_agreement": float(np.max(np.abs(pull.coeffs - dev.jet.coeffs))),
        "rank": rank.to_json(),
    }
    env = database.append("experiment", payload, h)
    return env, rank.success


def _parse_entry(v):
    return Fraction(v) if isinstance(v, str) else v


def _load_matrices(paths):
    mats = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            data = json.load(fh)
        arr = np.array(data, dtype=object)
        if arr.ndim == 2:
            arr = arr[None]
        for m in arr:
            exact_entries = any(isinstance(v, str) for v in m.flat)
            conv = np.vectorize(_parse_entry, otypes=[object])(m)
            mats.append(conv if exact_entries else conv.astype(float))
    return mats


def _apply_tolerance_flags(cfg: RunConfig, args) -> RunConfig:
    tol = cfg.tolerances.model_dump()
    for name in ("integrator", "orbit", "unit_circle", "resonance", "twist"):
        v = getattr(args, f"tol_{name}", None)
        if v is not None:
            tol[name] = v
    update = {"tolerances": tol}
    if getattr(args, "k", None) is not None:
        update["k"] = args.k
    return RunConfig.model_validate({**cfg.model_dump(), **update})


# argument parsing ---------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="poincare-jets",
                                description="Poincaré-map jets, k-general position and perturbation checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--db", default=None, help=f"database path (default ${dbmod.ENV_VAR} or {dbmod.DEFAULT_PATH})")
        sp.add_argument("--k", type=int, default=None, help="jet order")
        for name in ("integrator", "orbit", "unit-circle", "resonance", "twist"):
            sp.add_argument(f"--tol-{name}", type=float, default=None)
        sp.add_argument("--jobs", type=int, default=1, help="parallel orbit workers")

    common(sub.add_parser("classify", help="find, jet and classify orbits at each configured energy"))
    sc = sub.add_parser("scan", help="classify over an energy range and print one line per energy")
    common(sc)
    sc.add_argument("--energies", type=float, nargs=3, metavar=("START", "STOP", "NUM"), default=None)
    pp = sub.add_parser("perturb", help="run the perturbation suite on a stored or computed orbit")
    common(pp)
    pp.add_argument("--orbit-id", default=None)

    gc = sub.add_parser("gk-check", help="certify whether a tuple of symplectic matrices is k-general")
    gc.add_argument("files", nargs="+", help="JSON files with one matrix or a list of matrices")
    gc.add_argument("--k", type=int, required=True)
    gc.add_argument("--exact", action="store_true", help="convert float entries exactly")
    gc.add_argument("--db", default=None)
    gc.add_argument("--save", action="store_true", help="append the certificate to the database")

    gw = sub.add_parser("gk-witness", help="build an exact k-general witness tuple")
    gw.add_argument("--n", type=int, required=True)
    gw.add_argument("--k", type=int, required=True)
    gw.add_argument("--db", default=None)
    gw.add_argument("--save", action="store_true")

    rp = sub.add_parser("report", help="summarize the database")
    rp.add_argument("--db", default=None)
    return p


def _cmd_classify(args):
    cfg = _apply_tolerance_flags(load_config(args.config), args)
    database = dbmod.OrbitDatabase(args.db or cfg.db)
    _emit(run_classify(cfg, database, args.jobs))
    return EXIT_OK


def _cmd_scan(args):
    cfg = _apply_tolerance_flags(load_config(args.config), args)
    if args.energies:
        a, b, num = args.energies
        cfg = cfg.model_copy(update={"energies": [float(e) for e in np.linspace(a, b, int(num))]})
    database = dbmod.OrbitDatabase(args.db or cfg.db)
    report = run_classify(cfg, database, args.jobs)
    for env in report["results"]:
        pay = env["payload"]
        if env["kind"] == "orbit":
            cl = pay.get("classification") or {}
            print(f"{pay['energy']:.6g}\t{cl.get('verdict')}\t{cl.get('reason') or ''}\tT={pay['period']:.10g}\t{env['id']}")
        else:
            print(f"{pay['energy']:.6g}\tfailed\t{pay['error']}: {pay['message']}")
    return EXIT_OK


def _cmd_perturb(args):
    cfg = _apply_tolerance_flags(load_config(args.config), args)
    database = dbmod.OrbitDatabase(args.db or cfg.db)
    env, ok = run_perturb(cfg, database, args.orbit_id)
    _emit(env)
    return EXIT_OK if ok else EXIT_CERTIFICATION


def _cmd_gk_check(args):
    try:
        mats = _load_matrices(args.files)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"cannot read matrices: {exc}") from exc
    cert = is_k_general_tuple(mats, args.k, exact_mode=True if args.exact else None)
    out = cert.to_json()
    if args.save:
        dbmod.OrbitDatabase(args.db).append("gk_certificate", out)
    _emit(out)
    return EXIT_OK


def _cmd_gk_witness(args):
    times, cert = find_witness_times(args.n, args.k)
    out = cert.to_json()
    if not cert.verdict:
        raise CertificationError("witness tuple failed certification")
    if args.save:
        dbmod.OrbitDatabase(args.db).append("gk_certificate", out)
    _emit(out)
    return EXIT_OK


def _cmd_report(args):
    database = dbmod.OrbitDatabase(args.db)
    envs = database.records()
    counts = {}
    orbits = []
    for env in envs:
        counts[env["kind"]] = counts.get(env["kind"], 0) + 1
        if env["kind"] == "orbit":
            pay = env["payload"]
            cl = pay.get("classification") or {}
            orbits.append({"id": env["id"], "model": pay["model"], "energy": pay["energy"],
                           "period": pay["period"], "verdict": cl.get("verdict"), "reason": cl.get("reason")})
    _emit({"path": str(database.path), "counts": counts, "orbits": orbits})
    return EXIT_OK


COMMANDS = {
    "classify": _cmd_classify,
    "scan": _cmd_scan,
    "perturb": _cmd_perturb,
    "gk-check": _cmd_gk_check,
    "gk-witness": _cmd_gk_witness,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ShapeError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CERTIFICATION
    except (NUMERICAL + (JetError,)) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
