"""Command-line front end.

    ssprofile <command> [--config FILE | --demo] [--out DIR] [--jobs N] [--section.key=value ...]

Exit status is 0 when every enabled verdict passes, 1 when a verdict fails
and 2 on errors (a failure.json report is written in that case).
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import demo
from .config import COMMANDS, emit_config, parse_config, with_point
from .continuation import (bootstrap_monitor, chain_slacks, envelope_curves, extend_global,
                           find_bootstrap_constants, fit_asymptotics, measure_envelopes)
from .core import (atomic_write_text, build_grid, columns_csv, fmt, profile_to_csv,
                   read_profile_csv)
from .errors import ConfigError, Infeasible, SSProfileError
from .expander import check_smallness, picard_solve
from .residual import residual_expander
from .shrinker import (VERDICT_NONEXISTENCE, VERDICT_TRIVIAL, audit_shrinker,
                       profile_from_samples)

EXIT_OK, EXIT_VERDICT, EXIT_ERROR = 0, 1, 2
RATE_TARGET = 2.0


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    atomic_write_text(path, dumps(obj))


def _out_path(cfg, name):
    return os.path.join(cfg.out, name)


# ---------------------------------------------------------------------------
# solve-expander
# ---------------------------------------------------------------------------

def _grid_for(cfg, outer=None):
    bd = cfg.boundary
    r_max, length = cfg.grid.resolved(bd)
    return build_grid(bd.delta, r_max, cfg.grid.inner, outer or cfg.grid.outer,
                      cfg.grid.grading, length)


def solve_global(cfg, outer=None):
    """Picard solve on (0, delta] then forward continuation; returns (profile, history)."""
    params, bd = cfg.params, cfg.boundary
    grid = _grid_for(cfg, outer)
    inner, history = picard_solve(params, bd, grid, tol=cfg.tol.picard,
                                  max_iter=cfg.tol.max_iter,
                                  smallness_threshold=cfg.tol.smallness)
    profile = extend_global(inner, params, bd, outer_nodes=grid.outer, rtol=cfg.tol.ode_rtol)
    return profile, history


def residual_window(bd, profile):
    return (2.0 * bd.delta, 0.5 * float(profile.r[-1]))


def analyse(cfg, profile, history):
    """Every verdict of the expander pipeline as a report dict."""
    params, bd = cfg.params, cfg.boundary
    report = {"picard": {"iterations": len(history),
                         "history": [h.as_record() for h in history]}}
    verdicts = {"picard": True}
    try:
        consts = find_bootstrap_constants(params, bd, cfg.per_decade, cfg.lowest)
        _, mon = bootstrap_monitor(profile, consts, bd, params)
        report["constants"] = {"m1": consts.m1, "m1_prime": consts.m1p, "m2": consts.m2,
                               "slack_decades": consts.slack, "tightest": consts.tightest}
        report["bootstrap"] = mon
        verdicts["bootstrap"] = mon["verdict"]
    except Infeasible as exc:
        report["constants"] = {"infeasible": str(exc), "tightest": exc.tightest}
        verdicts["bootstrap"] = False
    env = measure_envelopes(profile, params, bd)
    report["envelopes"] = env
    verdicts["envelopes"] = bool(all(math.isfinite(v) for v in env.values())
                                 and env["P_lower"] > 0.0 and env["Theta_min"] >= 0.0)
    fit = fit_asymptotics(profile)
    report["asymptotics"] = {"p_inf": fit.p_inf, "u_inf": fit.u_inf, "theta_inf": fit.theta_inf,
                             "rate_p": fit.rate_p, "rate_u": fit.rate_u,
                             "rate_theta": fit.rate_theta, "fit_window": list(fit.fit_window),
                             "residuals": fit.residuals}
    rates = (fit.rate_p, fit.rate_u, fit.rate_theta)
    verdicts["asymptotics"] = bool(
        all(abs(x - RATE_TARGET) <= cfg.tol.rate * RATE_TARGET for x in rates)
        and fit.p_inf > 0 and fit.u_inf > 0 and fit.theta_inf > 0)
    res = residual_expander(profile, params, residual_window(bd, profile))
    report["residual"] = res.summary()
    verdicts["residual"] = bool(max(res.max_rel.values()) <= cfg.tol.residual)
    report["smallness"] = {"composite": check_smallness(params, bd).composite}
    report["verdicts"] = verdicts
    report["status"] = "pass" if all(verdicts.values()) else "fail"
    return report, res


def plot_data(profile, params, bd, env):
    r = profile.r
    curves = envelope_curves(r, params, bd)
    cols = [r, profile.p, profile.u, profile.theta, profile.u_prime, profile.theta_prime,
            env["P_lower"] * curves["P"], env["P_upper"] * curves["P"],
            env["U"] * curves["U"], env["U'"] * curves["U'"],
            env["Theta"] * curves["Theta"], env["Theta'"] * curves["Theta'"]]
    header = ["r", "P", "U", "Theta", "Uprime", "Thetaprime", "bound_P_lower",
              "bound_P_upper", "bound_U", "bound_Uprime", "bound_Theta", "bound_Thetaprime"]
    return columns_csv(header, cols)


def cmd_solve(cfg):
    profile, history = solve_global(cfg)
    report, res = analyse(cfg, profile, history)
    report["config"] = emit_config(cfg)
    files = {
        "profile.csv": profile_to_csv(profile),
        "residual.csv": res.to_csv(),
        "report.json": dumps(report),
        "plot_data.csv": plot_data(profile, cfg.params, cfg.boundary, report["envelopes"]),
        "history.jsonl": "".join(json.dumps(_plain(h.as_record()), sort_keys=True) + "\n"
                                 for h in history),
    }
    for name, text in files.items():
        atomic_write_text(_out_path(cfg, name), text)
    return (EXIT_OK if report["status"] == "pass" else EXIT_VERDICT), report


# ---------------------------------------------------------------------------
# verify-residuals
# ---------------------------------------------------------------------------

def cmd_verify(cfg):
    params, bd = cfg.params, cfg.boundary
    report = {}
    if cfg.profile is not None:
        profile = read_profile_csv(cfg.profile, delta=bd.delta)
        res = residual_expander(profile, params, residual_window(bd, profile))
        report["fine"] = res.summary()
        ok = max(res.max_rel.values()) <= cfg.tol.residual
    else:
        profile, _ = solve_global(cfg)
        res = residual_expander(profile, params, residual_window(bd, profile))
        coarse_profile, _ = solve_global(cfg, outer=cfg.grid.outer // 2)
        coarse = residual_expander(coarse_profile, params, residual_window(bd, coarse_profile))
        report["fine"] = res.summary()
        report["coarse"] = coarse.summary()
        factors = {}
        for k in res.max_rel:
            # equations already at rounding level have nothing left to reduce
            if coarse.max_rel[k] < 1e-12:
                factors[k] = None
            else:
                factors[k] = coarse.max_rel[k] / max(res.max_rel[k], 1e-300)
        report["reduction"] = factors
        ok = (max(res.max_rel.values()) <= cfg.tol.residual
              and all(f is None or f >= 3.0 for f in factors.values()))
    report["tolerance"] = cfg.tol.residual
    report["status"] = "pass" if ok else "fail"
    atomic_write_text(_out_path(cfg, "residual.csv"), res.to_csv())
    write_json(_out_path(cfg, "residual_report.json"), report)
    return (EXIT_OK if ok else EXIT_VERDICT), report


# ---------------------------------------------------------------------------
# constants and scan
# ---------------------------------------------------------------------------

def _constants_report(cfg):
    params, bd = cfg.params, cfg.boundary
    sm = check_smallness(params, bd, cfg.tol.smallness)
    out = {"smallness": {"composite": sm.composite, "passed": sm.passed}}
    try:
        c = find_bootstrap_constants(params, bd, cfg.per_decade, cfg.lowest)
    except Infeasible as exc:
        out.update(status="infeasible", tightest=exc.tightest, message=str(exc))
        return out
    sl = chain_slacks(c.m1, c.m1p, c.m2, params, bd)
    out.update(status="feasible", m1=c.m1, m1_prime=c.m1p, m2=c.m2,
               slack_decades=c.slack, tightest=c.tightest,
               slacks={k: float(v) for k, v in sl.items()})
    return out


def cmd_constants(cfg):
    rep = _constants_report(cfg)
    write_json(_out_path(cfg, "constants.json"), rep)
    return (EXIT_OK if rep["status"] == "feasible" else EXIT_VERDICT), rep


def scan_point(cfg, assignments):
    """One isolated lattice point; never raises."""
    row = {"values": assignments}
    try:
        point = with_point(cfg, assignments)
        point.boundary.check(point.params, forced_theta0=True)
        if cfg.scan_mode == "constants":
            rep = _constants_report(point)
            row.update(status=rep["status"], tightest=rep.get("tightest"),
                       slack=rep.get("slack_decades"),
                       smallness=rep["smallness"]["composite"])
        else:
            profile, history = solve_global(point)
            rep, _ = analyse(point, profile, history)
            row.update(status=rep["status"], verdicts=rep["verdicts"])
    except SSProfileError as exc:
        row.update(status="error", error=type(exc).__name__, message=str(exc))
    return row


def scan_points(cfg):
    axes = cfg.scan
    return [dict(zip([a.target for a in axes], combo))
            for combo in itertools.product(*[a.values() for a in axes])]


def cmd_scan(cfg, jobs=1):
    points = scan_points(cfg)
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(scan_point, [cfg] * len(points), points))
    else:
        rows = [scan_point(cfg, p) for p in points]
    for i, row in enumerate(rows):
        row["index"] = i
    targets = [a.target for a in cfg.scan]
    lines = [",".join(["index"] + targets + ["status", "detail"])]
    for row in rows:
        detail = row.get("tightest") or row.get("message") or ""
        vals = [fmt(row["values"][t]) for t in targets]
        lines.append(",".join([str(row["index"])] + vals
                              + [row["status"], '"' + str(detail).replace('"', "'") + '"']))
    atomic_write_text(_out_path(cfg, "scan.csv"), "\n".join(lines) + "\n")
    write_json(_out_path(cfg, "scan.json"), {"points": rows, "mode": cfg.scan_mode})
    return EXIT_OK, {"points": rows, "status": "complete"}


# ---------------------------------------------------------------------------
# shrinker-audit
# ---------------------------------------------------------------------------

def resolve_candidate(cfg):
    """(params, profile, eps) for the configured candidate."""
    spec = cfg.audit.candidate
    if spec == "zero":
        params, profile, eps = demo.zero_candidate(cfg.audit.nodes)
    elif spec.startswith(("valid:", "violating:")):
        kind, _, idx = spec.partition(":")
        table = demo.VALID_CANDIDATES if kind == "valid" else demo.VIOLATING_CANDIDATES
        try:
            entry = table[int(idx)]
        except (ValueError, IndexError):
            raise ConfigError(f"audit.candidate: no bundled candidate {spec!r}",
                              field="audit.candidate") from None
        params, kw = entry[0], entry[1]
        profile = demo.make_candidate(kw, cfg.audit.nodes)
        eps = kw["eps"]
    else:
        if cfg.params is None:
            raise ConfigError("a candidate file needs a physics section", field="physics")
        data = np.genfromtxt(spec, delimiter=",", names=True)
        names = data.dtype.names
        profile = profile_from_samples(
            data["r"], data["P"], data["U"], data["Theta"],
            data["Uprime"] if "Uprime" in names else None,
            data["Thetaprime"] if "Thetaprime" in names else None)
        params, eps = cfg.params, None
    if cfg.params is not None:
        params = cfg.params
    if cfg.audit.eps is not None:
        eps = cfg.audit.eps
    if eps is None:
        raise ConfigError("audit.eps is required for candidate files", field="audit.eps")
    return params, profile, eps


def cmd_audit(cfg):
    params, profile, eps = resolve_candidate(cfg)
    rep = audit_shrinker(profile, params, eps, cfg.audit.threshold)
    out = rep.as_dict()
    out["candidate"] = cfg.audit.candidate
    out["eps"] = eps
    write_json(_out_path(cfg, "audit.json"), out)
    led = rep.ledger
    rows = [("lhs1", led.lhs1), ("lhs2", led.lhs2), ("lhs_lower", led.lhs_lower),
            ("rhs1", led.rhs1), ("rhs2", led.rhs2), ("rhs3", led.rhs3),
            ("rhs_upper", led.rhs_upper)] + sorted(led.sub_integrals.items())
    atomic_write_text(_out_path(cfg, "ledger.csv"),
                      "term,value\n" + "".join(f"{k},{fmt(v)}\n" for k, v in rows))
    ok = rep.verdict in (VERDICT_TRIVIAL, VERDICT_NONEXISTENCE)
    return (EXIT_OK if ok else EXIT_VERDICT), out


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def run_pipeline(cfg, jobs=1):
    """Dispatch ``cfg.command``; returns (exit status, report dict)."""
    os.makedirs(cfg.out, exist_ok=True)
    try:
        if cfg.command == "solve-expander":
            return cmd_solve(cfg)
        if cfg.command == "verify-residuals":
            return cmd_verify(cfg)
        if cfg.command == "constants":
            return cmd_constants(cfg)
        if cfg.command == "scan":
            return cmd_scan(cfg, jobs)
        return cmd_audit(cfg)
    except (SSProfileError, OSError) as exc:
        fail = {"status": "error", "command": cfg.command, "error": type(exc).__name__,
                "message": str(exc)}
        for attr in ("r", "kind", "tightest", "field", "line"):
            if getattr(exc, attr, None) is not None:
                fail[attr] = getattr(exc, attr)
        hist = getattr(exc, "history", None)
        if hist:
            fail["history"] = [h.as_record() for h in hist]
        write_json(_out_path(cfg, "failure.json"), fail)
        return EXIT_ERROR, fail


def demo_config(command):
    p = demo.EXPANDER_PARAMS
    b = demo.EXPANDER_BOUNDARY
    g = demo.EXPANDER_GRID
    phys = "".join(f"physics.{k} = {getattr(p, k)!r}\n"
                   for k in ("d", "alpha", "c_v", "kappa", "gas_r", "mu0", "lambda0"))
    bnd = "".join(f"boundary.{k} = {getattr(b, k)!r}\n"
                  for k in ("a_slope", "delta", "p_delta", "theta0", "eps_norm"))
    grid = (f"grid.inner = {g['inner']}\ngrid.outer = {g['outer']}\n"
            f"grid.grading = {g['grading']!r}\ngrid.r_max = {g['r_max']!r}\n"
            f"grid.outer_length = {g['outer_length']!r}\n")
    text = f"run.command = {command}\n"
    if command == "shrinker-audit":
        return text + "audit.candidate = zero\n"
    if command == "scan":
        return (text + phys + bnd
                + "scan.boundary.a_slope = 1e-24, 0.4, 6, log\n")
    return text + phys + bnd + grid


def _split_overrides(extra):
    overrides = {}
    for item in extra:
        if not item.startswith("--") or "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"unrecognised argument {item!r}; overrides are "
                              "--section.key=value")
        key, value = item[2:].split("=", 1)
        overrides[key] = value
    return overrides


def build_parser():
    ap = argparse.ArgumentParser(prog="ssprofile", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--config", help="configuration file (section.key = value lines)")
    src.add_argument("--demo", action="store_true", help="use the bundled demo configuration")
    ap.add_argument("--out", help="output directory (overrides SSPROFILE_OUT and run.out)")
    ap.add_argument("--jobs", type=int, default=1, help="concurrent scan points")
    ap.add_argument("--print-config", action="store_true",
                    help="print the canonical configuration and exit")
    return ap


def main(argv=None):
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    try:
        overrides = _split_overrides(extra)
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        elif args.demo:
            text = demo_config(args.command)
        else:
            text = ""
        text = f"run.command = {args.command}\n" + "\n".join(
            ln for ln in text.splitlines() if not ln.strip().startswith("run.command"))
        out = args.out or os.environ.get("SSPROFILE_OUT")
        if out:
            overrides["run.out"] = out
        cfg = parse_config(text, overrides)
    except (ConfigError, OSError) as exc:
        msg = {"status": "error", "error": type(exc).__name__, "message": str(exc),
               "line": getattr(exc, "line", None), "field": getattr(exc, "field", None)}
        sys.stderr.write(dumps(msg))
        return EXIT_ERROR
    if args.print_config:
        sys.stdout.write(emit_config(cfg))
        return EXIT_OK
    if args.jobs < 1:
        sys.stderr.write("--jobs must be >= 1\n")
        return EXIT_ERROR
    status, report = run_pipeline(cfg, args.jobs)
    summary = {"command": cfg.command, "exit": status, "out": cfg.out,
               "status": report.get("status") or report.get("verdict")}
    sys.stdout.write(json.dumps(_plain(summary), sort_keys=True) + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
