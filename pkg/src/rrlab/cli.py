"""Command-line harness: ``rrlab <command> [flags]``.

Commands: ``angular-check``, ``field-eval``, ``flux``, ``fit-bound``,
``balance``, ``evolve``.  Settings come from flags and optionally from a
``key = value`` config file with a ``[common]`` section and one section per
command; flags override the file.

Every run produces a JSON report ``{schema_version, command, config,
results, checks, passed, timing}``.  With ``--format csv`` the tabular data is
written to ``--output`` instead and the report goes to standard error.

Exit status: 0 all checks pass, 1 a check failed, 2 usage error, 3 numeric
failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import balance as bl
from . import fields as fd
from . import fluxlab as fl
from . import minkowski as mk
from . import motion as mo
from ._backend import NAME as BACKEND_NAME
from .errors import ContractError, DomainError
from .worldline import WorldlineSpec

SCHEMA_VERSION = "1.0"
COMMANDS = ("angular-check", "field-eval", "flux", "fit-bound", "balance", "evolve")
EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

# option name -> (type, default)
OPTIONS = {
    "dim": (int, 4),
    "worldline": (str, "rest"),
    "m": (float, 1.0),
    "mu": (float, 0.0),
    "e": (float, 1.0),
    "degree": (int, fl.DEFAULT_DEGREE),
    "r": (float, 1.0),
    "window": (str, "0,1"),
    "segments": (int, 1),
    "part": (str, "total"),
    "angular": (bool, False),
    "tau": (float, 0.0),
    "taus": (str, ""),
    "radii": (str, "0.01,0.02,0.05,0.1,0.2"),
    "points": (str, ""),
    "force": (str, "none"),
    "close": (bool, False),
    "method": (str, "direct"),
    "span": (str, "0,1"),
    "step": (float, 1e-2),
    "fixed_step": (bool, False),
    "init_a": (str, ""),
    "tol": (float, 1e-6),
    "seed": (int, 0),
    "output": (str, ""),
    "format": (str, "json"),
    "backend": (str, ""),
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing


def _floats(text: str, key: str) -> list:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{key}: expected comma-separated numbers, got {text!r}") from None


def _pair(text: str, key: str) -> tuple:
    vals = _floats(text, key)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise UsageError(f"{key}: expected 'lo,hi' with lo < hi, got {text!r}")
    return tuple(vals)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrlab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        for key, (typ, _) in OPTIONS.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None)
    return parser


def resolve_config(args) -> dict:
    """Merge defaults, config file sections and flags (flags win)."""
    cfg = {k: d for k, (_, d) in OPTIONS.items()}
    if args.config:
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise UsageError(f"config file not found: {args.config}")
        for section in ("common", args.command):
            if cp.has_section(section):
                for key, val in cp.items(section):
                    key = key.replace("-", "_")
                    if key not in OPTIONS:
                        raise UsageError(f"unknown config key {key!r} in [{section}]")
                    typ = OPTIONS[key][0]
                    try:
                        cfg[key] = _bool(val) if typ is bool else typ(val)
                    except ValueError:
                        raise UsageError(f"bad value for {key}: {val!r}") from None
    for key in OPTIONS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["command"] = args.command
    if cfg["dim"] not in mk.SUPPORTED_DIMS:
        raise UsageError(f"dim: must be 4 or 6, got {cfg['dim']}")
    if cfg["format"] not in ("json", "csv"):
        raise UsageError(f"format: must be json or csv, got {cfg['format']!r}")
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _check(name, value, reference, tol):
    """Relative max-norm check (absolute when the reference vanishes)."""
    value = np.asarray(value, float)
    reference = np.asarray(reference, float)
    err = float(np.max(np.abs(value - reference)))
    ref = float(np.max(np.abs(reference)))
    if ref > 0:
        err /= ref
    return {"name": name, "error": err, "tol": tol, "pass": bool(err <= tol)}


def _worldline(cfg):
    try:
        return WorldlineSpec.parse(cfg["worldline"], cfg["dim"])
    except (ContractError, DomainError) as exc:
        raise UsageError(f"worldline: {exc}") from None


def _params(cfg):
    try:
        return bl.ParticleParams(cfg["m"], cfg["mu"], cfg["e"])
    except DomainError as exc:
        raise UsageError(f"m/mu/e: {exc}") from None


def _force(cfg):
    try:
        return bl.parse_force(cfg["force"], cfg["dim"])
    except (ContractError, ValueError) as exc:
        raise UsageError(f"force: {exc}") from None


def _backend(cfg):
    return cfg["backend"] or None


def _component_names(D, angular):
    names = [f"p{i}" for i in range(D)]
    if angular:
        names += [f"M{i}{j}" for i, j in zip(*np.triu_indices(D, 1))]
    return names


# ---------------------------------------------------------------------------
# commands; each returns (results, checks, csv_rows or None, csv_header)


def cmd_angular_check(cfg):
    D = cfg["dim"]
    rule = fl.sphere_quadrature(D - 2, cfg["degree"])
    rng = np.random.default_rng(cfg["seed"])
    v = rng.normal(size=D - 1) * 0.5
    u = np.concatenate([[np.sqrt(1.0 + v @ v)], v])
    results = {"nodes": rule.size, "degree": rule.degree, "u": u.tolist(), "moments": {}}
    checks = [_check("area", pairwise(rule.weights), mk.sphere_area(D), 1e-12)]
    for order in range(0, min(4, rule.degree) + 1):
        got = fl.angular_moments(rule, u, order)
        ref = fl.moment_closed_form(u, order, D - 2)
        scale = mk.sphere_area(D)
        err = float(np.max(np.abs(got - ref))) / scale
        checks.append({"name": f"moment_{order}", "error": err, "tol": 1e-12,
                       "pass": bool(err <= 1e-12)})
        results["moments"][str(order)] = float(np.max(np.abs(got)))
    if D == 6:
        checks.append(_check("omega4_8pi2_over_3", pairwise(rule.weights),
                             8.0 * math.pi**2 / 3.0, 1e-12))
    return results, checks, None, None


def pairwise(x):
    return float(fl.pairwise_sum(np.asarray(x)))


def cmd_field_eval(cfg):
    D = cfg["dim"]
    w = _worldline(cfg)
    if not cfg["points"]:
        raise UsageError("points: need at least one point, e.g. --points '1,2,0,0;3,0,1,0'")
    pts = []
    for chunk in cfg["points"].split(";"):
        vals = _floats(chunk, "points")
        if len(vals) != D:
            raise UsageError(f"points: each point needs {D} components, got {chunk!r}")
        pts.append(vals)
    rows, out = [], []
    for i, y in enumerate(pts):
        A = fd.lw_potential(w, y, D, cfg["e"])
        F = fd.lw_field(w, y, D, cfg["e"])
        T = fd.stress(F).T
        out.append({"point": y, "tau_ret": F.frame.tau_ret, "r": F.frame.r,
                    "A": A.tolist(), "F": mk.upper_triangle(F.F).tolist(),
                    "T": T.tolist()})
        for j, x in enumerate(A):
            rows.append([i, "A", str(j), repr(float(x))])
        for (a, b), x in zip(zip(*np.triu_indices(D, 1)), mk.upper_triangle(F.F)):
            rows.append([i, "F", f"{a}{b}", repr(float(x))])
        for a in range(D):
            for b in range(a, D):
                rows.append([i, "T", f"{a}{b}", repr(float(T[a, b]))])
    checks = []
    if D == 4:
        # the 4D stress is traceless
        for i, o in enumerate(out):
            T = np.array(o["T"])
            err = abs(fd.StressTensor(T).trace()) / max(1e-300, float(np.max(np.abs(T))))
            checks.append({"name": f"trace_{i}", "error": err, "tol": 1e-12,
                           "pass": bool(err <= 1e-12)})
    return {"points": out}, checks, rows, ["point", "quantity", "component", "value"]


def cmd_flux(cfg):
    D = cfg["dim"]
    w = _worldline(cfg)
    u1, u2 = _pair(cfg["window"], "window")
    nseg = cfg["segments"]
    if nseg < 1:
        raise UsageError("segments: must be >= 1")
    part = cfg["part"]
    if part not in fl.PARTS:
        raise UsageError(f"part: must be one of {fl.PARTS}")
    edges = np.linspace(u1, u2, nseg + 1)
    fn = fl.tube_angular_flux_window if cfg["angular"] else fl.tube_flux_window
    names = _component_names(D, cfg["angular"])
    acc = np.zeros(len(names))
    err = 0.0
    rows, series = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        res = fn(w, a, b, cfg["r"], part, D, cfg["e"], cfg["degree"], backend=_backend(cfg))
        vec = res.p if res.M is None else np.concatenate([res.p, mk.upper_triangle(res.M)])
        acc = acc + vec
        err += res.est_error
        series.append({"u": float(b), "value": acc.tolist(), "est_error": err})
        for name, val in zip(names, acc):
            rows.append([repr(float(b)), name, repr(float(val)), repr(err)])
    ref = ref_M = None
    if part == "bnd":
        ref, ref_M = fl.bound_window_closed(w, u1, u2, cfg["r"], D, cfg["e"])
    elif part == "rad":
        ref, ref_M = fl.radiative_window_closed(w, u1, u2, D, cfg["e"])
    checks = []
    if ref is not None:
        scale = max(float(np.max(np.abs(ref))), 1e-12)
        e_p = float(np.max(np.abs(acc[:D] - ref))) / scale
        checks.append({"name": f"{part}_momentum_closed_form", "error": e_p, "tol": cfg["tol"],
                       "pass": bool(e_p <= cfg["tol"])})
        if cfg["angular"]:
            scale = max(float(np.max(np.abs(ref_M))), 1e-12)
            e_m = float(np.max(np.abs(acc[D:] - mk.upper_triangle(ref_M)))) / scale
            checks.append({"name": f"{part}_angular_closed_form", "error": e_m,
                           "tol": cfg["tol"], "pass": bool(e_m <= cfg["tol"])})
    results = {"components": names, "series": series, "value": acc.tolist(),
               "est_error": err, "backend": BACKEND_NAME if not cfg["backend"] else cfg["backend"]}
    return results, checks, rows, ["u", "component", "value", "est_error"]


def cmd_fit_bound(cfg):
    D = cfg["dim"]
    w = _worldline(cfg)
    radii = _floats(cfg["radii"], "radii")
    fit = fl.bound_coefficient_fit(w, cfg["tau"], radii, D, cfg["e"], cfg["degree"])
    e2 = cfg["e"] ** 2
    if D == 6:
        c = bl.c6(cfg["e"])
        expected = {"u": 1.5 * c, "a": 2.4 * c, "aa_u": 2.0 * c}
    else:
        expected = {"u": 0.5 * e2}
    st = w.state(cfg["tau"], 2)
    checks = []
    for name, val in expected.items():
        basis = {"u": st.u, "a": st.a, "aa_u": mk.dot(st.a, st.a) * st.u}[name]
        if np.max(np.abs(basis)) == 0:
            continue
        err = abs(fit.scalars[name] - val) / abs(val)
        checks.append({"name": f"coefficient_{name}", "error": err, "tol": 1e-4,
                       "pass": bool(err <= 1e-4)})
    checks.append({"name": "fit_residual", "error": fit.residual, "tol": 1e-8,
                   "pass": bool(fit.residual <= 1e-8)})
    results = {"coefficients": {str(k): v.tolist() for k, v in fit.coefficients.items()},
               "rate_coefficients": {str(k): v.tolist() for k, v in fit.rate_coefficients.items()},
               "scalars": {k: float(v) for k, v in fit.scalars.items()},
               "residual": fit.residual, "radii": list(fit.radii)}
    return results, checks, None, None


def cmd_balance(cfg):
    D = cfg["dim"]
    w = _worldline(cfg)
    prm = _params(cfg)
    taus = _floats(cfg["taus"], "taus") if cfg["taus"] else [cfg["tau"]]
    if cfg["close"]:
        def F_ext(st):
            return bl.closing_force(st, prm)
    else:
        F_ext = _force(cfg)
    tol = min(cfg["tol"], 1e-10) if cfg["close"] else cfg["tol"]
    reports = [bl.balance_residual(w, t, prm, F_ext, D, tol) for t in taus]
    checks = [{"name": f"balance_tau_{r.tau:g}",
               "error": max(r.dp_norm / max(r.dp_scale, 1e-300),
                            r.dM_norm / max(r.dM_scale, 1e-300)),
               "tol": tol, "pass": r.passed} for r in reports]
    return {"reports": [r.as_dict() for r in reports]}, checks, None, None


def cmd_evolve(cfg):
    D = cfg["dim"]
    prm = _params(cfg)
    F_ext = _force(cfg)
    span = _pair(cfg["span"], "span")
    init = mo.state_at_rest(D, span[0])
    if cfg["init_a"]:
        a = np.array(_floats(cfg["init_a"], "init_a"))
        if a.shape != (D,):
            raise UsageError(f"init_a: need {D} components")
        derivs = init.derivs()
        derivs[2] = a
        if D == 6:
            derivs[3] = np.zeros(D)
            derivs[3][0] = mk.dot(a, a)  # u.a1 = -a.a at rest
        init = type(init)(*mo.project_derivs(derivs))
    adaptive = not cfg["fixed_step"]
    if D == 4:
        if cfg["method"] not in ("direct", "reduced"):
            raise UsageError("method: must be direct or reduced")
        traj = mo.evolve_4d(init, F_ext, span, cfg["step"], cfg["method"], prm.m, prm.e,
                            adaptive=adaptive)
    else:
        traj = mo.evolve_6d(init, F_ext, prm, span, cfg["step"], adaptive=adaptive)
    header = (["tau"] + [f"z{i}" for i in range(D)] + [f"u{i}" for i in range(D)]
              + [f"a{i}" for i in range(D)] + ["flags"])
    rows = []
    last = len(traj) - 1
    for n, (t, s) in enumerate(zip(traj.tau, traj.samples)):
        flag = ";".join(traj.flags) if n == last and traj.flags else ""
        rows.append([repr(float(t))] + [repr(float(x)) for x in s[:3].ravel()] + [flag])
    drift = max(mo.chain_violation(s[:3]) for s in traj.samples)
    checks = [{"name": "tau_monotone", "error": 0.0, "tol": 0.0,
               "pass": bool(np.all(np.diff(traj.tau) > 0))},
              {"name": "chain_invariants", "error": drift, "tol": 1e-8,
               "pass": bool(drift <= 1e-8)}]
    results = {"method": traj.method, "flags": traj.flags, "stats": traj.stats,
               "n_samples": len(traj), "final": traj.samples[-1, :3].tolist(),
               "tau_end": float(traj.tau[-1])}
    return results, checks, rows, header


HANDLERS = {
    "angular-check": cmd_angular_check,
    "field-eval": cmd_field_eval,
    "flux": cmd_flux,
    "fit-bound": cmd_fit_bound,
    "balance": cmd_balance,
    "evolve": cmd_evolve,
}


# ---------------------------------------------------------------------------
# output


def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd_, tmp = tempfile.mkstemp(dir=directory, prefix=".rrlab-", suffix=".tmp")
    try:
        with os.fdopen(fd_, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def run(cfg: dict) -> tuple:
    """Execute one configured command; returns ``(report, csv_text or None)``."""
    t0 = time.perf_counter()
    results, checks, rows, header = HANDLERS[cfg["command"]](cfg)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg["command"],
        "config": {k: v for k, v in sorted(cfg.items())},
        "results": results,
        "checks": checks,
        "passed": all(c["pass"] for c in checks),
        "timing": {"wall_s": time.perf_counter() - t0},
    }
    text = _csv_text(header, rows) if rows is not None and cfg["format"] == "csv" else None
    return _jsonable(report), text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        report, csv_text = run(cfg)
    except UsageError as exc:
        print(f"rrlab {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"rrlab {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"rrlab {args.command}: numeric failure ({type(exc).__name__}): {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    js = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg["format"] == "csv" and csv_text is None:
        print(f"rrlab {cfg['command']}: no tabular output, writing JSON", file=sys.stderr)
    data = csv_text if csv_text is not None else js
    if cfg["output"]:
        atomic_write(cfg["output"], data)
        if csv_text is not None:
            sys.stderr.write(js)
    else:
        sys.stdout.write(data)
        if csv_text is not None:
            sys.stderr.write(js)
    return EXIT_OK if report["passed"] else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
