"""Command-line front end: JSON summaries on stdout, CSV data files via --csv/--out."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .analysis import (
    default_origin_window,
    fit_origin,
    fit_tail,
    regime_scan,
    sigma0_barrier_root,
    sigma0_cubic_root,
)
from .dynsys import pressure_to_f_derivatives, profile_residual
from .errors import InvalidBracket, InvalidParams, WindowTooShort
from .integrate import IntegratorControl
from .model import (
    Params,
    explicit_pressure,
    explicit_profile,
    explicit_support_edge,
    exponents,
    sigma_star,
)
from .shooting import (
    OutcomeKind,
    ShootingControl,
    classify_c_intervals,
    find_good_profile,
    find_interface_c,
    p0_plane_orbit,
    shoot_from_interface,
    shoot_from_origin,
    shoot_from_p2,
)

EXIT_OK, EXIT_INVALID, EXIT_INCONCLUSIVE = 0, 2, 3


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj) -> str:
    """JSON text with floats at 17 significant digits; NaN and inf become null."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "value") and isinstance(obj.value, str):  # enums
        return json.dumps(obj.value)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(path: str, header: dict, columns: list, rows) -> None:
    meta = " ".join(f"{k}={v}" for k, v in header.items())
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {meta}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt_float(x) for x in row) + "\n")


def _csv_header(cfg, p: Params | None, ctrl: ShootingControl | None) -> dict:
    h = {"command": cfg.command, "version": __version__, "numpy": np.__version__}
    if p is not None:
        h["m"], h["sigma"] = fmt_float(p.m), fmt_float(p.sigma)
    if ctrl is not None:
        h["rtol"], h["atol"] = fmt_float(ctrl.integ.rtol), fmt_float(ctrl.integ.atol)
    return h


def _profile_rows(traj):
    cols = traj.profile_columns()
    order = np.argsort(cols["xi"])
    keys = ["xi", "v", "w", "f", "fprime"]
    return keys, np.column_stack([cols[k][order] for k in keys])


def _phase_rows(traj):
    return ["eta", "X", "Y", "Z"], np.column_stack([traj.t, traj.state])


def _clean_meta(meta: dict) -> dict:
    out = {}
    for k in sorted(meta):
        if k.startswith("_"):
            continue
        v = meta[k]
        if isinstance(v, (bool, int, float, str, tuple, list, np.floating)) or v is None:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _positive(name):
    def conv(s):
        try:
            x = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}")
        if not (math.isfinite(x) and x > 0):
            raise argparse.ArgumentTypeError(f"{name} must be > 0, got {s!r}")
        return x
    return conv


def _finite(s):
    try:
        x = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"not finite: {s!r}")
    return x


def _count(s):
    try:
        n = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s!r}")
    return n


def parse_grid(text: str) -> list:
    """`log:a:b:n` (10^a..10^b), `lin:a:b:n`, or a comma list."""
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            g = np.logspace(a, b, n) if kind == "log" else np.linspace(a, b, n)
            return [float(x) for x in g]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")


def parse_pair(text: str) -> tuple:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return a, b


def _add_params(sp, sigma: bool = True):
    sp.add_argument("--m", type=_finite, required=True)
    if sigma:
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--sigma", type=_finite)
        g.add_argument("--sigma-star", action="store_true", help="use sigma = sqrt(2(m+1))")


def _add_ctrl(sp):
    g = sp.add_argument_group("numerics")
    g.add_argument("--rtol", type=_positive("rtol"))
    g.add_argument("--atol", type=_positive("atol"))
    g.add_argument("--max-steps", type=_count)
    g.add_argument("--xi-min", type=_positive("xi-min"))
    g.add_argument("--slope-tol", type=_positive("slope-tol"))
    g.add_argument("--fmslope-tol", type=_positive("fmslope-tol"))
    g.add_argument("--z-cut", type=_positive("z-cut"))
    g.add_argument("--tail-tol", type=_positive("tail-tol"))
    g.add_argument("--bisect-rel", type=_positive("bisect-rel"))
    g.add_argument("--workers", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowup-profiles", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("exponents", help="alpha and beta")
    _add_params(sp)

    sp = sub.add_parser("explicit", help="explicit profile on a uniform grid (CSV)")
    _add_params(sp, sigma=False)
    sp.add_argument("--n", type=_count, default=512)
    sp.add_argument("--time-slices", type=str, help="T,t1,t2,... adds x,u rows per slice")
    sp.add_argument("--out", type=str)

    sp = sub.add_parser("shoot-back", help="backward shot from an interface point")
    _add_params(sp)
    sp.add_argument("--eta", type=_positive("eta"), required=True)
    sp.add_argument("--csv", type=str)
    _add_ctrl(sp)

    sp = sub.add_parser("shoot-origin", help="forward shot from the origin family")
    _add_params(sp)
    sp.add_argument("--c", type=_positive("c"), required=True)
    sp.add_argument("--csv", type=str)
    _add_ctrl(sp)

    sp = sub.add_parser("find-profile", help="bisect for the good profile with interface")
    _add_params(sp)
    sp.add_argument("--bracket", type=parse_pair)
    sp.add_argument("--csv", type=str)
    _add_ctrl(sp)

    sp = sub.add_parser("scan-c", help="classify forward shots over a c grid")
    _add_params(sp)
    sp.add_argument("--grid", type=parse_grid, default=parse_grid("log:-2:2:25"))
    sp.add_argument("--find-interface", action="store_true")
    sp.add_argument("--csv", type=str)
    _add_ctrl(sp)

    sp = sub.add_parser("scan-sigma", help="regime report over a sigma grid")
    _add_params(sp, sigma=False)
    sp.add_argument("--grid", type=parse_grid, required=True)
    sp.add_argument("--c-grid", type=parse_grid, default=parse_grid("log:-2:2:25"))
    _add_ctrl(sp)

    sp = sub.add_parser("phase-orbit", help="orbit out of P2 or P0 (CSV eta,X,Y,Z)")
    _add_params(sp)
    sp.add_argument("--from", dest="origin", choices=["P2", "P0"], required=True)
    sp.add_argument("--c", type=_positive("c"), default=1.0, help="origin coefficient for P0")
    sp.add_argument("--plane-z0", action="store_true", help="P0 orbit inside {Z=0}")
    sp.add_argument("--delta", type=_positive("delta"), default=1e-6)
    sp.add_argument("--csv", type=str)
    _add_ctrl(sp)
    return ap


def _params(cfg) -> Params:
    sigma = sigma_star(cfg.m) if getattr(cfg, "sigma_star", False) else cfg.sigma
    return Params(cfg.m, sigma)


def _ctrl(cfg) -> ShootingControl:
    ik = {k: getattr(cfg, a) for k, a in (("rtol", "rtol"), ("atol", "atol"), ("max_steps", "max_steps"),
                                         ("xi_min", "xi_min")) if getattr(cfg, a, None) is not None}
    sk = {k: getattr(cfg, k) for k in ("slope_tol", "fmslope_tol", "z_cut", "tail_tol", "bisect_rel")
          if getattr(cfg, k, None) is not None}
    if getattr(cfg, "workers", 0) < 0:
        raise InvalidParams("workers must be >= 0")
    return ShootingControl(integ=IntegratorControl(**ik), workers=getattr(cfg, "workers", 0), **sk)


def _tolerances(ctrl: ShootingControl | None) -> dict:
    if ctrl is None:
        return {}
    out = {f.name: getattr(ctrl.integ, f.name) for f in fields(ctrl.integ)}
    out.update({f.name: getattr(ctrl, f.name) for f in fields(ctrl) if f.name != "integ"})
    return out


def _params_dict(p: Params) -> dict:
    e = exponents(p)
    return {"m": p.m, "sigma": p.sigma, "alpha": e.alpha, "beta": e.beta}


def _doc(cfg, p, outcome, ctrl, **body) -> dict:
    d = {"command": cfg.command, "params": _params_dict(p) if p else None, "outcome": outcome}
    d.update(body)
    d["tolerances_used"] = _tolerances(ctrl)
    return d


def _event(ev) -> dict:
    return {"kind": ev.kind, "location": ev.location, "state": list(ev.state),
            "flux": ev.flux if ev.flux is not None else math.nan}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_exponents(cfg):
    p = _params(cfg)
    e = exponents(p)
    return _doc(cfg, p, "ok", None, alpha=e.alpha, beta=e.beta), EXIT_OK


def cmd_explicit(cfg):
    m = cfg.m
    if cfg.n < 2:
        raise InvalidParams("need --n >= 2")
    p = Params(m, sigma_star(m))
    xi1 = explicit_support_edge(m)
    xs = np.linspace(0.0, 1.05 * xi1, cfg.n)
    f = explicit_profile(m, xs)
    xr = np.linspace(0.01 * xi1, 0.99 * xi1, 4001)
    fr, fpr, fmpp = pressure_to_f_derivatives(p, *explicit_pressure(m, xr))
    resid = float(np.max(np.abs(profile_residual(p, xr, fr, fpr, fmpp))))
    body = {"n": cfg.n, "support_edge": xi1, "max_residual": resid}
    if cfg.time_slices:
        try:
            vals = [float(x) for x in cfg.time_slices.split(",")]
        except ValueError:
            raise InvalidParams(f"bad --time-slices {cfg.time_slices!r}")
        T, ts = vals[0], vals[1:]
        if not ts or any(not t < T for t in ts):
            raise InvalidParams("--time-slices needs T followed by times t < T")
        body["time_slices"] = ts
    if cfg.out:
        header = _csv_header(cfg, p, None)
        header["max_residual"] = fmt_float(resid)
        if cfg.time_slices:
            rows = []
            for t in ts:
                tau = T - t
                x = xs / tau**p.beta
                u = tau ** (-p.alpha) * f
                rows.extend(zip([t] * len(xs), xs, f, x, u))
            write_csv(cfg.out, header, ["t", "xi", "f", "x", "u"], rows)
        else:
            write_csv(cfg.out, header, ["xi", "f"], zip(xs, f))
        body["csv"] = cfg.out
    return _doc(cfg, p, "ok", None, **body), EXIT_OK


def _backward_body(o) -> dict:
    return {"kind": o.kind, "eta": o.eta, "theta": o.theta, "A": o.A, "slope": o.slope,
            "termination": _event(o.trajectory.termination), "meta": _clean_meta(o.meta)}


def _forward_body(o) -> dict:
    return {"kind": o.kind, "c": o.c, "xi0": o.xi0, "gamma": o.gamma, "lnK": o.lnK, "drift": o.drift,
            "termination": _event(o.trajectory.termination), "meta": _clean_meta(o.meta)}


def _exit_for(kind) -> int:
    return EXIT_INCONCLUSIVE if kind is OutcomeKind.Inconclusive else EXIT_OK


def cmd_shoot_back(cfg):
    p, ctrl = _params(cfg), _ctrl(cfg)
    o = shoot_from_interface(p, cfg.eta, ctrl)
    if cfg.csv:
        cols, rows = _profile_rows(o.trajectory)
        write_csv(cfg.csv, _csv_header(cfg, p, ctrl), cols, rows)
    return _doc(cfg, p, o.kind, ctrl, result=_backward_body(o)), _exit_for(o.kind)


def cmd_shoot_origin(cfg):
    p, ctrl = _params(cfg), _ctrl(cfg)
    o = shoot_from_origin(p, cfg.c, ctrl)
    if cfg.csv:
        cols, rows = _profile_rows(o.trajectory)
        write_csv(cfg.csv, _csv_header(cfg, p, ctrl), cols, rows)
    return _doc(cfg, p, o.kind, ctrl, result=_forward_body(o)), _exit_for(o.kind)


def _fit_dict(fit) -> dict | None:
    if fit is None:
        return None
    return {"exponent": fit.exponent, "coefficient": fit.coefficient, "rms_residual": fit.rms_residual,
            "matched_law": fit.matched_law, "window": list(fit.window), "unresolvable": fit.unresolvable}


def cmd_find_profile(cfg):
    p, ctrl = _params(cfg), _ctrl(cfg)
    eta, o = find_good_profile(p, cfg.bracket, ctrl)
    body = {"eta_star": eta, "bracket": list(o.meta.get("bracket", (math.nan, math.nan))),
            "result": _backward_body(o)}
    if abs(p.sigma - sigma_star(p.m)) <= 1e-12 * p.sigma:
        xi1 = explicit_support_edge(p.m)
        xs = np.linspace(0.1, 0.9 * xi1, 400)
        err = np.abs(o.trajectory.f_at(xs) / explicit_profile(p.m, xs) - 1.0)
        body["explicit"] = {"support_edge": xi1, "eta_error": eta - xi1, "max_rel_error": float(np.max(err))}
    if cfg.csv:
        cols, rows = _profile_rows(o.trajectory)
        write_csv(cfg.csv, _csv_header(cfg, p, ctrl), cols, rows)
    return _doc(cfg, p, o.kind, ctrl, **body), _exit_for(o.kind)


def cmd_scan_c(cfg):
    p, ctrl = _params(cfg), _ctrl(cfg)
    kc = classify_c_intervals(p, cfg.grid, ctrl)
    body = {
        "grid": kc.grid,
        "kinds": kc.kinds,
        "intervals": [{"kind": k, "c_first": a, "c_last": b} for k, a, b, _, _ in kc.intervals],
        "tail_intervals": [[a, b] for _, a, b, _, _ in kc.intervals_of(OutcomeKind.Tail)],
        "transversal_intervals": [[a, b] for _, a, b, _, _ in kc.intervals_of(OutcomeKind.TransversalZero)],
        "brackets": [list(b) for b in kc.brackets],
        "inconclusive_rate": kc.inconclusive_rate,
    }
    headline = "Inconclusive" if kc.kinds and kc.inconclusive_rate == 1.0 else "ok"
    if cfg.find_interface and kc.brackets:
        c_star, o = find_interface_c(p, kc.brackets[0], ctrl)
        body["interface"] = {"c_star": c_star, "result": _forward_body(o)}
        if o.kind is OutcomeKind.Interface:
            fit = fit_origin(o.trajectory, p, default_origin_window(o.trajectory))
            body["interface"]["origin_fit"] = _fit_dict(fit)
    if cfg.csv:
        write_csv(cfg.csv, _csv_header(cfg, p, ctrl), ["c", "kind_code"],
                  [(c, list(OutcomeKind).index(k)) for c, k in zip(kc.grid, kc.kinds)])
    return _doc(cfg, p, headline, ctrl, **body), EXIT_INCONCLUSIVE if headline == "Inconclusive" else EXIT_OK


def cmd_scan_sigma(cfg):
    ctrl = _ctrl(cfg)
    if cfg.m <= 1:
        raise InvalidParams("m must be > 1")
    reports = regime_scan(cfg.m, cfg.grid, ctrl, cfg.c_grid)
    rows = []
    for r in reports:
        rows.append({
            "sigma": r.sigma, "all_tail": r.all_tail, "has_interface_from_origin": r.has_interface_from_origin,
            "has_transversal": r.has_transversal, "good_profile_origin_value": r.good_profile_origin_value,
            "blowup_character": r.blowup_character, "character_source": r.character_source,
            "origin_fit": _fit_dict(r.origin_fit), "eta_star": r.eta_star, "c_star": r.c_star,
            "inconclusive_rate": r.inconclusive_rate, "below_proved_all_tail": r.below_proved_all_tail,
            "notes": r.notes,
        })
    body = {"m": cfg.m, "sigma0_cubic": sigma0_cubic_root(cfg.m), "sigma0_barrier": sigma0_barrier_root(cfg.m),
            "sigma_star": sigma_star(cfg.m), "reports": rows}
    doc = {"command": cfg.command, "params": {"m": cfg.m, "sigma_grid": list(cfg.grid)}, "outcome": "ok"}
    doc.update(body)
    doc["tolerances_used"] = _tolerances(ctrl)
    return doc, EXIT_OK


def cmd_phase_orbit(cfg):
    p, ctrl = _params(cfg), _ctrl(cfg)
    body = {"from": cfg.origin}
    if cfg.origin == "P0" and cfg.plane_z0:
        tr = p0_plane_orbit(p, ctrl, cfg.delta)
        kind = "ReachesP2" if tr.termination.kind.value == "StateNearPoint" else "Inconclusive"
        body["termination"] = _event(tr.termination)
    else:
        o = shoot_from_p2(p, ctrl, cfg.delta) if cfg.origin == "P2" else shoot_from_origin(p, cfg.c, ctrl)
        tr, kind = o.trajectory, o.kind.value
        body["result"] = _forward_body(o)
        if o.kind is OutcomeKind.Tail:
            xi = tr.profile_columns()["xi"]
            z = tr.state[:, 2]
            sel = z >= ctrl.z_cut / ctrl.tail_window
            if sel.sum() >= 8:
                lnk, drift = fit_tail(tr, p, (float(xi[sel][0]), float(xi[sel][-1])))
                body["tail_fit"] = {"lnK": lnk, "drift": drift}
    if cfg.csv:
        cols, rows = _phase_rows(tr)
        write_csv(cfg.csv, _csv_header(cfg, p, ctrl), cols, rows)
    return _doc(cfg, p, kind, ctrl, **body), EXIT_INCONCLUSIVE if kind == "Inconclusive" else EXIT_OK


COMMANDS = {
    "exponents": cmd_exponents,
    "explicit": cmd_explicit,
    "shoot-back": cmd_shoot_back,
    "shoot-origin": cmd_shoot_origin,
    "find-profile": cmd_find_profile,
    "scan-c": cmd_scan_c,
    "scan-sigma": cmd_scan_sigma,
    "phase-orbit": cmd_phase_orbit,
}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        cfg = ap.parse_args(argv)
    except SystemExit as ex:  # argparse: usage errors exit 2, --help/--version exit 0
        return int(ex.code or 0)
    try:
        doc, code = COMMANDS[cfg.command](cfg)
    except (InvalidParams, InvalidBracket, WindowTooShort) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(to_json(doc) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
