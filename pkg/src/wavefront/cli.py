"""Command line entry point: ``wavefront <command> [--config PATH] [--set KEY=VALUE] [--out DIR]``.

Exit codes: 0 success, 1 hypothesis or validation failure, 2 (h, c) outside
the admissible domain (``solve``), 3 convergence failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .acceptance import format_table, run_all
from .charfun import (CharParams, c_sharp, chi, chi0_positive_roots, chi_prime, classify_point, domain_map,
                      domain_map_csv, real_root_set, xi_star_bisection, xi_star_detail)
from .config import RunConfig, parse_config
from .errors import (CollapsedToZero, ConfigParseError, ConfigValidationError, ConvergenceFailure,
                     IterationLimitReached, NotInDL, WavefrontError)
from .frontsolve import profile_csv, report_csv, solve_front
from .fundsol import check_fundsol, fundamental_solution, fundsol_csv
from .grid import GridSpec
from .model import build_nonlinearity, check_hypotheses
from .reduction import build_xi, kernel_n_csv

COMMANDS = ("check-model", "charfun", "xi-star", "c-sharp", "domain-map", "fundsol", "solve", "verify")

OK, INVALID, NOT_ADMISSIBLE, NO_CONVERGENCE, IO_ERROR = 0, 1, 2, 3, 4


class Report:
    """Plain-text report; every checked number is written next to its tolerance."""

    def __init__(self, cmd: str, cfg: RunConfig, rmap=None):
        self.lines = [f"wavefront {__version__} {cmd}", f"config_sha256 = {cfg.digest}", "", "[config]"]
        self.lines += cfg.canonical().splitlines()
        if rmap is not None:
            self.lines += ["", "[normalization]", f"rescaling: {rmap.describe()}"]
        self.lines.append("")
        self.ok = True

    def section(self, name: str):
        self.lines += ["", f"[{name}]"]

    def value(self, name: str, v):
        self.lines.append(f"{name} = {_num(v)}")

    def check(self, name: str, v, tol, kind: str = "<=", enforce: bool = True) -> bool:
        passed = _compare(v, tol, kind)
        tag = "ok" if passed else ("FAIL" if enforce else "not met")
        self.lines.append(f"{name} = {_num(v)} (tol {kind} {_num(tol)}: {tag})")
        if enforce and not passed:
            self.ok = False
        return passed

    def text(self) -> str:
        return "\n".join(self.lines).rstrip("\n") + "\n"


def _num(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (int, float)):
        return repr(float(v)) if isinstance(v, float) else str(v)
    return str(v)


def _compare(v, tol, kind) -> bool:
    if isinstance(v, float) and math.isnan(v):
        return False
    return {"<=": v <= tol, ">=": v >= tol, "<": v < tol, ">": v > tol, "==": v == tol}[kind]


def _write(out: Path, files: dict):
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out / name, "w", newline="\n") as fh:
            fh.write(text)


# -- commands ---------------------------------------------------------------

def cmd_check_model(cfg: RunConfig, rep: Report, files: dict) -> int:
    model, _ = cfg.model()
    const = build_nonlinearity(model.g)
    hyp = check_hypotheses(model.g, const)
    rep.section("constants")
    rep.value("kappa", const.kappa)
    rep.value("g_prime_0", const.g_prime_0)
    rep.value("g_prime_kappa", const.g_prime_kappa)
    rep.section("hypotheses")
    for name, where, margin in hyp.details:
        rep.check(f"{name}: margin at s={where!r}", margin, 0.0, ">=", enforce=not name.startswith("gco"))
    if not hyp.all_hold:
        rep.lines.append(f"failed: {', '.join(hyp.failures())}")
        return INVALID
    return OK


def cmd_charfun(cfg: RunConfig, rep: Report, files: dict) -> int:
    model, _ = cfg.model()
    const = build_nonlinearity(model.g)
    xi = cfg["fundsol.xi"] if cfg["fundsol.xi"] is not None else abs(const.g_prime_kappa)
    p = CharParams(c=model.c, h=model.h, d=1.0, xi=xi, kernel=model.kernel)
    rep.section("chi at xi")
    rep.value("xi", xi)
    status = OK
    try:
        roots = real_root_set(p)
        for name in ("lambda2", "lambda1", "lambda0", "lambda_m1"):
            z = getattr(roots, name, None)
            if z is None or not math.isfinite(z):
                continue
            rep.value(name, z)
            rep.check(f"|chi({name})| / (1 + {name}^2)", abs(chi(p, z)) / (1 + z * z), 1e-11)
            rep.value(f"chi_prime({name})", chi_prime(p, z))
    except WavefrontError as e:
        rep.lines.append(f"real roots: {type(e).__name__}: {e}")
        status = INVALID
    rep.section("chi0 (linearization at 0)")
    mu = chi0_positive_roots(model, const.g_prime_0)
    if mu is None:
        rep.lines.append("no positive zeros (c below c#(h))")
    else:
        rep.value("mu0", mu.mu0)
        rep.value("mu1", mu.mu1)
        rep.value("degenerate", mu.degenerate)
    return status if rep.ok else INVALID


def cmd_xi_star(cfg: RunConfig, rep: Report, files: dict) -> int:
    model, _ = cfg.model()
    det = xi_star_detail(model.c, model.h, model.kernel)
    rep.section("xi_star")
    for k, v in det.items():
        rep.value(k, v)
    if model.kernel.is_dirac and model.ch > 0:
        bis = xi_star_bisection(model.c, model.h, model.kernel)
        rep.value("xi_star_bisection", bis)
        rep.check("|xi_star - xi_star_bisection|", abs(det["xi_star"] - bis), 1e-9)
    return OK if rep.ok else INVALID


def cmd_c_sharp(cfg: RunConfig, rep: Report, files: dict) -> int:
    model, _ = cfg.model()
    const = build_nonlinearity(model.g)
    cs = c_sharp(model.h, model, const.g_prime_0)
    rep.section("c_sharp")
    rep.value("h", model.h)
    rep.value("c_sharp", cs)
    if model.h == 0:
        rep.check("|c_sharp - 2 sqrt(g'(0) - 1)| (dirac)" if model.kernel.is_dirac else "c_sharp > 0",
                  abs(cs - 2 * math.sqrt(const.g_prime_0 - 1)) if model.kernel.is_dirac else cs,
                  1e-8 if model.kernel.is_dirac else 0.0, "<=" if model.kernel.is_dirac else ">")
    above = chi0_positive_roots(model.at(c=cs * (1 + 1e-6) + 1e-6), const.g_prime_0) is not None
    below = chi0_positive_roots(model.at(c=cs * (1 - 1e-6) - 1e-6), const.g_prime_0) is not None
    rep.check("chi0 has positive zeros just above c_sharp", float(above), 1.0, "==")
    rep.check("chi0 has positive zeros just below c_sharp", float(below), 0.0, "==")
    return OK if rep.ok else INVALID


def cmd_domain_map(cfg: RunConfig, rep: Report, files: dict) -> int:
    model, rmap = cfg.model()
    # the ranges are given in raw units and mapped like h and c
    f = rmap.delta
    s = rmap.space_factor
    dm = domain_map((cfg["map.h_min"] * f, cfg["map.h_max"] * f, cfg["map.h_step"] * f),
                    (cfg["map.c_min"] / s, cfg["map.c_max"] / s, cfg["map.c_step"] / s), model)
    files["domain_map.csv"] = domain_map_csv(dm)
    rep.section("domain_map")
    rep.value("cells", len(dm.cells))
    rep.value("unknown", sum(m is None for *_, m in dm.cells))
    rep.value("in_DL", sum(bool(m and m.in_DL) for *_, m in dm.cells))
    return OK


def cmd_fundsol(cfg: RunConfig, rep: Report, files: dict) -> int:
    model, _ = cfg.model()
    const = build_nonlinearity(model.g)
    xi = cfg["fundsol.xi"]
    if xi is None:
        xi, _ = build_xi(model, const)
    p = CharParams(c=model.c, h=model.h, d=1.0, xi=xi, kernel=model.kernel)
    grid = GridSpec.snapped(cfg["fundsol.L"], cfg["numerics.dt"]) if cfg["fundsol.L"] else None
    method = None if cfg["fundsol.method"] == "auto" else cfg["fundsol.method"]
    fs = fundamental_solution(p, grid, method)
    r = check_fundsol(fs)
    files["fundsol.csv"] = fundsol_csv(fs)
    rep.section("fundsol")
    rep.value("xi", xi)
    rep.value("method", fs.method)
    rep.value("L", fs.samples.t_end)
    rep.value("dt", fs.samples.dt)
    if not fs.beyond_xi_star:
        rep.check("max v", r.max_value, 0.0, "<")
        rep.check("|argmin v|", abs(r.argmin), fs.samples.dt * (1 + 1e-9))
        rep.check("monotonicity violation on t <= 0", r.monotone_violation_left, 1e-12)
        rep.check("monotonicity violation on t >= 0", r.monotone_violation_right, 1e-12)
    else:
        rep.value("max v (xi beyond xi*)", r.max_value)
    # v is concave on t < 0 (it is a negative multiple of e^{lambda0 t}), so
    # this is reported against the nominal bound but not enforced
    rep.check("convexity violation on t <= 0", r.convexity_violation_left, 1e-10, enforce=False)
    rep.check("|dv'(0) - 1|", r.jump_error_1, 1e-3)
    rep.check("|dv''(0) - c|", r.jump_error_2, 1e-2)
    rep.check("interior residual", r.interior_residual, 1e-6)
    rep.value("slope_left", r.slope_left)
    rep.value("lambda0", fs.tails.lambda_minus)
    rep.value("slope_right", r.slope_right)
    rep.value("lambda1", fs.tails.lambda_plus)
    if math.isfinite(r.tail_coeff_error):
        rep.check("tail coefficient relative error", r.tail_coeff_error, 1e-6)
    for z, e in r.laplace_errors:
        rep.check(f"one-sided Laplace identity at z={z!r}: relative error", e, 1e-5)
    return OK if rep.ok else INVALID


def cmd_solve(cfg: RunConfig, rep: Report, files: dict) -> int:
    model, _ = cfg.model()
    const = build_nonlinearity(model.g)
    hyp = check_hypotheses(model.g, const)
    if not hyp.all_hold:
        rep.lines.append(f"hypotheses failed: {', '.join(hyp.failures())}")
        return INVALID
    memb = classify_point(model.h, model.c, model, constants=const)
    rep.section("domain")
    for k, v in memb.__dict__.items():
        rep.value(k, v)
    scfg = cfg.solver()
    try:
        sol = solve_front(model, scfg, constants=const)
    except NotInDL as e:
        rep.lines.append(f"not admissible: {e}")
        return NOT_ADMISSIBLE
    except (IterationLimitReached, CollapsedToZero, ConvergenceFailure) as e:
        rep.lines.append(f"convergence failure: {type(e).__name__}: {e}")
        return NO_CONVERGENCE
    red = sol.reduction
    d = sol.diagnostics
    k = sol.kappa
    files["kernelN.csv"] = kernel_n_csv(red)
    files["profile.csv"] = profile_csv(sol)
    files["front_report.csv"] = report_csv(d)
    rep.section("reduction")
    rep.value("xi", red.xi)
    rep.value("delta", red.delta)
    rep.check("|int N - 1|", red.mass_error, 1e-6)
    for z, e in red.laplace_errors:
        rep.check(f"Laplace probe z={z!r}: relative error", e, 1e-5)
    rep.check("linearization identity error", red.linearization_error, 1e-6)
    rep.check("min N", float(red.N.values.min()), 0.0, ">")
    rep.section("front")
    rep.value("kappa", k)
    rep.value("mu0", sol.mu0)
    rep.value("shift", sol.shift)
    rep.check("iterations", sol.iterations, scfg.max_iter)
    rep.check("max increase between iterates / kappa", sol.max_increase / k, 1e-12)
    rep.check("residual_ftc", d.residual_ftc, 10 * scfg.tol_iter)
    yp_tol = 1e-4 if model.kernel.is_dirac else 5e-4
    rep.check("residual_yp / kappa", d.residual_yp / k, yp_tol)
    rep.check("left_boundary_gap", d.left_boundary_gap, 1e-3)
    rep.check("right_boundary_gap", d.right_boundary_gap, 1e-3)
    rep.check("monotone_violation / kappa", d.monotone_violation / k, 1e-12)
    rep.value("decay_class", d.decay_class)
    rep.check("|decay_rate_left / mu0 - 1|", abs(d.decay_rate_left / sol.mu0 - 1), 0.02,
              enforce=d.decay_class == "pure_mu0")
    return OK if rep.ok else INVALID


def cmd_verify(cfg: RunConfig, rep: Report, files: dict) -> int:
    results = run_all(echo=lambda r: print(r.summary(), *r.detail_lines(), sep="\n", flush=True))
    table = format_table(results)
    print(table.splitlines()[-1])
    rep.section("acceptance")
    rep.lines += table.splitlines()
    return OK if all(r.passed for r in results) else INVALID


HANDLERS = {"check-model": cmd_check_model, "charfun": cmd_charfun, "xi-star": cmd_xi_star,
            "c-sharp": cmd_c_sharp, "domain-map": cmd_domain_map, "fundsol": cmd_fundsol,
            "solve": cmd_solve, "verify": cmd_verify}


def run_command(cmd: str, cfg: RunConfig) -> int:
    if cmd not in HANDLERS:
        raise ValueError(f"unknown command {cmd!r}")
    try:
        _, rmap = cfg.model()
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return INVALID
    rep = Report(cmd, cfg, rmap)
    files: dict = {}
    try:
        code = HANDLERS[cmd](cfg, rep, files)
    except WavefrontError as e:
        rep.lines.append(f"error: {type(e).__name__}: {e}")
        code = INVALID
    files["report.txt"] = rep.text()
    try:
        _write(cfg.out, files)
    except OSError as e:
        print(f"error: cannot write to {cfg.out}: {e}", file=sys.stderr)
        return IO_ERROR
    if cmd != "verify":
        sys.stdout.write(rep.text())
    return code


def _at_c_sharp(cfg: RunConfig) -> RunConfig:
    """Set c to c#(h), converted back to raw units."""
    model, rmap = cfg.model()
    cs = c_sharp(model.h, model)
    values = dict(cfg.values, c=cs * rmap.space_factor)
    sources = dict(cfg.sources, c="--at-c-sharp")
    return replace(cfg, values=values, sources=sources)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavefront", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH", help="key = value configuration file")
    ap.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                    help="override one key (repeatable; wins over the file)")
    ap.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    ap.add_argument("--at-c-sharp", action="store_true", help="set c := c#(h) exactly")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides, args.out)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return IO_ERROR
    except ConfigParseError as e:
        print(f"config error: {e}", file=sys.stderr)
        return INVALID
    except ConfigValidationError as e:
        print("config error:", *e.problems, sep="\n  ", file=sys.stderr)
        return INVALID
    if args.at_c_sharp:
        try:
            cfg = _at_c_sharp(cfg)
        except (WavefrontError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return INVALID
    return run_command(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
