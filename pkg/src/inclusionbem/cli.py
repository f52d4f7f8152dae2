"""Command line: ``inclusionbem verify|solve|sweep --config PATH``.

Exit codes: 0 ok, 1 config error, 2 inadmissible geometry or probes,
3 violated assumption on F or G, 4 Newton failure, 5 too few samples for a
fit, 6 an enabled check failed.
"""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import checks as chk
from .config import DEFAULT_CONFIG, build_problem, epsilon_grid, load_config, probes, validate
from .errors import ConfigError, InclusionError, InsufficientDataError, NewtonError
from .parallel import set_threads
from .solution import (FAMILIES, boundary_residuals, check_probes, reconstruct, rescaled_inner,
                       sweep_and_fit)
from .system import continuation, zeta_identity_defect

CHECK_FAILED = 6

RATE_BOUNDS = {"inner_deviation": (0.9, 1.1), "macro_deviation": (0.9, 1.1), "inner_remainder": (1.8, 2.2)}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


class Run:
    """Output directory, file manifest and the report written at the end."""

    def __init__(self, command, out):
        self.command = command
        self.out = out
        self.files = []
        self.report = {"command": command, "epsilons": [], "checks": []}
        self.t0 = time.perf_counter()
        os.makedirs(out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def write_csv(self, name, header, rows):
        os.makedirs(os.path.dirname(self.path(name)), exist_ok=True)
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.files.append(name)

    def write_json(self, name, obj):
        os.makedirs(os.path.dirname(self.path(name)), exist_ok=True)
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=1, sort_keys=True)
            fh.write("\n")
        self.files.append(name)

    def check(self, c):
        self.report["checks"].append(c.as_dict())
        return c.passed

    def finish(self, code, message=None):
        self.report.update(exit_code=code, message=message, files=sorted(self.files),
                           seconds=time.perf_counter() - self.t0)
        with open(self.path("run_report.json"), "w") as fh:
            json.dump(self.report, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return code


# solve ---------------------------------------------------------------------------

def _write_branch(run, p, branch, traces, trace_rows=None):
    rows = []
    iters = {t.epsilon: len(t.rows) - 1 for t in traces}
    res = {t.epsilon: t.rows[-1][2] for t in traces}
    for e, q in branch:
        rows.append((e, q.zeta, float(np.abs(q.phi_o).max()), float(np.abs(q.phi_i).max()),
                     float(np.abs(q.psi).max()), res.get(e, float("nan")), iters.get(e, 0),
                     zeta_identity_defect(e, q, p)))
    run.write_csv("branch.csv", ["epsilon", "zeta", "phi_o_sup", "phi_i_sup", "psi_sup", "residual_sup",
                                 "newton_iterations", "zeta_identity_defect"], rows)
    if trace_rows is None:
        trace_rows = [row for t in traces for row in t.rows]
    run.write_csv("residuals.csv", ["epsilon", "iter", "residual_sup", "step_norm"], trace_rows)


def _solve(run, cfg):
    """Continuation plus per-eps outputs; returns (p, branch, all_checks_ok)."""
    p = build_problem(cfg)
    pr = probes(cfg)
    check_probes(p, pr, p.epsilons)
    run.report["zeta_i"] = p.zeta_i
    try:
        branch, traces = continuation(p)
    except NewtonError as err:
        _write_branch(run, p, err.branch, [], err.trace)
        run.report["epsilons"] = [{"epsilon": e, "converged": True} for e, _ in err.branch]
        raise
    _write_branch(run, p, branch, traces)
    ok = True
    values = []
    flags = cfg["checks"]
    for k, (e, q) in enumerate(branch):
        entry = {"epsilon": e, "converged": True, "zeta": q.zeta}
        if e > 0:
            b = reconstruct(e, q, p)
            if len(pr["inner"]):
                for j, v in enumerate(rescaled_inner(e, q, p, pr["inner"])):
                    values.append((e, "inner", j, v))
            if len(pr["omega_M"]):
                for j, v in enumerate(b.u_o_eps(pr["omega_M"])):
                    values.append((e, "omega_M", j, v))
            if flags["boundary_residuals"]:
                r = boundary_residuals(b)
                entry["boundary_residuals"] = r
                ok &= run.check(chk.Check(f"boundary residuals at eps = {e:.6g}", max(r.values()),
                                          flags["residual_tol"]))
        if flags["zeta_identity"]:
            ok &= run.check(chk.Check(f"zeta identity at eps = {e:.6g}", zeta_identity_defect(e, q, p), 1e-8))
        run.write_json(f"bundles/eps_{k:03d}.json",
                       {"epsilon": e, "zeta": q.zeta, "phi_o": q.phi_o.tolist(), "phi_i": q.phi_i.tolist(),
                        "psi": q.psi.tolist(), "boundary_residuals": entry.get("boundary_residuals")})
        run.report["epsilons"].append(entry)
    run.write_csv("values.csv", ["epsilon", "region", "probe_index", "value"], values)
    return p, branch, ok


def run_solve(cfg, out):
    run = Run("solve", out)
    return _guard(run, lambda: CHECK_FAILED if not _solve(run, cfg)[2] else 0)


# sweep ---------------------------------------------------------------------------

def run_sweep(cfg, out):
    run = Run("sweep", out)

    def body():
        degrees = sorted(set(cfg["fit"]["degrees"]))
        n_eps = sum(1 for e in epsilon_grid(cfg) if e > 0)
        if degrees and n_eps < degrees[-1] + 1:
            raise InsufficientDataError(f"insufficient samples: degree {degrees[-1]} needs "
                                        f"{degrees[-1] + 1} epsilon values, have {n_eps}")
        pr = probes(cfg)
        missing = [k for k, v in pr.items() if not len(v)]
        if missing:
            raise ConfigError(f"sweep needs probes for {', '.join(missing)}")
        p, branch, ok = _solve(run, cfg)
        res = sweep_and_fit(p, pr, degrees, branch)
        run.write_csv("sweep.csv", ["family", "probe_index", "epsilon", "value"], res.rows())
        run.write_json("fits.json", res.fits)
        rows = []
        for name, (lo, hi) in RATE_BOUNDS.items():
            s = res.slopes.get(name, float("nan"))
            rows.append((name, s, lo, hi, bool(lo <= s <= hi)))
            if cfg["checks"]["rates"]:
                ok &= run.check(chk.Check(f"rate {name} within [{lo}, {hi}]", abs(s - 0.5 * (lo + hi)),
                                          0.5 * (hi - lo)))
        run.write_csv("rates.csv", ["quantity", "slope", "lower", "upper", "within"], rows)
        run.report["slopes"] = res.slopes
        run.report["families"] = list(FAMILIES)
        return 0 if ok else CHECK_FAILED

    return _guard(run, body)


# verify --------------------------------------------------------------------------

def run_verify(cfg, out, seed=0):
    run = Run("verify", out)

    def body():
        p = build_problem(cfg)
        suites = chk.potential_suite(p.outer, seed) + chk.bvp_suite(p.outer, seed)
        if p.inner.describe() != p.outer.describe():
            suites += chk.potential_suite(p.inner, seed) + chk.bvp_suite(p.inner, seed)
        suites += chk.expr_suite(seed) + chk.system_suite(p, seed)
        ok = all([run.check(c) for c in suites])
        failed = [c.name for c in suites if not c.passed]
        run.write_json("verify_report.json", {"passed": ok, "failed": failed,
                                              "checks": [c.as_dict() for c in suites]})
        for name in failed:
            print(f"check failed: {name}", file=sys.stderr)
        return 0 if ok else CHECK_FAILED

    return _guard(run, body)


def _guard(run, body):
    try:
        code = body()
        return run.finish(code, None if code == 0 else "one or more checks failed")
    except InclusionError as err:
        prefix = {3: "assumption violated: ", 5: ""}.get(err.exit_code, "")
        msg = prefix + str(err)
        print(f"error: {msg}", file=sys.stderr)
        return run.finish(err.exit_code, msg)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="inclusionbem", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=["verify", "solve", "sweep"])
    ap.add_argument("--config", help="JSON run configuration (built-in default problem if omitted)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0, help="seed for the randomized verify checks")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else validate(DEFAULT_CONFIG)
        set_threads(args.threads)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    out = args.out or cfg["output"]
    if args.command == "verify":
        return run_verify(cfg, out, args.seed)
    if args.command == "solve":
        return run_solve(cfg, out)
    return run_sweep(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
