"""Command-line front end: ``freedisc run <config>``, ``freedisc list``, ``freedisc constants``.

Every experiment writes ``results.csv`` (17 significant digits),
``meta.txt`` (the resolved config, itself a valid config) and, where it
applies, ``summary.txt``. Exit codes: 0 ok, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from ._numerics import map_ordered
from .config import (Config, ConfigError, family_from, field_from, kernel_from, load,
                     parse_phi, parse_psi, registry_listing, signal_from)
from .energy1d import Signal1D, f_eps_1d
from .energynd import (Field2D, StencilQuadrature, f_eps_nd, mollifier_defect,
                       random_block_field)
from .errors import DomainError, UnsupportedError
from .families import (ProbePlan, _n_steps, fitted_cpt1, lambda_eval, mu_envelope,
                       probe_hypotheses, theta_bruteforce, theta_structured)
from .kernels import Kernel, c_pn, j_alpha, omega
from .limit import Sbv1D, limit_energy_1d, target_limit
from .minimizer import DenoiseProblem, eps_continuation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericFailure(RuntimeError):
    pass


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def csv_text(header: Sequence[str], rows) -> str:
    def cell(v):
        s = fmt(v)
        return f'"{s}"' if ("," in s or '"' in s) else s
    lines = [",".join(header)] + [",".join(cell(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def richardson(eps: Sequence[float], values: Sequence[float], order: float = 1.0) -> float:
    """Limit of ``L + c1 eps**p + c2 eps**(p+1)`` fitted through the last three points."""
    e = np.asarray(eps[-3:], dtype=float)
    v = np.asarray(values[-3:], dtype=float)
    if not np.all(np.isfinite(v)):
        return math.inf
    cols = [np.ones_like(e)] + [e ** (order + i) for i in range(e.size - 1)]
    return float(np.linalg.solve(np.column_stack(cols), v)[0])


def _summary_lines(extrap: float, target: float | None) -> list[str]:
    out = [f"extrapolated_limit = {fmt(extrap)}"]
    if target is not None:
        out.append(f"target = {fmt(target)}")
        if math.isfinite(target):
            err = abs(extrap - target)
            out.append(f"abs_error = {fmt(err)}")
            out.append(f"rel_error = {fmt(err / abs(target) if target else math.inf)}")
    return out


# -- experiments ---------------------------------------------------------------
# each returns (header, rows, summary lines, extra files {name: text})

def exp_sweep1d(cfg: Config):
    u = signal_from(cfg)
    fam = family_from(cfg)
    eps = cfg.eps_list()
    h = cfg.float("h") if cfg.has("h") else None
    omega_ = cfg.floats("omega") if cfg.has("omega") else None
    vals = map_ordered(lambda e: f_eps_1d(u, fam, e, omega_, h), eps)
    extrap = richardson(eps, vals, cfg.float("richardson_order", 1.0))
    target = None
    if isinstance(u, Sbv1D) and omega_ is None:
        phi_star, psi_star = fam.limits()
        target = limit_energy_1d(u, phi_star, psi_star)
    return ["eps", "value"], list(zip(eps, vals)), _summary_lines(extrap, target), {}


def exp_sweepnd(cfg: Config):
    u, desc = field_from(cfg)
    fam = family_from(cfg)
    k = kernel_from(cfg, 2)
    q = StencilQuadrature.build(k, cfg.float("xi_step") if cfg.has("xi_step") else None,
                                cfg.float("radius") if cfg.has("radius") else None)
    eps = cfg.eps_list()
    vals = map_ordered(lambda e: f_eps_nd(u, fam, k, e, q), eps)
    extrap = richardson(eps, vals, cfg.float("richardson_order", 1.0))
    weighting = cfg.str("jump_weighting", "projected")
    try:
        target = target_limit(fam, k, desc, weighting) if desc is not None else None
    except UnsupportedError as exc:
        raise ConfigError(f"key 'jump_weighting': {exc}") from None
    lines = _summary_lines(extrap, target) + [f"stencil_offsets = {len(q.offsets)}",
                                              f"stencil_weight = {fmt(q.total_weight)}",
                                              f"kernel_mass = {fmt(omega(k))}"]
    return ["eps", "value"], list(zip(eps, vals)), lines, {}


def exp_probe(cfg: Config):
    fam = family_from(cfg)
    kw = {}
    if cfg.has("probe_eps"):
        kw["eps"] = tuple(cfg.floats("probe_eps"))
    if cfg.has("probe_M"):
        kw["M"] = tuple(cfg.floats("probe_M"))
    try:
        rep = probe_hypotheses(fam, ProbePlan(**kw))
    except DomainError as exc:
        raise ConfigError(f"probe plan: {exc}") from None
    rows = [(r.name, r.status, r.detail, repr(r.witness) if r.witness else "")
            for r in rep.results.values()]
    return ["hypothesis", "status", "detail", "witness"], rows, rep.lines(), {}


def exp_envelope(cfg: Config):
    f, g = parse_phi(cfg.str("phi")), parse_psi(cfg.str("psi"))
    rep = mu_envelope(f, g, cfg.float("rmax", 3.0), cfg.int("samples", 201),
                      cfg.float("tol", 1e-8))
    lines = [f"rbar = {fmt(rep.rbar)}", f"convex_ok_below = {rep.convex_ok_below}",
             f"concave_ok_above = {rep.concave_ok_above}", f"monotone_ok = {rep.monotone_ok}"]
    return ["r", "mu"], rep.samples, lines, {}


def exp_theta(cfg: Config):
    fam = family_from(cfg)
    phi_star, psi_star = fam.limits()
    rows = []
    for a in cfg.floats("alpha", "0.5,1.0"):
        for b in cfg.floats("beta", "1.0"):
            lam = lambda_eval(phi_star, psi_star, a, b)
            for e in cfg.floats("eps", "0.5,0.1,0.02"):
                if e > b:
                    continue
                n = _n_steps(e, b)
                th = theta_structured(fam, e, a, b)
                bf = theta_bruteforce(fam, e, a, b) if n <= 4 else ""
                rows.append((a, b, e, n, th, bf, lam))
    header = ["alpha", "beta", "eps", "steps", "theta", "theta_bruteforce", "lambda"]
    return header, rows, [f"rows = {len(rows)}"], {}


def exp_compactness(cfg: Config):
    fam = family_from(cfg)
    k = kernel_from(cfg, 2)
    q = StencilQuadrature.build(k, cfg.float("xi_step", 0.25))
    rng = np.random.default_rng(cfg.int("seed", 0))
    deltas = cfg.floats("delta", "0.1,0.05")
    ks = [int(v) for v in cfg.floats("k", "2,3")]
    count = cfg.int("fields", 5)
    nodes, step = cfg.int("nodes", 81), cfg.float("step", 1.0 / 80)
    M = 2.0 * cfg.float("amplitude", 1.0)
    plan_eps = tuple(np.geomspace(min(deltas) * q.step / 2, max(deltas) * max(ks) * k.radius, 13))
    rep = probe_hypotheses(fam, ProbePlan(eps=plan_eps, M=(M,)))
    try:
        H, K = fitted_cpt1(rep, M)
    except DomainError as exc:
        raise NumericFailure(f"lower linear bound not established: {exc}") from None
    rows, worst_ratio, worst_gap = [], 0.0, -math.inf
    for i in range(count):
        u = random_block_field(rng, nodes, step, amplitude=cfg.float("amplitude", 1.0))
        for d in deltas:
            lhs, rhs = mollifier_defect(u, fam, k, d, H, K, q)
            base = f_eps_nd(u, fam, k, d, q)
            worst_ratio = max(worst_ratio, lhs / rhs)
            for m in ks:
                ek = f_eps_nd(u, fam, k, m * d, q)
                worst_gap = max(worst_gap, (ek - base) / (1.0 + base))
                rows.append((i, d, lhs, rhs, m, ek, base))
    lines = [f"H = {fmt(H)}", f"K = {fmt(K)}", f"max_defect_ratio = {fmt(worst_ratio)}",
             f"max_scaled_increase = {fmt(worst_gap)}"]
    header = ["field", "delta", "mollifier_defect", "defect_bound", "k", "energy_k_delta",
              "energy_delta"]
    return header, rows, lines, {}


def _noisy_data(cfg: Config):
    rng = np.random.default_rng(cfg.int("seed", 0))
    noise = cfg.float("noise", 0.1)
    if cfg.has("field"):
        u, _ = field_from(cfg)
        return u.with_samples(u.samples + noise * rng.uniform(-1, 1, u.shape)), 2
    sig = signal_from(cfg)
    if isinstance(sig, Sbv1D):
        a, b = sig.window
        sig = Signal1D.from_function(sig, a, b, cfg.int("samples", 128))
    return sig.with_samples(sig.samples + noise * rng.uniform(-1, 1, sig.samples.size)), 1


def exp_denoise(cfg: Config):
    data, dim = _noisy_data(cfg)
    fam = family_from(cfg)
    k = kernel_from(cfg, dim)
    schedule = cfg.eps_list("eps_schedule", cfg.str("eps", "0.05"))
    try:
        p = DenoiseProblem(data, fam, k, schedule[0], cfg.float("kappa", 50.0),
                           StencilQuadrature.build(k, cfg.float("xi_step") if cfg.has("xi_step") else None))
    except (DomainError, UnsupportedError) as exc:
        raise ConfigError(f"denoise problem: {exc}") from None
    st = eps_continuation(p, schedule, cfg.int("max_iters", 500), cfg.float("grad_tol", 1e-8))
    if not np.all(np.isfinite(st.u)):
        raise NumericFailure("iterate contains NaN")
    rows = [(i, e, g) for i, (e, g) in enumerate(zip(st.energies, st.grad_norms))]
    rec = st.records
    lines = [f"status = {','.join(rec['status'])}", f"iterations = {st.iterations}",
             f"final_energy = {fmt(st.energies[-1])}", f"energy_bound = {fmt(rec['bound'])}"]
    lines += [f"l1_step_{i} = {fmt(v)}" for i, v in enumerate(rec["l1_steps"])]
    out = data.with_samples(st.u)
    extra = {}
    if dim == 1:
        extra["minimizer.csv"] = csv_text(["x", "u"], zip(out.grid, out.samples))
        jump = int(np.argmax(np.abs(np.diff(st.u))))
        lines.append(f"largest_step_after_index = {jump}")
    else:
        extra["minimizer.field"] = out
    if "step_underflow" in rec["status"]:
        raise NumericFailure("line search step underflow: " + "\n".join(lines))
    return ["iteration", "energy", "grad_norm"], rows, lines, extra


def constants_rows(k: Kernel, alphas=(1.0, 2.0, 3.0)) -> list[tuple[str, float]]:
    rows = [(f"c_p{p:g}_n{k.n}", c_pn(p, k.n)) for p in (0.0, 1.0, 2.0)]
    rows += [(f"j_{a:g}", j_alpha(k, a)) for a in sorted(set(alphas) | {k.n + k.weight})]
    rows.append(("omega", omega(k)))
    return rows


def exp_constants(cfg: Config):
    k = kernel_from(cfg, cfg.int("n", 2))
    alphas = tuple(cfg.floats("alpha", "1,2,3"))
    return ["quantity", "value"], constants_rows(k, alphas), [], {}


EXPERIMENTS = {
    "compactness": exp_compactness,
    "constants": exp_constants,
    "denoise": exp_denoise,
    "envelope": exp_envelope,
    "probe": exp_probe,
    "sweep1d": exp_sweep1d,
    "sweepnd": exp_sweepnd,
    "theta": exp_theta,
}


def run(path: str, out_dir: str | None = None) -> int:
    """Run the experiment in ``path``; returns the exit code."""
    try:
        cfg = load(path)
        kind = cfg.str("experiment")
        if kind not in EXPERIMENTS:
            raise ConfigError(f"key 'experiment': unknown experiment {kind!r} "
                              f"(known: {', '.join(sorted(EXPERIMENTS))})")
        default_out = os.path.splitext(path)[0] + "_out"
        out = out_dir or cfg.str("output", default_out)
        header, rows, summary, extra = EXPERIMENTS[kind](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, UnsupportedError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    numeric_ok = all(not (isinstance(v, float) and math.isnan(v)) for r in rows for v in r)
    os.makedirs(out, exist_ok=True)
    _atomic(os.path.join(out, "results.csv"), csv_text(header, rows))
    meta = [f"# freedisc {__version__}"]
    meta += [f"{k} = {v}" for k, v in cfg.resolved().items() if k != "output"]
    _atomic(os.path.join(out, "meta.txt"), "\n".join(meta) + "\n")
    if summary:
        _atomic(os.path.join(out, "summary.txt"), "\n".join(summary) + "\n")
    for name, obj in extra.items():
        target = os.path.join(out, name)
        if isinstance(obj, Field2D):
            obj.save_csv(target + ".csv")
        else:
            _atomic(target, obj)
    if not numeric_ok:
        print("numeric failure: NaN in results", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="freedisc",
                                 description="Finite-difference free-discontinuity lab.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the 'output' key)")
    sub.add_parser("list", help="list built-in names")
    c = sub.add_parser("constants", help="sphere constants and kernel moments")
    c.add_argument("--kernel", default="indicator:1")
    c.add_argument("--n", type=int, default=2)
    c.add_argument("--weight", type=float, default=0.0)
    args = ap.parse_args(argv)
    if args.cmd == "run":
        return run(args.config, args.out)
    if args.cmd == "list":
        sys.stdout.write(registry_listing())
        return EXIT_OK
    try:
        k = kernel_from(Config({"kernel": args.kernel, "kernel_weight": repr(args.weight)}), args.n)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(csv_text(["quantity", "value"], constants_rows(k)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
