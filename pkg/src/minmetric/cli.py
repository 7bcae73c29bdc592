"""Command-line runner: ``minmetric <subcommand> --config exp.yaml``.

Subcommands select which tasks of the config run: ``certify`` (certify, nss
and sin tasks), ``construct``, ``oneparam``, ``compare``, or ``report`` (all of
them, or re-render an existing machine report given with ``--input``).
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import platform
import sys
import time

import numpy as np

from . import __version__, kernels
from .config import build_metric, load_config, number, parse_config, resolve, task_items
from .errors import ConfigError
from .groups import FiniteGroup, IntegerLattice, MatrixGroup
from .report import (
    EXIT_CONFIG,
    FAILED,
    Report,
    ReportSchemaError,
    emit_machine,
    emit_text,
    parse_report,
    plain,
    summarise,
)

SUBCOMMAND_TASKS = {
    "certify": ("certify", "nss", "sin"),
    "construct": ("construct",),
    "oneparam": ("oneparam",),
    "compare": ("compare",),
    "report": None,
}


def versions():
    return {
        "minmetric": __version__,
        "numpy": np.__version__,
        "kernels": kernels.BACKEND,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------------------
# task runners; each returns (status, result dict)


def _truncation_elements(cfg, ctx):
    radius = (cfg.raw.get("truncation") or {}).get("radius")
    if radius is not None and isinstance(ctx, IntegerLattice) and ctx.d == 1:
        return [(x,) for x in range(-int(radius), int(radius) + 1) if x]
    return None


def _certify(cfg, ctx, d, p, seed):
    from . import certifier as C
    from .oneparam import check_sqrt_uniform_continuity

    cond = p["condition"]
    budget = cfg.budget
    elements = _truncation_elements(cfg, ctx)
    n_max = p.get("n_max")
    if p.get("fit"):
        cert = C.fit_constants(ctx, d, cond, budget=budget, seed=seed, n_max=n_max, elements=elements,
                               K_max=float(p.get("K_max", 16.0)))
    elif cond == "cond2":
        cert = C.check_condition2(ctx, d, float(p["U"]), n_max or C.DEFAULT_N_MAX, budget, seed, elements,
                                  bound_constant=float(p.get("bound_constant", 1.0)))
    elif cond == "cond3":
        cert = C.check_condition3(ctx, d, float(p["eps"]), float(p["K"]), n_max or C.DEFAULT_N_MAX, budget, seed,
                                  elements)
    elif cond == "cond4":
        cert = C.check_condition4(ctx, d, float(p["U"]), float(p["K"]), n_max or C.DEFAULT_DEPTH, budget, seed,
                                  elements)
    elif cond == "uniform_nss":
        cert = C.check_uniform_nss(ctx, d, float(p["U"]), budget, seed, n_max or C.DEFAULT_N_MAX, elements=elements)
    elif cond == "right_lipschitz":
        cert = C.check_right_lipschitz(ctx, d, float(p["V"]), budget, seed, elements)
    else:
        cert = check_sqrt_uniform_continuity(ctx, d, float(p["V"]), budget=int(p.get("pairs", 64 * budget)),
                                             seed=seed)
    return cert.verdict, cert.to_dict(ctx)


def _nss(cfg, ctx, d, p, seed):
    from .certifier import check_nss

    cert = check_nss(ctx, float(p["U"]), cfg.budget, d=d, seed=seed, elements=_truncation_elements(cfg, ctx))
    return cert.verdict, cert.to_dict(ctx)


def _sin(cfg, ctx, d, p, seed):
    from .certifier import check_local_sin

    cert = check_local_sin(ctx, d, float(p["O"]), cfg.budget, seed, elements=_truncation_elements(cfg, ctx))
    return cert.verdict, cert.to_dict(ctx)


def _construct(cfg, ctx, d, p, seed):
    scalars = {k: v for k, v in d.meta.items() if isinstance(v, (bool, int, float, str))}
    result = {"provenance": d.provenance, "bounded": d.bounded, "meta": scalars}
    if isinstance(ctx, FiniteGroup) and ctx.exhaustive:
        result["norms"] = d.norms(ctx.elements)
    elif "distances" in d.meta:
        result["norms"] = d.meta["distances"]
    for key in ("c", "C", "ratio", "sandwich_holds"):
        if key in d.meta:
            result[key] = d.meta[key]
    return "constructed", result


def _oneparam(cfg, ctx, d, p, seed):
    from .oneparam import build_root_chain, digit_bounds, eval_real, required_depth

    rng = np.random.default_rng(seed)
    if "f" in p:
        f = ctx.decode(p["f"])
    else:
        if not hasattr(ctx, "random_tangent"):
            raise ConfigError("tangent_norm needs a Lie group; give f explicitly", field="oneparam.f")
        f = ctx.exp(ctx.random_tangent(rng, float(p["tangent_norm"])))
    k = int(p.get("k", 1))
    tol = number(p.get("tol"), None)
    depth = int(p.get("depth", required_depth(tol, k) if tol else 20))
    chain = build_root_chain(ctx, d, f, k=k, depth=depth, V_radius=number(p.get("V_radius")))
    grid = p.get("alpha_grid", [-1.0, -0.5, 0.0, 0.25, 0.5, 1.0])
    if isinstance(grid, dict):
        grid = np.linspace(float(grid["start"]), float(grid["stop"]), int(grid["num"])).tolist()
    rows = []
    violations = 0
    max_error = None
    log_f = ctx.log(f) if isinstance(ctx, MatrixGroup) else None
    for a in grid:
        h = eval_real(chain, float(a), tol=tol)
        row = {"alpha": float(a), "distance": d.to_identity(h)}
        if log_f is not None:
            err = float(np.linalg.norm(h - ctx.exp(float(a) * log_f), 2))
            row["oracle_error"] = err
            max_error = err if max_error is None else max(max_error, err)
        if abs(a) < 1:
            b = digit_bounds(chain, d, a)
            ok = b["distance"] <= b["bound"] * (1 + 1e-12) and b["distance"] <= b["tail_bound"] * (1 + 1e-12)
            violations += int(not ok)
            row["bound"] = b["bound"]
            row["tail_bound"] = b["tail_bound"]
        rows.append(row)
    result = {"chain": chain.to_dict(), "evaluations": rows, "digit_bound_violations": violations}
    if max_error is not None:
        result["max_error"] = max_error
    within = tol is None or max_error is None or max_error <= tol
    status = "constructed" if violations == 0 and within else "refuted"
    return status, result


def _compare(cfg, ctx, d, p, seed):
    from .coarse import bilipschitz_constant, fit_quasi_isometry

    d1 = build_metric(cfg, ctx, p["d1"], "compare.d1")
    d2 = build_metric(cfg, ctx, p["d2"], "compare.d2")
    elements = _truncation_elements(cfg, ctx)
    qi = fit_quasi_isometry(ctx, d1, d2, budget=8 * cfg.budget, seed=seed, elements=elements)
    result = {"qi": qi.to_dict(), "K": qi.K, "C": qi.C}
    if "V_radius" in p and qi.verdict != "refuted":
        bl = bilipschitz_constant(ctx, d1, d2, float(p["V_radius"]), budget=8 * cfg.budget, seed=seed,
                                  elements=elements, qi=qi)
        result["bilipschitz"] = bl.to_dict()
        result["L"] = bl.L
    return qi.verdict, result


RUNNERS = {
    "certify": _certify,
    "nss": _nss,
    "sin": _sin,
    "construct": _construct,
    "oneparam": _oneparam,
    "compare": _compare,
}


def _run_one(cfg, ctx, d, index, kind, params):
    start = time.perf_counter()
    entry = {"index": index, "task": kind, "params": plain(params)}
    try:
        if "metric" in params:
            d = build_metric(cfg, ctx, params["metric"], f"tasks.{index}.{kind}.metric")
        status, result = RUNNERS[kind](cfg, ctx, d, params, cfg.seed + index)
        entry["status"] = status
        entry["result"] = plain(result)
    except ConfigError:
        raise
    except Exception as exc:  # recorded per task; the run continues
        entry["status"] = FAILED
        err = {"type": type(exc).__name__, "message": str(exc)}
        for attr in ("step", "ratio", "level", "lower_bound"):
            v = getattr(exc, attr, None)
            if v is not None:
                err[attr] = plain(v)
        entry["error"] = err
    return entry, time.perf_counter() - start


def run(cfg, only=None, parallel=False):
    """Execute the config's tasks in declared order and assemble a Report."""
    t0 = time.perf_counter()
    items = [(i, k, p) for i, (k, p) in enumerate(task_items(cfg)) if only is None or k in only]
    ctx = d = None
    if items:
        ctx, d = resolve(cfg)
    if parallel and len(items) > 1:
        with ThreadPoolExecutor() as pool:
            outs = list(pool.map(lambda it: _run_one(cfg, ctx, d, *it), items))
    else:
        outs = [_run_one(cfg, ctx, d, *it) for it in items]
    tasks = [e for e, _ in outs]
    return Report(
        config=plain(cfg.echo()),
        versions=versions(),
        tasks=tasks,
        summary=summarise(tasks),
        wall_clock={"total_s": time.perf_counter() - t0, "tasks_s": [round(s, 6) for _, s in outs]},
    )


def run_text(text, **kw):
    """Parse YAML text and run it (convenience for tests and notebooks)."""
    return run(parse_config(text), **kw)


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="minmetric", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_TASKS:
        sp = sub.add_parser(name, help=f"run {name} tasks" if name != "report" else "run all tasks or render a report")
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--budget", type=int, help="override the config budget")
        sp.add_argument("--format", choices=("machine", "text"), default="text",
                        help="what to print on stdout (default text)")
        sp.add_argument("--out", help="write the machine report here")
        sp.add_argument("--parallel", action="store_true", help="run independent tasks concurrently")
        if name == "report":
            sp.add_argument("--input", help="existing machine report to re-render instead of running")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report" and args.input:
            with open(args.input, "rb") as fh:
                report = parse_report(fh.read())
        else:
            if not args.config:
                raise ConfigError("--config is required", field="--config")
            cfg = load_config(args.config, {"seed": args.seed, "budget": args.budget})
            report = run(cfg, SUBCOMMAND_TASKS[args.command], args.parallel)
    except (ConfigError, ReportSchemaError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    machine = emit_machine(report)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(machine)
    if args.format == "machine":
        sys.stdout.write(machine.decode("utf-8"))
    else:
        sys.stdout.write(emit_text(report))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
