"""Command-line surface: experiment orchestration and metrics emission.

Subcommands: dual-sim, dro, xc, pauc, bench-suite, verify.  Configuration is
accepted as flags and/or a plain-text file of ``section.key = value`` lines
(flags override the file).  Exit codes: 0 success, 2 config error, 3 data
error, 4 numerical error.

Metrics format: one ``<config_id>_<seed>.csv`` per run with header
``iteration,metric,value`` plus a ``summary.csv`` aggregating mean/std across
seeds per (config_id, metric, iteration).  Files are written atomically.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .core import StepSchedule
from .dataio import atomic_write_text, load_csv, least_squares_init, standardize
from .errors import ConfigError, DataError, NumericalError
from .optimizers import (DUAL_METHODS, OptimizerConfig, run_dual_cells, run_method)
from .problems import (gaussian_dual, kldro_problem, multiclass_ce_problem,
                       pauc_problem, synth_multiclass, synth_pauc)

METHOD_ALIASES = {"scgd": "sox"}


# ---------------------------------------------------------------------------
# metrics emission
# ---------------------------------------------------------------------------

def emit_metrics(records, output_dir) -> None:
    """Write per-run CSVs and the cross-seed summary.csv (atomic renames)."""
    try:
        os.makedirs(output_dir, exist_ok=True)
        for rec in records:
            lines = ["iteration,metric,value"]
            lines += [f"{it},{name},{value!r}" for it, _, name, value in rec.rows]
            atomic_write_text(os.path.join(output_dir, f"{rec.config_id}_{rec.seed}.csv"),
                              "\n".join(lines) + "\n")
        groups: dict = {}
        for rec in records:
            for it, _, name, value in rec.rows:
                groups.setdefault((rec.config_id, name, it), []).append(value)
        lines = ["config_id,metric,iteration,mean,std"]
        for (cid, name, it) in sorted(groups):
            vals = np.asarray(groups[(cid, name, it)])
            lines.append(f"{cid},{name},{it},{float(vals.mean())!r},{float(vals.std())!r}")
        atomic_write_text(os.path.join(output_dir, "summary.csv"), "\n".join(lines) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write metrics to {output_dir}: {exc}") from exc


def _write_table(path, header, rows) -> None:
    try:
        lines = [",".join(header)]
        lines += [",".join(str(c) for c in row) for row in rows]
        atomic_write_text(path, "\n".join(lines) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# optimizer-config assembly shared by the CERM experiments
# ---------------------------------------------------------------------------

def build_method_config(method, lr, total_steps, *, alpha=None, gamma=None, rho=None,
                        delta=None, batch_anchors=1, batch_inner=1, momentum=0.0,
                        reuse=True, clamp_dual=False, nu_init="from_first_batch",
                        w_init=None, lr_kind="cosine", config_id="") -> OptimizerConfig:
    """Translate flat experiment parameters into a validated OptimizerConfig."""
    method = METHOD_ALIASES.get(method, method)
    eta = StepSchedule(lr_kind, base=lr, horizon=total_steps)
    alpha_schedule = None
    if method in ("scent", "asgd", "asgd_softplus", "umax"):
        if alpha is None:
            raise ConfigError(f"{method} needs --alpha (or --log-alpha)")
        alpha_schedule = StepSchedule("constant", base=alpha)
    cfg = OptimizerConfig(
        method=method,
        eta_schedule=eta,
        alpha_schedule=alpha_schedule,
        batch_anchors=batch_anchors,
        batch_inner=batch_inner,
        momentum=momentum,
        total_steps=total_steps,
        softplus_rho=rho if method == "asgd_softplus" else None,
        umax_delta=delta if method == "umax" else None,
        sox_gamma=gamma if method == "sox" else None,
        nu_init=nu_init,
        reuse_inner_sample=reuse,
        clamp_dual=clamp_dual,
        w_init=w_init,
        config_id=config_id or method,
    )
    cfg.validate()
    return cfg


def _run_all(problem, configs, seeds, out_dir):
    """Fail-fast validation of every config, then the full (config, seed) grid."""
    for cfg in configs:
        cfg.validate(problem)
    records = []
    for cfg in configs:
        for seed in seeds:
            records.append(run_method(problem, cfg, seed))
    emit_metrics(records, out_dir)
    return records


def _final_summary(records, out_dir, filename="final_summary.csv"):
    finals: dict = {}
    for rec in records:
        finals.setdefault(rec.config_id, []).append(rec.last("objective"))
    rows = []
    for cid in sorted(finals):
        vals = np.asarray(finals[cid])
        rows.append((cid, len(vals), repr(float(vals.mean())), repr(float(vals.std()))))
    _write_table(os.path.join(out_dir, filename), ("config_id", "n_seeds", "mean", "std"), rows)
    return {cid: float(np.mean(v)) for cid, v in finals.items()}


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_dual_sim(args) -> dict:
    """Dual-only grid over (mu, sigma): proximal-mirror vs projected-SGD error.

    Emits per-run metrics plus ratio_summary.csv with the time-averaged
    squared-error ratio per cell (seed-averaged).
    """
    mus = args.mu
    sigmas = args.sigma
    log_alphas = args.spmd_log_alpha
    if log_alphas is None:
        # tuned rule behind the published per-mu values (-6 at mu=-1, 3 at mu=-10):
        # the proximal step size scales with exp(-mu)
        log_alphas = [-7.0 - mu for mu in mus]
    elif len(log_alphas) == 1:
        log_alphas = log_alphas * len(mus)
    if len(log_alphas) != len(mus):
        raise ConfigError("--spmd-log-alpha must have one value, or one per --mu")
    if args.steps < 1 or not args.seeds:
        raise ConfigError("need positive --steps and at least one seed")

    records = []
    finals: dict = {}
    for method in ("dual_spmd", "dual_sgd"):
        problems, seeds, alphas, ids, nu0s = [], [], [], [], []
        for mu, la in zip(mus, log_alphas):
            for sigma in sigmas:
                for seed in args.seeds:
                    problems.append(gaussian_dual(mu, sigma))
                    seeds.append(seed)
                    alphas.append(math.exp(la) if method == "dual_spmd" else args.sgd_alpha)
                    ids.append(f"dualsim_{method}_mu{mu:g}_sig{sigma:g}")
                    # default init sits one unit above the noiseless optimum so
                    # the cells are exact shifts of each other across mu
                    nu0s.append(args.nu0 if args.nu0 is not None else mu + 1.0)
        cfg = OptimizerConfig(method=method, alpha_schedule=StepSchedule("constant", base=1.0),
                              total_steps=args.steps, nu_init=0.0,
                              record_every=max(1, args.steps // 100))
        recs = run_dual_cells(problems, cfg, seeds, alphas=alphas, config_ids=ids,
                              nu_inits=nu0s)
        records.extend(recs)
        for rec in recs:
            finals.setdefault(rec.config_id, []).append(rec.last("avg_nu_err_sq"))
    emit_metrics(records, args.out)

    rows = []
    ratios = {}
    for mu in mus:
        for sigma in sigmas:
            spmd = float(np.mean(finals[f"dualsim_dual_spmd_mu{mu:g}_sig{sigma:g}"]))
            sgd = float(np.mean(finals[f"dualsim_dual_sgd_mu{mu:g}_sig{sigma:g}"]))
            ratios[(mu, sigma)] = spmd / sgd
            rows.append((repr(float(mu)), repr(float(sigma)), repr(spmd), repr(sgd), repr(spmd / sgd)))
    _write_table(os.path.join(args.out, "ratio_summary.csv"),
                 ("mu", "sigma", "spmd_sq_err", "sgd_sq_err", "ratio"), rows)
    return ratios


def _resolve_alpha(args):
    if getattr(args, "log_alpha", None) is not None:
        return math.exp(args.log_alpha)
    return getattr(args, "alpha", None)


def run_dro(args) -> dict:
    """KL-regularized DRO least squares from the least-squares start."""
    if not args.data:
        raise DataError("dro needs --data pointing at a regression CSV")
    data = load_csv(args.data, "regression")
    if args.standardize:
        data = standardize(data, normalize_targets=args.normalize_targets)
    a, b = least_squares_init(data)
    w_init = np.concatenate([a, [b]])
    problem = kldro_problem(data, args.tau)
    total_steps = args.epochs * problem.steps_per_epoch(1, args.batch)
    configs = []
    for method in args.method:
        configs.append(build_method_config(
            method, args.lr, total_steps, alpha=_resolve_alpha(args), gamma=args.gamma,
            rho=args.rho, delta=args.delta, batch_anchors=1, batch_inner=args.batch,
            momentum=args.momentum, w_init=w_init,
            config_id=f"dro_{METHOD_ALIASES.get(method, method)}_tau{args.tau:g}"))
    records = _run_all(problem, configs, args.seeds, args.out)
    return _final_summary(records, args.out)


def run_xc(args) -> dict:
    """Multiclass cross-entropy over fixed features, synthetic or CSV."""
    if args.data:
        data = load_csv(args.data, "classification")
        n_classes = args.classes or int(data.labels.max()) + 1
    else:
        data = synth_multiclass(args.n, args.d, args.classes, args.noise, args.data_seed)
        n_classes = args.classes
    problem = multiclass_ce_problem(data, n_classes, projection_radius=args.radius,
                                    in_batch=(args.sampling == "in-batch"))
    total_steps = args.epochs * problem.steps_per_epoch(args.batch, args.inner)
    configs = [build_method_config(
        method, args.lr, total_steps, alpha=_resolve_alpha(args), gamma=args.gamma,
        rho=args.rho, delta=args.delta, batch_anchors=args.batch, batch_inner=args.inner,
        momentum=args.momentum, reuse=(args.sampling == "in-batch"),
        config_id=f"xc_{METHOD_ALIASES.get(method, method)}")
        for method in args.method]
    records = _run_all(problem, configs, args.seeds, args.out)
    return _final_summary(records, args.out)


def run_pauc(args) -> dict:
    """One-way partial AUC surrogate training, synthetic or CSV."""
    if args.data:
        data = load_csv(args.data, "sign")
    else:
        data = synth_pauc(args.n_pos, args.n_neg, args.d, args.separation,
                          args.noise, args.data_seed)
    problem = pauc_problem(data, args.tau, margin=args.margin)
    total_steps = args.epochs * problem.steps_per_epoch(args.s_plus, args.s_minus)
    configs = [build_method_config(
        method, args.lr, total_steps, alpha=_resolve_alpha(args), gamma=args.gamma,
        rho=args.rho, delta=args.delta, batch_anchors=args.s_plus, batch_inner=args.s_minus,
        momentum=args.momentum,
        config_id=f"pauc_{METHOD_ALIASES.get(method, method)}_tau{args.tau:g}")
        for method in args.method]
    records = _run_all(problem, configs, args.seeds, args.out)
    return _final_summary(records, args.out)


def run_bench_suite(args) -> int:
    from . import bench
    results = bench.ordering_suite(args.out, seeds=tuple(args.seeds), quick=args.quick)
    for task, entry in sorted(results.items()):
        order = " <= ".join(f"{m}:{entry['finals'][m]:.6g}" for m in ("scent", "sox", "asgd"))
        status = "ordered" if entry["ordered"] else "NOT ordered"
        print(f"{task}: {status} ({order})")
    return 0


def run_verify(args) -> int:
    from . import verify
    results = verify.run_battery(quick=args.quick)
    failed = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# argument parsing and the section.key config file
# ---------------------------------------------------------------------------

def _int_list(text: str):
    return [int(v) for v in str(text).split(",") if v != ""]


def _float_list(text: str):
    return [float(v) for v in str(text).split(",") if v != ""]


def _str_list(text: str):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def load_config_file(path) -> dict:
    """Parse ``section.key = value`` lines; '#' starts a comment."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                values[key.split(".")[-1].replace("-", "_")] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _apply_config_file(parser, args, extra_argv):
    if not args.config:
        return args
    values = load_config_file(args.config)
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in actions:
            raise ConfigError(f"unknown config key {key!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction) or isinstance(action, argparse.BooleanOptionalAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            defaults[key] = action.type(raw)
        else:
            defaults[key] = raw
    parser.set_defaults(**defaults)
    return parser.parse_args(extra_argv)


def _add_common(p):
    p.add_argument("--config", default=None, help="plain-text 'section.key = value' file")
    p.add_argument("--out", default="out", help="output directory for metrics CSVs")
    p.add_argument("--seeds", type=_int_list, default=[0], help="comma-separated seed list")
    p.add_argument("--seed", type=int, default=None, help="single seed (overrides --seeds)")


def _add_cerm_common(p, default_methods):
    p.add_argument("--method", type=_str_list, default=default_methods,
                   help="comma-separated methods to run")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=None, help="dual step size")
    p.add_argument("--log-alpha", type=float, default=None, help="log of the dual step size")
    p.add_argument("--gamma", type=float, default=None, help="moving-average coefficient (sox/scgd)")
    p.add_argument("--rho", type=float, default=None, help="softplus approximation coefficient")
    p.add_argument("--delta", type=float, default=1.0, help="umax lag threshold")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--momentum", type=float, default=0.0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entrisk",
                                     description="entropic-risk optimization benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dual-sim", help="dual-only mirror-vs-SGD error grid")
    _add_common(p)
    p.add_argument("--mu", type=_float_list, default=[-1.0, -10.0])
    p.add_argument("--sigma", type=_float_list, default=[0.1, 0.3, 1.0])
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--sgd-alpha", type=float, default=1.0)
    p.add_argument("--spmd-log-alpha", type=_float_list, default=None,
                   help="one value per --mu entry, or a single shared value "
                        "(default: -7 - mu, the tuned scaling)")
    p.add_argument("--nu0", type=float, default=None,
                   help="absolute dual init (default: mu + 1 per cell)")
    p.set_defaults(func=run_dual_sim)

    p = sub.add_parser("dro", help="KL-regularized DRO least squares")
    _add_common(p)
    _add_cerm_common(p, ["scent"])
    p.add_argument("--data", required=False, default=None, help="regression CSV path")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--normalize-targets", action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=run_dro, epochs=300, momentum=0.9, lr=5e-6)

    p = sub.add_parser("xc", help="multiclass cross-entropy over fixed features")
    _add_common(p)
    _add_cerm_common(p, ["scent"])
    p.add_argument("--data", default=None, help="classification CSV path")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--classes", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.35)
    p.add_argument("--data-seed", type=int, default=7)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--inner", type=int, default=1, help="inner samples per anchor (uniform mode)")
    p.add_argument("--sampling", choices=("in-batch", "uniform"), default="in-batch")
    p.add_argument("--radius", type=float, default=None)
    p.set_defaults(func=run_xc)

    p = sub.add_parser("pauc", help="one-way partial AUC surrogate training")
    _add_common(p)
    _add_cerm_common(p, ["scent"])
    p.add_argument("--data", default=None, help="sign-labeled CSV path")
    p.add_argument("--n-pos", type=int, default=500)
    p.add_argument("--n-neg", type=int, default=4500)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.8)
    p.add_argument("--data-seed", type=int, default=11)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--s-plus", type=int, default=64)
    p.add_argument("--s-minus", type=int, default=64)
    p.set_defaults(func=run_pauc)

    p = sub.add_parser("bench-suite", help="tuned desk-scale method comparison")
    _add_common(p)
    p.set_defaults(seeds=[0, 1])
    p.add_argument("--quick", action="store_true", help="reduced grids and instance sizes")
    p.set_defaults(func=run_bench_suite)

    p = sub.add_parser("verify", help="run the oracle/property self-check battery")
    _add_common(p)
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=run_verify)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            command = args.command
            subparser = next(a for a in parser._actions
                             if isinstance(a, argparse._SubParsersAction)).choices[command]
            rest = argv.copy()
            rest.remove(command)
            args = _apply_config_file(subparser, args, rest)
            args.command = command
        if args.seed is not None:
            args.seeds = [args.seed]
        result = args.func(args)
        return result if isinstance(result, int) else 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
