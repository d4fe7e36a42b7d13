"""Self-check battery behind the ``verify`` subcommand.

Each check returns (name, passed, detail).  The battery exercises the
closed-form/oracle agreements, boundedness and recovery properties, and the
determinism contract without requiring pytest at runtime.
"""

from __future__ import annotations

import math

import numpy as np

from . import oracle
from .core import ALPHA_INF, StepSchedule, run_rng, sample_batch
from .dual import bregman_exp, logmeanexp, spmd_step
from .optimizers import OptimizerConfig, bsgd_run, dual_only_run, run_method, scent_run, sox_run, umax_run
from .problems import multiclass_ce_problem, gaussian_dual, synth_multiclass


def _small_problem(radius=1.0, in_batch=False):
    data = synth_multiclass(60, 6, 8, 0.4, seed=3)
    return multiclass_ce_problem(data, 8, projection_radius=radius, in_batch=in_batch)


def _check_prox_closed_form(quick):
    rng = run_rng(12, 0)
    n = 200 if quick else 1000
    worst = 0.0
    for _ in range(n):
        nu_prev = rng.uniform(-5, 5)
        s = rng.uniform(-5, 5)
        alpha = math.exp(rng.uniform(math.log(1e-3), math.log(1e3)))
        worst = max(worst, abs(spmd_step(nu_prev, s, alpha) - oracle.prox_bruteforce(nu_prev, s, alpha)))
    return worst < 1e-8, f"max |closed-form - bisection| = {worst:.2e}"


def _check_bregman(quick):
    rng = run_rng(13, 0)
    a = rng.uniform(-20, 20, size=2000 if quick else 10_000)
    b = rng.uniform(-20, 20, size=a.size)
    vals = bregman_exp(a, b)
    ok = bool(np.all(vals >= 0) and np.all(bregman_exp(a, a) == 0))
    return ok, f"min D = {vals.min():.2e}"

def _check_convex_combination(quick):
    rng = run_rng(14, 0)
    nu_prev = rng.uniform(-5, 5, size=2000)
    s = rng.uniform(-5, 5, size=2000)
    alpha = np.exp(rng.uniform(-6, 6, size=2000))
    out = spmd_step(nu_prev, s, alpha)
    lo = np.minimum(nu_prev, s) - 1e-12
    hi = np.maximum(nu_prev, s) + 1e-12
    ok = bool(np.all(out >= lo) and np.all(out <= hi))
    return ok, "exp(nu_t) stays inside the hull of {exp(nu_prev), exp(s)}"


def _check_erm_identity(quick):
    problem = gaussian_dual(1.0, 0.5)
    steps = 2000 if quick else 20_000
    cfg = OptimizerConfig(method="dual_spmd", alpha_schedule=StepSchedule("erm_rate"),
                          total_steps=steps, nu_init=0.0, record_every=steps)
    worst = 0.0
    for seed in (0, 1, 2):
        rec = dual_only_run(problem, cfg, seed)
        z = np.exp(problem.sample_s(run_rng(seed, 0), steps))
        target = math.log(z.mean())
        worst = max(worst, abs(rec.last("obj_gap") - problem.objective_gap(target)))
    return worst < 1e-10, f"max |gap(run) - gap(log running mean)| = {worst:.2e}"


def _check_bounded_dual(quick):
    problem = _small_problem(radius=1.0)
    steps = 500 if quick else 3000
    c0, c1 = problem.bounds
    ok = True
    for method, kwargs in (("scent", dict(alpha_schedule=StepSchedule("constant", base=0.5))),
                           ("sox", dict(sox_gamma=0.5))):
        cfg = OptimizerConfig(method=method, eta_schedule=StepSchedule("constant", base=0.05),
                              batch_anchors=8, batch_inner=4, total_steps=steps, **kwargs)
        rec = run_method(problem, cfg, 5)
        ok = ok and rec.last("nu_min") >= c0 - 1e-12 and rec.last("nu_max") <= c1 + 1e-12
    return ok, f"all dual iterates within [{c0:.3f}, {c1:.3f}] +- 1e-12"


def _check_recoveries(quick):
    problem = _small_problem(radius=None)
    steps = 100 if quick else 500
    eta = StepSchedule("constant", base=0.05)
    common = dict(eta_schedule=eta, batch_anchors=6, batch_inner=3,
                  total_steps=steps, reuse_inner_sample=True)
    scent_inf = scent_run(problem, OptimizerConfig(
        method="scent", alpha_schedule=StepSchedule("infinite"), **common), 7)
    bsgd = bsgd_run(problem, OptimizerConfig(method="bsgd", **common), 7)
    gap_a = _series_gap(scent_inf, bsgd)

    gp = 0.6
    scent_sox = scent_run(problem, OptimizerConfig(
        method="scent", alpha_schedule=StepSchedule("sox_rate", gamma_prime=gp), **common), 7)
    sox = sox_run(problem, OptimizerConfig(method="sox", sox_gamma=gp / (1 + gp), **common), 7)
    gap_b = _series_gap(scent_sox, sox)

    umax0 = umax_run(problem, OptimizerConfig(
        method="umax", umax_delta=0.0, alpha_schedule=StepSchedule("constant", base=0.1),
        clamp_dual=False, **common), 7)
    gap_c = _series_gap(umax0, bsgd)
    ok = max(gap_a, gap_b, gap_c) < 1e-10
    return ok, f"max trajectory deviation = {max(gap_a, gap_b, gap_c):.2e}"


def _series_gap(rec_a, rec_b, metric="objective"):
    _, va = rec_a.series(metric)
    _, vb = rec_b.series(metric)
    return float(np.max(np.abs(va - vb)))


def _check_determinism(quick):
    problem = _small_problem(radius=1.0)
    cfg = OptimizerConfig(method="scent", eta_schedule=StepSchedule("constant", base=0.05),
                          alpha_schedule=StepSchedule("constant", base=0.5),
                          batch_anchors=8, batch_inner=2, total_steps=200)
    a = scent_run(problem, cfg, 11).comparable_rows()
    b = scent_run(problem, cfg, 11).comparable_rows()
    return a == b, "replayed run rows are bitwise identical"


def _check_gradients(quick):
    problem = _small_problem(radius=None)
    rng = run_rng(15, 0)
    w = rng.normal(size=problem.dim) * 0.3
    anchors, zeta, _ = sample_batch(problem, 4, rng, 2)
    base = problem.loss_values(w, anchors, zeta)
    worst = 0.0
    for _ in range(5):
        direction = rng.normal(size=problem.dim)
        direction /= np.linalg.norm(direction)
        h = 1e-5 * (1.0 + np.abs(w).max())
        plus = problem.loss_values(w + h * direction, anchors, zeta)
        minus = problem.loss_values(w - h * direction, anchors, zeta)
        fd = (plus - minus).sum() / (2 * h)
        coef = np.ones_like(base)
        analytic = float(problem.weighted_grad(w, anchors, zeta, coef) @ direction)
        worst = max(worst, abs(fd - analytic) / (1.0 + abs(analytic)))
    return worst < 1e-5, f"max directional-derivative error = {worst:.2e}"


def _check_joint_identity(quick):
    problem = _small_problem(radius=None)
    rng = run_rng(16, 0)
    worst = 0.0
    for _ in range(20):
        w = rng.normal(size=problem.dim) * 0.2
        nu_star = oracle.dual_optimum(problem, w)
        worst = max(worst, abs(oracle.full_joint_objective(problem, w, nu_star) - 1.0
                               - oracle.full_objective(problem, w)))
    return worst < 1e-10, f"max |joint(w, nu*(w)) - 1 - primal(w)| = {worst:.2e}"


def _check_sampling_marginals(quick):
    problem = _small_problem(radius=None)
    rng = run_rng(17, 0)
    n, batch = problem.n_anchors, 4
    trials = 5000 if quick else 20_000
    counts = np.zeros(n)
    for _ in range(trials):
        anchors = rng.choice(n, size=batch, replace=False)
        counts[anchors] += 1
    p = batch / n
    se = math.sqrt(trials * p * (1 - p))
    dev = float(np.max(np.abs(counts - trials * p)))
    return dev <= 6 * se, f"max anchor-count deviation = {dev:.1f} (6 sigma = {6 * se:.1f})"


CHECKS = [
    ("prox_closed_form", _check_prox_closed_form),
    ("bregman_divergence", _check_bregman),
    ("spmd_convex_combination", _check_convex_combination),
    ("erm_rate_identity", _check_erm_identity),
    ("bounded_dual", _check_bounded_dual),
    ("recovery_equalities", _check_recoveries),
    ("determinism", _check_determinism),
    ("loss_gradients", _check_gradients),
    ("joint_dual_identity", _check_joint_identity),
    ("sampling_marginals", _check_sampling_marginals),
]


def run_battery(quick: bool = False):
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(quick)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
