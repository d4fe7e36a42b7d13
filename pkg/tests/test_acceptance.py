"""Acceptance criteria A1-A12, one test per criterion.

Each test prints a `[A#] PASS -- detail` line (run with `-s` to stream them)
and enforces the stated tolerances and runtime limits.  A7's absolute-value
targets need the real housing CSV (see README data section); without it the
ordering clause runs on the documented synthetic stand-in and the absolute
clause is reported as skipped.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from entrisk.cli import run_dual_sim
from entrisk.core import (ConvergenceBound, StepSchedule, TRAIN_STREAM, run_rng,
                          sample_batch)
from entrisk.dataio import least_squares_init, load_csv, standardize
from entrisk.dual import bregman_exp, erm_rate_state, spmd_step
from entrisk.optimizers import (OptimizerConfig, asgd_run, bsgd_run, run_dual_cells,
                                run_method, scent_run, sox_run, umax_run)
from entrisk.oracle import (dual_optimum, erm_gap_bound, full_joint_gradient,
                            full_joint_objective, prox_bruteforce, spmd_bound)
from entrisk.problems import (gaussian_dual, hard_instance_pair, hard_instance_separation,
                              kldro_problem, multiclass_ce_problem, pauc_problem,
                              synth_multiclass, synth_pauc, synth_regression)
from entrisk import bench

from conftest import check_gradients, random_w_in_ball

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


def _report(tag, detail):
    print(f"[{tag}] PASS -- {detail}")


def _bounded_xc():
    data = synth_multiclass(60, 6, 8, 0.4, seed=3)
    return multiclass_ce_problem(data, 8, projection_radius=1.0)


def _bounded_pauc():
    data = synth_pauc(20, 90, 5, 1.0, 0.7, seed=5)
    return pauc_problem(data, tau=0.5, margin=0.5, projection_radius=1.5)


def _free_dro():
    return kldro_problem(synth_regression(120, 4, 0.5, seed=9), tau=1.0,
                         projection_radius=3.0)


def test_a1_proximal_closed_form():
    start = time.perf_counter()
    rng = run_rng(1001, 0)
    worst = 0.0
    for _ in range(1000):
        nu_prev = rng.uniform(-5, 5)
        s = rng.uniform(-5, 5)
        alpha = math.exp(rng.uniform(math.log(1e-3), math.log(1e3)))
        worst = max(worst, abs(spmd_step(nu_prev, s, alpha)
                               - prox_bruteforce(nu_prev, s, alpha)))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-8
    assert elapsed < 5.0
    _report("A1", f"max |closed form - bisection| = {worst:.2e} over 1000 triples "
                  f"({elapsed:.2f}s)")


def test_a2_dual_boundedness():
    start = time.perf_counter()
    details = []
    for problem, batch, inner in ((_bounded_xc(), 8, 4), (_bounded_pauc(), 6, 8)):
        c0, c1 = problem.bounds
        for method, kw in (("scent", dict(alpha_schedule=StepSchedule("constant", base=0.5))),
                           ("sox", dict(sox_gamma=0.4))):
            cfg = OptimizerConfig(method=method, eta_schedule=StepSchedule("constant", base=0.02),
                                  batch_anchors=batch, batch_inner=inner,
                                  total_steps=10_000, **kw)
            rec = run_method(problem, cfg, 17)
            lo, hi = rec.last("nu_min"), rec.last("nu_max")
            assert lo >= c0 - 1e-12 and hi <= c1 + 1e-12
            details.append(f"{method}: [{lo:.3f}, {hi:.3f}] in [{c0:.3f}, {c1:.3f}]")
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report("A2", "; ".join(details) + f" ({elapsed:.1f}s)")


def test_a3_erm_rate_identity():
    start = time.perf_counter()
    problem = gaussian_dual(1.0, 0.5)
    steps, n_seeds = 100_000, 10
    s = np.stack([problem.sample_s(run_rng(seed, TRAIN_STREAM), steps)
                  for seed in range(n_seeds)])
    target = np.log(np.cumsum(np.exp(s), axis=1) / np.arange(1, steps + 1))
    nu = np.zeros(n_seeds)
    worst = 0.0
    for t in range(1, steps + 1):
        nu = spmd_step(nu, s[:, t - 1], erm_rate_state(nu, t))
        ref = target[:, t - 1]
        rel = float(np.max(np.abs(nu - ref) / np.maximum(1.0, np.abs(ref))))
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    assert worst <= 1e-10
    assert elapsed < 10.0
    _report("A3", f"max relative deviation from log running mean = {worst:.2e} "
                  f"over {steps} steps x {n_seeds} seeds ({elapsed:.1f}s)")


def test_a4_error_ratio_grid(tmp_path):
    import types
    start = time.perf_counter()
    mus, sigmas = [-1.0, -10.0], [0.1, 0.3, 1.0]
    args = types.SimpleNamespace(mu=mus, sigma=sigmas, steps=1_000_000, seeds=[0],
                                 sgd_alpha=1.0, spmd_log_alpha=[-6.0, 3.0], nu0=None,
                                 out=str(tmp_path))
    ratios = run_dual_sim(args)
    for mu in mus:
        row = [ratios[(mu, s)] for s in sigmas]
        assert row[0] > row[1] > row[2], f"ratio not decreasing in sigma at mu={mu}: {row}"
    for sigma in sigmas:
        a, b = ratios[(-1.0, sigma)], ratios[(-10.0, sigma)]
        assert max(a, b) / min(a, b) < 2.0
    elapsed = time.perf_counter() - start
    _report("A4", "ratios " + ", ".join(
        f"(mu={mu:g}, sig={s:g}): {ratios[(mu, s)]:.2e}" for mu in mus for s in sigmas)
        + f" ({elapsed:.0f}s)")


_RATE_TS = (100, 1000, 10_000, 100_000)
_RATE_SEEDS = list(range(200))


def test_a5_erm_rate_kappa_over_t():
    start = time.perf_counter()
    problem = gaussian_dual(0.0, 0.5)
    means = []
    for T in _RATE_TS:
        cfg = OptimizerConfig(method="dual_spmd", alpha_schedule=StepSchedule("erm_rate"),
                              total_steps=T, nu_init=2.0, record_every=T)
        recs = run_dual_cells([problem] * len(_RATE_SEEDS), cfg, _RATE_SEEDS)
        gaps = np.array([r.last("obj_gap") for r in recs])
        mean, se = gaps.mean(), gaps.std(ddof=1) / math.sqrt(gaps.size)
        bound = erm_gap_bound(problem.stats, 0.5, T)
        assert mean <= bound + 3 * se, f"T={T}: mean {mean} above bound {bound}"
        means.append(mean)
    slope = float(np.polyfit(np.log(_RATE_TS), np.log(means), 1)[0])
    assert -1.2 <= slope <= -0.8
    elapsed = time.perf_counter() - start
    _report("A5", f"log-log slope {slope:.3f}; mean gaps "
                  + ", ".join(f"{m:.2e}" for m in means) + f" ({elapsed:.0f}s)")


def test_a6_constant_alpha_sqrt_t():
    start = time.perf_counter()
    problem = gaussian_dual(0.0, 0.5)
    stats = problem.stats
    c0, c1 = problem.clamp_bounds
    bound_const = ConvergenceBound.from_range(rho=1.0, c0=c0, c1=c1, m=stats.m,
                                              kappa=stats.kappa)
    nu0 = c1
    d0 = float(bregman_exp(stats.nu_star, nu0))
    means = []
    for T in _RATE_TS:
        alpha = math.sqrt(d0 * stats.m / (2.0 * bound_const.big_c * T * stats.var_z))
        assert alpha <= stats.m / (4.0 * bound_const.big_c * stats.var_z)
        cfg = OptimizerConfig(method="dual_spmd",
                              alpha_schedule=StepSchedule("constant", base=alpha),
                              total_steps=T, nu_init=nu0, record_every=T)
        recs = run_dual_cells([problem] * len(_RATE_SEEDS), cfg, _RATE_SEEDS)
        gaps = np.array([r.last("avg_obj_gap") for r in recs])
        mean, se = gaps.mean(), gaps.std(ddof=1) / math.sqrt(gaps.size)
        bound = spmd_bound(bound_const, nu0, T)
        assert mean <= bound + 3 * se, f"T={T}: time-averaged gap {mean} above {bound}"
        means.append(mean)
    slope = float(np.polyfit(np.log(_RATE_TS), np.log(means), 1)[0])
    assert -0.65 <= slope <= -0.35
    elapsed = time.perf_counter() - start
    _report("A6", f"log-log slope {slope:.3f}; averaged gaps "
                  + ", ".join(f"{m:.2e}" for m in means) + f" ({elapsed:.0f}s)")


def _dro_final_objectives(data, method, lr, alpha, seeds, tau=1.0):
    data = standardize(data)  # features only: the housing reproduction assumption
    a, b = least_squares_init(data)
    w0 = np.concatenate([a, [b]])
    problem = kldro_problem(data, tau)
    total = 300 * problem.steps_per_epoch(1, 100)
    kw = dict(method=method, eta_schedule=StepSchedule("cosine", base=lr, horizon=total),
              batch_anchors=1, batch_inner=100, momentum=0.9, total_steps=total,
              reuse_inner_sample=True, w_init=w0, config_id=f"a7_{method}")
    if method == "scent":
        kw["alpha_schedule"] = StepSchedule("constant", base=alpha)
    cfg = OptimizerConfig(**kw)
    return np.array([run_method(problem, cfg, seed).last("objective") for seed in seeds])


def test_a7_dro_table_reproduction():
    start = time.perf_counter()
    seeds = range(10)
    real = DATA_DIR / "california_housing.csv"
    if real.exists():
        data = load_csv(real, "regression")
        scent = _dro_final_objectives(data, "scent", 5e-6, math.exp(-4.0), seeds)
        bsgd = _dro_final_objectives(data, "bsgd", 5e-6, None, seeds)
        assert abs(scent.mean() - 2.001) <= 0.05 * 2.001, scent.mean()
        assert abs(bsgd.mean() - 3.175) <= 0.10 * 3.175, bsgd.mean()
        assert scent.mean() <= bsgd.mean()
        detail = (f"california tau=1.0: scent {scent.mean():.3f} (target 2.001), "
                  f"bsgd {bsgd.mean():.3f} (target 3.175)")
    else:
        data = synth_regression(20640, 8, 0.55, seed=77)
        scent = _dro_final_objectives(data, "scent", 5e-6, math.exp(-4.0), seeds)
        bsgd = _dro_final_objectives(data, "bsgd", 5e-6, None, seeds)
        assert scent.mean() <= bsgd.mean()
        detail = (f"housing CSV absent: absolute targets skipped; synthetic stand-in "
                  f"ordering scent {scent.mean():.4f} +- {scent.std():.4f} <= "
                  f"bsgd {bsgd.mean():.4f} +- {bsgd.std():.4f}")
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    _report("A7", detail + f" ({elapsed:.0f}s)")


def _frozen_estimator_check(problem, seed, n_draws=100_000, batch=4, inner=2):
    rng = run_rng(seed, 0)
    w = 0.3 * random_w_in_ball(rng, problem.dim, problem.projection_radius or 1.0)
    nu = dual_optimum(problem, w) + 0.1
    batch = min(batch, problem.n_anchors)
    target = full_joint_gradient(problem, w, nu)
    acc = np.zeros(problem.dim)
    acc_sq = np.zeros(problem.dim)
    for _ in range(n_draws):
        anchors, _, zeta_p = sample_batch(problem, batch, rng, inner)
        s = problem.loss_values(w, anchors, zeta_p)
        coef = np.exp(s - nu[anchors][:, None]) / (batch * inner)
        z = problem.weighted_grad(w, anchors, zeta_p, coef)
        acc += z
        acc_sq += z * z
    mean = acc / n_draws
    se = np.sqrt(np.maximum(acc_sq / n_draws - mean**2, 0.0) / n_draws)
    dev = np.abs(mean - target) / np.maximum(se, 1e-12)
    return float(dev.max())


def test_a8_gradient_fidelity():
    start = time.perf_counter()
    xc = _bounded_xc()
    pauc = _bounded_pauc()
    dro = _free_dro()

    def pauc_kink(problem, w, anchor, inner_id):
        u = problem.neg[inner_id] @ w - problem.pos[anchor] @ w
        return abs(problem.margin + u) < 1e-4

    check_gradients(xc, run_rng(2001), n_points=20)
    check_gradients(pauc, run_rng(2002), n_points=20, skip=pauc_kink)
    check_gradients(dro, run_rng(2003), n_points=20)

    devs = [_frozen_estimator_check(xc, 2004),
            _frozen_estimator_check(pauc, 2005, inner=3),
            _frozen_estimator_check(dro, 2006, batch=1, inner=20)]
    assert max(devs) <= 3.0, devs
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report("A8", f"finite differences <= 1e-5 on 3 problems; frozen-state estimator "
                  f"max |dev|/SE = {max(devs):.2f} over 1e5 draws ({elapsed:.0f}s)")


def test_a9_joint_convexity():
    start = time.perf_counter()
    worst = -math.inf
    for problem in (_bounded_xc(), _bounded_pauc(), _free_dro()):
        rng = run_rng(2101)
        anchors_nu = problem.n_anchors
        for _ in range(10_000):
            w1 = random_w_in_ball(rng, problem.dim, 0.5)
            w2 = random_w_in_ball(rng, problem.dim, 0.5)
            base = dual_optimum(problem, 0.5 * (w1 + w2))
            nu1 = base + rng.uniform(-1.0, 1.0, size=anchors_nu)
            nu2 = base + rng.uniform(-1.0, 1.0, size=anchors_nu)
            mid = full_joint_objective(problem, 0.5 * (w1 + w2), 0.5 * (nu1 + nu2))
            avg = 0.5 * (full_joint_objective(problem, w1, nu1)
                         + full_joint_objective(problem, w2, nu2))
            worst = max(worst, mid - avg)
            assert mid <= avg + 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report("A9", f"3 x 10^4 midpoint checks, max (mid - avg) = {worst:.2e} ({elapsed:.0f}s)")


def test_a10_recovery_equalities():
    start = time.perf_counter()
    data = synth_multiclass(60, 6, 8, 0.4, seed=3)
    problem = multiclass_ce_problem(data, 8)
    common = dict(eta_schedule=StepSchedule("constant", base=0.05), batch_anchors=6,
                  batch_inner=3, total_steps=1000, reuse_inner_sample=True,
                  record_every=1)

    def gap(rec_a, rec_b):
        _, va = rec_a.series("objective")
        _, vb = rec_b.series("objective")
        assert va.size == vb.size == 1001
        return float(np.max(np.abs(va - vb)))

    bsgd = bsgd_run(problem, OptimizerConfig(method="bsgd", **common), 7)
    g1 = gap(scent_run(problem, OptimizerConfig(
        method="scent", alpha_schedule=StepSchedule("infinite"), **common), 7), bsgd)
    gp = 0.6
    g2 = gap(scent_run(problem, OptimizerConfig(
        method="scent", alpha_schedule=StepSchedule("sox_rate", gamma_prime=gp), **common), 7),
        sox_run(problem, OptimizerConfig(method="sox", sox_gamma=gp / (1 + gp), **common), 7))
    g3 = gap(umax_run(problem, OptimizerConfig(
        method="umax", umax_delta=0.0, clamp_dual=False,
        alpha_schedule=StepSchedule("constant", base=0.1), **common), 7), bsgd)
    assert max(g1, g2, g3) <= 1e-10
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report("A10", f"per-step objective deviations: inf-alpha vs bsgd {g1:.1e}, "
                   f"sox-rate vs sox {g2:.1e}, umax(0) vs bsgd {g3:.1e} ({elapsed:.1f}s)")


def test_a11_hard_instance_construction():
    start = time.perf_counter()
    kappa, T = 4.0, 10_000
    p0, p1 = hard_instance_pair(kappa, T)
    assert p0.p == pytest.approx(1.0 / kappa, rel=1e-15)
    assert p1.p == pytest.approx(1.0 / kappa + 1.0 / (8.0 * math.sqrt(kappa * T)), rel=1e-15)
    assert p0.stats.m == pytest.approx(1.75, rel=1e-15)
    assert p0.stats.kappa <= kappa + 1e-12
    assert p1.stats.kappa <= kappa + 1e-12
    delta = abs(p1.stats.nu_star - p0.stats.nu_star)
    floor = hard_instance_separation(kappa, T)
    assert delta >= floor
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _report("A11", f"kappa membership holds; separation {delta:.3e} >= {floor:.3e}")


def test_a12_desk_scale_ordering():
    start = time.perf_counter()
    results = bench.ordering_suite(seeds=(0, 1), quick=False)
    for task in ("xc", "pauc"):
        entry = results[task]
        f = entry["finals"]
        assert entry["ordered"], f"{task}: {f}"
    elapsed = time.perf_counter() - start
    assert elapsed < 900.0
    _report("A12", "; ".join(
        f"{task}: " + " <= ".join(f"{m}:{results[task]['finals'][m]:.5f}"
                                  for m in ("scent", "sox", "asgd"))
        for task in ("xc", "pauc")) + f" ({elapsed:.0f}s)")
