"""Reduced-size property checks, run by ``shrinkcomb validate``.

Each check compares a library route against an independent one (finite
differences, dense solves, grid search, brute force) on a handful of seeded
instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .airframe import draw_data_symbols, make_constellation, make_pilots, synthesize
from .combine import direct_estimate
from .detect import hard_decide, sample_mse, sample_mse_expanded
from .regcov import (
    alpha_from_data,
    alpha_oracle,
    apply_r_inverse,
    build_prep,
    data_covariance,
    r_of_alpha,
)
from .scenario import Interferer, ScenarioConfig, draw_channels, trial_seed
from .shrinkfit import mse_gradient


@dataclass
class Instance:
    cfg: ScenarioConfig
    chan: object
    P: np.ndarray
    Yp: object
    D: np.ndarray
    Yd: object
    prep: object


def make_instance(seed: int, cfg: ScenarioConfig | None = None) -> Instance:
    """One seeded channel/pilot/data draw (default: interferer on, 14 dBm)."""
    cfg = cfg or ScenarioConfig(ue_tx_power_dbm=14.0, interferers=(Interferer(-5.0),), data_len=200)
    s = trial_seed(cfg.master_seed, seed)
    chan = draw_channels(cfg, s)
    P = make_pilots(cfg.pilot_len, cfg.num_ues)
    Yp = synthesize("pilot", cfg, chan, P, s)
    D = draw_data_symbols(cfg, s)
    Yd = synthesize("data", cfg, chan, D, s)
    return Instance(cfg, chan, P, Yp, D, Yd, build_prep(Yp))


def _eps(inst, alpha, D_bar):
    W = direct_estimate(inst.prep, inst.Yp, inst.P, alpha).W
    return sample_mse(inst.Yd, W, D_bar)


def check_gradient(seeds=range(10), alphas=(0.1, 0.5, 0.9), h=1e-6, rtol=1e-4):
    worst = 0.0
    c = make_constellation(4)
    for s in seeds:
        inst = make_instance(s)
        W = direct_estimate(inst.prep, inst.Yp, inst.P, 0.3).W
        D_bar = hard_decide(inst.Yd.Y.conj().T @ W, c)
        for a in alphas:
            g = mse_gradient(inst.prep, inst.Yp, inst.P, inst.Yd, D_bar, a)
            fd = (_eps(inst, a + h, D_bar) - _eps(inst, a - h, D_bar)) / (2 * h)
            worst = max(worst, abs(g - fd) / max(abs(fd), 1e-300))
    return bool(worst <= rtol), f"max relative error {worst:.2e} (tol {rtol:g})"


def check_closed_form(seeds=range(10), step=1e-4):
    grid = np.arange(0, 1 + step / 2, step)
    worst = 0.0
    for s in seeds:
        inst = make_instance(s)
        for target, alpha in (
            (inst.chan.true_covariance(), alpha_oracle(inst.prep, inst.chan)),
            (data_covariance(inst.Yd), alpha_from_data(inst.prep, inst.Yd)),
        ):
            obj = [np.linalg.norm(r_of_alpha(inst.prep, a) - target) ** 2 for a in grid]
            worst = max(worst, abs(grid[int(np.argmin(obj))] - alpha))
    return bool(worst <= step), f"max distance to grid argmin {worst:.2e} (grid step {step:g})"


def check_eigen_cache(seeds=range(10), rtol=1e-9):
    worst = 0.0
    rng = np.random.default_rng(0)
    for s in seeds:
        inst = make_instance(s)
        X = rng.standard_normal((inst.cfg.dim, 5)) + 1j * rng.standard_normal((inst.cfg.dim, 5))
        for a in np.linspace(0.01, 1.0, 100):
            got = apply_r_inverse(inst.prep, a, X)
            ref = np.linalg.solve(r_of_alpha(inst.prep, a), X)
            worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    return bool(worst <= rtol), f"max relative error {worst:.2e} (tol {rtol:g})"


def check_covariance_convergence(tau=100_000, rtol=0.05):
    cfg = ScenarioConfig(pilot_len=tau, data_len=1, ue_tx_power_dbm=14.0, interferers=(Interferer(-5.0),))
    s = trial_seed(7, 0)
    chan = draw_channels(cfg, s)
    Yp = synthesize("pilot", cfg, chan, make_pilots(tau, cfg.num_ues), s)
    C = chan.true_covariance()
    err = np.linalg.norm(build_prep(Yp).Q - C) / np.linalg.norm(C)
    return bool(err <= rtol), f"relative error {err:.3e} at tau_p={tau} (tol {rtol:g})"


def check_detection(seeds=range(5), rtol=1e-9):
    c = make_constellation(4)
    rng = np.random.default_rng(1)
    ok = True
    for _ in range(20):
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        h = hard_decide(x, c)
        ok &= np.array_equal(hard_decide(h, c), h)
        best = min(itertools.product(c.points, repeat=3),
                   key=lambda seq: float(np.sum(np.abs(x - np.array(seq)) ** 2)))
        ok &= np.allclose(np.array(best), h, atol=0)
    worst = 0.0
    for s in seeds:
        inst = make_instance(s)
        for a in (0.05, 0.5, 1.0):
            W = direct_estimate(inst.prep, inst.Yp, inst.P, a).W
            D_bar = hard_decide(inst.Yd.Y.conj().T @ W, c)
            e1 = sample_mse(inst.Yd, W, D_bar)
            e2 = sample_mse_expanded(inst.prep, inst.Yp, inst.P, inst.Yd, D_bar, a)
            worst = max(worst, abs(e1 - e2) / abs(e1))
    ok &= worst <= rtol
    return bool(ok), f"argmin/idempotence ok={bool(ok)}, dual-formula max relative error {worst:.2e}"


CHECKS = {
    "gradient_vs_finite_difference": check_gradient,
    "closed_form_vs_grid": check_closed_form,
    "eigen_cache_vs_dense": check_eigen_cache,
    "covariance_convergence": check_covariance_convergence,
    "detection_invariants": check_detection,
}


def run_validation() -> list[tuple[str, bool, str]]:
    return [(name, *fn()) for name, fn in CHECKS.items()]
