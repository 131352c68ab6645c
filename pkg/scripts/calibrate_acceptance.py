"""One-off calibration run for the acceptance-suite experiment settings.

Prints the statistics each stochastic acceptance check asserts on, so the
seeds and thresholds can be frozen with known margins.
"""

import time

import numpy as np

from kgdp.benchmarks import PriorSpec, build_model
from kgdp.harness import ExperimentConfig, PolicyKind, run_replications
from kgdp.resampler import ResampleConfig


def bench2d():
    model, alts = build_model("asymmetric-unimodal", {"k": 1})
    prior = PriorSpec(ranges=[[2, 5], [0.2, 0.6]], pool_size=2000, seed=1001)
    return model, alts, prior


def bench3d():
    model, alts = build_model("asymmetric-unimodal", {"k": 2, "grid_points": 10})
    prior = PriorSpec(
        ranges=[[2, 5], [0.2, 0.6], [0.15, 0.55]], pool_size=20000, seed=2002
    )
    return model, alts, prior


def crit5():
    model, alts, prior = bench2d()
    for policy in (PolicyKind.KGDP_F, PolicyKind.KGDP_H):
        t0 = time.time()
        cfg = ExperimentConfig(
            model=model, alternatives=alts, prior=prior, n_candidates=10, budget=50,
            policy=policy, noise_level=0.05, truth_mode="from-candidates",
            replications=50, base_seed=501,
        )
        trajectories, _ = run_replications(cfg)
        hits = sum(t.records[-1].p_truth > 0.9 for t in trajectories)
        print(f"[crit5] {policy.value}: p_truth>0.9 in {hits}/50 reps ({time.time()-t0:.0f}s)")


def crit67():
    model, alts, prior = bench3d()
    rs = ResampleConfig(period=5, epsilon=1e-3, small_pool_size=50, min_removal=1)
    results = {}
    for name, policy, resample in (
        ("resampling-f", PolicyKind.KGDP_F, rs),
        ("plain-f", PolicyKind.KGDP_F, None),
        ("resampling-h", PolicyKind.KGDP_H, rs),
        ("explore", PolicyKind.PURE_EXPLORATION, rs),
        ("exploit", PolicyKind.PURE_EXPLOITATION, rs),
        ("max-var", PolicyKind.MAX_VAR, rs),
    ):
        t0 = time.time()
        cfg = ExperimentConfig(
            model=model, alternatives=alts, prior=prior, n_candidates=10, budget=30,
            policy=policy, noise_level=0.2, truth_mode="from-pool",
            replications=100, base_seed=601, resample=resample,
        )
        _, summary = run_replications(cfg)
        mean = summary.means["oc_pct"][-1]
        sem = summary.sems["oc_pct"][-1]
        results[name] = (mean, sem)
        print(f"[crit6/7] {name}: oc% at N=30 {mean:.4f} +- {sem:.4f} ({time.time()-t0:.0f}s)")
    gap = results["plain-f"][0] - results["resampling-f"][0]
    pooled = np.hypot(results["plain-f"][1], results["resampling-f"][1])
    print(f"[crit6] gap {gap:.4f} vs 2*pooled {2*pooled:.4f} -> {'OK' if gap > 2*pooled else 'FAIL'}")


def crit8():
    model, alts, prior = bench3d()
    rs = ResampleConfig(period=5, epsilon=1e-3, small_pool_size=50, min_removal=1)
    t0 = time.time()
    cfg = ExperimentConfig(
        model=model, alternatives=alts, prior=prior, n_candidates=10, budget=40,
        policy=PolicyKind.KGDP_F, noise_level=0.5, truth_mode="from-pool",
        replications=100, base_seed=801, resample=rs,
    )
    _, summary = run_replications(cfg)
    first = summary.means["f_mse_sqrt_norm"][0]
    last = summary.means["f_mse_sqrt_norm"][-1]
    print(f"[crit8] sqrt f_mse norm: N=1 {first:.4f} -> N=40 {last:.4f} "
          f"ratio {last/first:.3f} ({time.time()-t0:.0f}s)")


if __name__ == "__main__":
    crit5()
    crit67()
    crit8()
