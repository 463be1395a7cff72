"""Fit one simulated dataset and report estimates, intervals and the fitted link.

Usage: python3 demos/estimate_and_infer.py [n] [seed]
"""

import sys

import numpy as np

from mindex import (
    DGPSpec,
    GDConfig,
    confidence_intervals,
    covariance,
    estimate_cdf_curve,
    generate_dataset,
    logit_init,
    run_akmbgd,
)


def main(n=5000, seed=1):
    spec = DGPSpec(n=n, p=4, error_family="logistic", seed=seed)
    data, _ = generate_dataset(spec)
    print(f"{n} observations, {data.p} free covariates, share of y=1: {data.y.mean():.3f}")

    start = logit_init(data)
    print("logit start (ratio to the x0 coefficient):", np.round(start, 3))

    gd = GDConfig(B=1000, burn_in=2000, follow_T=3000, seed=seed)
    est = run_akmbgd(data, gd, beta0=start)
    cov = covariance(data, est.beta_bar, gd)
    ci = confidence_intervals(est.beta_bar, cov)
    print(f"\n{'':6}{'truth':>8}{'estimate':>10}{'se':>8}{'95% interval':>22}")
    for j, (b, bh, se, (lo, hi)) in enumerate(zip(spec.beta, est.beta_bar, cov.se, ci)):
        print(f"beta{j + 1:<2}{b:8.3f}{bh:10.3f}{se:8.3f}   [{lo:7.3f}, {hi:7.3f}]")
    print(f"updates: {est.n_updates}, averaged: {est.averaged}, {est.seconds:.1f}s")

    curve = estimate_cdf_curve(data, est.beta_bar, 9)
    print("\nfitted link vs the logistic CDF")
    for z, g in zip(curve.grid, curve.values):
        print(f"  z={z:7.2f}  G_hat={g:.3f}  logistic={spec.link.cdf(z):.3f}")


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:]]
    main(*args)
