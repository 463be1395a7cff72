"""On one dataset, the averaged iterate varies far less across subsample streams than the last iterate.

The spread left in the averaged estimate is optimization noise only; the
sampling variance of the data is the same for every run and drops out.

Usage: python3 demos/averaging.py [seeds]
"""

import sys

import numpy as np

from mindex import DGPSpec, GDConfig, generate_dataset, logit_init, run_akmbgd


def main(seeds=8):
    spec = DGPSpec(n=3000, p=3, error_family="logistic", seed=100)
    data, _ = generate_dataset(spec)
    start = logit_init(data)
    bars, lasts = [], []
    for s in range(seeds):
        est = run_akmbgd(data, GDConfig(B=500, burn_in=1000, follow_T=1500, seed=s), beta0=start)
        bars.append(est.beta_bar)
        lasts.append(est.beta_last)
        print(f"stream {s}: averaged {np.round(est.beta_bar, 3)}  last {np.round(est.beta_last, 3)}")
    v_bar = np.var(bars, axis=0, ddof=1)
    v_last = np.var(lasts, axis=0, ddof=1)
    print("\nvariance across streams, averaged:", np.round(v_bar, 6))
    print("variance across streams, last:    ", np.round(v_last, 6))
    print("ratio:", np.round(v_bar / v_last, 3))


if __name__ == "__main__":
    main(*[int(a) for a in sys.argv[1:]])
