"""Cross-validated error over k for one generated scenario, next to the tuned k.

    python scripts/cv_curve.py --kmax 30 --out cv_curve.csv
"""

import argparse

from mipboost.bisection import tune
from mipboost.data import make_folds, standardize
from mipboost.icv import CvEvaluator, write_cv_csv
from mipboost.pipeline import MipBoostConfig
from mipboost.scenarios import Correlation, ScenarioConfig, generate_scenario, unit_beta


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--snr", type=float, default=1.0)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--kmax", type=int, default=30)
    ap.add_argument("--maxtime", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="cv_curve.csv")
    args = ap.parse_args()

    sc = ScenarioConfig(n=args.n, p=args.p, k0=10, correlation=Correlation(alpha=args.alpha),
                        beta=unit_beta(args.p, 10), snr=args.snr)
    d = standardize(generate_scenario(sc, seed=args.seed)[0])[0]
    cfg = MipBoostConfig(maxtime=args.maxtime, totaltime=max(args.maxtime, 60.0))
    ev = CvEvaluator(d, make_folds(d.n, cfg.v, cfg.seed), cfg.miqp_options())
    results = []
    for k in range(1, args.kmax + 1):
        results.append(ev.result(k))
        print(f"k={k:3d} cvmse={results[-1].cvmse:.4f}", flush=True)
    write_cv_csv(results, args.out)
    # the tuner reuses the memoized evaluations
    k_hat, trace = tune(ev, cfg.bf_options(), args.kmax)
    print(f"bisection picks k={k_hat} after {len(trace.evaluated)} evaluations")


if __name__ == "__main__":
    main()
