"""EOC of randomised vs left-endpoint Riemann sums for |t - 1/3|^gamma.

    python scripts/quadrature_rates.py --gammas 0.1 0.25 0.5 1.0
"""
import argparse

from randmil.quadrature import HolderIntegrand, quadrature_rate_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.1, 0.25, 0.5, 1.0])
    ap.add_argument("--n-min", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("gamma  randomized  left  0.5+gamma")
    for g in args.gammas:
        report = quadrature_rate_study(HolderIntegrand(g), range(args.n_min, args.n_max + 1),
                                       reps=args.reps, stream=args.seed)
        print(f"{g:5.2f}  {report.fit('randomized_riemann')[0]:10.3f}  "
              f"{report.fit('left_riemann')[0]:4.2f}  {0.5 + g:9.2f}")


if __name__ == "__main__":
    main()
