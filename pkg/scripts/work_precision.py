"""Work-precision diagram: CPU seconds of the step recursion against error.

    python scripts/work_precision.py --out out/ --n-max 10 --samples 200
"""
import argparse
from pathlib import Path

from randmil.cli import emit_csv, emit_svg, experiment_config, load_config
from randmil.harness import default_workers, work_precision_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", default="out")
    ap.add_argument("--n-max", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int, default=default_workers())
    args = ap.parse_args()

    config = experiment_config(load_config("paper_example"),
                               dict(n_max=args.n_max, samples=args.samples, seed=args.seed, workers=args.workers))
    report = work_precision_study(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(report, out / "work_precision.csv")
    emit_svg(report, out / "work_precision.svg", x="error", title="work versus precision")
    classical = {e.n: e for e in report.for_scheme("classical_milstein")}
    print(" n   error(cm)   error(rm)   cpu ratio rm/cm")
    for e in report.for_scheme("randomized_milstein"):
        c = classical[e.n]
        print(f"{e.n:2d}  {c.error:.3e}  {e.error:.3e}  {e.cpu_seconds / c.cpu_seconds:.2f}")


if __name__ == "__main__":
    main()
