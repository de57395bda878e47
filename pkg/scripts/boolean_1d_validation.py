"""Monte Carlo check of the 1-D Boolean model against its closed forms.

Prints a table of estimates, standard errors and z-scores for the volume
fraction, S2 on a grid of shifts and the specific perimeter, followed by the
Lipschitz quotient at zero against half the perimeter estimate.

    python scripts/boolean_1d_validation.py --lam 1 --ell 1 -R 40000
"""
import argparse
import math
import time
from fractions import Fraction

from ramscov.models import (
    BooleanModel1D,
    Grain,
    estimate_covariogram_at,
    estimate_specific_covariogram,
    estimate_specific_perimeter,
    estimate_volume_fraction,
)
from ramscov.polytope import lipschitz_at_zero


def row(name, est, exact):
    z = (est.value - exact) / est.stderr if est.stderr else float("nan")
    print(f"{name:>12}  {est.value:10.6f}  {est.stderr:9.2e}  {exact:10.6f}  {z:+6.2f}")
    return abs(z) <= 3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--ell", type=float, default=1.0)
    ap.add_argument("-R", "--replicates", type=int, default=40_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = BooleanModel1D(args.lam, Grain("fixed", args.ell), seed=args.seed)
    t0 = time.perf_counter()
    print(f"{'quantity':>12}  {'estimate':>10}  {'stderr':>9}  {'exact':>10}  {'z':>6}")
    ok = row("vol. frac.", estimate_volume_fraction(model, args.replicates), model.volume_fraction())
    ys = [round(0.1 * i * args.ell, 10) for i in range(1, 21)]
    for y, est in zip(ys, estimate_covariogram_at(model, ys, args.replicates)):
        ok &= row(f"S2({y:g})", est, float(model.s2(y)))
    per = estimate_specific_perimeter(model, args.replicates)
    ok &= row("Per^s", per, model.specific_perimeter())

    curve = estimate_specific_covariogram(model, Fraction(1, 100), 10, args.replicates)
    lip = lipschitz_at_zero(curve)
    rel = abs(lip.sup - per.value / 2) / (per.value / 2)
    print(f"\nLipschitz sup {lip.sup:.6f}  half Per^s {per.value / 2:.6f}  rel. diff {rel:.2%}")
    print(f"closed form lambda*exp(-lambda*ell) = {args.lam * math.exp(-args.lam * args.ell):.6f}")
    print(f"all within 3 s.e.: {ok}   ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
