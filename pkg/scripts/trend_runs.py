"""Theorem-class runs over several M0: amplitude scaling, decay and identity residuals.

    python scripts/trend_runs.py --n 128 --m0 2,4,8 --dt-max 0.05
"""

import argparse
import time

from hallmhd.checks import check_cancellations, check_theorem_trend, theorem_run
from hallmhd.data import PaperParams
from hallmhd.solver import StepperConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--m0", default="2,4,8")
    ap.add_argument("--dt-max", type=float, default=0.05)
    ap.add_argument("--small-fraction", type=float, default=0.25)
    ap.add_argument("--identities", action="store_true", help="also evaluate the exact-identity residuals")
    args = ap.parse_args()

    runs = {}
    for m0 in (float(x) for x in args.m0.split(",")):
        start = time.perf_counter()
        run = theorem_run(
            PaperParams(m0=m0),
            args.n,
            StepperConfig(dt_max=args.dt_max),
            small_fraction=args.small_fraction,
            alphas=((0, 0, 0), (2, 1, 0)) if args.identities else (),
        )
        runs[m0] = run
        e = run.energies
        print(
            f"M0={m0:g} steps={run.final.step_count} wall={time.perf_counter() - start:.0f}s "
            f"E0={e[0]:.4g} Emax={e.max():.4g} E(T)={e[-1]:.4g} "
            f"sup_amp*sqrt(M0)={run.verdict.scaled_sup:.4g} C_min={run.fit.minimal_c:.4g} "
            f"projection_correction={run.setup.data.report['projection_correction_u_h3']:.4g}",
            flush=True,
        )
        if args.identities:
            print("   ", check_cancellations(run.history).line())
    print(check_theorem_trend(runs).line())


if __name__ == "__main__":
    main()
