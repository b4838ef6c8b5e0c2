"""Wall time of one solver step and one monitor sample per grid size.

    HALLMHD_THREADS=1 python scripts/timing.py --n 32,64,128
"""

import argparse
import time

from hallmhd.checks import prepare_run
from hallmhd.data import PaperParams
from hallmhd.monitor import PerturbationMonitor
from hallmhd.solver import SolverState, StepperConfig, step


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", default="32,64")
    ap.add_argument("--m0", type=float, default=4.0)
    args = ap.parse_args()
    p = PaperParams(m0=args.m0)
    for n in (int(x) for x in args.n.split(",")):
        setup = prepare_run(p, n)
        state = SolverState(setup.data.u0, setup.data.b0)
        t0 = time.perf_counter()
        step(state, StepperConfig(), p)
        t1 = time.perf_counter()
        PerturbationMonitor(setup.seed, setup.cutoff, p, alphas=())(state)
        t2 = time.perf_counter()
        PerturbationMonitor(setup.seed, setup.cutoff, p)(state)
        t3 = time.perf_counter()
        print(f"n={n}: step {t1 - t0:.2f}s, monitor {t2 - t1:.2f}s, monitor with identities {t3 - t2:.2f}s", flush=True)


if __name__ == "__main__":
    main()
