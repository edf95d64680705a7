"""Time the compiled shooting kernel against the numpy fallback.

    python benchmarks/bench_kernel.py [--repeat N] [--closed-loop]

``--closed-loop`` also times one full closed-loop run per backend, each in a
fresh interpreter so the backend is chosen at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rvzhomotopy import kernels
from rvzhomotopy.cw import CwModel, costate_transition, discretize
from rvzhomotopy.solver import OcpProblem, energy_seed

X0 = np.array([0.03031809, 0.0, 31.16639, -0.02963377, 0.04570523, 0.0])

CLOSED_LOOP_SNIPPET = (
    "import time; from rvzhomotopy.sim import ScenarioConfig, run; "
    "from rvzhomotopy.kernels import BACKEND; t=time.perf_counter(); run(ScenarioConfig()); "
    "print(BACKEND, time.perf_counter()-t)"
)


def bench_kernels(repeat):
    m = CwModel()
    dm = discretize(m, 1.0)
    psi = costate_transition(m, 1.0)
    lam = energy_seed(OcpProblem(X0, np.zeros(6), 800.0, m, eps=1.0))
    backends = {"python": kernels.evaluate_python}
    if kernels.evaluate_compiled is not None:
        backends["compiled"] = kernels.evaluate_compiled
    print(f"{'backend':<10}{'eps':>8}{'jacobian':>10}{'ms/call':>12}")
    timings = {}
    for eps in (1.0, 1e-3):
        for jac in (True, False):
            for name, fn in backends.items():
                t = min(timeit.repeat(lambda: fn(lam, X0, dm.phi, dm.gamma, psi, 800, eps, m.u_max, jac),
                                      number=20, repeat=repeat)) / 20
                timings[(name, eps, jac)] = t
                print(f"{name:<10}{eps:>8g}{str(jac):>10}{t * 1e3:>12.3f}")
    if "compiled" in backends:
        for eps in (1.0, 1e-3):
            s = timings[("python", eps, True)] / timings[("compiled", eps, True)]
            print(f"speed-up with Jacobian at eps={eps:g}: {s:.1f}x")


def bench_closed_loop():
    for forced in ("0", "1"):
        env = dict(os.environ, RVZ_PURE_PYTHON=forced)
        out = subprocess.run([sys.executable, "-c", CLOSED_LOOP_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"closed-loop run ({out[0]}): {float(out[1]):.2f} s")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--closed-loop", action="store_true")
    args = p.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    bench_kernels(args.repeat)
    if args.closed_loop:
        bench_closed_loop()


if __name__ == "__main__":
    main()
