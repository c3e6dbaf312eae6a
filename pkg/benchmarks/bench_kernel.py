"""Times the compiled evaluation kernel against the pure-python fallback.

Runs itself twice as a subprocess with PHASEKIT_KERNEL forced to each
backend, so both start from a cold import and the selection logic itself is
exercised.  Three workloads: a long expression grid, an adaptive 1-d
oscillatory quadrature, and a small 2-d one.

    python3 benchmarks/bench_kernel.py
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time


def _time(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_workloads() -> dict:
    import numpy as np

    from phasekit import expr as ex
    from phasekit import kernel
    from phasekit.oracle import IntegralSpec, quad1d, quad_nd

    phase = ex.parse("A*(x1 - 1.5)^2 + 0.3*x1^3")
    prog = kernel.compile_expr(phase, (0,), {"A": 2000.0})
    grid = np.linspace(1.0, 2.0, 400_000)
    fixed = np.zeros(1)

    spec1 = IntegralSpec(
        dimension=1,
        phase=ex.parse("2000*(x1 - 1.5)^2"),
        weight=ex.parse("bump(2*x1 - 3)"),
        box=((1.0, 2.0),),
    )
    spec2 = IntegralSpec(
        dimension=2,
        phase=ex.parse("200*(x1 - 1.5)^2 + 150*(x2 - 1.4)^2"),
        weight=ex.parse("bump(2*x1 - 3) * bump(2*x2 - 3)"),
        box=((1.0, 2.0), (1.0, 2.0)),
    )
    return {
        "backend": kernel.backend_name(),
        "grid_eval_400k": _time(lambda: kernel.eval_on_grid(prog, fixed, 0, grid)),
        "quad1d_A2000": _time(lambda: quad1d(spec1, 1e-9)),
        "quad2d": _time(lambda: quad_nd(spec2, 1e-6), repeats=1),
    }


def main() -> int:
    if "--inner" in sys.argv:
        print(json.dumps(run_workloads()))
        return 0

    results = {}
    for backend in ("compiled", "pure"):
        env = dict(os.environ, PHASEKIT_KERNEL=backend)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--inner"],
            env=env, capture_output=True, text=True, check=True,
        )
        results[backend] = json.loads(out.stdout.strip().splitlines()[-1])

    names = [k for k in results["compiled"] if k != "backend"]
    width = max(len(n) for n in names)
    print(f"{'workload'.ljust(width)}  {'compiled':>10}  {'pure':>10}  {'speedup':>8}")
    for n in names:
        c = results["compiled"][n]
        p = results["pure"][n]
        print(f"{n.ljust(width)}  {c:>9.4f}s  {p:>9.4f}s  {p / c:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
