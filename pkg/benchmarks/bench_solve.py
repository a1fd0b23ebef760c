"""Wall time of stiffness assembly and of a full Example-1 solve versus mesh size.

    python3 benchmarks/bench_solve.py [nx ...]
"""

import sys
import time

from fracocp.assembly import assemble_stiffness
from fracocp.manufactured import ManufacturedCase
from fracocp.mesh import build_structured_mesh
from fracocp.study import solve_case


def best_of(fn, repeat=3):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(nxs):
    case = ManufacturedCase(1.3)
    print(f"{'nx':>4} {'dofs':>6} {'assemble[s]':>12} {'solve[s]':>9}")
    for nx in nxs:
        mesh = build_structured_mesh(case.domain, nx, nx)
        t_asm = best_of(lambda: assemble_stiffness(mesh, case.order))
        t_all = best_of(lambda: solve_case(case, nx), repeat=1)
        print(f"{nx:4d} {mesh.n_dofs:6d} {t_asm:12.4f} {t_all:9.3f}")


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [10, 20, 30, 40])
