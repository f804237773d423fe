"""Benchmark the compiled kernels against the pure-Python fallback.

Times the term-map kernels on representative protocol workloads
(microbenchmarks in-process against both modules) and full workloads
(subprocesses pinned to one backend via QSPIRLAB_KERNELS).  Workloads are
deterministic; wall-clock numbers of course vary by machine.

Usage: python benchmarks/compare_backends.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from qspirlab import _kernels_py  # noqa: E402

try:
    from qspirlab import _kernels
except ImportError:
    _kernels = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def micro_workloads(scale):
    two_term = {0b0010111: 0.7071067811865476 + 0j, 0b1011110: 0.7071067811865476 + 0j}
    wide = {(k << 20) | 0x35: 0.25 + 0j for k in range(16)}
    table = {0b010: 1, 0b011: 0, 0b110: 1, 0b111: 0}
    masks10 = tuple((0x5A3C >> j) & 0x3FF for j in range(7))

    def phase(impl):
        for _ in range(60000 * scale):
            impl.phase_apply(two_term, 3, 0b111, table, 7)

    def cond_xor(impl):
        tab = {0: 0b0001100, 1: 0b0011000}
        for _ in range(60000 * scale):
            impl.conditional_xor(two_term, ((6, 1),), tab, 7)

    def tensor(impl):
        for _ in range(40000 * scale):
            impl.tensor_terms(two_term, two_term, 7, 14)

    def ptrace(impl):
        for _ in range(20000 * scale):
            impl.ptrace_accumulate({}, wide, ((20, 4),), ((0, 20),), 1.0, 24)

    def parities(impl):
        for _ in range(120000 * scale):
            impl.masked_parities(0x2B7, masks10, 10)

    return [("phase_apply (2-term)", phase), ("conditional_xor (2-term)", cond_xor),
            ("tensor_terms (2x2)", tensor), ("ptrace_accumulate (16-term)", ptrace),
            ("masked_parities (7 masks)", parities)]


END_TO_END = {
    "cube n=8 recovery slice": (
        "from qspirlab.protocols import resolve_protocol\n"
        "from qspirlab.schemes import Database\n"
        "p = resolve_protocol('qspir(cube2)', 8)\n"
        "for v in range({dbs}):\n"
        "    x = Database(8, v * 37 % 256)\n"
        "    for i in range(1, 9):\n"
        "        for r in range(0, 64, 4):\n"
        "            p.run_output(x, i, r, (v & 127, (v * 3) & 127))\n"
    ),
    "bell n=6 exhaustive sweep": (
        "from qspirlab.protocols import resolve_protocol\n"
        "from qspirlab.schemes import all_databases\n"
        "p = resolve_protocol('bell2', 6)\n"
        "for _ in range({dbs} // 16 + 1):\n"
        "    for x in all_databases(6):\n"
        "        for i in range(1, 7):\n"
        "            p.run_output(x, i)\n"
    ),
    "subset n=3 privacy audits": (
        "from qspirlab.audits import audit_user_privacy_quantum, audit_data_privacy, make_grid\n"
        "from qspirlab.protocols import resolve_protocol\n"
        "p = resolve_protocol('qspir(subset2)', 3)\n"
        "g = make_grid(3)\n"
        "for _ in range(max(1, {dbs} // 16)):\n"
        "    audit_user_privacy_quantum(p, g)\n"
        "    audit_data_privacy(p, g)\n"
    ),
}


def run_pinned(code: str, backend: str) -> float:
    env = dict(os.environ, QSPIRLAB_KERNELS=backend)
    start = time.perf_counter()
    subprocess.run([sys.executable, "-c", code], env=env, check=True,
                   cwd=Path(__file__).resolve().parent.parent)
    return time.perf_counter() - start


def startup_baseline(backend: str) -> float:
    return run_pinned("import qspirlab.protocols", backend)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()
    scale = 1 if args.quick else 2
    dbs = 8 if args.quick else 32

    rows = []
    if _kernels is None:
        print("compiled kernels not built; nothing to compare")
        return 1

    for name, fn in micro_workloads(scale):
        t_py = timeit(lambda: fn(_kernels_py))
        t_c = timeit(lambda: fn(_kernels))
        rows.append((f"kernel: {name}", t_py, t_c))

    base_py = startup_baseline("py")
    base_c = startup_baseline("c")
    for name, template in END_TO_END.items():
        code = template.format(dbs=dbs)
        t_py = max(run_pinned(code, "py") - base_py, 1e-9)
        t_c = max(run_pinned(code, "c") - base_c, 1e-9)
        rows.append((f"workload: {name}", t_py, t_c))

    width = max(len(r[0]) for r in rows)
    print(f"{'case'.ljust(width)}  {'pure-py (s)':>12}  {'compiled (s)':>12}  {'speedup':>8}")
    print("-" * (width + 40))
    for name, t_py, t_c in rows:
        print(f"{name.ljust(width)}  {t_py:12.4f}  {t_c:12.4f}  {t_py / t_c:7.2f}x")
    print("\n(workload rows are wall-clock minus interpreter startup)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
