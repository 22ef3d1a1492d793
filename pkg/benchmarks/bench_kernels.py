"""Compare the compiled and pure-Python jet-multiplication kernels.

Run ``python3 benchmarks/bench_kernels.py``; also times a full B-table
build under each backend (fresh interpreter per backend).
"""
import argparse
import os
import random
import subprocess
import sys
import timeit

from gmpy2 import mpq

from berezin import kernels


def random_terms(rng, nvars, cap, count):
    out = {}
    for _ in range(count):
        k = [0] * nvars
        for _ in range(rng.randint(0, cap)):
            k[rng.randrange(nvars)] += 1
        out[tuple(k)] = mpq(rng.randint(-9, 9), rng.randint(1, 5))
    return out


def bench_mul(repeat):
    rng = random.Random(0)
    rows = []
    for nvars, cap, count in [(2, 12, 60), (4, 8, 200), (4, 12, 400)]:
        a = random_terms(rng, nvars, cap, count)
        b = random_terms(rng, nvars, cap, count)
        cons = [(tuple(range(nvars)), cap)]
        times = {}
        for name, mod in kernels.backends().items():
            times[name] = min(timeit.repeat(lambda: mod.mul(a, b, cons, nvars), number=1, repeat=repeat))
        rows.append((nvars, cap, count, times))
    return rows


WORKLOAD = ("from berezin.contravariant import b_inverse_coefficients; import time; t=time.perf_counter(); "
            "b_inverse_coefficients('fs:0', (1, 2), 4); print(time.perf_counter() - t)")


def bench_workload():
    out = {}
    for name, flag in [("cython", "0"), ("python", "1")]:
        env = dict(os.environ, BEREZIN_PURE_PYTHON=flag)
        res = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, capture_output=True, text=True, check=True)
        out[name] = float(res.stdout.strip())
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-workload", action="store_true")
    args = ap.parse_args()
    print(f"selected backend: {kernels.BACKEND}")
    print("nvars,cap,terms," + ",".join(f"{n}_s" for n in kernels.backends()) + ",speedup")
    for nvars, cap, count, times in bench_mul(args.repeat):
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{nvars},{cap},{count}," + ",".join(f"{t:.5f}" for t in times.values()) + f",{speed:.2f}")
    if not args.skip_workload:
        w = bench_workload()
        print(f"B^-1 table, fs:0 at (1,2), L=4: cython {w['cython']:.2f}s, python {w['python']:.2f}s, "
              f"speedup {w['python'] / w['cython']:.2f}")


if __name__ == "__main__":
    main()
