"""Compare the Cython kernels against the pure-Python fallback.

    python bench/benchmark.py [--size 512] [--repeat 5] [--json out.json]

Both implementations are checked for identical results before timing.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from trizone import kernels


def cases(size: int, rng: np.random.Generator) -> dict:
    a = rng.random((size, size)) < 0.5
    b = rng.random((size, size)) < 0.5
    part = rng.random((size, size)) < 0.3
    x = rng.uniform(0, 255, (size, size))
    y = np.clip(x + rng.normal(0, 20, (size, size)), 0, 255)
    win = 7
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2

    def run(impl):
        pa, pb = impl.pack(a), impl.pack(b)
        return {
            "pack": lambda: impl.pack(a),
            "unpack": lambda: impl.unpack(pa, size * size),
            "bit_or": lambda: impl.bit_or(pa, pb),
            "bit_andnot": lambda: impl.bit_andnot(pa, pb),
            "popcount": lambda: impl.popcount(pa),
            "stretch_columns": lambda: impl.stretch_columns(a, part),
            "ssim_mean": lambda: impl.ssim_mean(x, y, win, c1, c2),
        }

    return run


def same(u, v) -> bool:
    if isinstance(u, float):
        return abs(u - v) <= 1e-9 * max(1.0, abs(u))
    return np.array_equal(np.asarray(u), np.asarray(v))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=512, help="side of the square inputs (default: %(default)s)")
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats, best is kept (default: %(default)s)")
    parser.add_argument("--number", type=int, help="calls per timing (default: chosen automatically)")
    parser.add_argument("--seed", type=int, default=0, help="input seed (default: %(default)s)")
    parser.add_argument("--json", help="also write results to this file")
    args = parser.parse_args(argv)

    impls = kernels.available()
    build = cases(args.size, np.random.default_rng(args.seed))
    ops = {name: build(mod) for name, mod in impls.items()}
    names = list(next(iter(ops.values())))

    if len(ops) > 1:
        for op in names:
            results = [ops[impl][op]() for impl in ops]
            if not all(same(results[0], r) for r in results[1:]):
                print(f"mismatch in {op}", file=sys.stderr)
                return 1

    table = {}
    for op in names:
        table[op] = {}
        for impl, fns in ops.items():
            timer = timeit.Timer(fns[op])
            number = args.number or timer.autorange()[0]
            best = min(timer.repeat(repeat=args.repeat, number=number)) / number
            table[op][impl] = best

    cols = sorted(impls)
    print(f"{args.size}x{args.size} inputs, best of {args.repeat}, microseconds per call")
    header = f"{'kernel':<16}" + "".join(f"{c:>12}" for c in cols)
    if "cython" in cols and "python" in cols:
        header += f"{'speedup':>10}"
    print(header)
    for op, row in table.items():
        line = f"{op:<16}" + "".join(f"{row[c] * 1e6:>12.1f}" for c in cols)
        if "cython" in row and "python" in row:
            line += f"{row['python'] / row['cython']:>9.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"size": args.size, "repeat": args.repeat, "seconds": table}, fh, indent=2)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
