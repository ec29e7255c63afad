"""Compare the compiled and numpy conv3d kernels on MicroPulseNet-sized
inputs.

    python3 benchmarks/bench_conv3d.py --frames 135 --size 8 --repeat 20
"""
import argparse
import json
import time

import numpy as np

from rppg_attack._kernels import _fallback

try:
    from rppg_attack._kernels import _conv3d
except ImportError:
    _conv3d = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def bench(mod, x, w, b, g, d, repeat):
    fwd = best_of(lambda: mod.conv3d_forward(x, w, b, d), repeat)
    bwd = best_of(lambda: mod.conv3d_backward(x, w, g, d), repeat)
    bwd_x = best_of(lambda: mod.conv3d_backward(x, w, g, d, weight_grad=False), repeat)
    return {"forward": fwd, "backward": bwd, "backward_input_only": bwd_x}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=135)
    ap.add_argument("--size", type=int, default=8, help="frame height and width")
    ap.add_argument("--cin", type=int, default=8)
    ap.add_argument("--cout", type=int, default=8)
    ap.add_argument("--dilation", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.frames, args.size, args.size, args.cin))
    w = rng.normal(size=(3, 3, 3, args.cin, args.cout)) * 0.1
    b = rng.normal(size=args.cout)
    g = rng.normal(size=(args.frames, args.size, args.size, args.cout))

    results = {"python": bench(_fallback, x, w, b, g, args.dilation, args.repeat)}
    if _conv3d is not None:
        results["cython"] = bench(_conv3d, x, w, b, g, args.dilation, args.repeat)
        y0 = _fallback.conv3d_forward(x, w, b, args.dilation)
        y1 = _conv3d.conv3d_forward(x, w, b, args.dilation)
        results["max_abs_diff"] = float(np.max(np.abs(y0 - y1)))

    if args.json:
        print(json.dumps(results, indent=1))
        return
    shape = f"{args.frames}x{args.size}x{args.size}x{args.cin}->{args.cout}, dilation {args.dilation}"
    print(f"conv3d {shape}, best/median of {args.repeat} (ms)")
    for op in ("forward", "backward", "backward_input_only"):
        py = results["python"][op]
        line = f"  {op:<20} python {py[0]*1e3:8.3f} / {py[1]*1e3:8.3f}"
        if "cython" in results:
            cy = results["cython"][op]
            line += f"   cython {cy[0]*1e3:8.3f} / {cy[1]*1e3:8.3f}   speedup x{py[0]/cy[0]:.1f}"
        print(line)
    if "max_abs_diff" in results:
        print(f"  forward max |python - cython| = {results['max_abs_diff']:.2e}")
    else:
        print("  compiled extension not available")


if __name__ == "__main__":
    main()
