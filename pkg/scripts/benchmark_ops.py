"""Time forward + backward of the numeric kernel's hot ops at desk sizes.

Usage:
    python -m scripts.benchmark_ops [--d-model 64] [--rows 32] [--heads 4] [--repeat 50] [--csv out.csv]
"""

import argparse
import time

import numpy as np
import pandas as pd

from diffcast.models.fusion import cross_attention
from diffcast.numeric import Tensor, backward, layer_norm, matmul, softmax


def _timed(build_loss, repeat: int) -> tuple[float, float]:
    forward, total = [], []
    for _ in range(repeat):
        start = time.perf_counter()
        loss = build_loss()
        mid = time.perf_counter()
        backward(loss)
        end = time.perf_counter()
        forward.append(mid - start)
        total.append(end - start)
    return float(np.median(forward)), float(np.median(total))


def run(d_model: int, rows: int, heads: int, repeat: int, seed: int = 0) -> pd.DataFrame:
    rng = np.random.default_rng(seed)

    def param(*shape):
        return Tensor(rng.standard_normal(shape) * 0.1, requires_grad=True)

    x = param(rows, d_model)
    w = param(d_model, d_model)
    gain, bias = param(d_model), param(d_model)
    context = param(2 * rows, d_model)
    attn = {f"bench.{name}": param(d_model, d_model) for name in ("wq", "wk", "wv", "wo")}

    cases = {
        "matmul": lambda: matmul(x, w).sum(),
        "softmax": lambda: (softmax(x, axis=-1) * x).sum(),
        "layer_norm": lambda: layer_norm(x, gain, bias).sum(),
        "attention": lambda: cross_attention(x, context, attn, "bench", heads)[0].sum(),
    }
    rows_out = []
    for name, build_loss in cases.items():
        fwd, total = _timed(build_loss, repeat)
        rows_out.append({"op": name, "forward_ms": 1e3 * fwd, "fwd_bwd_ms": 1e3 * total})
    return pd.DataFrame(rows_out)


def main():
    parser = argparse.ArgumentParser(description="Benchmark numeric kernel ops")
    parser.add_argument("--d-model", type=int, default=64)
    parser.add_argument("--rows", type=int, default=32, help="Query rows (patches)")
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=50)
    parser.add_argument("--csv", default=None, help="Also write the results to this CSV")
    args = parser.parse_args()

    if args.d_model % args.heads:
        print(f"Error: d_model={args.d_model} is not divisible by heads={args.heads}")
        return 1

    table = run(args.d_model, args.rows, args.heads, args.repeat)
    print(f"d_model={args.d_model} rows={args.rows} heads={args.heads} (median of {args.repeat})")
    print(table.to_string(index=False, float_format="%.3f"))
    if args.csv:
        table.to_csv(args.csv, index=False)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
