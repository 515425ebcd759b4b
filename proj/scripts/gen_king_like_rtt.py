#!/usr/bin/env python3
"""Writes a synthetic wide-area RTT sample set with a heavy tail.

The CDF is piecewise log-linear through a few anchor points typical of
end-host latency measurements between residential DNS servers.
"""
import argparse

import numpy as np

# (rtt_ms, cumulative probability)
ANCHORS = [
    (8.0, 0.0),
    (45.0, 0.25),
    (85.0, 0.50),
    (140.0, 0.75),
    (212.0, 0.88),
    (279.0, 0.955),
    (395.0, 0.98),
    (700.0, 0.995),
    (1800.0, 1.0),
]


def quantile(u):
    ms = np.log([a[0] for a in ANCHORS])
    ps = [a[1] for a in ANCHORS]
    return np.exp(np.interp(u, ps, ms))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/king_like_rtt.txt")
    ap.add_argument("--count", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    samples = np.sort(quantile(rng.random(args.count)))
    with open(args.out, "w") as f:
        f.write("# synthetic king-like RTT samples, milliseconds\n")
        for v in samples:
            f.write(f"{v:.2f}\n")


if __name__ == "__main__":
    main()
