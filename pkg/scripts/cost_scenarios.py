#!/usr/bin/env python3
"""Annotation-cost comparison for an 800k-asset batch at three throughputs.

Prints days and dollars for: sequential human annotation, a GPT-4-backed
cloud captioning pipeline, and this pipeline's measured throughput on a
three-GPU node. Prices are per 1k annotations.
"""

from levelcap.orchestrator import estimate_cost

SCENARIOS = [
    ("human (sequential)", 1400, 87.18, 87.18),
    ("cloud single-view pipeline", 65000, 8.35, 8.35),
    ("this pipeline (3-GPU node)", 24000, 3.375, 3.75),
]

N_SAMPLES = 800_000


def main() -> int:
    print(f"{'scenario':<30} {'days':>8} {'cost low':>12} {'cost high':>12}")
    for name, throughput, low, high in SCENARIOS:
        est = estimate_cost(N_SAMPLES, throughput, low, high)
        print(
            f"{name:<30} {est.days:>8.1f} {est.dollars_low:>11,.0f}$ {est.dollars_high:>11,.0f}$"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
