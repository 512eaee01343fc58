#!/usr/bin/env python3
"""Regenerates the quantizer distortion table frozen in link_metrics._RHO_TABLE.

For a B-bit scalar quantizer applied per real dimension to a unit-variance
Gaussian input, the distortion factor is the minimum achievable normalized
mean-square error over all 2^B-level scalar quantizers.  The minimizer is the
Lloyd-Max quantizer; this script computes it by the classic fixed-point
iteration with closed-form Gaussian partial moments:

    boundaries  t_i = (c_i + c_{i+1}) / 2
    centroids   c_i = (phi(t_i) - phi(t_{i+1})) / (Phi(t_{i+1}) - Phi(t_i))
    MSE         1 - sum_i p_i c_i^2   (unit input variance)

where phi/Phi are the standard normal pdf/cdf.  For B = 1 this reproduces the
closed form 1 - 2/pi ~= 0.3634; for large B it approaches the high-rate
approximation (pi*sqrt(3)/2) * 2^(-2B).

Usage: python3 scripts/distortion_oracle.py [max_bits]
"""

import math
import sys

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / SQRT2PI


def _cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / SQRT2))


def lloyd_max_mse(bits: int, iters: int = 20000, tol: float = 1e-15) -> float:
    """Minimum MSE of a 2^bits-level scalar quantizer on N(0, 1) input."""
    levels = 2 ** bits
    # start from the uniform-quantizer reproduction points on [-4, 4]
    step = 8.0 / levels
    cent = [-4.0 + step * (i + 0.5) for i in range(levels)]
    prev = float("inf")
    for _ in range(iters):
        bounds = [-math.inf] + [0.5 * (cent[i] + cent[i + 1])
                                for i in range(levels - 1)] + [math.inf]
        mse = 1.0
        for i in range(levels):
            lo, hi = bounds[i], bounds[i + 1]
            p = _cdf(hi) - _cdf(lo)
            if p <= 0.0:
                continue
            num = (_phi(lo) if math.isfinite(lo) else 0.0) \
                - (_phi(hi) if math.isfinite(hi) else 0.0)
            cent[i] = num / p
            mse -= p * cent[i] ** 2
        if abs(prev - mse) <= tol * max(1.0, abs(mse)):
            return mse
        prev = mse
    return prev


def main() -> int:
    max_bits = int(sys.argv[1]) if len(sys.argv) > 1 else 8
    print("bits  rho (min-MSE quantizer)   high-rate approx")
    for bits in range(1, max_bits + 1):
        rho = lloyd_max_mse(bits)
        approx = (math.pi * math.sqrt(3.0) / 2.0) * 2.0 ** (-2 * bits)
        print(f"{bits:>4}  {rho:.11f}            {approx:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
