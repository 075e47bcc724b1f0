#!/usr/bin/env python3
"""Regenerate the synthetic solar-flux forecast files in src/orbitplan/data.

The model is a smooth 11-year activity cycle with a minimum near the end of
2019 and a maximum in mid-2025. Each intensity class (low/medium/high) is a
constant offset of the cycle; within a class, monthly percentile nodes widen
with activity level. Fully deterministic: rerunning reproduces the files
byte for byte.
"""

import math
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "orbitplan" / "data"

CYCLE_YEARS = 11.0
CYCLE_MIN_EPOCH = 2019.96  # decimal year of the activity minimum
FLUX_MEAN = 115.0  # sfu
FLUX_AMPLITUDE = 45.0
CLASS_OFFSETS = {"low": -18.0, "medium": 0.0, "high": +18.0}
FLUX_FLOOR = 65.0
SPREAD_BASE = 8.0  # p05..p95 half-width at F = 70 sfu
SPREAD_SLOPE = 0.25  # extra half-width per sfu above 70
INNER_FRACTION = 0.45  # p25/p75 as a fraction of the p05/p95 half-width

START = (2018, 5)
END = (2030, 3)


def median_flux(decimal_year: float) -> float:
    phase = 2.0 * math.pi * (decimal_year - CYCLE_MIN_EPOCH) / CYCLE_YEARS
    return FLUX_MEAN - FLUX_AMPLITUDE * math.cos(phase)


def month_range(start, end):
    y, m = start
    while (y, m) <= end:
        yield y, m
        m += 1
        if m > 12:
            y, m = y + 1, 1


def main():
    for name, offset in CLASS_OFFSETS.items():
        lines = ["date,p05,p25,p50,p75,p95"]
        for y, m in month_range(START, END):
            t = y + (m - 0.5) / 12.0
            f50 = max(median_flux(t) + offset, FLUX_FLOOR)
            half = SPREAD_BASE + SPREAD_SLOPE * max(f50 - 70.0, 0.0)
            inner = INNER_FRACTION * half
            row = [max(f50 - half, 60.0), max(f50 - inner, 60.0), f50,
                   f50 + inner, f50 + half]
            lines.append(f"{y:04d}-{m:02d}-01," + ",".join(f"{v:.2f}" for v in row))
        path = OUT_DIR / f"flux_{name}.csv"
        path.write_text("\n".join(lines) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
