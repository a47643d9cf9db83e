"""Regenerate the bundled synthetic sample series.

dividends.csv      quarterly log real dividend growth, 1964Q1-2020Q4, simulated
                   from the state-space model at the default point estimates
riskfree.csv       3-month T-bill rate in percent, log rate = 0.8974 - 1.2038 x_t
                   plus a persistent AR(1) disturbance
price_dividend.csv quarterly price-dividend ratio; a persistent log AR(1) path
                   mapped affinely (in logs) onto [16.5, 87.5], roughly the
                   1964-2020 range of the S&P 500 ratio

Only min and max of the price-dividend series enter the data state.
"""
import csv
import math
from pathlib import Path

import numpy as np

from qapricing.estimation import simulate_series
from qapricing.markov import TABLE_AR1

OUT = Path(__file__).resolve().parents[1] / "src" / "qapricing" / "data"
SEED = 7
PD_RANGE = (16.5, 87.5)


def quarter_ends(start_year=1964, end_year=2020):
    ends = ("03-31", "06-30", "09-30", "12-31")
    return [f"{y}-{e}" for y in range(start_year, end_year + 1) for e in ends]


def write(path, dates, values, fmt):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "value"])
        for dt, v in zip(dates, values):
            w.writerow([dt, fmt.format(v)])


def main():
    dates = quarter_ends()
    n = len(dates)
    dd, x = simulate_series(TABLE_AR1, n, seed=SEED)
    rng = np.random.Generator(np.random.Philox(SEED + 1))
    u = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = 0.95 * prev + 0.15 * rng.standard_normal()
        u[t] = prev
    rf = np.exp(0.8974 - 1.2038 * x + u)
    z = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = 0.97 * prev + 0.06 * rng.standard_normal()
        z[t] = prev
    lo, hi = math.log(PD_RANGE[0]), math.log(PD_RANGE[1])
    pd = np.exp(lo + (z - z.min()) / (z.max() - z.min()) * (hi - lo))
    OUT.mkdir(parents=True, exist_ok=True)
    write(OUT / "dividends.csv", dates, dd, "{:.10f}")
    write(OUT / "riskfree.csv", dates, rf, "{:.6f}")
    write(OUT / "price_dividend.csv", dates, pd, "{:.4f}")


if __name__ == "__main__":
    main()
