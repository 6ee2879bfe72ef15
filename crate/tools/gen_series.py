"""Writes the synthetic hourly series used by the bundled scenarios."""

import csv
import math
import sys
from pathlib import Path

HOURS = 8760


def day_curve(h, base, swing):
    x = (h % 24 - 6) / 24 * 2 * math.pi
    return base + swing * max(math.sin(x), 0.0)


def season(h, amp):
    return 1.0 + amp * math.cos((h / HOURS) * 2 * math.pi)


def solar(h):
    x = h % 24
    if not 6 <= x < 18:
        return 0.0
    s = math.sin((x - 6) / 12 * math.pi) * 0.75
    return s * (1.0 - 0.3 * math.cos((h / HOURS) * 2 * math.pi))


def wind(h, mean, phase):
    v = mean + 0.15 * math.sin(h / 37.0 + phase) + 0.1 * math.sin(h / 11.0 + 2 * phase)
    return min(max(v * season(h, 0.2), 0.0), 1.0)


def write(path, header, values):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["hour", header])
        for i, v in enumerate(values):
            w.writerow([i, f"{v:.6f}"])


def toy(root):
    write(root / "demand.csv", "demand_mw", [day_curve(h, 1000.0, 300.0) for h in range(HOURS)])
    write(root / "cf_solar.csv", "cf", [solar(h) for h in range(HOURS)])


def base(root):
    demand = [day_curve(h, 28000.0, 12000.0) * season(h, 0.08) for h in range(HOURS)]
    write(root / "demand.csv", "demand_mw", demand)
    write(root / "cf_solar.csv", "cf", [solar(h) for h in range(HOURS)])
    write(root / "cf_onshore.csv", "cf", [wind(h, 0.25, 0.0) for h in range(HOURS)])
    write(root / "cf_offshore.csv", "cf", [wind(h, 0.38, 1.3) for h in range(HOURS)])
    write(root / "hydro_inflow.csv", "mwh", [3000.0 * season(h, 0.4) for h in range(HOURS)])


if __name__ == "__main__":
    top = Path(sys.argv[1] if len(sys.argv) > 1 else "scenarios")
    toy(top / "toy")
    base(top / "base")
