"""The same day with G2 at bus 5 replaced by a 500 MW solar unit, Gx.

Both days are committed with the MILP, re-dispatched hour by hour and
priced. The solar unit is the cheapest bid, so it runs every hour and the
day costs far less; bus 7 still pays G3's price at the peak because line 3
keeps the cheap energy from reaching it.

Run:  python demos/solar_vs_conventional.py [out_dir]
"""

import sys

import numpy as np

from dayahead.scenario import PEAK_HOURS, compare_scenarios, run_day_ahead

out = sys.argv[1] if len(sys.argv) > 1 else None
conv = run_day_ahead("case7_conventional", "milp", out and f"{out}/conventional")
solar = run_day_ahead("case7_solar", "milp", out and f"{out}/solar")

for day in (conv, solar):
    s = day.schedule
    print(f"\n{day.label}: total {day.total_cost:,.0f}  ({s.nodes_explored} branch-and-bound nodes)")
    print("hour " + " ".join(f"{h:>2}" for h in range(1, 25)))
    for name, row in zip(s.generators, s.on):
        print(f"{name:>4} " + " ".join(" #" if u else " ." for u in row))

report = compare_scenarios(conv, solar, out and f"{out}/comparison")
print(f"\nPrices at hour {report.peak_hour} (first hour of peak demand):")
print("bus  conventional  solar   delta")
for r in report.rows:
    print(f"{r.bus:>3}  {r.base_peak_price:12.2f} {r.variant_peak_price:6.2f} {round(r.delta, 6) + 0.0:7.2f}")

print(f"\nBus 7 price over hours {PEAK_HOURS[0]}-{PEAK_HOURS[-1]}:")
for day in (conv, solar):
    print(f"  {day.label:<20}", np.round(day.price_matrix()[[h - 1 for h in PEAK_HOURS], 6], 2))

hourly = solar.hourly_social_cost - conv.hourly_social_cost
print(f"\nProduction cost saved per hour: min {-hourly.max():,.0f}, max {-hourly.min():,.0f}")
print(f"Day total change: {report.total_cost_delta:,.0f}")
