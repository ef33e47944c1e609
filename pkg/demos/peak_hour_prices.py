"""Peak-hour dispatch and nodal prices on the seven-bus ring.

At 1100 MW all three units run. Line 3 saturates at 300 MW, which splits
the network into price zones: every bus gets its own price, set by how
the two marginal units (G2 at bus 5 and G3 at bus 7) would have to shift
to deliver one more MW there without loading line 3 further.

Run:  python demos/peak_hour_prices.py
"""

import numpy as np

from dayahead.dispatch import (
    economic_dispatch,
    marginal_redispatch_price,
    merit_order_dispatch,
    nodal_prices,
)
from dayahead.grid import load_case
from dayahead.network import build_network

case = load_case("case7_conventional")
net = build_network(case)
np.set_printoptions(precision=4, suppress=True, linewidth=110)

print("Shift factors, line 3 (per MW injected at each bus, withdrawn at bus 7):")
print("   ", net.T[2])
print("   x 7 =", np.round(net.T[2] * 7, 9))

# Logical route: stack units by price and back off when a line overloads.
# Until demand is met the shortfall is drawn from bus 7, so early states can
# show overloads that vanish once the stack is complete.
mo = merit_order_dispatch(case, 16, ["G1", "G2", "G3"], net)
print("\nMerit-order steps:")
for step in mo.steps:
    flag = f"  overloads line(s) {list(step.violated_lines)}" if step.violated_lines else ""
    print(f"  {step.label:<28} P = {step.output}{flag}")

# LP route: same answer, plus the duals that price every bus.
res, duals = economic_dispatch(case, 16, ["G1", "G2", "G3"], net)
print(f"\nLP dispatch: {res.output}  cost {res.objective:.2f}")
print(f"line 3 flow {res.flows[2]:.2f} MW, binding lines {res.binding_lines}")
print(f"lambda = {duals.lam:.4f}, line 3 shadow price = {duals.mu_forward[2]:.4f}")

rho = nodal_prices(duals, net.T)
print("\nbus  dual price  redispatch price  (dP_G2, dP_G3)")
for bus, p in zip(case.buses, rho.prices):
    r = marginal_redispatch_price(case, res, net, bus)
    g2, g3 = (round(r.shifts[g], 9) + 0.0 for g in ("G2", "G3"))
    print(f"{bus:>3}  {p:10.4f}  {r.price:16.4f}  ({g2:+.4f}, {g3:+.4f})")
