"""Expected support size when updates and screens pick coordinates at random.

Each round one uniformly chosen coordinate becomes nonzero, then one
uniformly chosen coordinate is zeroed. We compare three numbers:

* the published closed form, evaluated exactly as written,
* a Monte Carlo simulation of the model, and
* exact enumeration of the model's state distribution (small d, T only).

The closed form matches its large-T limit, but it drifts from the model it
describes: for large d it approaches 2T - 1 rather than T - 1.
"""

from dp_screen.domain import RngStream
from dp_screen.metrics import expected_nonzeros_closed_form, mc_uniform_support


def exact(d, t):
    dist = {frozenset(): 1.0}
    for _ in range(t):
        nxt = {}
        for s, p in dist.items():
            for u in range(d):
                for z in range(d):
                    key = (s | {u}) - {z}
                    nxt[key] = nxt.get(key, 0.0) + p / d**2
        dist = nxt
    return sum(len(s) * p for s, p in dist.items())


print(f"{'d':>4}{'T':>4}{'closed form':>14}{'Monte Carlo':>16}{'exact':>10}")
for d, t in [(2, 1), (2, 2), (3, 2), (4, 4), (5, 5)]:
    mean, se = mc_uniform_support(d, t, 10**5, RngStream(d, t))
    print(f"{d:>4}{t:>4}{expected_nonzeros_closed_form(d, t):>14.4f}"
          f"{mean:>10.4f}±{se:.3f}{exact(d, t):>10.4f}")

print()
print("limits of the closed form")
print(f"  d=2, T=1e6:  {expected_nonzeros_closed_form(2, 10**6):.6f}  (stated 2/3)")
print(f"  d=1e6, T=50: {expected_nonzeros_closed_form(10**6, 50):.4f}  (stated T-1 = 49)")
mean, se = mc_uniform_support(2000, 50, 2000, RngStream(1))
print(f"  simulated d=2000, T=50: {mean:.2f} ± {se:.2f}")
