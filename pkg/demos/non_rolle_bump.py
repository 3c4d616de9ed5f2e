"""A smooth bump on the unit ball whose derivative never vanishes inside its support.

Samples deeper and deeper into the tube: the smallest gradient norm keeps
shrinking toward zero without ever reaching it.
"""
from tubelab.rolle_bump import NonRolleBump

bump = NonRolleBump()
print(bump)
rep = bump.deepening_probe(sizes=(100, 1000, 10000), seed=0)
for n, m in zip(rep.sizes, rep.running_min):
    print(f"{n:>6} samples: min |f'| = {m:.3e}")
print("strictly decreasing:", rep.strictly_decreasing)
