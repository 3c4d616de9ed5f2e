"""Send random cylinder points through the twisted tube and back.

Prints the measured path constants, the tube radius bound they imply, and
the worst round-trip error over a batch of points.
"""
import numpy as np

from tubelab.tube import default_chart

chart = default_chart()
print("chart:", {k: chart.record()[k] for k in ("epsilon", "scale", "K")})
print("largest admissible radius from the sampled slope:", chart.epsilon_slope_bound())

rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    pt = chart.random_point(rng)
    back = chart.pi_inverse(chart.pi(pt))
    worst = max(worst, pt.distance(back))
print(f"worst round-trip error over 200 points: {worst:.2e}")

# the whole infinitely long tube stays inside a ball of modest radius
print(f"outer radius of the tube: {chart.outer_radius:.4f}")
