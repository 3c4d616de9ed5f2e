"""The tube-deleting diffeomorphism and the retraction it induces.

The map is the identity away from the tube, pushes the tube off a thinner
inner tube, and is inverted exactly; the retraction built from it sends the
unit ball onto the sphere.
"""
import numpy as np

from tubelab.negligibility import DeletingDiffeo, StarlikeToolkit
from tubelab.seq_space import SparseVec

deleter = DeletingDiffeo()
rng = np.random.default_rng(1)
errs = []
for _ in range(50):
    y = deleter.chart.pi(deleter.chart.random_point(rng))
    fy = deleter.apply(y)
    errs.append((deleter.inverse(fy) - y).norm())
    assert not deleter.in_deleted(fy)
print(f"max inverse error on tube points: {max(errs):.2e}")

far = SparseVec([0, 5], [0.6, -0.7])
print("identity away from the tube:", deleter.apply(far) == far)

kit = StarlikeToolkit(deleter=deleter)
x = SparseVec([0, 2], [0.2, 0.1])
r = kit.retract(x)
print(f"retract(x) has norm {r.norm():.12f}")
print(f"fixed-point-free map moves x by {(kit.fixed_point_free(x) - x).norm():.4f}")
