"""Block-sum function whose gradients all have every block nonzero.

Evaluates f, psi = sqrt(f) and the bump b at a few points and prints the
smallest block norm of f' found over a random sample.
"""
import numpy as np

from tubelab.gradient_cone import BlockSum
from tubelab.seq_space import SparseVec

bs = BlockSum(0.1)
for x in (SparseVec([], []), SparseVec([0, 3], [0.05, -0.02]), SparseVec([1], [2.0])):
    f, _ = bs.f(x)
    psi, _ = bs.psi(x)
    b, _ = bs.bump(x)
    print(f"|x| = {x.norm():.3f}  f = {f:.6f}  psi - |x| = {psi - x.norm():.6f}  b = {b:.6f}")

rng = np.random.default_rng(2)
xs = [SparseVec(np.arange(12), rng.normal(size=12) * 0.1) for _ in range(100)]
cert = bs.cone_certificate(xs)
rep = cert.to_dict()
print(f"certificate ok: {rep['ok']}, smallest block norm: {rep['min_block_norm']:.3e}")
