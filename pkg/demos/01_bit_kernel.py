"""The XNOR/popcount kernel and why it replaces multiply-accumulate.

With +/-1 values encoded as single bits (1 = +1), two vectors agree at a
position exactly when their product there is +1, so

    dot(a, b) = agreements - disagreements = 2 * xnor_popcount(a, b) - n.

This script packs random sign vectors, checks the identity, and shows the
packed-word layout.
"""

import numpy as np

from sbnn import BitMatrix, binary_gemv, pack_signs, xnor_popcount

rng = np.random.default_rng(0)

a = rng.choice([-1, 1], 37)
b = rng.choice([-1, 1], 37)
va, vb = pack_signs(a), pack_signs(b)

print("a:", a[:12], "...")
print("b:", b[:12], "...")
print(f"packed words of a: {[hex(int(w)) for w in va.words]}")

agree = xnor_popcount(va, vb)
print(f"\nagreements            : {agree} of {len(va)}")
print(f"2*agree - n           : {2 * agree - 37}")
print(f"integer dot product   : {int(a @ b)}")

w = BitMatrix.from_sign_matrix(rng.choice([-1, 1], (4, 37)))
print(f"\nbinary_gemv popcounts : {binary_gemv(w, va)}")
print(f"as +/-1 pre-activation: {2 * binary_gemv(w, va) - 37}")
print(f"float oracle          : {(w.to_signs() @ a).tolist()}")
