"""Signatures of piecewise-constant controls: exact iterated integrals.

Run:  python demos/02_signatures_of_controls.py
"""

import json
import math

from chenfliess import ControlPath, constant_path, signature_norm_bound, \
    signature_up_to

# A two-channel bang-bang control: channel 1 on for the first half,
# channel 2 on for the second half.
u = ControlPath(
    m=2,
    breakpoints=(0.0, 0.5, 1.0),
    values=((1.0, 0.0), (0.0, 1.0)),
    M=1.0,
)

table = signature_up_to(u, K=3)
print("signature entries up to order 3 (word: value, simplex bound):")
for w in table.words():
    bound = signature_norm_bound(u.M, u.T, len(w))
    print(f"  {str(w):<12} {table[w]:+.6f}   |.| <= {bound:.6f}")
print()

# Order matters: (1,2) integrates channel 1 at the earlier time, so it is
# large for this control, while (2,1) is impossible and vanishes.
print("S^(1,2) =", table[(1, 2)], "  S^(2,1) =", table[(2, 1)])
print()

# The one-channel shuffle identity: repeated-letter entries are powers of
# the first integral.
c = constant_path((0.8,), T=1.5)
tbl = signature_up_to(c, 6)
s1 = tbl[(1,)]
print("one-channel shuffle identity on a constant path:")
for k in range(1, 7):
    print(f"  k={k}: S^(1^k) = {tbl[(1,) * k]:.8f}"
          f"   (S^1)^k/k! = {s1**k / math.factorial(k):.8f}")
print()

# Sign-flipping a control flips odd-order entries only.
flipped = tbl.flipped()
print("parity under u -> -u:", tbl[(1,)], "->", flipped[(1,)],
      "and", tbl[(1, 1)], "->", flipped[(1, 1)])
print()

# Tables serialize to JSON with words as integer lists.
print("JSON serialization (truncated):")
print(json.dumps(signature_up_to(u, 1).to_json_dict(), indent=2))
