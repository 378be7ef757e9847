"""Complexity certificates: the generic sum, the closed forms, tails and
the loss / excess-risk transfer chain.

Run:  python demos/04_complexity_certificates.py
"""

from chenfliess import (
    AnalyticFamily,
    BilinearFamily,
    HopfieldFamily,
    PreconditionError,
    analytic_bound,
    bilinear_bound,
    excess_risk_bound,
    hopfield_bound,
    loss_contraction,
    theorem1_bound,
    truncation_tail,
)

N = 200

# --- the generic sum converges to each closed form ------------------------
print("partial sums of the generic bound against the closed forms (N=200):")
fam = BilinearFamily(r=1.0, a=1.0)
closed = bilinear_bound(1.0, 2, 1.0, 0.3, 1.0, N)
for K in (1, 2, 4, 8, 16, 32):
    rep = theorem1_bound(fam, 2, 1.0, 0.3, N, K=K)
    print(f"  bilinear K={K:2d}: partial {rep.partial_sum:.12f}"
          f" + tail {rep.tail:.2e} = {rep.total:.12f}")
print(f"  closed form    : {closed:.12f}")
print()

# --- preconditions ----------------------------------------------------------
# The analytic and saturating-net forms are geometric series: they diverge
# beyond a parameter boundary and the calculators say so explicitly.
try:
    analytic_bound(1.0, 2, 2, 1.0, 0.5, 1.0, N)
except PreconditionError as err:
    print("analytic bound at a divergent horizon:", err)
fam = AnalyticFamily(r=1.0, n=2, a_r=1.0)
print("tail at that horizon:", truncation_tail(fam, 2, 1.0, 0.5, 10))
print()

# Approaching the boundary blows the certificate up:
for frac in (0.5, 0.9, 0.99):
    T = frac / 16.0  # boundary 4 n^2 M T b a = 1 sits at T = 1/16 for n=2, a=b=1
    v = hopfield_bound(1.0, 2, 1.0, T, 1.0, 1.0, N)
    print(f"  hopfield bound at {frac:.2f} of the boundary: {v:.4f}")
print()

# --- certificate chain ------------------------------------------------------
# Function-class bound -> squared-loss contraction -> excess risk.
fam = HopfieldFamily(r=1.0, n=2, a=0.34, b=7.1)
R_F = theorem1_bound(fam, 4, 1.0, 0.02, N, K=60).total
M2 = theorem1_bound(fam, 4, 1.0, 0.02, 1, K=60).total  # sup |model|
M1 = M2  # labels generated by the model class
R_loss = loss_contraction("squared", M1, M2, N, R_F)
B = (M1 + M2) ** 2
excess = excess_risk_bound(R_loss, B, N, delta=0.05)
print("certificate chain for the saturating-net example (N=200):")
print(f"  complexity bound        R_F    = {R_F:.4f}")
print(f"  model sup bound         M2     = {M2:.4f}")
print(f"  squared-loss complexity R_loss = {R_loss:.4f}")
print(f"  excess risk (delta=.05)        = {excess:.4f}")
print()
print("Every calculator scales exactly as 1/sqrt(N): quadrupling N halves")
print("the certificate:", bilinear_bound(1, 1, 1, 1, 1, 100),
      "->", bilinear_bound(1, 1, 1, 1, 1, 400))
