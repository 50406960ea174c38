"""Ekman pumping: the bottom layer damps the interior at rate sqrt(nu/eps) A_k.

Each interior eigenmode drags a thin bottom layer along to satisfy no-slip;
the layer's vertical suction feeds back as an effective friction on the
filtered amplitude.  The coefficient A_k is computed from the exact layer
decay rates; its small-(eps, nu) limit R_k + i I_k is closed form, with the
classical spin-down value R = 1/sqrt(2) for steady columns.  The direct
solver independently reproduces the predicted decay.
"""

from rotstrip import Params, SpectralField, fit_decay, solve_direct
from rotstrip.envelope import damping_rate, damping_table, ekman_limit_coefficient

print(__doc__)

p = Params(1e-3, 1e-3)
print("Per-mode damping table (eps = nu = 1e-3):")
print("      k        lambda_k      Re A_k     R_k (limit)   full rate")
for row in damping_table([(1, 0, 0), (1, 0, 1), (1, 0, 3), (2, 1, 1), (0, 0, 1)], p):
    k = (row["k1"], row["k2"], row["k3"])
    print(f"  {str(k):12s} {row['lambda']:+.4f}   {row['A_real']:9.4f} "
          f"  {row['R']:9.4f}   {row['damping_real']:9.4f}")

print(f"\nSteady-column limit R(lambda=0) = {ekman_limit_coefficient((1, 0, 0))[0]:.6f}"
      f" = 1/sqrt(2)")

mode = (1, 0, 1)
pred = damping_rate(mode, p)
print(f"\nDirect solve of gamma = N_{mode} to T = 0.4 (this takes a few seconds)...")
out = solve_direct(SpectralField({mode: 1.0}), None, p, t_end=0.4, Nz=384, save_every=25)
fit = fit_decay(out[(1, 0)], (0.1, 0.4), mode)
print(f"  predicted rate |k_h|^2 + sqrt(nu/eps) Re A_k = {pred.real:.4f}")
print(f"  fitted rate from the direct solver          = {fit.rate.real:.4f}")
print(f"  relative difference                         = "
      f"{abs(fit.rate.real - pred.real) / pred.real:.2%}")
print("\nThe agreement pins down the absolute normalisation of A_k: the")
print("eigenmode projections behind it were validated against quadrature,")
print("and the measured spin-down confirms the 2 pi |k_h| / (|k_h|^2 +")
print("pi^2 k3^2) prefactor.")
