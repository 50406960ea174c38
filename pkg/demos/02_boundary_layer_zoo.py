"""The three wall-layer families and their thicknesses.

A trace entry at frequency mu and horizontal mode k_h excites profiles
exp(-lambda z / sqrt(eps nu)).  Away from resonance both decay rates are
order one: the classical Ekman layer of thickness sqrt(eps nu).  At |mu| = 1
with k_h != 0 one rate collapses to (eps + sqrt(eps nu))^(1/2): a much
thicker quasi-resonant layer.  At |mu| = 1 with k_h = 0 a rate vanishes
outright and the response is a self-similar heat profile of width
sqrt(nu t) that eventually fills the strip.
"""

import csv
import math

import numpy as np

from rotstrip import BoundaryTrace, Params, build_B, decay_rates, empty_trace

print(__doc__)

print("Decay rates at eps = nu = 1e-6:")
p = Params(1e-6, 1e-6)
for mu, k_h in [(0.0, (1, 0)), (0.5, (1, 0)), (1.0, (1, 0)), (1.0, (0, 0))]:
    r = decay_rates(mu, k_h, p)
    print(f"  mu = {mu:+.1f}, k_h = {k_h}: lambda- = {r.lambda_minus:.4g}, "
          f"lambda+ = {r.lambda_plus:.4g}"
          + ("  [one rate vanished: resonant]" if r.degenerate_zero else ""))

print("\nLayer thickness sweep with nu = eps (written to layer_zoo.csv):")
rows = []
for expo in range(2, 8):
    eps = 10.0 ** -expo
    p = Params(eps, eps)
    classical = build_B(BoundaryTrace(0, {(0.0, (1, 0)): np.array([1.0, 0.0])}),
                        empty_trace(1), p)
    quasi = build_B(BoundaryTrace(0, {(1.0, (1, 0)): np.array([1.0, 0.0])}),
                    empty_trace(1), p)
    n_c = classical.part_norm_h("classical")
    n_q = quasi.part_norm_h("quasi_resonant")
    rows.append((eps, math.sqrt(eps * eps), n_c, n_q))
    print(f"  eps = 1e-{expo}: ||classical||_h = {n_c:.3e}, "
          f"||quasi-resonant||_h = {n_q:.3e} (ratio {n_q / n_c:.1f})")

with open("layer_zoo.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["eps", "sqrt_eps_nu", "norm_classical_h", "norm_quasi_h"])
    w.writerows(rows)

print("\nThe quasi-resonant layer carries far more energy for the same trace:")
print("its norm scales like (eps nu / (eps + sqrt(eps nu)))^(1/4) instead of")
print("(eps nu)^(1/4), the fingerprint of the anomalously slow decay rate.")

print("\nResonant column: norm grows like (nu t)^(1/4), never saturating:")
p = Params(1e-3, 1e-3)
res = build_B(BoundaryTrace(0, {(1.0, (0, 0)): np.array([1.0, 1j])}),
              empty_trace(1), p)
(layer,) = res.resonant
for nut in (1e-4, 1e-2, 1.0):
    t = nut / p.nu
    print(f"  nu t = {nut:6.1e}: ||v_res||_h = {layer.l2_norm_h(t):.4f}, "
          f"interior mass fraction = {layer.interior_mass_fraction(t):.2f}")
