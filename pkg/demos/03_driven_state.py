"""The state of a slowly driven Fermi sea.

A Fermi sea ``zeta = 1[H <= E_F]`` is prepared in the remote past and
evolved while the field ``E e^{eta t}`` is switched on.  Its state at time
``t`` can be written in two ways: as the limit of ``U(t, s)(zeta)`` as
``s -> -inf``, or through a Duhamel integral that starts from the gauge
transported equilibrium ``zeta(t)``.  Both are computed below, together with
the residual of the Liouville equation in weak form and the linear growth
of the response with the field strength.
"""

import math

import numpy as np

from liouville_lab.covariant_algebra import ModelEnsemble, k2_inner, norms
from liouville_lab.harness.suites import dictionary
from liouville_lab.lattice_model import DisorderModel, FieldProfile, LatticeGeometry
from liouville_lab.liouville import (
    EquilibriumSpec,
    duhamel_rho,
    equilibrium_state,
    limit_rho,
    liouville_residual_study,
    zeta_t,
)

box = LatticeGeometry((16,))
models = ModelEnsemble.sample(
    box, DisorderModel(v_plus_max=1.0), FieldProfile([0.1], eta=1.0), 4, window="volume"
)
fermi = EquilibriumSpec(math.inf, 4.6)
zeta = equilibrium_state(fermi, models)
print(f"Fermi sea filling: {np.trace(zeta.matrices[0]).real / box.n_sites:.3f}")

# -- two representations of rho(0) -----------------------------------------------------
d = duhamel_rho(models, fermi, 0.0, zeta=zeta, k=1024)
lim = limit_rho(models, fermi, 0.0, zeta=zeta, k=1024)
print("\nlimit representation, Cauchy gaps along s = -2, -4, -6, -8:")
print("   ", "  ".join(f"{g:.2e}" for g in lim.gaps))
print("    successive ratios", "  ".join(f"{r:.3f}" for r in lim.gap_ratios), f"(e^-2 = {math.exp(-2):.3f})")
print(f"||rho_Duhamel - rho_limit||_2 = {norms(d.rho.ensemble - lim.rho.ensemble)[1]:.2e}"
      f"  (tail bound {d.truncation_bound:.2e})")

# -- the Liouville equation --------------------------------------------------------------
A = dictionary(models, fermi.fermi_energy)["f1(H)"]
hs = [0.2, 0.1, 0.05, 0.025]
res = liouville_residual_study(A, models, fermi, -1.0, hs, k=1024)
print("\nweak Liouville residual with a central difference of step h:")
for h, r in zip(hs, res):
    print(f"    h = {h:<6} residual = {r:.3e}")
print(f"    fitted order {np.polyfit(np.log(hs), np.log(res), 1)[0]:.2f}")

# -- linear response -----------------------------------------------------------------------
print("\ndeviation from the transported equilibrium, by field strength:")
for E in (0.025, 0.05, 0.1):
    m = models.with_profile(FieldProfile([E], 1.0))
    r = duhamel_rho(m, fermi, 0.0, zeta=zeta, k=512)
    dev = norms(r.rho.ensemble - zeta_t(zeta, 0.0, m).ensemble)[1]
    print(f"    E = {E:<6} ||rho(0) - zeta(0)||_2 = {dev:.3e}")
B = dictionary(models, fermi.fermi_energy)["i[x,f1(H)]"]
print(f"\n<<i[x, f1(H)], rho(0) - zeta(0)>> = "
      f"{k2_inner(B, d.rho.ensemble).real - k2_inner(B, zeta_t(zeta, 0.0, models).ensemble).real:.3e}")
