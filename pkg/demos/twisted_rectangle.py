"""A straight tube whose rectangular cross-section turns once per period.

Twisting costs energy: the band bottom rises by eps^2 omega^2 c, where c is
the squared angular momentum of the fiber ground state. We read c off the
reference domain, check the assembled coefficient against it and then
solve the full three-dimensional problem.
"""
import numpy as np

from thintube.effective import assemble_effective, effective_potentials, effective_spectrum
from thintube.fiber import ScaledRotatedFamily, build_band_data
from thintube.geometry import synthetic_geometry
from thintube.refdomain import Rectangle
from thintube.tube import assemble_tube, tube_spectrum

L = 2 * np.pi
geom = synthetic_geometry(L, [0.0, 0.0], n=64)
rect = Rectangle(np.pi, np.pi / 2, 24)

for omega in (0.5, 1.0, 1.5):
    fam = ScaledRotatedFamily.rigid(rect, L, twist=omega)
    band = build_band_data(fam, geom, 0, n=32)
    print(f"omega {omega}: V_BH / omega^2 = {band.V_BH[0] / omega**2:.5f}, seam sign {band.loop_sign:+d}")

eps = 0.1
fam = ScaledRotatedFamily.rigid(rect, L, twist=1.0)
band = build_band_data(fam, geom, 0, n=32)
still = tube_spectrum(assemble_tube(geom, ScaledRotatedFamily.rigid(rect, L), eps, 32, 24), 3)[0]
turned = tube_spectrum(assemble_tube(geom, fam, eps, 32, 24), 3)[0]
eff = effective_spectrum(assemble_effective(geom, band, effective_potentials(geom, band), eps), 3)[0]
print("tube, untwisted :", still)
print("tube, twisted   :", turned)
print("effective       :", eff)
print(f"band-bottom shift: tube {turned[0] - still[0]:.6f}, effective {eff[0] - band.E[0]:.6f}")
