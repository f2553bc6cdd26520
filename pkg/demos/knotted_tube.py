"""A tube of rectangular cross-section along a trefoil knot.

Parallel transport around the knot rotates the normal plane by the
holonomy angle. A rectangle only matches itself after a half turn, so the
cross-section has to counter-rotate to close up. We let it turn by minus
the holonomy and look at the resulting band coefficients and low spectrum.
"""
import numpy as np

from thintube.effective import assemble_effective, effective_potentials, effective_spectrum
from thintube.fiber import ScaledRotatedFamily, build_band_data
from thintube.geometry import arclength_reparametrize, bishop_frame
from thintube.profiles import AngleProfile, PeriodicProfile
from thintube.refdomain import Rectangle
from thintube.tube import assemble_tube, tube_spectrum

t = np.linspace(0.0, 2 * np.pi, 4097)
rad = 2.0 + 0.7 * np.cos(3 * t)
knot = np.stack([rad * np.cos(2 * t), rad * np.sin(2 * t), 0.7 * np.sin(3 * t)], axis=1)
geom = bishop_frame(arclength_reparametrize(knot, 256))
L = geom.length
print(f"length {L:.4f}, holonomy {geom.holonomy:.6f}, max curvature {geom.max_curvature():.4f}")

fam = ScaledRotatedFamily(Rectangle(np.pi, np.pi / 2, 18), PeriodicProfile.constant(0.25, L),
                          AngleProfile(L, 0.0, -geom.holonomy, PeriodicProfile.constant(0.0, L)))
band = build_band_data(fam, geom, 0, n=128)
print(f"E_0 = {band.E[0]:.4f}, V_BH range [{band.V_BH.min():.4f}, {band.V_BH.max():.4f}], "
      f"|B| max {np.abs(band.B).max():.3e}, gap {band.gap:.3f}")

eps = 0.2
eff = effective_spectrum(assemble_effective(geom, band, effective_potentials(geom, band), eps), 4)[0]
tube = tube_spectrum(assemble_tube(geom, fam, eps, 48, 18), 4)[0]
print("effective:", eff)
print("tube     :", tube)
# the tube solve is a three-dimensional sparse factorization, hence the
# modest grid
