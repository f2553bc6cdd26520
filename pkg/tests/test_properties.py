import numpy as np
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from thintube.effective import assemble_effective, effective_potentials, effective_spectrum
from thintube.extrapolate import richardson
from thintube.fiber import IntervalFamily, ScaledRotatedFamily, build_band_data
from thintube.geometry import arclength_reparametrize, bishop_frame, synthetic_geometry
from thintube.profiles import AngleProfile, PeriodicProfile
from thintube.refdomain import Rectangle, StarShaped
from thintube.tube import assemble_tube, tube_spectrum

L = 2 * np.pi
coef = st.floats(-0.15, 0.15)
few = settings(max_examples=12, deadline=None)


@st.composite
def interval_case(draw):
    ell = PeriodicProfile.fourier(L, draw(st.floats(0.6, 1.2)), [draw(coef), draw(coef)], [draw(coef)])
    center = PeriodicProfile.fourier(L, draw(coef), [draw(coef)], [draw(coef)])
    kap = PeriodicProfile.fourier(L, draw(st.floats(-1, 1)), [draw(coef)], [draw(coef)])
    return IntervalFamily(ell, center), synthetic_geometry(L, [kap], n=32)


@st.composite
def star_case(draw):
    rho = PeriodicProfile.fourier(2 * np.pi, 1.0, [draw(st.floats(-0.1, 0.1)), draw(st.floats(0.05, 0.1))],
                                  [draw(st.floats(-0.1, 0.1))])
    fam = ScaledRotatedFamily(StarShaped(rho, 20), PeriodicProfile.fourier(L, 0.5, [draw(st.floats(-0.05, 0.05))]),
                              AngleProfile(L, draw(st.floats(0, 6)), 2 * np.pi,
                                           PeriodicProfile.fourier(L, 0.0, [draw(coef)], [draw(coef)])))
    geom = synthetic_geometry(L, [PeriodicProfile.fourier(L, draw(st.floats(-1, 1)), [draw(coef)]),
                                  PeriodicProfile.fourier(L, draw(st.floats(-1, 1)), [], [draw(coef)])], n=24)
    return fam, geom


def check_band(band):
    assert np.all(band.V_BH >= -1e-12)
    assert band.gap > 0
    if band.J == 0:
        # all other levels lie above: the off-band form is positive
        assert np.all(band.T[:, 0, 0] >= 0) and np.all(band.T[:, 1, 1] >= 0)
        assert np.all(band.T[:, 0, 1] ** 2 <= band.T[:, 0, 0] * band.T[:, 1, 1] * (1 + 1e-9) + 1e-14)
    c2 = np.linalg.eigvalsh(band.M2 - np.einsum("ja,jb->jab", band.M1, band.M1))
    assert np.all(c2 > 0)


@few
@given(interval_case(), st.integers(0, 2))
def test_interval_band_invariants(case, J):
    fam, geom = case
    band = build_band_data(fam, geom, J)
    check_band(band)
    s = np.arange(1, 128) / 128 - 0.5
    for j in (0, 11, 23):
        assert abs(np.sum(band.phi(j, s) ** 2) * fam.ell(band.q[j]) / 128 - 1) < 1e-12


@few
@given(star_case(), st.integers(0, 1))
def test_star_band_invariants_and_gauge(case, J):
    fam, geom = case
    a = build_band_data(fam, geom, J)
    check_band(a)
    b = build_band_data(fam, geom, J, gauge_sign=-1)
    for name in ("E", "M1", "M2", "B", "V_BH", "T"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    cell = fam.reference.grid.cell
    for j in (0, 9):
        assert abs(cell * np.sum(a.phi(j) ** 2) * fam.scale(a.q[j]) ** 2 - 1) < 1e-10


@few
@given(interval_case(), st.floats(0.02, 0.3), st.sampled_from([0, 1, 2]))
def test_effective_operator_hermitian(case, eps, order):
    fam, geom = case
    band = build_band_data(fam, geom, 0)
    if eps * band.overlap_parameter() >= 0.9:
        eps = 0.5 / band.overlap_parameter()
    op = assemble_effective(geom, band, effective_potentials(geom, band), eps, order=order)
    K = op.K.toarray()
    assert np.array_equal(K, K.conj().T)
    assert np.all(op.M.diagonal() > 0)
    vals = effective_spectrum(op, 4)[0]
    assert np.all(np.isfinite(vals))


@settings(max_examples=8, deadline=None)
@given(interval_case(), st.floats(0.05, 0.2), st.floats(0.05, 0.3))
def test_dirichlet_domain_monotonicity(case, eps, grow):
    fam, geom = case
    if eps * (abs(fam.center.mean) + 2) * 1.5 >= 1:
        eps = 0.2
    wider = IntervalFamily(fam.ell.scaled(1 + grow), fam.center)
    a = tube_spectrum(assemble_tube(geom, fam, eps, 24, 16), 4)[0]
    b = tube_spectrum(assemble_tube(geom, wider, eps, 24, 16), 4)[0]
    assert np.all(b < a)


@settings(max_examples=4, deadline=None)
@given(st.floats(0.0, 0.02), st.floats(0.05, 0.12))
def test_ellipse_chart_of_annulus_is_isometric(ecc, eps):
    ell = 0.8
    r1, r2 = 1 - eps * ell / 2, 1 + eps * ell / 2
    t = np.linspace(0, 2 * np.pi, 2049)
    g = bishop_frame(arclength_reparametrize(np.stack([(1 + ecc) * np.cos(t), (1 - ecc) * np.sin(t)], 1), 256))
    X, E = g.positions, g.frames[:, 0, :]
    hit = lambda j, R: brentq(lambda n: np.linalg.norm(X[j] + eps * n * E[j]) - R, -5, 5, xtol=1e-15)
    lo = np.array([hit(j, r1) for j in range(g.n)])
    hi = np.array([hit(j, r2) for j in range(g.n)])
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    fam = IntervalFamily(PeriodicProfile.from_samples(hi - lo, g.length), PeriodicProfile.from_samples((hi + lo) / 2, g.length))
    ref = IntervalFamily.constant(ell, 2 * np.pi)
    circ = synthetic_geometry(2 * np.pi, [1.0], n=64)
    a = richardson([tube_spectrum(assemble_tube(g, fam, eps, 32 * 2**i, 16 * 2**i), 3)[0] for i in range(3)])[0]
    b = richardson([tube_spectrum(assemble_tube(circ, ref, eps, 32 * 2**i, 16 * 2**i), 3)[0] for i in range(3)])[0]
    np.testing.assert_allclose(a, b, rtol=1e-7)


@few
@given(st.integers(1, 31), st.floats(0.05, 0.2))
def test_shifting_the_start_point_leaves_the_spectrum(shift, eps):
    base = PeriodicProfile.fourier(L, 0.5, [0.3, 0.1], [0.2])
    moved = PeriodicProfile.from_callable(lambda q: base(q + shift * L / 32), L, 32)
    fam = IntervalFamily(PeriodicProfile.fourier(L, 0.8, [0.1]), PeriodicProfile.constant(0.0, L))
    fam2 = IntervalFamily(PeriodicProfile.from_callable(lambda q: fam.ell(q + shift * L / 32), L, 32), fam.center)
    out = []
    for kap, f in ((base, fam), (moved, fam2)):
        geom = synthetic_geometry(L, [kap], n=32)
        band = build_band_data(f, geom, 0)
        out.append(effective_spectrum(assemble_effective(geom, band, effective_potentials(geom, band), eps), 6)[0])
    np.testing.assert_allclose(out[0], out[1], rtol=1e-11)
