import numpy as np
import pytest

from thintube.effective import (assemble_effective, effective_eigenvalues, effective_potentials,
                                effective_propagate, effective_spectrum)
from thintube.errors import GridMismatch, TubeOverlap
from thintube.fiber import IntervalFamily, ScaledRotatedFamily, build_band_data
from thintube.geometry import circle, synthetic_geometry
from thintube.profiles import AngleProfile, PeriodicProfile
from thintube.refdomain import Rectangle, StarShaped

L = 2 * np.pi


def build(geom, fam, eps, J=0, order=2, n=None):
    band = build_band_data(fam, geom, J, n=n)
    return assemble_effective(geom, band, effective_potentials(geom, band), eps, order=order), band


def mu(k, n, length=L):
    h = length / n
    return (2 * np.sin(np.pi * k / n) / h) ** 2


def test_flat_cylinder_exact_discrete_spectrum():
    eps, n = 0.1, 64
    op, _ = build(synthetic_geometry(L, [0.0], n=n), IntervalFamily.constant(np.pi, L), eps)
    vals, _ = effective_spectrum(op, 7)
    expect = np.sort(np.concatenate([[0], np.repeat(np.arange(1, 4), 2)]).astype(float))
    np.testing.assert_allclose(vals, 1 + eps**2 * mu(expect, n), rtol=1e-13)


def test_circle_closed_form():
    R, ell, eps, n = 1.5, 0.8, 0.2, 48
    geom = synthetic_geometry(2 * np.pi * R, [1 / R], n=n)
    op, band = build(geom, IntervalFamily.constant(ell, geom.length), eps)
    pots = effective_potentials(geom, band)
    np.testing.assert_allclose(pots.V_geom, -1 / (4 * R**2), rtol=1e-12)
    assert np.ptp(op.a) < 1e-14 and np.all(op.B == 0) and np.all(op.A == 0)
    m2 = ell**2 * (1 / 12 - 1 / (2 * np.pi**2))
    np.testing.assert_allclose(op.a, 1 + 3 * eps**2 * m2 / R**2, rtol=1e-12)
    W = (np.pi / ell) ** 2 - eps**2 / (4 * R**2)
    T22 = band.T[0, 1, 1]
    k = np.array([0, 1, 1, 2, 2, 3, 3])
    m = mu(k, n, geom.length)
    expect = W + eps**2 * op.a[0] * m - eps**6 * T22 * m**2
    vals, _ = effective_spectrum(op, 7)
    np.testing.assert_allclose(vals, np.sort(expect), rtol=1e-12)


def test_antiperiodic_band_closed_form():
    eps, n = 0.1, 64
    fam = ScaledRotatedFamily.rigid(Rectangle(np.pi, np.pi / 2, 24), L, twist=0.5)
    op, band = build(synthetic_geometry(L, [0.0, 0.0], n=n), fam, eps, J=1)
    assert band.loop_sign == -1
    assert band.E[0] == pytest.approx(8.0, rel=5e-3)
    k = np.repeat(np.arange(4) + 0.5, 2)
    m = mu(k, n)
    expect = band.E[0] + eps**2 * band.V_BH[0] + eps**2 * m * (1 - eps**2 * band.T[0, 0, 0])
    vals, _ = effective_spectrum(op, 8)
    np.testing.assert_allclose(vals, expect, rtol=1e-12)


def generic():
    geom = synthetic_geometry(L, [lambda q: 0.8 + 0.3 * np.cos(q), lambda q: 0.4 * np.sin(2 * q)], n=64)
    ref = StarShaped(PeriodicProfile.fourier(2 * np.pi, 1.0, [0.12], [0.0, 0.08]), 24)
    fam = ScaledRotatedFamily(ref, PeriodicProfile.fourier(L, 0.5, [0.05]),
                              AngleProfile(L, 0.0, 2 * np.pi, PeriodicProfile.fourier(L, 0.0, [0.2])))
    return geom, fam


def test_hermitian_and_positive_mass():
    geom, fam = generic()
    op, band = build(geom, fam, 0.2, J=1)
    # real nondegenerate band: the connection term vanishes identically
    assert np.abs(band.A).max() < 1e-15
    K = op.K.toarray()
    assert np.abs(K - K.conj().T).max() == 0.0
    assert np.all(np.linalg.eigvalsh(K) > 0)
    assert np.all(op.M.diagonal() > 0)


def test_second_order_grid_convergence():
    geom, fam = generic()
    vals = []
    for n in (32, 64, 128):
        g = synthetic_geometry(L, [lambda q: 0.8 + 0.3 * np.cos(q), lambda q: 0.4 * np.sin(2 * q)], n=n)
        vals.append(effective_spectrum(build(g, fam, 0.2, n=n)[0], 4)[0])
    r = np.abs(vals[0] - vals[1]) / np.abs(vals[1] - vals[2])
    assert np.all(np.log2(r) > 1.8)


def test_order_zero_reduction():
    geom, fam = generic()
    op, band = build(geom, fam, 0.2, order=0)
    assert np.all(op.a == 1) and np.all(op.A == 0) and np.all(op.B == 0) and np.all(op.T == 0)
    np.testing.assert_array_equal(op.W, band.E)


def test_offband_term_lowers_levels():
    geom, fam = generic()
    band = build_band_data(fam, geom, 0)
    pots = effective_potentials(geom, band)
    full = effective_spectrum(assemble_effective(geom, band, pots, 0.2), 6)[0]
    import dataclasses
    bare = dataclasses.replace(band, T=np.zeros_like(band.T))
    without = effective_spectrum(assemble_effective(geom, bare, pots, 0.2), 6)[0]
    assert np.all(full <= without + 1e-14) and np.any(full < without - 1e-8)


def test_eigenvalue_window_matches_full_solve():
    geom, fam = generic()
    op, _ = build(geom, fam, 0.1)
    vals, _ = effective_spectrum(op, 10)
    window = effective_eigenvalues(op, vals[-1] + 1e-9)
    np.testing.assert_allclose(window[:10], vals, rtol=1e-12)


def test_propagation_unitary_and_group_property():
    geom, fam = generic()
    op, _ = build(geom, fam, 0.2, J=1)
    rng = np.random.default_rng(3)
    psi0 = rng.normal(size=op.n) + 1j * rng.normal(size=op.n)
    out = effective_propagate(op, psi0, [0.0, 0.7, 1.4])
    np.testing.assert_allclose(out[0], psi0, atol=1e-10)
    norms = [np.vdot(p, op.M @ p).real for p in out]
    np.testing.assert_allclose(norms, norms[0], rtol=1e-11)
    twice = effective_propagate(op, out[1], [0.7])[0]
    np.testing.assert_allclose(twice, out[2], atol=1e-9)


def test_sampled_circle_curvature():
    geom = circle(1.5, n=48)
    np.testing.assert_allclose(np.linalg.norm(geom.kappa, axis=1), 1 / 1.5, rtol=1e-5)


def test_guards():
    geom = circle(1.0, n=32)
    fam = IntervalFamily.constant(0.8, geom.length)
    band = build_band_data(fam, geom, 0)
    with pytest.raises(TubeOverlap):
        assemble_effective(geom, band, effective_potentials(geom, band), 2.6)
    with pytest.raises(GridMismatch):
        effective_potentials(circle(2.0, n=32), band)
