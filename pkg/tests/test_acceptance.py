"""Acceptance criteria, one test each, with a one-line verdict per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines appear in
the terminal summary (and on stdout when run as a script).
"""
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import dblquad

from thintube.config import load_config
from thintube.effective import assemble_effective, effective_potentials, effective_spectrum
from thintube.experiments import run_dynamics_compare, run_level_spacing, run_spectrum_compare
from thintube.extrapolate import richardson
from thintube.fiber import IntervalFamily, ScaledRotatedFamily, build_band_data
from thintube.geometry import synthetic_geometry
from thintube.refdomain import Rectangle
from thintube.tube import assemble_tube, tube_spectrum

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
VERDICTS = []


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def annulus_report():
    return run_spectrum_compare(load_config(CONFIGS / "bent_annulus.json"), threads=4)


def test_criterion_1_flat_cylinder_exact():
    L, ell = 2 * np.pi, 1.0
    geom = synthetic_geometry(L, [0.0], n=64)
    fam = IntervalFamily.constant(ell, L)
    worst, worst_err = 0.0, 0.0
    for eps in (0.2, 0.1, 0.05, 0.025):
        k = np.sort(np.concatenate([[0], np.repeat(np.arange(1, 6), 2)]))[:10]
        exact = np.pi**2 / ell**2 + eps**2 * k**2
        full, ferr = richardson([tube_spectrum(assemble_tube(geom, fam, eps, 32 * 2**i, 16 * 2**i), 10)[0]
                                 for i in range(4)])
        seq = []
        for i in range(4):
            band = build_band_data(fam, geom, 0, n=64 * 2**i)
            seq.append(effective_spectrum(assemble_effective(geom, band, effective_potentials(geom, band), eps), 10)[0])
        eff, eerr = richardson(seq)
        worst = max(worst, np.max(np.abs(full - exact) / exact), np.max(np.abs(eff - exact) / exact),
                    np.max(np.abs(full - eff) / exact))
        worst_err = max(worst_err, np.max(ferr / exact), np.max(eerr / exact))
    verdict(1, worst <= 1e-6 and worst_err <= 1e-6,
            f"max relative deviation {worst:.2e}, Richardson error {worst_err:.2e} (limit 1e-6)")


def test_criterion_2_third_order_spectrum(annulus_report):
    fits = annulus_report.fits["2"]
    slopes = [fits[str(i)]["slope"] if fits[str(i)] else None for i in range(5)]
    ok = all(s is not None and s >= 2.7 for s in slopes) and annulus_report.guards["passed"]
    shown = ", ".join("none" if s is None else f"{s:.2f}" for s in slopes)
    verdict(2, ok, f"order-2 exponents per level [{shown}] (need >= 2.7), guards passed: {annulus_report.guards['passed']}")


def test_criterion_3_order_ladder(annulus_report):
    fits = annulus_report.fits["0"]
    slopes = [fits[str(i)]["slope"] if fits[str(i)] else None for i in range(5)]
    ok = all(s is not None and abs(s - 2) <= 0.3 for s in slopes)
    shown = ", ".join("none" if s is None else f"{s:.2f}" for s in slopes)
    verdict(3, ok, f"order-0 exponents per level [{shown}] (need 2 +- 0.3)")


def test_criterion_4_minimum_regime_spacing():
    rep = run_level_spacing(load_config(CONFIGS / "varying_interval.json"), threads=4)
    slope = rep["fits"]["bottom"]["slope"]
    ratios = [r["bottom_spacing"] / r["harmonic_spacing"] for r in rep["per_eps"]]
    ok = abs(slope - 1) <= 0.1 and all(abs(x - 1) <= 0.1 for x in ratios)
    verdict(4, ok, f"bottom spacing exponent {slope:.3f} (need 1 +- 0.1), "
                   f"spacing / harmonic oracle {', '.join(f'{x:.3f}' for x in ratios)} (need within 10%)")


def test_criterion_5_constant_band_spacing():
    rep = run_level_spacing(load_config(CONFIGS / "flat_cylinder.json"), threads=4)
    slope = rep["fits"]["bottom"]["slope"]
    verdict(5, abs(slope - 2) <= 0.15, f"bottom spacing exponent {slope:.4f} (need 2 +- 0.15)")


def test_criterion_6_twist_potential():
    L, omega, eps = 2 * np.pi, 1.0, 0.1
    a, b = np.pi, np.pi / 2
    geom = synthetic_geometry(L, [0.0, 0.0], n=64)
    rect = Rectangle(a, b, 24)
    twisted = ScaledRotatedFamily.rigid(rect, L, twist=omega)
    band = build_band_data(twisted, geom, 0, n=32)
    # continuum reference value: ||(s1 d2 - s2 d1) phi_0||^2 for the exact ground state
    c = 2 / np.sqrt(a * b)
    px = lambda x, y: -c * np.pi / a * np.sin(np.pi * x / a) * np.cos(np.pi * y / b)
    py = lambda x, y: -c * np.pi / b * np.cos(np.pi * x / a) * np.sin(np.pi * y / b)
    c_ref = dblquad(lambda y, x: (x * py(x, y) - y * px(x, y)) ** 2, -a / 2, a / 2, -b / 2, b / 2, epsabs=1e-12)[0]
    v_rel = np.max(np.abs(band.V_BH / (omega**2 * c_ref) - 1))
    straight = tube_spectrum(assemble_tube(geom, ScaledRotatedFamily.rigid(rect, L), eps, 32, 24), 1)[0][0]
    turned = tube_spectrum(assemble_tube(geom, twisted, eps, 32, 24), 1)[0][0]
    shift_full = turned - straight
    eff = effective_spectrum(assemble_effective(geom, band, effective_potentials(geom, band), eps), 1)[0][0]
    shift_eff = eff - band.E[0]
    ok = v_rel <= 0.01 and np.sign(shift_full) == np.sign(shift_eff) and abs(shift_full / shift_eff - 1) <= 0.2
    verdict(6, ok, f"V_BH vs omega^2 c_ref: rel. deviation {v_rel:.2e} (limit 1e-2); band-bottom shift "
                   f"tube {shift_full:.5f} vs effective {shift_eff:.5f} (ratio {shift_full / shift_eff:.3f}, need 0.8-1.2)")


def test_criterion_7_dynamics():
    cfg = load_config(CONFIGS / "bent_annulus.json", ["eps=[0.2,0.1,0.05]", "resolution.Nq=64", "resolution.levels=4"])
    rep = run_dynamics_compare(cfg, threads=3)
    fit = rep["slope_fit"]
    slope = fit["slope"] if fit else float("nan")
    c3 = ", ".join(f"{r['slope_over_eps3']:.3g}" for r in rep["per_eps"])
    pfit = rep["projected_slope_fit"]
    extra = f"; band-projected exponent {pfit['slope']:.2f}" if pfit else ""
    verdict(7, fit is not None and slope >= 1.8 and rep["linear_envelope"],
            f"t-slope exponent {slope:.2f} (need >= 1.8), slope/eps^3 [{c3}] non-increasing: "
            f"{rep['linear_envelope']}{extra}")


def test_criterion_8_invariant_suites():
    import subprocess
    import sys
    here = Path(__file__).resolve().parent
    files = ["test_properties.py", "test_refdomain.py", "test_fiber.py", "test_effective.py", "test_tube.py"]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *[str(here / f) for f in files]],
                          capture_output=True, text=True, cwd=here.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    verdict(8, proc.returncode == 0, f"invariant and module suites: {tail}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
