"""Level spacings of a tube whose width varies along a straight axis.

The band energy pi^2 / l(q)^2 has a single minimum where the tube is widest,
so the bottom of the spectrum looks like a harmonic oscillator with spacing
proportional to eps. Higher up the spacing follows the phase-space count.
"""
from pathlib import Path

from thintube.config import load_config
from thintube.experiments import run_level_spacing

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "varying_interval.json")
rep = run_level_spacing(cfg, threads=4)
for r in rep["per_eps"]:
    print(f"eps {r['eps']:.3f}: {r['levels']:4d} levels, bottom spacing {r['bottom_spacing']:.6f}, "
          f"harmonic {r['harmonic_spacing']:.6f}, mid-band {r['order1_spacing']:.6f} (Weyl {r['weyl_spacing']:.6f})")
for key, fit in rep["fits"].items():
    if fit:
        print(f"{key:>10}: spacing ~ eps^{fit['slope']:.3f}")

flat = load_config(Path(__file__).resolve().parents[1] / "configs" / "flat_cylinder.json")
fit = run_level_spacing(flat, threads=4)["fits"]["bottom"]
print(f"constant width: bottom spacing ~ eps^{fit['slope']:.3f}")
