"""How fast does the effective operator approach the thin annulus?

A unit circle carries a Dirichlet interval of width 0.8 eps. We compute the
lowest levels of -eps^2 Delta on the annulus and of the one-dimensional
effective operator at truncation orders 0, 1 and 2, extrapolate both in the
grid spacing, and fit the differences against eps.
"""
from pathlib import Path

from thintube.config import load_config
from thintube.experiments import run_spectrum_compare

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "bent_annulus.json")
report = run_spectrum_compare(cfg, threads=4)

print(f"gap to the next band {report.gap:.4f}, resolvent tail {report.truncation_tail:.2e}")
print(f"{'eps':>6} {'order':>5} {'level':>5} {'tube':>16} {'effective':>16} {'diff':>10} status")
for row in report.rows:
    print(f"{row['eps']:6.3f} {row['order']:5d} {row['index']:5d} {row['full']:16.10f} "
          f"{row['effective']:16.10f} {row['diff']:10.2e} {row['status']}")

# order 0 drops the eps^2 terms and should lag by one power of eps^2
for order, fits in report.fits.items():
    slopes = [f"{fit['slope']:.2f}" if fit else "-" for fit in fits.values()]
    print(f"order {order}: fitted exponents {', '.join(slopes)}")
