"""A wavepacket running around the bent annulus, in 2D and in 1D.

The initial state is a packet on the circle times the fiber ground state.
We evolve it with the annulus Laplacian and with the effective operator and
record the distance between the two up to t = 2 / eps.
"""
from pathlib import Path

from thintube.config import load_config
from thintube.experiments import run_dynamics_compare

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "bent_annulus.json",
                  ["eps=[0.2,0.1,0.05]", "resolution.Nq=64"])
rep = run_dynamics_compare(cfg, threads=3)
for r in rep["per_eps"]:
    print(f"eps {r['eps']:.3f}: err(0) {r['err0']:.3e}, err(t_max) {r['err'][-1]:.3e}, "
          f"slope {r['slope']:.3e}, band-projected err(t_max) {r['projected_err'][-1]:.3e}")
print("slope ~ eps^%.2f" % rep["slope_fit"]["slope"], "| err(0) ~ eps^%.2f" % rep["err0_fit"]["slope"])
