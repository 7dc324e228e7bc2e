"""Small perturbations of the constructed data move the blowup time and point
only a little, and the recentered data responds linearly to shifts of (T, a).

Run: python3 demos/04_stability.py   (about 15 s)
"""
from heatblowup.config import ExperimentConfig
from heatblowup.experiments import build_setup, construct, recenter_shifts, stability

setup = build_setup(ExperimentConfig().validate())
res = construct(setup)
rep = stability(setup, res.target, (0.0, 1e-3, 1e-2), res.T_hat, res.a_hat)
for r in rep.rows:
    print(f"size {r['size']:.0e}: |dT|={r['dT']:.2e} |da|={r['da']:.2e} "
          f"inside box: {r['inside_box']}")

print("kind   size     shift       leading     first order")
for kind, size, shift, lead, first in recenter_shifts(setup, res.target, (1e-4, 1e-3, 1e-2)):
    print(f"{kind:6s} {size:.0e}  {shift:+.4e} {lead:+.4e} {first:+.4e}")
