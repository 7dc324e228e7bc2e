"""Shooting for the initial data that keeps the auxiliary solution in the
shrinking set until its blowup.

Run: python3 demos/02_shooting_search.py   (about 10 s)
"""
import numpy as np

from heatblowup.config import ExperimentConfig
from heatblowup.experiments import build_setup, construct
from heatblowup.initial_data import exit_time

setup = build_setup(ExperimentConfig().validate())
cfg = setup.cfg
print(f"s0={cfg.s0} (T1={cfg.T1:.3e}), K0={cfg.K0}, epsilon0={cfg.epsilon0}, A={cfg.A}")

# most (d0, d1) leave the (q0, q1) box quickly
for d in [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0)]:
    r = exit_time(setup.data.with_d(*d), setup.grid, setup.region, setup.shrink, setup.sim)
    print(f"d={d}: exit at s={r.s_exit:.3f} ({r.exit_mode})")

res = construct(setup)
sh = res.shooting
print(f"search: d*=({sh.d0_star:.6f}, {sh.d1_star:.6f}) after {sh.evaluations} runs")
print(f"check: exit mode {res.check.exit_mode} at s={res.check.s_exit:.3f}")
ratios = np.array([[rep.ratios[k] for k in ("q0", "q1", "q2", "q_minus", "q_e")]
                   for _, rep, _ in res.check.reports])
print("largest bound ratios (q0, q1, q2, q_minus, q_e):", np.round(ratios.max(axis=0), 4))
print(f"auxiliary blowup: T_hat={res.T_hat:.6e} (T1={cfg.T1:.6e}), a_hat={res.a_hat:.5f}")
