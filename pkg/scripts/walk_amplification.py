"""Spectral gaps and marked-mass amplification of the Johnson walk for small (N, r)."""
import math

from qmitm.quantum_cost_model import claw_walk_params
from qmitm.quantum_simulator import amplification_steps, build_johnson_walk, spectral_gap, szegedy_walk_simulate

print(f"{'N':>3} {'r':>3} {'gap':>9} {'formula':>9} {'eps':>7} {'steps':>5} {'peak':>7} {'ratio':>6}")
for n in (6, 8, 10):
    for r in sorted({2, 3, math.ceil(n ** (2 / 3))}):
        op = build_johnson_walk(n, r)
        steps = amplification_steps(n, r)
        rep = szegedy_walk_simulate(op, steps)
        gap = spectral_gap(op.transition_matrix())
        spec = claw_walk_params(n, r)
        print(
            f"{n:>3} {r:>3} {gap:>9.6f} {spec.spectral_gap:>9.6f} {rep.stationary_marked_mass:>7.4f} "
            f"{steps:>5} {rep.peak_marked_probability:>7.4f} {rep.peak_marked_probability / rep.stationary_marked_mass:>6.2f}"
        )
