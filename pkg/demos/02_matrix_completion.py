"""Completing a partially observed score matrix with masked ALS.

Plants an exactly rank-1 matrix, reveals 30% of it, and shows: (1) a single
alternating-least-squares fit recovers the rest almost perfectly, with a
monotone objective trace; (2) an ensemble of fits, each hiding a slice of
the observations, yields a per-entry uncertainty that is zero on observed
cells and small wherever the structure pins the value down.
"""

import numpy as np

import lrbandit as lb
from lrbandit.core import ScoringState
from lrbandit.lrf import als_fit, fit_ensemble, gated_means

rng = np.random.default_rng(11)
m, n = 40, 60
u = rng.uniform(0.3, 1.0, m)
v = rng.uniform(0.3, 1.0, n)
full = np.outer(u, v)
full /= full.max()

state = ScoringState(m, n)
for code in rng.permutation(m * n)[: int(0.3 * m * n)]:
    i, j = divmod(int(code), n)
    state.record(i, j, float(full[i, j]))
print(f"observed {state.evaluations_used} of {m*n} entries (30%)")

pair = als_fit(state, state.mask.copy(), rank=1, stream=3)
recon = pair.predict()
rel = np.linalg.norm(recon - full) / np.linalg.norm(full)
print(f"\nsingle fit: {pair.iterations} alternations, relative error {rel:.2e}")
trace = pair.objective_history
print("objective trace (first 6):", np.array2string(trace[:6], precision=4))
print("monotone non-increasing:", bool(np.all(np.diff(trace) <= 0)))

cfg = lb.AlgorithmConfig(budget_total=m * n, ensemble_size=32)
ens = fit_ensemble(state, cfg, 5)
print(f"\nensemble of {len(ens.members)} members, each hiding 10% of the observations:")
print(f"  uncertainty on observed cells: max {ens.uncertainty[state.mask].max():.3g}")
print(f"  uncertainty on unobserved:     mean {ens.uncertainty[~state.mask].mean():.3g}, "
      f"max {ens.uncertainty[~state.mask].max():.3g}")
est_means = gated_means(state, ens.estimate)
print(f"  gated means vs true means:     max abs error "
      f"{np.abs(est_means - full.mean(axis=1)).max():.3g}")
print("(near-zero everywhere: the rank-1 structure pins every entry down)")
