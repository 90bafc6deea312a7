"""Tour of the ground-truth metrics on a small worked matrix.

Covers the two flavors of top-1 precision (performance gap and paired
significance), ranking quality, and the hardness quantity that predicts how
much budget an instance demands.
"""

import numpy as np

import lrbandit as lb
from lrbandit.metrics import (
    discordant_counts,
    ground_truth_from_matrix,
    hardness_h1,
    mcnemar_p,
    ndcg_at_k,
    precision_gap,
    precision_significance,
)

rng = np.random.default_rng(0)
means = np.array([0.82, 0.80, 0.55, 0.40])
scores = (rng.random((4, 400)) < means[:, None]).astype(float)
truth = ground_truth_from_matrix(scores)
print("realized means:", np.array2string(truth.means, precision=3))
print("best method:", truth.best_index)

print("\ntop-1 precision under a performance gap:")
for predicted in range(4):
    row = [precision_gap(truth, predicted, eps) for eps in (0.001, 0.01, 0.05)]
    print(f"  predict {predicted}: eps=0.001 -> {row[0]}, eps=0.01 -> {row[1]}, eps=0.05 -> {row[2]}")

print("\npaired-significance view (vs the best method):")
for predicted in range(4):
    if predicted == truth.best_index:
        print(f"  predict {predicted}: the best itself")
        continue
    wins = discordant_counts(truth, predicted, truth.best_index)
    p = mcnemar_p(truth, predicted, truth.best_index)
    verdicts = {level: precision_significance(truth, predicted, level) for level in (0.01, 0.1)}
    print(f"  predict {predicted}: discordant wins {wins}, p={p:.4f}, "
          f"accepted at 0.01 -> {verdicts[0.01]}, at 0.1 -> {verdicts[0.1]}")

print("\nranking quality (gain = true mean, discount 1/log2(pos+1)):")
for ranking in ([0, 1, 2, 3], [1, 0, 2, 3], [3, 2, 1, 0]):
    print(f"  ranking {ranking}: ndcg@3 = {ndcg_at_k(truth, ranking, 3):.4f}")

print(f"\nhardness: {hardness_h1(truth):,.1f}")
print("(sum of inverse squared gaps: near-ties at the top dominate the cost)")
