#!/usr/bin/env python3
"""The four partition-agreement metrics and their edge conventions.

ACC maps cluster ids one-to-one before counting agreement, so relabeling
never changes a score; NMI/F/ARI carry explicit conventions for the
degenerate partitions where the textbook formulas divide by zero.
"""

import numpy as np

from slrl import accuracy, ari, evaluate, nmi, pair_f_score
from slrl.metrics import aggregate_rows

truth = [0, 0, 0, 1, 1, 2]
pred_perfect = [2, 2, 2, 0, 0, 1]  # same partition, shuffled ids
print("relabeled perfect prediction:")
print("  ACC %.3f  NMI %.3f  F %.3f  ARI %.3f" % (
    accuracy(pred_perfect, truth), nmi(pred_perfect, truth),
    pair_f_score(pred_perfect, truth), ari(pred_perfect, truth)))

print("\nhand-checkable cases:")
print("  ACC([0,0,1,1] vs [0,1,1,1]) =", accuracy([0, 0, 1, 1], [0, 1, 1, 1]))
print("  ARI([0,0,1,1] vs [0,1,0,1]) =", ari([0, 0, 1, 1], [0, 1, 0, 1]))

print("\ndegenerate conventions:")
print("  NMI(all-same vs varied) =", nmi([0, 0, 0, 0], [0, 1, 0, 1]))
print("  F(singletons vs pairs)  =", pair_f_score([0, 1, 2, 3], [0, 0, 1, 1]))
print("  ARI(two identical one-cluster partitions) =", ari([0, 0, 0], [5, 5, 5]))

# reports aggregate over repeated runs as mean and standard deviation
rng = np.random.default_rng(0)
reports = []
for _ in range(5):
    noisy = [t if rng.random() > 0.15 else int(rng.integers(3)) for t in truth]
    reports.append(evaluate(noisy, truth))
print("\naggregate over 5 noisy predictions:")
print(aggregate_rows(reports))
