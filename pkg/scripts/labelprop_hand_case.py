"""Two sweeps of clamped label propagation on three 1-D points, by hand.

Labeled 0.0 (class 0) and 1.0 (class 1), unlabeled 0.1, sigma = 0.5,
uniform start. Prints the unlabeled row after each sweep next to the
library's result.
"""
import math

from sswarm.baselines import LabelPropConfig, labelprop_transduce
from sswarm.dataset import Dataset, SemiSupervisedSplit

SIGMA = 0.5
xs = [0.0, 1.0, 0.1]
w = [math.exp(-(xs[2] - xj) ** 2 / SIGMA**2) for xj in xs]
t = [v / sum(w) for v in w]

row = [0.5, 0.5]
for sweep in (1, 2):
    row = [t[0] * 1.0 + t[2] * row[0], t[1] * 1.0 + t[2] * row[1]]
    print(f"sweep {sweep}: F(0.1) = [{row[0]:.6f}, {row[1]:.6f}]")
print("hand result: class", 0 if row[0] >= row[1] else 1)

ds = Dataset("three", [[0.0], [1.0], [0.1]], [0, 1, 0])
split = SemiSupervisedSplit(ds, [0, 1], [2])
res = labelprop_transduce(split, LabelPropConfig(sigma=SIGMA, max_sweeps=2, convergence_tolerance=0.0))
print(f"library:     F(0.1) = [{res.scores[2, 0]:.6f}, {res.scores[2, 1]:.6f}] -> class {res.labels[0]}")
