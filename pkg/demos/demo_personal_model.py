"""
Fitting a personal resting-rate model
=====================================

Train the regression and the activity clusters from a numerics CSV. The
BIDMC record-20 snapshot is used when it can be found (see the README);
otherwise the synthetic fixture in ``tests/data`` stands in.
"""

from pathlib import Path

from pulsewatch.datasets import find_bidmc
from pulsewatch.ingest import read_numerics_csv
from pulsewatch.model import (
    PREPROCESSING,
    feature_matrix,
    fit_resting_rate,
    kmeans,
    preprocess,
    train_personal_model,
    variability,
    zscore,
)

ROOT = Path(__file__).resolve().parents[1]
path = find_bidmc([ROOT / "tests" / "data"]) or ROOT / "tests" / "data" / "synthetic_numerics.csv"
samples = read_numerics_csv(path)
print(f"{path.name}: {len(samples)} rows")

###############################################################################
# The regression maps pulse to the respiration channel. Missing cells are
# common in bedside exports, so look at how each row filter moves the fit.

for choice in PREPROCESSING:
    reg = fit_resting_rate(preprocess(samples, choice))
    print(f"  {choice:<13} n={reg.n_train:<5} rr = {reg.intercept:.4f} {reg.slope:+.4f} * pulse")

###############################################################################
# Clustering uses all four vitals. Variability is the share of the total sum
# of squares explained by the cluster centers, so it can only grow with k
# when each k is solved to its optimum.

X = feature_matrix(preprocess(samples, "drop-missing"))
for label, data in (("raw", X), ("z-scored", zscore(X)[0])):
    row = []
    for k in range(1, 7):
        res = kmeans(data, k, seed=0)
        row.append(f"k={k}:{variability(res.within_ss, res.total_ss):5.1f}%")
    print(f"  {label:<9}", "  ".join(row))

###############################################################################
# The full personal model bundles the regression, the threshold ``tau``
# (mean predicted rate) and the cluster centers used for activity gating.

model = train_personal_model(samples, k=3)
print(f"tau = {model.tau:.3f}, sigma_rr = {model.sigma_rr:.3f}")
for hr, pulse, resp, spo2 in sorted(model.centers, key=lambda c: c[1]):
    print(f"  center: hr {hr:6.1f}  pulse {pulse:6.1f}  resp {resp:5.1f}  spo2 {spo2:5.1f}")
