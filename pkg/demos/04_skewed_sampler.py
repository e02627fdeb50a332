"""Non-uniform hidden variables break Born's rule by a predictable amount.

If lambda is uniform on a smaller disk of radius r, outcome 2 of a
two-level system needs |lambda|^2 > 1 - |alpha_2|^2, which happens with
probability (r^2 - 1 + |alpha_2|^2) / r^2.  The radius and annulus families
are just convenient choices with closed forms.
"""

import numpy as np

from sdcollapse import EnsembleConfig, MeasurementContext, run_ensemble, skewed_outcome_probability
from sdcollapse.ensemble import AnnulusSampler, DiskSampler, binomial_band, sampler_outcome_distribution

alphas = np.sqrt([0.5, 0.5])
ctx = MeasurementContext(2)
m = 100_000

print("r^2     predicted  measured   4-sigma band")
for r2 in (1.0, 0.9, 0.8, 0.6, 0.5):
    r = np.sqrt(r2)
    res = run_ensemble(alphas, ctx, EnsembleConfig(m, seed=4, sampler=DiskSampler(r)))
    p = skewed_outcome_probability(alphas, r)
    print(f"{r2:.1f}     {p:.4f}     {res.frequencies[1]:.4f}     {binomial_band(p, m):.4f}")

res = run_ensemble(alphas, ctx, EnsembleConfig(m, seed=4, sampler=DiskSampler(np.sqrt(0.8))))
print(f"r^2=0.8 sits {abs(res.frequencies[1] - 0.5) / np.sqrt(0.25 / m):.0f} sigma away from Born")

# an annulus pushes the other way, and the same tail argument works for any N
a3 = np.sqrt([0.2, 0.3, 0.5])
ann = AnnulusSampler(0.5)
res = run_ensemble(a3, MeasurementContext(3), EnsembleConfig(m, seed=5, sampler=ann))
print()
print("annulus 0.5 <= |lambda| <= 1, N=3")
print("  predicted:", np.round(sampler_outcome_distribution(a3, ann), 4))
print("  measured: ", np.round(res.frequencies, 4))
print("  Born:     ", np.round(res.born_reference, 4))
