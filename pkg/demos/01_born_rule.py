"""Outcome statistics from the sigma cascade.

Each hidden-variable draw picks exactly one outcome: the largest J with
sigma_J > 0, or 1 if there is none.  Averaged over a uniform disk the
frequencies reproduce |alpha_K|^2.
"""

import numpy as np

from sdcollapse import (
    EnsembleConfig,
    HiddenVariables,
    MeasurementContext,
    compute_sigma_cascade,
    exact_outcome_distribution,
    predict_outcome,
    run_ensemble,
)

alphas = np.sqrt([0.2, 0.3, 0.5])
ctx = MeasurementContext(3)

# a single draw, by hand
hv = HiddenVariables([0.9, 0.3j])
sig = compute_sigma_cascade(alphas, hv)
print("sigma_2, sigma_3 =", sig.sigmas)
print("predicted outcome:", predict_outcome(sig))

# the product formula; equal to Born's rule whenever the partial sums are nonzero
print("exact distribution:", exact_outcome_distribution(alphas))

res = run_ensemble(alphas, ctx, EnsembleConfig(samples=100_000, seed=1))
print()
print(" K   count   frequency   Born    in 4-sigma band")
for k, (c, f, p, ok) in enumerate(zip(res.counts, res.frequencies, res.born_reference, res.within_band()), 1):
    print(f" {k}  {c:6d}   {f:.4f}     {p:.4f}  {ok}")
print(f"chi-square {res.chi_square:.2f} on {res.chi.dof} dof, p = {res.p_value:.3f}")

# larger systems behave the same way
rng = np.random.default_rng(0)
for n in (4, 8):
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    a = z / np.linalg.norm(z)
    r = run_ensemble(a, MeasurementContext(n), EnsembleConfig(100_000, seed=n))
    print(f"N={n}: max |freq - Born| = {np.max(np.abs(r.frequencies - r.born_reference)):.4f}, "
          f"all in band: {r.within_band().all()}")
