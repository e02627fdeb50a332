"""A single deterministic trajectory.

With lambda fixed, the jump operators are fixed and rho(t) flows to one
eigenprojector.  Populations relax at rate kappa, coherences only at
kappa * Lambda_IJ / 2, which is what sets the time needed for a tight
collapse tolerance.
"""

import numpy as np

from sdcollapse import (
    HiddenVariables,
    MeasurementContext,
    TrajectoryConfig,
    asymptotic_outcome,
    integrate,
    lambda_decay_rate,
    projector,
    trace_distance,
)
from sdcollapse.linalg import basis_state

psi = np.array([1, 1]) / np.sqrt(2)
ctx = MeasurementContext(2)
cfg = TrajectoryConfig.in_kappa_units(kappa=1.0, t_end=40, record_every=5000)
traj = integrate(projector(psi), ctx, HiddenVariables([0.9]), cfg)

print("sigma_2 =", traj.sigma[2], "-> predicted outcome", traj.outcome_predicted)
target = projector(basis_state(2, traj.outcome_predicted))
print("kappa*t   rho_11        |rho_12|      distance to |2><2|")
for t, rho in zip(traj.times, traj.states):
    print(f"{t:6.1f}   {rho[0, 0].real:.3e}   {abs(rho[0, 1]):.3e}   {trace_distance(rho, target):.3e}")

print("collapsed at kappa*t=20?", asymptotic_outcome(traj, index=4))
print("collapsed at kappa*t=40?", asymptotic_outcome(traj))

# four levels, random amplitudes
rng = np.random.default_rng(3)
z = rng.normal(size=4) + 1j * rng.normal(size=4)
psi4 = z / np.linalg.norm(z)
traj4 = integrate(projector(psi4), MeasurementContext(4), HiddenVariables([0.7, 0.2 + 0.5j, 0.95]), cfg)
print()
print("N=4 populations at the start:", np.round(np.real(np.diag(traj4.states[0])), 4))
print("N=4 populations at the end:  ", np.round(np.real(np.diag(traj4.final)), 6))
print("predicted", traj4.outcome_predicted, "observed", asymptotic_outcome(traj4))
print("coherence decay rates kappa*Lambda_IJ/2:")
for i in range(1, 5):
    print("  ", [0.5 * lambda_decay_rate(i, j, traj4.sigma) if i != j else None for j in range(1, 5)])
