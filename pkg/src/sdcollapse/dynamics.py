"""Deterministic integration of the hidden-variable master equation.

For one draw of the hidden variables the jump operators are fixed, so the
equation of motion is linear and autonomous in rho.  We integrate it with
classical fixed-step RK4.  Because the right-hand side is linear, one RK4
step is itself a linear map on vec(rho); it is built once per trajectory by
pushing the identity through the usual four-stage formula, and then applied
repeatedly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import basis_state, projector, trace_distance, validate, hermitian_exp
from .model import (
    HiddenVariables,
    LindbladSet,
    MeasurementContext,
    SigmaCascade,
    build_lindblad_set,
    compute_sigma_cascade,
    predict_outcome,
)

MAX_STEP_KAPPA = 0.1
DEFAULT_STEP_KAPPA = 1e-3
# 40/kappa leaves coherences at ~e^-20; see asymptotic_outcome.
DEFAULT_T_END_KAPPA = 40.0
COLLAPSE_TOL = 1e-6

TRACE_DRIFT_TOL = 1e-9
HERMITIAN_DRIFT_TOL = 1e-9
POSITIVITY_DRIFT_TOL = 1e-8


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"t={time:.6g}: {message}")
        self.time = time


@dataclass(frozen=True)
class TrajectoryConfig:
    kappa: float
    t_end: float
    step: float
    t_start: float = 0.0
    record_every: int = 100
    include_hamiltonian: bool = False

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.step * self.kappa > MAX_STEP_KAPPA * (1 + 1e-12):
            raise ValueError(f"step*kappa = {self.step * self.kappa:g} exceeds {MAX_STEP_KAPPA}")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")

    @classmethod
    def in_kappa_units(cls, kappa: float, t_end: float = DEFAULT_T_END_KAPPA,
                       step: float = DEFAULT_STEP_KAPPA, **kw) -> "TrajectoryConfig":
        """Times given in units of 1/kappa."""
        t_start = kw.pop("t_start", 0.0)
        return cls(kappa=kappa, t_start=t_start / kappa, t_end=t_end / kappa, step=step / kappa, **kw)

    @property
    def n_steps(self) -> int:
        span = self.t_end - self.t_start
        n = int(round(span / self.step))
        if n < 1 or abs(n * self.step - span) > 1e-9 * span:
            raise ValueError(f"span {span:g} is not a whole number of steps of {self.step:g}")
        return n


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, N, N)
    hidden: HiddenVariables | None
    sigma: SigmaCascade
    outcome_predicted: int

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# -- right-hand side ----------------------------------------------------------

def master_rhs(rho, ctx: MeasurementContext, lset: LindbladSet,
               include_hamiltonian: bool = True, kappa: float | None = None) -> np.ndarray:
    """-i[H, rho] + kappa * sum of dissipators, evaluated directly on matrices.

    `kappa` overrides ``ctx.kappa``; kappa = 0 leaves plain von Neumann evolution.
    """
    kappa = ctx.kappa if kappa is None else kappa
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ctx.dim, ctx.dim) or lset.dim != ctx.dim:
        raise ValueError("dimension mismatch between state, context and jump operators")
    out = np.zeros_like(rho)
    if include_hamiltonian:
        h = ctx.hamiltonian
        out += -1j * (h @ rho - rho @ h)
    for op in lset:
        ld = op.conj().T
        ldl = ld @ op
        out += kappa * (op @ rho @ ld - 0.5 * (rho @ ldl + ldl @ rho))
    return out


def liouvillian(ctx: MeasurementContext, lset: LindbladSet,
                include_hamiltonian: bool = True, kappa: float | None = None) -> np.ndarray:
    """Superoperator acting on row-major vec(rho).

    Uses vec(A rho B) = kron(A, B.T) vec(rho).
    """
    kappa = ctx.kappa if kappa is None else kappa
    n = ctx.dim
    eye = np.eye(n)
    sup = np.zeros((n * n, n * n), dtype=complex)
    if include_hamiltonian:
        h = ctx.hamiltonian
        sup += -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in lset:
        ldl = op.conj().T @ op
        sup += kappa * (np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T)))
    return sup


def rk4_step(f, y, h: float):
    """One classical Runge-Kutta step for dy/dt = f(y)."""
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(generator: np.ndarray, h: float) -> np.ndarray:
    """The linear map of one RK4 step for dy/dt = generator @ y."""
    return rk4_step(lambda y: generator @ y, np.eye(generator.shape[0], dtype=complex), h)


# -- integration --------------------------------------------------------------

def branch_weights(rho0, ctx: MeasurementContext) -> np.ndarray:
    """|alpha_I|^2 from a density matrix: diagonal of the Hamiltonian-evolved state."""
    u = hermitian_exp(ctx.hamiltonian, ctx.t_d - ctx.t_p)
    return np.real(np.diag(u @ np.asarray(rho0, dtype=complex) @ u.conj().T))


def _check_state(rho: np.ndarray, t: float) -> None:
    rep = validate(rho)
    if rep.trace_defect > TRACE_DRIFT_TOL:
        raise IntegrationError(f"trace drift {rep.trace_defect:.3e}", t)
    if rep.hermiticity_defect > HERMITIAN_DRIFT_TOL:
        raise IntegrationError(f"hermiticity defect {rep.hermiticity_defect:.3e}", t)
    if rep.min_eigenvalue < -POSITIVITY_DRIFT_TOL:
        raise IntegrationError(f"negative eigenvalue {rep.min_eigenvalue:.3e}", t)


def propagate(rho0, generator: np.ndarray, cfg: TrajectoryConfig, check: bool = True):
    """RK4-propagate rho0 under a fixed Liouvillian, returning (times, states)."""
    rho0 = np.asarray(rho0, dtype=complex)
    n = rho0.shape[0]
    n_steps = cfg.n_steps
    step_map = rk4_propagator(generator, cfg.step)
    block = np.linalg.matrix_power(step_map, min(cfg.record_every, n_steps))

    done = [0]
    while done[-1] < n_steps:
        done.append(min(done[-1] + cfg.record_every, n_steps))
    times = cfg.t_start + np.asarray(done) * cfg.step
    states = np.empty((len(done), n, n), dtype=complex)
    states[0] = rho0
    v = rho0.reshape(-1)
    for i in range(1, len(done)):
        taken = done[i] - done[i - 1]
        m = block if taken == cfg.record_every else np.linalg.matrix_power(step_map, taken)
        v = m @ v
        states[i] = v.reshape(n, n)
        if check:
            _check_state(states[i], times[i])
    return times, states


def integrate(rho0, ctx: MeasurementContext, hv: HiddenVariables | None,
              cfg: TrajectoryConfig, sigma: SigmaCascade | None = None) -> Trajectory:
    """Evolve rho0 for one hidden-variable draw.

    The jump operators are fixed at preparation from the sigma cascade of
    `hv` (or from an explicit `sigma`).  Every recorded state is validated;
    an :class:`IntegrationError` carries the offending time.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (ctx.dim, ctx.dim):
        raise ValueError(f"initial state shape {rho0.shape} does not match dimension {ctx.dim}")
    if not np.isclose(cfg.kappa, ctx.kappa, rtol=1e-12, atol=0):
        raise ValueError("trajectory config and measurement context disagree on kappa")
    _check_state(rho0, cfg.t_start)
    if sigma is None:
        if hv is None:
            raise ValueError("need hidden variables or an explicit sigma cascade")
        alphas = np.sqrt(np.clip(branch_weights(rho0, ctx), 0.0, None))
        sigma = compute_sigma_cascade(alphas, hv)
    lset = build_lindblad_set(sigma, ctx)
    gen = liouvillian(ctx, lset, include_hamiltonian=cfg.include_hamiltonian)
    times, states = propagate(rho0, gen, cfg)
    return Trajectory(times, states, hv, sigma, predict_outcome(sigma))


def asymptotic_outcome(traj: Trajectory, tol: float = COLLAPSE_TOL, index: int = -1) -> int | None:
    """Label K whose projector is within `tol` of the recorded state, else None.

    Coherences between the winning state and the rest decay at kappa/2 at
    the slowest, so reaching 1e-6 needs roughly kappa*t >= 2*ln(1e6) ~ 28.
    """
    rho = traj.states[index]
    n = rho.shape[0]
    hits = [k for k in range(1, n + 1) if trace_distance(rho, projector(basis_state(n, k))) <= tol]
    return hits[0] if len(hits) == 1 else None
