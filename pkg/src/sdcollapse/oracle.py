"""Closed-form reference solutions.

These are the only exact answers available for the collapse dynamics, and
they are what the RK4 integrator and the ensemble averages are checked
against.

Sign convention for the singlet coherence: rho_12(t) = -q sqrt(1-q^2)
e^{-kappa t / 2}, which is what the initial state q|1> - sqrt(1-q^2)|2>
implies.  Tests that only care about the decay law compare magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import permute_basis
from .model import SigmaCascade


@dataclass(frozen=True)
class SingletParams:
    q: float
    kappa: float = 1.0
    sigma2_positive: bool = True

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


def singlet_state(q: float) -> np.ndarray:
    """q|1> - sqrt(1-q^2)|2> in the four-state labelling.

    |1> = |up_A down_B>, |2> = |down_A up_B>, |3> = |down_A down_B>,
    |4> = |up_A up_B>, so that the state reads q|up_A down_B> -
    sqrt(1-q^2)|down_A up_B>.
    """
    psi = np.zeros(4, dtype=complex)
    psi[0] = q
    psi[1] = -np.sqrt(1.0 - q * q)
    return psi


# Kronecker index (A slow, B fast; up=(1,0), down=(0,1)) of labels |1>..|4>.
SINGLET_LABEL_ORDER = (1, 2, 3, 0)


def labels_to_product_basis(op: np.ndarray) -> np.ndarray:
    """Reorder a vector or operator from labels |1>..|4> to the up/down Kronecker basis."""
    return permute_basis(op, SINGLET_LABEL_ORDER)


def n2_solution(rho0, sigma2_positive: bool, kappa: float, t: float) -> np.ndarray:
    """Amplitude damping of a two-level system toward |2> (or |1>)."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ValueError(f"n2_solution needs a 2x2 matrix, got {rho0.shape}")
    decay = np.exp(-kappa * t)
    src, dst = (0, 1) if sigma2_positive else (1, 0)
    out = np.empty_like(rho0)
    out[src, src] = rho0[src, src] * decay
    out[dst, dst] = rho0[dst, dst] + rho0[src, src] * (1.0 - decay)
    out[0, 1] = rho0[0, 1] * np.exp(-0.5 * kappa * t)
    out[1, 0] = rho0[1, 0] * np.exp(-0.5 * kappa * t)
    return out


def n4_singlet_solution(p: SingletParams, t: float) -> np.ndarray:
    q2 = p.q * p.q
    decay = np.exp(-p.kappa * t)
    rho = np.zeros((4, 4), dtype=complex)
    if p.sigma2_positive:
        rho[0, 0] = q2 * decay
        rho[1, 1] = 1.0 - q2 * decay
    else:
        rho[0, 0] = 1.0 - (1.0 - q2) * decay
        rho[1, 1] = (1.0 - q2) * decay
    rho[0, 1] = rho[1, 0] = -p.q * np.sqrt(1.0 - q2) * np.exp(-0.5 * p.kappa * t)
    return rho


def n4_averaged_solution(p: SingletParams, t: float) -> np.ndarray:
    """Hidden-variable average: branch sigma_2 > 0 has weight 1 - q^2."""
    q2 = p.q * p.q
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = q2
    rho[1, 1] = 1.0 - q2
    rho[0, 1] = rho[1, 0] = -p.q * np.sqrt(1.0 - q2) * np.exp(-0.5 * p.kappa * t)
    return rho


def lambda_decay_rate(i: int, j: int, sig: SigmaCascade) -> float:
    """Coherence decay rate Lambda_IJ; rho_IJ decays as exp(-kappa Lambda_IJ t / 2).

    Written for any dimension N = len(sigma) + 1.  Each label contributes its
    total outflow: transitions up to every M above it with sigma_M > 0, and
    (label - 1) transitions down when its own sigma is non-positive.
    """
    if i == j:
        raise ValueError("Lambda is defined for off-diagonal pairs only")
    n = sig.dim
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError(f"labels ({i}, {j}) outside 1..{n}")
    up = {m: sig[m] > 0 for m in range(2, n + 1)}

    def outflow(label: int) -> int:
        rate = sum(up[m] for m in range(label + 1, n + 1))
        if label > 1 and not up[label]:
            rate += label - 1
        return rate

    return float(outflow(i) + outflow(j))
