"""Hidden-variable layer of the collapse model.

Labels follow the physics convention: basis states are |1>..|N>, and the
hidden variables and sigma values are indexed 2..N.  Internally both are
stored as length N-1 arrays, so ``lambdas[j - 2]`` is lambda_j.

Most functions broadcast over leading axes, which is how the ensemble code
evaluates 10^5 draws at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import HERMITIAN_TOL, hermitian_exp, is_hermitian, NotHermitianError

ALPHA_NORM_TOL = 1e-10


@dataclass(frozen=True)
class MeasurementContext:
    """Detector basis, Hamiltonian and timing for one measurement.

    The detector basis is always the computational basis (|chi_I> = |I>), so
    only its dimension is stored.  ``hamiltonian`` defaults to zero.
    """

    dim: int
    hamiltonian: np.ndarray | None = None
    t_p: float = 0.0
    t_d: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dimension must be at least 2, got {self.dim}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.t_d < self.t_p:
            raise ValueError("detection time precedes preparation time")
        h = np.zeros((self.dim, self.dim), complex) if self.hamiltonian is None \
            else np.asarray(self.hamiltonian, dtype=complex)
        if h.shape != (self.dim, self.dim):
            raise ValueError(f"hamiltonian shape {h.shape} does not match dimension {self.dim}")
        if not is_hermitian(h):
            raise NotHermitianError("hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", h)

    def basis(self) -> np.ndarray:
        """Rows are the detector eigenstates |1>..|N>."""
        return np.eye(self.dim, dtype=complex)


@dataclass(frozen=True)
class HiddenVariables:
    lambdas: np.ndarray  # lambda_2 .. lambda_N

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=complex))
        if np.any(np.abs(lam) > 1.0 + 1e-15):
            raise ValueError("hidden variables must lie in the closed unit disk")
        object.__setattr__(self, "lambdas", lam)

    @property
    def dim(self) -> int:
        return self.lambdas.shape[-1] + 1

    def __getitem__(self, j: int) -> complex:
        if not 2 <= j <= self.dim:
            raise IndexError(f"lambda index {j} outside 2..{self.dim}")
        return self.lambdas[j - 2]


@dataclass(frozen=True)
class SigmaCascade:
    sigmas: np.ndarray  # sigma_2 .. sigma_N

    @property
    def dim(self) -> int:
        return len(self.sigmas) + 1

    def __getitem__(self, j: int) -> float:
        if not 2 <= j <= self.dim:
            raise IndexError(f"sigma index {j} outside 2..{self.dim}")
        return float(self.sigmas[j - 2])

    def upward(self) -> np.ndarray:
        """Heaviside of each sigma with theta(0) = 0."""
        return self.sigmas > 0


@dataclass(frozen=True)
class LindbladSet:
    """Jump operators keyed by (K, M) with K > M."""

    dim: int
    operators: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.operators.values())

    def __len__(self):
        return len(self.operators)


# -- sampling -----------------------------------------------------------------

def sample_disk(rng: np.random.Generator, size, radius: float = 1.0) -> np.ndarray:
    """Uniform draws on the disk of given radius, by inverse-CDF radius."""
    u = rng.random(size)
    phase = rng.random(size) * (2 * np.pi)
    return radius * np.sqrt(u) * np.exp(1j * phase)


def sample_hidden_variables(n: int, rng: np.random.Generator) -> HiddenVariables:
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    return HiddenVariables(sample_disk(rng, n - 1))


# -- amplitudes and sigma -----------------------------------------------------

def compute_branch_amplitudes(psi_p, ctx: MeasurementContext) -> np.ndarray:
    """alpha_I = <I| exp(-iH(t_d - t_p)) |psi_p>."""
    psi = np.asarray(psi_p, dtype=complex).reshape(-1)
    if psi.shape != (ctx.dim,):
        raise ValueError(f"state of length {psi.size} does not match dimension {ctx.dim}")
    u = hermitian_exp(ctx.hamiltonian, ctx.t_d - ctx.t_p)
    alphas = ctx.basis().conj() @ (u @ psi)
    norm2 = float(np.sum(np.abs(alphas) ** 2))
    if abs(norm2 - 1.0) > ALPHA_NORM_TOL:
        raise ValueError(f"branch amplitudes not normalized (sum |alpha|^2 = {norm2!r})")
    return alphas


def sigma_values(alphas, lambdas) -> np.ndarray:
    """Vectorized sigma cascade.

    ``alphas`` has shape (..., N), ``lambdas`` shape (..., N-1); the result
    has the broadcast leading shape and N-1 trailing entries.
    """
    w = np.abs(np.asarray(alphas)) ** 2
    lam2 = np.abs(np.asarray(lambdas)) ** 2
    below = np.cumsum(w, axis=-1)[..., :-1]  # sum_{I<J} |alpha_I|^2 for J = 2..N
    return w[..., 1:] * lam2 - (1.0 - lam2) * below


def compute_sigma_cascade(alphas, hv: HiddenVariables) -> SigmaCascade:
    alphas = np.asarray(alphas)
    if alphas.shape[-1] != hv.dim:
        raise ValueError(f"{alphas.shape[-1]} amplitudes but {hv.dim - 1} hidden variables")
    return SigmaCascade(sigma_values(alphas, hv.lambdas))


def predict_outcomes(sigmas) -> np.ndarray:
    """Highest label J with sigma_J > 0, else 1; vectorized over leading axes."""
    up = np.asarray(sigmas) > 0
    n1 = up.shape[-1]
    # index of the last True along the axis, -1 when none
    last = n1 - 1 - np.argmax(up[..., ::-1], axis=-1)
    return np.where(up.any(axis=-1), last + 2, 1)


def predict_outcome(sig: SigmaCascade) -> int:
    return int(predict_outcomes(sig.sigmas))


def build_lindblad_set(sig: SigmaCascade, ctx: MeasurementContext | None = None) -> LindbladSet:
    """One jump operator per pair K > M, pointing up when sigma_K > 0."""
    n = sig.dim
    if ctx is not None and ctx.dim != n:
        raise ValueError(f"cascade of dimension {n} vs context of dimension {ctx.dim}")
    basis = np.eye(n, dtype=complex) if ctx is None else ctx.basis()
    ops = {}
    for k in range(2, n + 1):
        up = sig[k] > 0
        for m in range(1, k):
            ket, bra = (k, m) if up else (m, k)
            ops[(k, m)] = np.outer(basis[ket - 1], basis[bra - 1].conj())
    return LindbladSet(n, ops)


# -- probabilities ------------------------------------------------------------

def _conditional_up(weights: np.ndarray) -> np.ndarray:
    """|alpha_J|^2 / sum_{I<=J} |alpha_I|^2 for J = 1..N, 0 where the sum vanishes."""
    partial = np.cumsum(weights)
    out = np.zeros_like(weights)
    nz = partial > 0
    out[nz] = weights[nz] / partial[nz]
    return out


def analytic_sigma_sign_probability(alphas, j: int) -> float:
    """P(sigma_j > 0) under uniform disk sampling."""
    w = np.abs(np.asarray(alphas)) ** 2
    if not 2 <= j <= len(w):
        raise IndexError(f"sigma index {j} outside 2..{len(w)}")
    return float(_conditional_up(w)[j - 1])


def cascade_probabilities(p_up) -> np.ndarray:
    """Outcome distribution of the cascade given P(sigma_J > 0) for J = 2..N.

    Outcome K wins when sigma_N..sigma_{K+1} are all non-positive and
    sigma_K > 0; outcome 1 collects the case where every sigma is non-positive.
    """
    p_up = np.asarray(p_up, dtype=float)
    n = len(p_up) + 1
    probs = np.zeros(n)
    stay_down = 1.0
    for k in range(n, 1, -1):
        probs[k - 1] = stay_down * p_up[k - 2]
        stay_down *= 1.0 - p_up[k - 2]
    probs[0] = stay_down
    return probs


def exact_outcome_probability(alphas, k: int) -> float:
    """Product formula for P(|K>), evaluated factor by factor.

    A conditional factor whose partial sum vanishes is taken as 0, so the
    first label is unreachable when its amplitude is zero.
    """
    w = np.abs(np.asarray(alphas)) ** 2
    n = len(w)
    if not 1 <= k <= n:
        raise IndexError(f"outcome {k} outside 1..{n}")
    cond = _conditional_up(w)
    p = cond[k - 1]
    for j in range(k + 1, n + 1):
        p *= 1.0 - cond[j - 1]
    return float(p)


def exact_outcome_distribution(alphas) -> np.ndarray:
    n = len(np.asarray(alphas))
    return np.array([exact_outcome_probability(alphas, k) for k in range(1, n + 1)])
