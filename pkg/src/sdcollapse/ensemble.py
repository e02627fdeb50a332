"""Monte-Carlo ensembles over the hidden variables.

Two modes are supported.  ``cascade-only`` just evaluates the sigma cascade
for every draw, which is enough for outcome statistics.  ``full-integration``
also integrates the master equation and averages rho(t) over the draws.

In full mode the dynamics depend on a draw only through the signs of its
sigma values, so one trajectory is integrated per distinct sign pattern and
weighted by how many draws produced it.  The result is the same average a
draw-by-draw loop would give.

Reproducibility: draw i always comes from block i // BLOCK_SIZE, whose
generator is seeded from (seed, block index).  The draws therefore do not
depend on the total sample count or on the order in which blocks run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .dynamics import COLLAPSE_TOL, IntegrationError, TrajectoryConfig, integrate
from .linalg import partial_trace, permute_basis, projector, trace_distance
from .model import (
    MeasurementContext,
    SigmaCascade,
    cascade_probabilities,
    compute_branch_amplitudes,
    exact_outcome_distribution,
    predict_outcomes,
    sigma_values,
)

BLOCK_SIZE = 8192
N_SIGMA = 4.0
MIN_EXPECTED = 5.0
CASCADE_ONLY = "cascade-only"
FULL_INTEGRATION = "full-integration"


class EnsembleError(RuntimeError):
    def __init__(self, message: str, sample_index: int):
        super().__init__(f"sample {sample_index}: {message}")
        self.sample_index = sample_index


# -- samplers -----------------------------------------------------------------

@dataclass(frozen=True)
class DiskSampler:
    """Uniform on the disk |lambda| <= radius; radius 1 is the unbiased model."""

    radius: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.radius <= 1.0:
            raise ValueError(f"disk radius must lie in (0, 1], got {self.radius}")

    @property
    def label(self) -> str:
        return "uniform-disk" if self.radius == 1.0 else f"disk:{self.radius!r}"

    def abs2(self, u: np.ndarray) -> np.ndarray:
        return self.radius ** 2 * u

    def prob_abs2_above(self, c: float) -> float:
        r2 = self.radius ** 2
        return float(np.clip((r2 - c) / r2, 0.0, 1.0))


@dataclass(frozen=True)
class AnnulusSampler:
    """Uniform on the ring inner <= |lambda| <= 1."""

    inner: float

    def __post_init__(self):
        if not 0.0 < self.inner < 1.0:
            raise ValueError(f"annulus inner radius must lie in (0, 1), got {self.inner}")

    @property
    def label(self) -> str:
        return f"annulus:{self.inner!r}"

    def abs2(self, u: np.ndarray) -> np.ndarray:
        r02 = self.inner ** 2
        return r02 + (1.0 - r02) * u

    def prob_abs2_above(self, c: float) -> float:
        r02 = self.inner ** 2
        return float(np.clip((1.0 - max(c, r02)) / (1.0 - r02), 0.0, 1.0))


UNIFORM = DiskSampler(1.0)


def parse_sampler(text: str):
    """'uniform-disk', 'disk:<radius>' or 'annulus:<inner radius>'."""
    text = text.strip()
    if text == "uniform-disk":
        return UNIFORM
    kind, _, arg = text.partition(":")
    try:
        value = float(arg)
    except ValueError:
        raise ValueError(f"cannot parse sampler {text!r}") from None
    if kind == "disk":
        return DiskSampler(value)
    if kind == "annulus":
        return AnnulusSampler(value)
    raise ValueError(f"unknown sampler {text!r}")


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def draw_lambdas(sampler, seed: int, samples: int, dim: int) -> np.ndarray:
    """Hidden variables for draws 0..samples-1, shape (samples, dim - 1)."""
    out = np.empty((samples, dim - 1), dtype=complex)
    for b in range(-(-samples // BLOCK_SIZE)):
        rng = block_rng(seed, b)
        u = rng.random((BLOCK_SIZE, dim - 1))
        phase = rng.random((BLOCK_SIZE, dim - 1)) * (2 * np.pi)
        lam = np.sqrt(sampler.abs2(u)) * np.exp(1j * phase)
        lo = b * BLOCK_SIZE
        hi = min(lo + BLOCK_SIZE, samples)
        out[lo:hi] = lam[: hi - lo]
    return out


def sampler_outcome_distribution(alphas, sampler) -> np.ndarray:
    """Exact outcome probabilities when every lambda follows `sampler`.

    sigma_J > 0 exactly when |lambda_J|^2 > 1 - |alpha_J|^2 / sum_{I<=J}
    |alpha_I|^2, so each factor is a radial tail probability of the sampler.
    """
    w = np.abs(np.asarray(alphas)) ** 2
    partial = np.cumsum(w)
    p_up = []
    for j in range(1, len(w)):
        if partial[j] <= 0 or w[j] <= 0:
            p_up.append(0.0)
        else:
            p_up.append(sampler.prob_abs2_above(1.0 - w[j] / partial[j]))
    return cascade_probabilities(p_up)


def skewed_outcome_probability(alphas, r: float) -> float:
    """P(outcome 2) for N = 2 when lambda is uniform on the disk of radius r."""
    alphas = np.asarray(alphas)
    if alphas.shape != (2,):
        raise ValueError("skewed_outcome_probability is defined for two-level systems")
    if not 0.0 < r <= 1.0:
        raise ValueError(f"radius must lie in (0, 1], got {r}")
    a2 = abs(alphas[1]) ** 2
    return max(0.0, (r * r - (1.0 - a2)) / (r * r))


# -- goodness of fit ----------------------------------------------------------

@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    dof: int
    p_value: float


def chi_square(counts, probs, min_expected: float = MIN_EXPECTED) -> ChiSquare:
    """Pearson chi-square of `counts` against `probs`, pooling sparse bins.

    Bins with expected count below `min_expected` are pooled; if the pool is
    still sparse it is folded into the smallest remaining bin.  Counts in a
    bin of zero probability give an infinite statistic.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    expected = total * np.asarray(probs, dtype=float)
    if np.any((expected == 0) & (counts > 0)):
        return ChiSquare(float("inf"), max(int(np.sum(expected > 0)) - 1, 0), 0.0)

    small = expected < min_expected
    obs = list(counts[~small])
    exp = list(expected[~small])
    if small.any():
        po, pe = counts[small].sum(), expected[small].sum()
        if pe >= min_expected or not exp:
            obs.append(po)
            exp.append(pe)
        else:
            i = int(np.argmin(exp))
            obs[i] += po
            exp[i] += pe
    obs = np.array(obs)
    exp = np.array(exp)
    keep = exp > 0
    obs, exp = obs[keep], exp[keep]
    dof = len(obs) - 1
    if dof < 1:
        return ChiSquare(0.0, 0, 1.0)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    return ChiSquare(stat, dof, float(stats.chi2.sf(stat, dof)))


def binomial_band(probs, samples: int, n_sigma: float = N_SIGMA) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    return n_sigma * np.sqrt(probs * (1.0 - probs) / samples)


# -- ensembles ----------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleConfig:
    samples: int
    seed: int
    sampler: object = UNIFORM
    dynamics: TrajectoryConfig | None = None
    mode: str = CASCADE_ONLY

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.mode not in (CASCADE_ONLY, FULL_INTEGRATION):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == FULL_INTEGRATION and self.dynamics is None:
            raise ValueError("full-integration mode needs a trajectory config")


@dataclass
class EnsembleResult:
    samples: int
    seed: int
    sampler: str
    mode: str
    alphas: np.ndarray
    outcomes: np.ndarray  # per-draw outcome label, 1-based
    counts: np.ndarray
    born_reference: np.ndarray
    sampler_reference: np.ndarray
    chi: ChiSquare
    times: np.ndarray | None = None
    averaged_states: np.ndarray | None = None  # (T, N, N)
    state_se: np.ndarray | None = None  # (T, N, N), standard error per element
    collapsed_fraction: float | None = None
    reduced: dict = field(default_factory=dict)  # factor -> (mean, se), each (T, d, d)

    @property
    def chi_square(self) -> float:
        return self.chi.statistic

    @property
    def p_value(self) -> float:
        return self.chi.p_value

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.samples

    def within_band(self, reference=None, n_sigma: float = N_SIGMA) -> np.ndarray:
        ref = self.born_reference if reference is None else np.asarray(reference)
        return np.abs(self.frequencies - ref) <= binomial_band(ref, self.samples, n_sigma)


def _weighted_mean_se(values: np.ndarray, weights: np.ndarray, samples: int):
    """Mean and standard error of a sample in which values[k] occurs weights[k] times."""
    w = weights / samples
    mean = np.tensordot(w, values, axes=1)
    if samples < 2:
        return mean, np.zeros(mean.shape)
    dev2 = np.abs(values - mean) ** 2
    var = np.tensordot(weights, dev2, axes=1) / (samples - 1)
    return mean, np.sqrt(var / samples)


def run_ensemble(psi_p, ctx: MeasurementContext, cfg: EnsembleConfig,
                 bipartition: Sequence[int] | None = None,
                 label_order: Sequence[int] | None = None) -> EnsembleResult:
    """Sample the hidden variables `cfg.samples` times and collect statistics.

    Parameters
    ----------
    bipartition : (d_A, d_B), optional
        In full mode, also record the reduced states of both factors.
    label_order : sequence of int, optional
        Position of each detector label in the Kronecker ordering of the
        bipartition; identity by default.
    """
    alphas = compute_branch_amplitudes(psi_p, ctx)
    n = ctx.dim
    lambdas = draw_lambdas(cfg.sampler, cfg.seed, cfg.samples, n)
    sig = sigma_values(alphas, lambdas)
    predicted = predict_outcomes(sig)
    born = exact_outcome_distribution(alphas)
    result = EnsembleResult(
        samples=cfg.samples, seed=cfg.seed, sampler=cfg.sampler.label, mode=cfg.mode,
        alphas=alphas, outcomes=predicted, counts=None, born_reference=born,
        sampler_reference=sampler_outcome_distribution(alphas, cfg.sampler), chi=None,
    )
    if cfg.mode == FULL_INTEGRATION:
        _integrate_patterns(result, psi_p, ctx, cfg, sig, bipartition, label_order)
    result.counts = np.bincount(result.outcomes, minlength=n + 1)[1:]
    result.chi = chi_square(result.counts, born)
    return result


def _integrate_patterns(result, psi_p, ctx, cfg, sig, bipartition, label_order):
    rho0 = projector(psi_p)
    patterns, first, inverse, weights = np.unique(
        sig > 0, axis=0, return_index=True, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    finals = []
    states = []
    for k in range(len(patterns)):
        try:
            traj = integrate(rho0, ctx, None, cfg.dynamics, sigma=SigmaCascade(sig[first[k]]))
        except IntegrationError as exc:
            raise EnsembleError(str(exc), int(first[k])) from exc
        states.append(traj.states)
        finals.append(np.argmax(np.real(np.diag(traj.final))) + 1)
        times = traj.times
    states = np.array(states)
    n = ctx.dim

    result.times = times
    result.averaged_states, result.state_se = _weighted_mean_se(states, weights, cfg.samples)
    result.outcomes = np.asarray(finals)[inverse]
    dist = np.array([trace_distance(s[-1], projector(np.eye(n)[f - 1])) for s, f in zip(states, finals)])
    result.collapsed_fraction = float(np.sum(weights[dist <= COLLAPSE_TOL]) / cfg.samples)

    if bipartition is not None:
        dims = [int(d) for d in bipartition]
        if int(np.prod(dims)) != n:
            raise ValueError(f"bipartition {dims} does not match dimension {n}")
        order = list(range(n)) if label_order is None else list(label_order)
        product = np.array([[permute_basis(r, order) for r in s] for s in states])
        for factor in range(len(dims)):
            red = np.array([[partial_trace(r, dims, factor) for r in s] for s in product])
            result.reduced[factor] = _weighted_mean_se(red, weights, cfg.samples)


def averaged_density_matrix(result: EnsembleResult, t: float):
    """Mean rho and per-element standard error at the recorded time nearest `t`."""
    if result.averaged_states is None:
        raise ValueError("averaged states are only recorded in full-integration mode")
    i = int(np.argmin(np.abs(result.times - t)))
    return result.averaged_states[i], result.state_se[i]


@dataclass
class NoSignallingReport:
    times: np.ndarray
    reference: dict  # factor -> (d, d) standard quantum prediction
    max_deviation: dict  # factor -> max over time and elements
    passed: dict  # factor -> bool
    n_sigma: float

    @property
    def ok(self) -> bool:
        return all(self.passed.values())


def no_signalling_check(result: EnsembleResult, dims: Sequence[int],
                        label_order: Sequence[int] | None = None,
                        n_sigma: float = N_SIGMA, atol: float = 1e-12) -> NoSignallingReport:
    """Compare the reduced averaged states with the quantum-mechanical ones.

    The reference for each factor is the partial trace of the Born mixture
    sum_K |alpha_K|^2 |K><K|.  An element passes when its deviation is at
    most n_sigma standard errors (plus `atol` for round-off).
    """
    if result.averaged_states is None:
        raise ValueError("no-signalling check needs a full-integration ensemble")
    dims = [int(d) for d in dims]
    n = result.averaged_states.shape[-1]
    if int(np.prod(dims)) != n:
        raise ValueError(f"dims {dims} do not match dimension {n}")
    order = list(range(n)) if label_order is None else list(label_order)
    born_mix = permute_basis(np.diag(result.born_reference).astype(complex), order)
    product_states = np.array([permute_basis(r, order) for r in result.averaged_states])

    reference, max_dev, passed = {}, {}, {}
    for factor in range(len(dims)):
        ref = partial_trace(born_mix, dims, factor)
        if factor in result.reduced:
            mean, se = result.reduced[factor]
        else:
            mean = np.array([partial_trace(r, dims, factor) for r in product_states])
            se = np.zeros(mean.shape)
        dev = np.abs(mean - ref)
        reference[factor] = ref
        max_dev[factor] = float(dev.max())
        passed[factor] = bool(np.all(dev <= n_sigma * se + atol))
    return NoSignallingReport(result.times, reference, max_dev, passed, n_sigma)
