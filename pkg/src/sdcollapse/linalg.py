"""Dense linear algebra for small quantum systems.

States, operators and density matrices are plain complex numpy arrays.
Nothing here is sparse: dimensions are expected to stay below ~64.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

# Validity tolerances, shared by every module that checks states.
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9
UNITARY_TOL = 1e-10


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


def state_vector(amplitudes, tol: float = NORM_TOL) -> np.ndarray:
    """Return `amplitudes` as a complex vector, checking unit norm."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"state vector has squared norm {norm2!r}, expected 1")
    return psi


def basis_state(n: int, index: int) -> np.ndarray:
    """|index> in an n-dimensional space, with 1-based labels."""
    if not 1 <= index <= n:
        raise IndexError(f"basis label {index} outside 1..{n}")
    v = np.zeros(n, dtype=complex)
    v[index - 1] = 1.0
    return v


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def tensor_product(*factors) -> np.ndarray:
    """Kronecker product; the leftmost factor carries the slowest index."""
    if not factors:
        raise ValueError("need at least one factor")
    arrays = [np.asarray(f, dtype=complex) for f in factors]
    kinds = {a.ndim for a in arrays}
    if len(kinds) != 1:
        raise DimensionError("cannot mix vectors and operators in a tensor product")
    return reduce(np.kron, arrays)


def partial_trace(rho, dims: Sequence[int], keep) -> np.ndarray:
    """Reduce `rho` on a product space to the factors listed in `keep`.

    Parameters
    ----------
    rho : (D, D) array
        Operator on the product space, D = prod(dims).
    dims : sequence of int
        Factor dimensions in tensor-product order.
    keep : int or sequence of int
        0-based factor indices to keep; everything else is traced out.
    """
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise DimensionError(f"operator of shape {rho.shape} does not match factor dims {dims}")
    keep = [keep] if np.isscalar(keep) else sorted(int(k) for k in keep)
    if any(not 0 <= k < len(dims) for k in keep):
        raise DimensionError(f"keep={keep} out of range for {len(dims)} factors")

    n = len(dims)
    t = rho.reshape(dims + dims)
    # trace out from the highest index down so the axis numbering stays valid
    for axis in reversed(range(n)):
        if axis in keep:
            continue
        t = np.trace(t, axis1=axis, axis2=axis + t.ndim // 2)
    d = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d, d)


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and float(np.max(np.abs(h - h.conj().T), initial=0.0)) <= tol


def hermitian_exp(h, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian `h`, via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise NotHermitianError("hermitian_exp needs a Hermitian generator")
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def trace_distance(a, b) -> float:
    """Half the trace norm of a - b."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    d = 0.5 * (d + d.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(d))))


@dataclass(frozen=True)
class ValidationReport:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    hermitian_tol: float = HERMITIAN_TOL
    trace_tol: float = TRACE_TOL
    positivity_tol: float = POSITIVITY_TOL

    @property
    def hermitian_ok(self) -> bool:
        return self.hermiticity_defect <= self.hermitian_tol

    @property
    def trace_ok(self) -> bool:
        return self.trace_defect <= self.trace_tol

    @property
    def positive_ok(self) -> bool:
        return self.min_eigenvalue >= -self.positivity_tol

    @property
    def ok(self) -> bool:
        return self.hermitian_ok and self.trace_ok and self.positive_ok

    def problems(self) -> list[str]:
        out = []
        if not self.hermitian_ok:
            out.append(f"hermiticity defect {self.hermiticity_defect:.3e}")
        if not self.trace_ok:
            out.append(f"trace defect {self.trace_defect:.3e}")
        if not self.positive_ok:
            out.append(f"minimum eigenvalue {self.min_eigenvalue:.3e}")
        return out


def validate(rho, hermitian_tol: float = HERMITIAN_TOL, trace_tol: float = TRACE_TOL,
             positivity_tol: float = POSITIVITY_TOL) -> ValidationReport:
    """Diagnose how far `rho` is from being a density matrix. Never raises."""
    rho = np.asarray(rho, dtype=complex)
    herm = float(np.max(np.abs(rho - rho.conj().T), initial=0.0))
    tr = abs(complex(np.trace(rho)) - 1.0)
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    return ValidationReport(herm, tr, min_eig, hermitian_tol, trace_tol, positivity_tol)


def density_matrix(rho, **tols) -> np.ndarray:
    """Return `rho` as a complex array, raising if it is not a valid state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got shape {rho.shape}")
    report = validate(rho, **tols)
    if not report.ok:
        raise ValueError("invalid density matrix: " + "; ".join(report.problems()))
    return rho


def permute_basis(op, order: Sequence[int]) -> np.ndarray:
    """Move basis element i to position order[i] (0-based); vectors or operators."""
    op = np.asarray(op)
    n = op.shape[0]
    if sorted(order) != list(range(n)):
        raise DimensionError(f"{list(order)} is not a permutation of 0..{n - 1}")
    p = np.zeros((n, n))
    p[list(order), np.arange(n)] = 1.0
    if op.ndim == 1:
        return p @ op
    return p @ op @ p.T
