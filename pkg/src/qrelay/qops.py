"""Dense complex-matrix algebra for density operators.

Everything downstream (reduced states, typical projectors, square-root
measurements) is built from the handful of primitives here: validation,
tensor products, partial traces, entropies, trace distance and the
pseudo-inverse square root.  All values are immutable after construction
and every operation is a pure function.

Conventions fixed once for the whole package:

* logarithms are base 2, entropies and rates are in bits;
* Kronecker products put the left factor's index major
  (``index = i_left * dim_right + i_right``);
* subsystems are addressed by 0-based position in ``dims``;
* trace distance is the unnormalized ``Tr|rho - sigma|`` in ``[0, 2]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSubsystemIndex, DimMismatch, NotHermitian, NotPSD, TraceNotOne

# Tolerances sized for double-precision eigensolvers at dims up to ~4096.
HERMITICITY_TOL = 1e-10
PSD_EIG_FLOOR = -1e-9
TRACE_TOL = 1e-9
PINV_RELATIVE_CUTOFF = 1e-12


def _as_complex_square(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {m.shape}")
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EigenDecomposition:
    """Hermitian eigendecomposition with deterministic ordering.

    Eigenvalues are sorted descending; each eigenvector's phase is fixed by
    making its first non-negligible component real and positive, so two
    decompositions of the same matrix are identical.
    """

    eigenvalues: np.ndarray  # (d,) real, descending
    eigenvectors: np.ndarray  # (d, d) columns, orthonormal

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigh_ordered(matrix) -> EigenDecomposition:
    """Eigendecompose a Hermitian matrix with descending, phase-fixed output."""
    m = _as_complex_square(matrix)
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-vals, kind="stable")
    vals = np.ascontiguousarray(vals[order])
    vecs = np.ascontiguousarray(vecs[:, order])
    # Phase convention: first component with non-negligible modulus made
    # real positive; needed so repeated constructions agree exactly.
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        idx = np.argmax(np.abs(col) > 1e-8)
        pivot = col[idx]
        if np.abs(pivot) > 0:
            vecs[:, k] = col * (pivot.conjugate() / np.abs(pivot))
    return EigenDecomposition(_frozen(vals), _frozen(vecs))


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, PSD, unit-trace matrix on a declared tensor factorization."""

    matrix: np.ndarray
    dims: tuple  # ordered subsystem dimensions, product equals matrix dim

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eig(self) -> EigenDecomposition:
        return eigh_ordered(self.matrix)


def assert_hermitian(matrix, tol: float = HERMITICITY_TOL) -> np.ndarray:
    m = _as_complex_square(matrix)
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol:
        raise NotHermitian(f"max |A - A^dag| = {dev:.3e} exceeds {tol:g}")
    return m


def validate_density(matrix, subsystem_dims) -> DensityOperator:
    """Validate a matrix as a density operator; never silently renormalize.

    Raises DimMismatch, NotHermitian, TraceNotOne or NotPSD (with the
    most-negative eigenvalue attached).
    """
    m = _as_complex_square(matrix)
    dims = tuple(int(d) for d in subsystem_dims)
    if any(d < 1 for d in dims):
        raise DimMismatch(f"subsystem dims must be positive, got {dims}")
    if int(np.prod(dims)) != m.shape[0]:
        raise DimMismatch(f"matrix dim {m.shape[0]} != product of subsystem dims {dims}")
    assert_hermitian(m)
    tr = np.trace(m)
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceNotOne(tr)
    min_eig = float(np.linalg.eigvalsh(m)[0])
    if min_eig < PSD_EIG_FLOOR:
        raise NotPSD(min_eig)
    return DensityOperator(_frozen(m.copy()), dims)


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    """Kronecker product with a's indices major; dims concatenate."""
    return DensityOperator(_frozen(np.kron(a.matrix, b.matrix)), a.dims + b.dims)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out all subsystems not listed in ``keep`` (0-based indices).

    Kept subsystems stay in their original order; the trace is preserved.
    """
    keep = sorted(set(int(k) for k in keep))
    n = len(rho.dims)
    for k in keep:
        if k < 0 or k >= n:
            raise BadSubsystemIndex(f"subsystem {k} not in 0..{n - 1}")
    if not keep:
        raise BadSubsystemIndex("must keep at least one subsystem")
    dims = list(rho.dims)
    t = rho.matrix.reshape(dims + dims)
    # Trace highest indices first so earlier axis numbers stay valid.
    for idx in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=idx, axis2=idx + len(dims))
        dims.pop(idx)
    d = int(np.prod(dims))
    return DensityOperator(_frozen(np.ascontiguousarray(t.reshape(d, d))), tuple(dims))


def entropy_from_eigenvalues(eigenvalues) -> float:
    """-sum(lam * log2 lam) with 0*log0 := 0 and tiny negatives clamped."""
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    nz = lam[lam > 0.0]
    h = float(-(nz * np.log2(nz)).sum()) if nz.size else 0.0
    return max(h, 0.0)


def von_neumann_entropy(rho: DensityOperator) -> float:
    """Von Neumann entropy in bits, in [0, log2 dim]."""
    return entropy_from_eigenvalues(np.linalg.eigvalsh(rho.matrix))


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Tr|rho - sigma| (unnormalized convention, range [0, 2])."""
    if rho.dim != sigma.dim:
        raise DimMismatch(f"dims differ: {rho.dim} vs {sigma.dim}")
    return float(np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix)).sum())


def trace_norm(a) -> float:
    """Tr|A| for a Hermitian matrix."""
    return float(np.abs(np.linalg.eigvalsh(assert_hermitian(a))).sum())


def sqrt_pinv(a) -> np.ndarray:
    """A^(-1/2) on the support of a PSD matrix A.

    Eigenvalues below ``PINV_RELATIVE_CUTOFF * lambda_max`` are treated as
    zero and map to zero, so ``sqrt_pinv(A) @ A @ sqrt_pinv(A)`` is the
    support projector of A.
    """
    dec = eigh_ordered(assert_hermitian(a))
    vals = dec.eigenvalues
    if vals.size and vals[-1] < PSD_EIG_FLOOR:
        raise NotPSD(float(vals[-1]))
    lam_max = float(vals[0]) if vals.size else 0.0
    cutoff = PINV_RELATIVE_CUTOFF * max(lam_max, 0.0)
    keep = vals > cutoff
    inv_sqrt = np.where(keep, 1.0 / np.sqrt(np.where(keep, vals, 1.0)), 0.0)
    v = dec.eigenvectors
    return (v * inv_sqrt) @ v.conj().T


def psd_sqrt(a) -> np.ndarray:
    """Ordinary PSD square root A^(1/2) (zero eigenvalues stay zero)."""
    dec = eigh_ordered(assert_hermitian(a))
    vals = np.clip(dec.eigenvalues, 0.0, None)
    v = dec.eigenvectors
    return (v * np.sqrt(vals)) @ v.conj().T


def support_projector(a, cutoff_scale: float = PINV_RELATIVE_CUTOFF) -> np.ndarray:
    """Projector onto the span of eigenvectors with non-negligible eigenvalue."""
    dec = eigh_ordered(assert_hermitian(a))
    lam_max = float(np.max(np.abs(dec.eigenvalues))) if dec.eigenvalues.size else 0.0
    mask = dec.eigenvalues > cutoff_scale * lam_max
    v = dec.eigenvectors[:, mask]
    return v @ v.conj().T


def operator_leq(a, b, tol: float = 1e-9) -> bool:
    """True iff A <= B as operators: min eigenvalue of (B - A) >= -tol."""
    am = _as_complex_square(a)
    bm = _as_complex_square(b)
    if am.shape != bm.shape:
        raise DimMismatch(f"shapes differ: {am.shape} vs {bm.shape}")
    return float(np.linalg.eigvalsh(bm - am)[0]) >= -tol


def min_eig(a) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(_as_complex_square(a))[0])


def kron_all(mats) -> np.ndarray:
    """Kronecker product of a sequence, left factor major."""
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def entropy_bits_batch(mats: np.ndarray) -> np.ndarray:
    """Von Neumann entropies (bits) for a stacked array (..., d, d).

    Uses the closed-form 2x2 eigenvalues when d == 2 (hot path for the
    rate optimizer); the general path calls the batched eigensolver.
    """
    mats = np.asarray(mats, dtype=complex)
    d = mats.shape[-1]
    if d == 1:
        return np.zeros(mats.shape[:-2], dtype=float)
    if d == 2:
        t = mats[..., 0, 0].real + mats[..., 1, 1].real
        det = (mats[..., 0, 0].real * mats[..., 1, 1].real
               - np.abs(mats[..., 0, 1]) ** 2)
        disc = np.sqrt(np.clip(t * t - 4.0 * det, 0.0, None))
        lam = np.stack([(t + disc) / 2.0, (t - disc) / 2.0], axis=-1)
    else:
        lam = np.linalg.eigvalsh(mats)
    lam = np.clip(lam, 0.0, None)
    terms = np.where(lam > 0.0, -lam * np.log2(np.where(lam > 0.0, lam, 1.0)), 0.0)
    return np.clip(terms.sum(axis=-1), 0.0, None)


# Interchange format for matrix literals: complex entries as [re, im]
# pairs in row-major nested arrays (the channel-spec file format).

def matrix_from_pairs(nested) -> np.ndarray:
    """Parse row-major nested [re, im] pairs into a complex matrix."""
    arr = np.asarray(nested, dtype=float)
    if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] != 2:
        raise DimMismatch(f"expected shape (d, d, 2) of [re, im] pairs, got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_pairs(matrix) -> list:
    """Serialize a complex matrix as row-major nested [re, im] pairs."""
    m = _as_complex_square(matrix)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]
