"""Weak (entropy-)typical projectors on n-fold product outputs.

A projector is stored structurally: one eigenbasis per tensor slot plus
the set of accepted eigenvalue-index sequences.  A sequence is accepted
when its sample entropy, -(1/n) sum_k log2(lambda_{i_k}), sits within
``delta`` of the reference entropy (the single-letter entropy for an
i.i.d. product, the positionwise average entropy for a codeword-indexed
product).  Sequences touching a zero eigenvalue are never accepted.

Dense d^n x d^n matrices are materialized only on demand, which keeps
qubit outputs feasible up to n around 10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qops
from .errors import DimMismatch, InequalityViolated

# Eigenvalues below this fraction of the largest are treated as exact zeros.
_ZERO_EIG_RELATIVE = 1e-12


@dataclass(frozen=True)
class TypicalityParams:
    """Block length and typicality width (bits per symbol)."""

    n: int
    delta: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"block length must be >= 1, got {self.n}")
        if self.delta <= 0:
            raise ValueError(f"typicality width must be > 0, got {self.delta}")


class TypicalProjector:
    """Projector onto accepted eigenvalue sequences of a product state."""

    def __init__(self, bases, neg_log_eigs, accepted, target_entropy, delta):
        self.n = len(bases)
        self.bases = tuple(np.asarray(b) for b in bases)           # per-slot (d, d) unitaries
        self.neg_log_eigs = tuple(np.asarray(v) for v in neg_log_eigs)  # per-slot (d,), +inf at zeros
        self.accepted = np.asarray(accepted, dtype=np.intp).reshape(-1, self.n)
        self.target_entropy = float(target_entropy)
        self.delta = float(delta)
        self.slot_dim = self.bases[0].shape[0]
        self._dense = None

    @property
    def rank(self) -> int:
        return self.accepted.shape[0]

    @property
    def dim(self) -> int:
        return self.slot_dim ** self.n

    def accepted_flat_indices(self) -> np.ndarray:
        """Accepted sequences as flat indices into the product eigenbasis."""
        if self.rank == 0:
            return np.empty(0, dtype=np.intp)
        return np.ravel_multi_index(self.accepted.T, (self.slot_dim,) * self.n)

    def product_basis_columns(self, flat_indices) -> np.ndarray:
        """Columns of the n-fold product eigenbasis at the given flat indices."""
        cols = np.empty((self.dim, len(flat_indices)), dtype=complex)
        seqs = np.stack(np.unravel_index(flat_indices, (self.slot_dim,) * self.n), axis=-1)
        for j, seq in enumerate(seqs):
            vec = self.bases[0][:, seq[0]]
            for k in range(1, self.n):
                vec = np.kron(vec, self.bases[k][:, seq[k]])
            cols[:, j] = vec
        return cols

    def dense(self) -> np.ndarray:
        """Materialize the projector as a d^n x d^n matrix."""
        if self._dense is None:
            if self.rank == 0:
                self._dense = np.zeros((self.dim, self.dim), dtype=complex)
            else:
                cols = self.product_basis_columns(self.accepted_flat_indices())
                self._dense = cols @ cols.conj().T
            self._dense.setflags(write=False)
        return self._dense

    def sequence_probabilities(self) -> np.ndarray:
        """Product-state probabilities of the accepted sequences."""
        if self.rank == 0:
            return np.empty(0, dtype=float)
        logs = np.zeros(self.rank, dtype=float)
        for k in range(self.n):
            logs -= self.neg_log_eigs[k][self.accepted[:, k]]
        return np.exp2(logs)

    def overlap(self) -> float:
        """Tr[Pi rho_product] for the defining product state."""
        return float(self.sequence_probabilities().sum())

    def product_state_dense(self) -> np.ndarray:
        """The defining product state, built in the projector's own eigenbasis."""
        lams = [np.exp2(-v, where=np.isfinite(v), out=np.zeros_like(v)) for v in self.neg_log_eigs]
        mats = [(b * lam) @ b.conj().T for b, lam in zip(self.bases, lams)]
        return qops.kron_all(mats)


def _slot_data(dec: qops.EigenDecomposition):
    vals = np.clip(dec.eigenvalues, 0.0, None)
    lam_max = float(vals[0]) if vals.size else 0.0
    zero = vals <= _ZERO_EIG_RELATIVE * lam_max
    neg_log = np.where(zero, np.inf, -np.log2(np.where(zero, 1.0, vals)))
    entropy = float((vals[~zero] * neg_log[~zero]).sum())
    return dec.eigenvectors, neg_log, entropy


def _build(slots, p: TypicalityParams) -> TypicalProjector:
    bases, neg_logs, entropies = zip(*slots)
    target = float(np.mean(entropies))
    # Sample entropies for every index tuple via an outer sum, shape (d,)*n.
    total = neg_logs[0]
    for v in neg_logs[1:]:
        total = np.add.outer(total, v)
    sample = total / p.n
    mask = np.isfinite(sample) & (np.abs(sample - target) <= p.delta)
    accepted = np.argwhere(mask.reshape((len(neg_logs[0]),) * p.n))
    return TypicalProjector(bases, neg_logs, accepted, target, p.delta)


def average_typical_projector(rho: qops.DensityOperator, p: TypicalityParams) -> TypicalProjector:
    """Typical projector of the n-fold product rho^(x)n."""
    slot = _slot_data(rho.eig())
    return _build([slot] * p.n, p)


def conditional_typical_projector(states, p: TypicalityParams) -> TypicalProjector:
    """Typical projector for a position-dependent product state.

    ``states`` is a length-n list of single-letter DensityOperators; the
    reference entropy is the positionwise average of their entropies.
    """
    if len(states) != p.n:
        raise DimMismatch(f"need {p.n} per-position states, got {len(states)}")
    dims = {s.dim for s in states}
    if len(dims) != 1:
        raise DimMismatch(f"per-position dims differ: {sorted(dims)}")
    return _build([_slot_data(s.eig()) for s in states], p)


def projector_from_eigen_slots(bases, eigenvalues, p: TypicalityParams) -> TypicalProjector:
    """Assemble a projector from precomputed per-slot eigendecompositions.

    Fast path for simulation loops where the same few single-letter states
    repeat across positions; results are identical to the public builders.
    """
    slots = []
    for b, vals in zip(bases, eigenvalues):
        vals = np.clip(np.asarray(vals, dtype=float), 0.0, None)
        lam_max = float(vals.max()) if vals.size else 0.0
        zero = vals <= _ZERO_EIG_RELATIVE * lam_max
        neg_log = np.where(zero, np.inf, -np.log2(np.where(zero, 1.0, vals)))
        entropy = float((vals[~zero] * neg_log[~zero]).sum())
        slots.append((np.asarray(b), neg_log, entropy))
    return _build(slots, p)


@dataclass(frozen=True)
class ProjectorBoundsReport:
    """Margins for the three defining operator bounds plus the overlap."""

    rank: int
    rank_bound: float          # 2^{n(H+delta)}
    sandwich_margin: float     # min eig of 2^{-n(H-delta)} Pi - Pi rho Pi
    lower_margin: float        # min eig of 2^{n(H+delta)} rho - Pi
    overlap: float             # Tr[Pi rho_product]
    ok: bool


def projector_bounds_check(pi: TypicalProjector, rho_product, entropy: float,
                           p: TypicalityParams, raise_on_fail: bool = True) -> ProjectorBoundsReport:
    """Verify the three operator bounds a typical projector must satisfy.

    (i)   rank <= 2^{n(H+delta)}                   (exact integer vs real)
    (ii)  Pi rho Pi <= 2^{-n(H-delta)} Pi          (operator inequality)
    (iii) Pi <= 2^{n(H+delta)} rho                 (operator inequality)

    ``rho_product`` is the n-fold product state as a dense matrix (or None
    to rebuild it from the projector's own eigendata), ``entropy`` the
    reference entropy the window is centred on.
    """
    n, delta = p.n, p.delta
    rank_bound = 2.0 ** (n * (entropy + delta))
    pi_dense = pi.dense()
    rho_dense = pi.product_state_dense() if rho_product is None else np.asarray(rho_product, dtype=complex)
    if rho_dense.shape != pi_dense.shape:
        raise DimMismatch(f"product state shape {rho_dense.shape} vs projector {pi_dense.shape}")

    tol = 1e-9
    if pi.rank > rank_bound and raise_on_fail:
        raise InequalityViolated("i", rank_bound - pi.rank)
    sandwiched = pi_dense @ rho_dense @ pi_dense
    sandwich_margin = qops.min_eig(2.0 ** (-n * (entropy - delta)) * pi_dense - sandwiched)
    lower_margin = qops.min_eig(2.0 ** (n * (entropy + delta)) * rho_dense - pi_dense)
    overlap = float(np.trace(pi_dense @ rho_dense).real)

    ok = pi.rank <= rank_bound and sandwich_margin >= -tol and lower_margin >= -tol
    if raise_on_fail and sandwich_margin < -tol:
        raise InequalityViolated("ii", sandwich_margin)
    if raise_on_fail and lower_margin < -tol:
        raise InequalityViolated("iii", lower_margin)
    return ProjectorBoundsReport(pi.rank, rank_bound, sandwich_margin, lower_margin, overlap, ok)
