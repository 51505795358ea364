"""Relay channels with classical inputs and quantum outputs.

A channel maps the input pair (x, x1) to a density operator on the
relay output B1 tensored with the destination output B.  From a joint
input distribution p(u, x, x1) this module builds every averaged output
state the coding scheme conditions on, and the Holevo-type information
quantities whose min-combination is the partial decode-forward rate:

    min{ I(XX1;B),  I(U;B1|X1) + I(X;B|X1,U) }.

Classical registers are kept as probability-weighted indices, never as
diagonal matrix blocks, so dimensions stay at the channel-output size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qops
from .errors import AlphabetMismatch, DimMismatch

_ZERO_MASS = 1e-15


@dataclass(frozen=True)
class RelayChannel:
    """Finite map (x, x1) -> density operator on B1 (x) B."""

    x_size: int
    x1_size: int
    dim_b1: int
    dim_b: int
    states: np.ndarray  # (x_size, x1_size, D, D) with D = dim_b1 * dim_b

    @classmethod
    def from_states(cls, states, dim_b1: int, dim_b: int) -> "RelayChannel":
        """Build from a nested [x][x1] table of matrices, validating each entry."""
        arr = np.asarray(states, dtype=complex)
        if arr.ndim != 4:
            raise DimMismatch(f"expected a (x, x1, D, D) table, got shape {arr.shape}")
        x_size, x1_size, d, d2 = arr.shape
        if d != d2 or d != dim_b1 * dim_b:
            raise DimMismatch(f"state dim {d} != dim_b1 * dim_b = {dim_b1 * dim_b}")
        for x in range(x_size):
            for x1 in range(x1_size):
                qops.validate_density(arr[x, x1], (dim_b1, dim_b))
        out = arr.copy()
        out.setflags(write=False)
        return cls(x_size, x1_size, dim_b1, dim_b, out)

    def state(self, x: int, x1: int) -> qops.DensityOperator:
        return qops.DensityOperator(self.states[x, x1], (self.dim_b1, self.dim_b))


@dataclass(frozen=True)
class InputDistribution:
    """Joint pmf p(u, x, x1) over finite alphabets."""

    probs: np.ndarray  # (u_size, x_size, x1_size), nonnegative, sums to 1

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 3:
            raise DimMismatch(f"expected (u, x, x1) array, got shape {p.shape}")
        if np.any(p < -1e-12):
            raise ValueError(f"negative probability {p.min():.3e}")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total:.12g}, expected 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def u_size(self) -> int:
        return self.probs.shape[0]

    @property
    def x_size(self) -> int:
        return self.probs.shape[1]

    @property
    def x1_size(self) -> int:
        return self.probs.shape[2]

    @classmethod
    def uniform(cls, u_size: int, x_size: int, x1_size: int) -> "InputDistribution":
        n = u_size * x_size * x1_size
        return cls(np.full((u_size, x_size, x1_size), 1.0 / n))


def _conditional_over_last(joint: np.ndarray) -> np.ndarray:
    """Normalize the last axis of a joint pmf into a conditional.

    Zero-mass conditioning cells get a uniform conditional: they contribute
    nothing to any average, so the filler only removes 0/0 while keeping
    every cached state unit trace.
    """
    marginal = joint.sum(axis=-1)
    denom = np.where(marginal > _ZERO_MASS, marginal, 1.0)
    cond = joint / denom[..., None]
    mask = marginal <= _ZERO_MASS
    if np.any(mask):
        cond[mask] = 1.0 / joint.shape[-1]
    return cond


@dataclass(frozen=True)
class InfoQuantities:
    """The three Theorem-style information quantities and their min-combination."""

    i_xx1_b: float
    i_u_b1_given_x1: float
    i_x_b_given_x1u: float
    pdf_rate: float


class CodeState:
    """Input distribution attached to a channel, with every reduced state cached.

    Cached per-symbol states (all unit trace):

    ==============  =========================================================
    ``rho_b``       Tr_B1 rho_{x,x1}, indexed (x, x1)
    ``rho_b1``      Tr_B rho_{x,x1}, indexed (x, x1)
    ``sigma``       sum_x p(x|x1,u) rho_b1[x,x1], indexed (u, x1)
    ``sigma_bar``   sum_u p(u|x1) sigma[u,x1], indexed (x1,)
    ``rho_bar``     sum_x p(x|x1,u) rho_b[x,x1], indexed (u, x1)
    ``rho_dbar``    sum_{u,x} p(u|x1) p(x|x1,u) rho_b[x,x1], indexed (x1,)
    ``tau``         alias of ``rho_dbar`` (same convex combination on B)
    ``tau_bar``     sum_x1 p(x1) tau[x1]
    ==============  =========================================================
    """

    def __init__(self, channel: RelayChannel, dist: InputDistribution):
        if dist.x_size != channel.x_size or dist.x1_size != channel.x1_size:
            raise AlphabetMismatch(
                f"distribution alphabets ({dist.x_size}, {dist.x1_size}) do not match "
                f"channel alphabets ({channel.x_size}, {channel.x1_size})")
        self.channel = channel
        self.dist = dist

        p = dist.probs  # (U, X, X1)
        self.p_x1 = p.sum(axis=(0, 1))                      # (X1,)
        self.p_ux1 = p.sum(axis=1)                          # (U, X1)
        self.p_xx1 = p.sum(axis=0)                          # (X, X1)
        self.p_u_given_x1 = _conditional_over_last(self.p_ux1.T).T  # (U, X1)
        # p(x | x1, u), stored as (U, X1, X) with the conditional on the last axis.
        self.p_x_given_x1u = _conditional_over_last(np.moveaxis(p, 1, 2))

        # Single-letter output marginals per input pair.
        db1, db = channel.dim_b1, channel.dim_b
        table = channel.states.reshape(channel.x_size, channel.x1_size, db1, db, db1, db)
        self.rho_b = np.ascontiguousarray(np.trace(table, axis1=2, axis2=4))   # (X, X1, db, db)
        self.rho_b1 = np.ascontiguousarray(np.trace(table, axis1=3, axis2=5))  # (X, X1, db1, db1)

        # sigma_{u,x1} on B1 and rho_bar_{u,x1} on B.
        self.sigma = np.einsum("uyx,xyab->uyab", self.p_x_given_x1u, self.rho_b1)
        self.rho_bar = np.einsum("uyx,xyab->uyab", self.p_x_given_x1u, self.rho_b)
        # sigma_bar_{x1} on B1; doubly averaged state on B (= tau_{x1}).
        self.sigma_bar = np.einsum("uy,uyab->yab", self.p_u_given_x1, self.sigma)
        self.rho_dbar = np.einsum("uy,uyab->yab", self.p_u_given_x1, self.rho_bar)
        self.tau = self.rho_dbar
        self.tau_bar = np.einsum("y,yab->ab", self.p_x1, self.tau)

        for arr in (self.rho_b, self.rho_b1, self.sigma, self.rho_bar,
                    self.sigma_bar, self.rho_dbar, self.tau_bar):
            arr.setflags(write=False)

        # Entropy tables (bits).
        self.h_rho_b = qops.entropy_bits_batch(self.rho_b)       # (X, X1)
        self.h_rho_b1 = qops.entropy_bits_batch(self.rho_b1)     # (X, X1)
        self.h_sigma = qops.entropy_bits_batch(self.sigma)       # (U, X1)
        self.h_sigma_bar = qops.entropy_bits_batch(self.sigma_bar)  # (X1,)
        self.h_rho_bar = qops.entropy_bits_batch(self.rho_bar)   # (U, X1)
        self.h_tau = qops.entropy_bits_batch(self.tau)           # (X1,)
        self.h_tau_bar = float(qops.entropy_bits_batch(self.tau_bar))

        # Eager eigendecompositions keep instances immutable after build,
        # so they are safe to share across threads.
        self._eig_tables = {
            name: self._decompose(getattr(self, name))
            for name in ("rho_b", "rho_b1", "sigma", "sigma_bar",
                         "rho_bar", "rho_dbar", "tau", "tau_bar")
        }

    @staticmethod
    def _decompose(arr: np.ndarray):
        flat = arr.reshape(-1, arr.shape[-1], arr.shape[-1])
        bases = np.empty_like(flat)
        vals = np.empty(flat.shape[:2], dtype=float)
        for i, m in enumerate(flat):
            dec = qops.eigh_ordered(m)
            bases[i] = dec.eigenvectors
            vals[i] = dec.eigenvalues
        shape = arr.shape[:-2]
        bases = bases.reshape(shape + flat.shape[1:])
        vals = vals.reshape(shape + (arr.shape[-1],))
        bases.setflags(write=False)
        vals.setflags(write=False)
        return bases, vals

    def eig_table(self, name: str):
        """Deterministic eigendecompositions for a cached state family.

        Returns (bases, eigenvalues) stacked over the family's index grid;
        used by the typicality module to assemble conditional projectors.
        """
        return self._eig_tables[name]


def build_code_state(channel: RelayChannel, dist: InputDistribution) -> CodeState:
    """Attach a distribution to a channel and precompute all reduced states."""
    return CodeState(channel, dist)


def mutual_info_xx1_b(cs: CodeState) -> float:
    """I(XX1;B): Holevo information of the destination output."""
    avg = np.einsum("xy,xyab->ab", cs.p_xx1, cs.rho_b)
    return float(qops.entropy_bits_batch(avg) - (cs.p_xx1 * cs.h_rho_b).sum())


def mutual_info_x1_b(cs: CodeState) -> float:
    """I(X1;B) = H(tau_bar) - sum_x1 p(x1) H(tau_x1)."""
    return float(cs.h_tau_bar - (cs.p_x1 * cs.h_tau).sum())


def cond_mutual_info_u_b1_given_x1(cs: CodeState) -> float:
    """I(U;B1|X1) = sum_x1 p(x1) [H(sigma_bar_x1) - sum_u p(u|x1) H(sigma_u_x1)]."""
    inner = cs.h_sigma_bar - np.einsum("uy,uy->y", cs.p_u_given_x1, cs.h_sigma)
    return float((cs.p_x1 * inner).sum())


def cond_mutual_info_x_b_given_x1u(cs: CodeState) -> float:
    """I(X;B|X1,U) = sum_{u,x1} p(u,x1) [H(rho_bar_{u,x1}) - sum_x p(x|·) H(rho_{x,x1})]."""
    h_cond = np.einsum("uyx,xy->uy", cs.p_x_given_x1u, cs.h_rho_b)
    return float((cs.p_ux1 * (cs.h_rho_bar - h_cond)).sum())


def cond_mutual_info_ux_b_given_x1(cs: CodeState) -> float:
    """I(UX;B|X1) = sum_x1 p(x1) H(tau_x1) - sum_{x,x1} p(x,x1) H(rho_{x,x1})."""
    return float((cs.p_x1 * cs.h_tau).sum() - (cs.p_xx1 * cs.h_rho_b).sum())


def cond_mutual_info_x_b_given_x1(cs: CodeState) -> float:
    """I(X;B|X1) (the direct-transmission preset's second term)."""
    return cond_mutual_info_ux_b_given_x1(cs)


def cond_mutual_info_x_b1_given_x1(cs: CodeState) -> float:
    """I(X;B1|X1) (the full decode-forward preset's relay term)."""
    # The x-average of rho_b1 given x1 equals sigma_bar regardless of U.
    p_x_given_x1 = _conditional_over_last(cs.p_xx1.T)  # (X1, X)
    h_cond = np.einsum("yx,xy->y", p_x_given_x1, cs.h_rho_b1)
    return float((cs.p_x1 * (cs.h_sigma_bar - h_cond)).sum())


def pdf_rate(cs: CodeState) -> InfoQuantities:
    """All three Theorem quantities plus their min-combination, in bits."""
    i1 = mutual_info_xx1_b(cs)
    i2 = cond_mutual_info_u_b1_given_x1(cs)
    i3 = cond_mutual_info_x_b_given_x1u(cs)
    return InfoQuantities(i1, i2, i3, min(i1, i2 + i3))


# ---------------------------------------------------------------------------
# Vectorized evaluation over batches of candidate distributions.  This is
# the optimizer's hot path; it must agree with the CodeState path above
# (covered by tests) since reported optima are re-evaluated canonically.

class ChannelTables:
    """Per-channel precomputation shared across batched rate evaluations."""

    def __init__(self, channel: RelayChannel):
        self.channel = channel
        cs_probe = CodeState(channel, InputDistribution.uniform(1, channel.x_size, channel.x1_size))
        self.rho_b = cs_probe.rho_b
        self.rho_b1 = cs_probe.rho_b1
        self.h_b = cs_probe.h_rho_b
        self.h_b1 = cs_probe.h_rho_b1


def rate_quantities_batch(tables: ChannelTables, probs: np.ndarray) -> dict:
    """Evaluate the rate quantities for a stack of distributions.

    ``probs`` has shape (G, U, X, X1); returns arrays of shape (G,) under
    keys ``i_xx1_b``, ``i_u_b1_given_x1``, ``i_x_b_given_x1u``, ``pdf_rate``.
    """
    p = np.asarray(probs, dtype=float)
    g, u_size, x_size, x1_size = p.shape
    rho_b, rho_b1 = tables.rho_b, tables.rho_b1

    w_xx1 = p.sum(axis=1)                       # (G, X, X1)
    p_x1 = w_xx1.sum(axis=1)                    # (G, X1)
    p_ux1 = p.sum(axis=2)                       # (G, U, X1)

    avg_b = np.einsum("gxy,xyab->gab", w_xx1, rho_b)
    i1 = qops.entropy_bits_batch(avg_b) - np.einsum("gxy,xy->g", w_xx1, tables.h_b)

    def _norm(raw, mass, dim):
        denom = np.where(mass > _ZERO_MASS, mass, 1.0)
        out = raw / denom[..., None, None]
        out[mass <= _ZERO_MASS] = np.eye(dim) / dim
        return out

    sig_raw = np.einsum("guxy,xyab->guyab", p, rho_b1)      # (G, U, X1, d1, d1)
    sigma = _norm(sig_raw, p_ux1, rho_b1.shape[-1])
    sbar_raw = sig_raw.sum(axis=1)                          # (G, X1, d1, d1)
    sigma_bar = _norm(sbar_raw, p_x1, rho_b1.shape[-1])
    i2 = ((p_x1 * qops.entropy_bits_batch(sigma_bar)).sum(axis=1)
          - (p_ux1 * qops.entropy_bits_batch(sigma)).sum(axis=(1, 2)))

    rbar_raw = np.einsum("guxy,xyab->guyab", p, rho_b)
    rho_bar = _norm(rbar_raw, p_ux1, rho_b.shape[-1])
    i3 = ((p_ux1 * qops.entropy_bits_batch(rho_bar)).sum(axis=(1, 2))
          - np.einsum("guxy,xy->g", p, tables.h_b))

    return {
        "i_xx1_b": i1,
        "i_u_b1_given_x1": i2,
        "i_x_b_given_x1u": i3,
        "pdf_rate": np.minimum(i1, i2 + i3),
    }
