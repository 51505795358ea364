"""End-to-end simulation of the b-block partial decode-forward scheme.

Per block, a fresh random codebook is drawn: |L| relay words x1^n, for
each of them |L| words u^n carrying the relay-decodable message part,
and for each of those |M| words x^n carrying the rest.  The relay
decodes the partial message with a square-root measurement built from
typical-projector sandwiches on its n-fold output; the destination
decodes the full pair (m_j, l_j) with a square-root "AND-measurement"
on the outputs of blocks j and j+1.

Everything is computed exactly from dense operators at desk-scale block
lengths: either the full two-block measurement (exact mode) or the
per-block factorized error-bound components (hn mode), whose assembled
form ``2(alpha+beta) + 4[(A)+(B)]`` dominates the exact error by the
Hayashi-Nagaoka operator inequality.  The operator lemmas the analysis
rests on are exposed as numerical checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qops, relay_model, typicality
from .errors import DimMismatch, PreconditionViolated, SizeCap
from .relay_model import CodeState
from .typicality import TypicalityParams

DEFAULT_DIM_CAP = 4096
DEFAULT_CODEBOOK_CAP = 4096


def _size_from_rate(rate: float, n: int) -> int:
    # ceil(2^{n r}) with a guard so exact powers of two do not round up.
    return max(1, math.ceil(2.0 ** (n * rate) - 1e-9))


@dataclass(frozen=True)
class RateSplit:
    """Rates in bits per channel use for the two message parts."""

    r_m: float
    r_ell: float

    def __post_init__(self):
        if self.r_m < 0 or self.r_ell < 0:
            raise ValueError("rates must be nonnegative")

    def m_count(self, n: int) -> int:
        return _size_from_rate(self.r_m, n)

    def l_count(self, n: int) -> int:
        return _size_from_rate(self.r_ell, n)


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    b: int
    rates: RateSplit
    delta: float
    trials: int = 200
    seed: int = 0
    mode: str = "exact"           # or "hn_bound"
    genie: bool = True            # destination knows the true l_{j-1}
    dim_cap: int = DEFAULT_DIM_CAP
    codebook_cap: int = DEFAULT_CODEBOOK_CAP
    threads: int = 1              # trials are independent; merge is by index

    def __post_init__(self):
        if self.b < 2:
            raise ValueError("need at least 2 blocks")
        if self.mode not in ("exact", "hn_bound"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.genie and self.mode != "exact":
            raise ValueError("chained destination decoding requires exact mode")

    def typicality(self) -> TypicalityParams:
        return TypicalityParams(self.n, self.delta)


@dataclass(frozen=True)
class CodebookEnsemble:
    """One block's random codebooks, indexed by the previous partial message.

    ``x1_words[lp]`` is the relay word forwarding lp; ``u_words[lp, l]``
    carries l on the branch lp; ``x_words[lp, l, m]`` carries m given both.
    """

    n: int
    block_index: int
    x1_words: np.ndarray   # (L, n) symbols of X1
    u_words: np.ndarray    # (L, L, n) symbols of U
    x_words: np.ndarray    # (L, L, M, n) symbols of X
    seed: int

    @property
    def l_count(self) -> int:
        return self.x1_words.shape[0]

    @property
    def m_count(self) -> int:
        return self.x_words.shape[2]


def _sample_rows(rng, cdf_rows: np.ndarray, shape_prefix) -> np.ndarray:
    """Inverse-CDF sampling, one cdf per trailing position."""
    r = rng.random(shape_prefix + (cdf_rows.shape[0],))
    out = (r[..., None] > cdf_rows[None, ...].reshape((1,) * len(shape_prefix) + cdf_rows.shape)).sum(axis=-1)
    return np.minimum(out, cdf_rows.shape[1] - 1)


def sample_codebooks(cs: CodeState, cfg: SimulationConfig, j: int, stream: int = 0) -> CodebookEnsemble:
    """Draw the block-j codebook; deterministic given (seed, stream, j).

    Sampling law: x1 i.i.d. p(x1); u i.i.d. p(u|x1_i) along the chosen
    relay word; x i.i.d. p(x|x1_i, u_i).
    """
    n = cfg.n
    m_count = cfg.rates.m_count(n)
    l_count = cfg.rates.l_count(n)
    if m_count * l_count > cfg.codebook_cap:
        raise SizeCap(f"|M||L| = {m_count * l_count} exceeds codebook cap {cfg.codebook_cap}")
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), int(stream), int(j)]))

    x1_words = _sample_rows(rng, np.cumsum(cs.p_x1)[None, :].repeat(n, axis=0), (l_count,))
    u_words = np.empty((l_count, l_count, n), dtype=np.intp)
    x_words = np.empty((l_count, l_count, m_count, n), dtype=np.intp)
    cond_u = cs.p_u_given_x1.T       # (X1, U)
    cond_x = cs.p_x_given_x1u        # (U, X1, X)
    for lp in range(l_count):
        x1row = x1_words[lp]
        u_words[lp] = _sample_rows(rng, np.cumsum(cond_u[x1row], axis=1), (l_count,))
        for l in range(l_count):
            pmf_rows = cond_x[u_words[lp, l], x1row]  # (n, X)
            x_words[lp, l] = _sample_rows(rng, np.cumsum(pmf_rows, axis=1), (m_count,))
    for arr in (x1_words, u_words, x_words):
        arr.setflags(write=False)
    return CodebookEnsemble(n, j, x1_words, u_words, x_words, cfg.seed)


@dataclass
class Povm:
    """Measurement outcomes: labels plus matching PSD elements summing to I.

    The last outcome may be a ``None``-labelled completion absorbing the
    deficit on the orthocomplement of the detectors' joint support; it is
    always treated as a decoding error.
    """

    labels: list
    elements: list
    context: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def validate(self, psd_tol: float = 1e-9, closure_tol: float = 1e-8) -> None:
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for elem in self.elements:
            if qops.min_eig(elem) < -psd_tol:
                raise PreconditionViolated(f"POVM element has eigenvalue {qops.min_eig(elem):.3e}")
            total += elem
        dev = np.max(np.abs(total - np.eye(self.dim)))
        if dev > closure_tol:
            raise PreconditionViolated(f"POVM closure deviates by {dev:.3e}")

    def outcome_probabilities(self, rho: np.ndarray) -> np.ndarray:
        return np.array([float(np.sum(elem.T * rho).real) for elem in self.elements])

    def probability_of(self, label, rho: np.ndarray) -> float:
        return float(np.sum(self.elements[self.labels.index(label)].T * rho).real)


def srm_from_detectors(detectors, labels, context=None) -> Povm:
    """Square-root measurement: normalize detectors by (sum_k P_k)^(-1/2).

    A completion outcome (label None) restores closure on the
    orthocomplement of the detector sum's support.
    """
    s = np.sum(detectors, axis=0)
    r = qops.sqrt_pinv(s)
    elements = [r @ p @ r for p in detectors]
    completion = np.eye(s.shape[0], dtype=complex) - np.sum(elements, axis=0)
    completion = (completion + completion.conj().T) / 2
    return Povm(list(labels) + [None], elements + [completion], context or {})


# ---------------------------------------------------------------------------
# Per-block states and projectors


def _product_from_table(table: np.ndarray, *index_rows) -> np.ndarray:
    """Dense n-fold product of single-letter states gathered from a table."""
    mats = [table[idx] for idx in zip(*index_rows)]
    return qops.kron_all(mats)


def _projector(cs: CodeState, name: str, p: TypicalityParams, *index_rows) -> typicality.TypicalProjector:
    bases, vals = cs.eig_table(name)
    idx = list(zip(*index_rows))
    return typicality.projector_from_eigen_slots(
        [bases[i] for i in idx], [vals[i] for i in idx], p)


def _avg_projector(cs: CodeState, name: str, p: TypicalityParams) -> typicality.TypicalProjector:
    bases, vals = cs.eig_table(name)
    return typicality.projector_from_eigen_slots([bases] * p.n, [vals] * p.n, p)


def block_state_b1(cb: CodebookEnsemble, cs: CodeState, m: int, ell: int,
                   ell_prev_source: int, ell_prev_relay: int) -> np.ndarray:
    """Relay-side output state of one block, dim_b1^n dense."""
    xrow = cb.x_words[ell_prev_source, ell, m]
    x1row = cb.x1_words[ell_prev_relay]
    return _product_from_table(cs.rho_b1, xrow, x1row)


def block_state_b(cb: CodebookEnsemble, cs: CodeState, m: int, ell: int,
                  ell_prev_source: int, ell_prev_relay: int) -> np.ndarray:
    """Destination-side output state of one block, dim_b^n dense."""
    xrow = cb.x_words[ell_prev_source, ell, m]
    x1row = cb.x1_words[ell_prev_relay]
    return _product_from_table(cs.rho_b, xrow, x1row)


def relay_detection_ops(cb: CodebookEnsemble, cs: CodeState, ell_prev: int,
                        p: TypicalityParams) -> list:
    """Sandwiches Pi_sbar Pi_sigma(l) Pi_sbar on B1^n, one per candidate l."""
    x1row = cb.x1_words[ell_prev]
    pi_bar = _projector(cs, "sigma_bar", p, x1row).dense()
    ops = []
    for l in range(cb.l_count):
        pi_l = _projector(cs, "sigma", p, cb.u_words[ell_prev, l], x1row).dense()
        ops.append(pi_bar @ pi_l @ pi_bar)
    return ops


def build_relay_srm(cb: CodebookEnsemble, cs: CodeState, ell_prev: int,
                    p: TypicalityParams, dim_cap: int = DEFAULT_DIM_CAP) -> Povm:
    """The relay's square-root measurement for one block, given l_{j-1}."""
    if cs.channel.dim_b1 ** p.n > dim_cap:
        raise SizeCap(f"dim_b1^n = {cs.channel.dim_b1 ** p.n} exceeds cap {dim_cap}")
    ops = relay_detection_ops(cb, cs, ell_prev, p)
    return srm_from_detectors(ops, list(range(cb.l_count)), {"ell_prev": ell_prev})


def relay_error_exact(cb: CodebookEnsemble, cs: CodeState, povm: Povm, messages) -> float:
    """Average of 1 - Tr[Gamma_l rho] over the given (m, l) pairs."""
    ell_prev = povm.context.get("ell_prev", 0)
    errs = []
    for m, ell in messages:
        rho = block_state_b1(cb, cs, m, ell, ell_prev, ell_prev)
        errs.append(1.0 - povm.probability_of(ell, rho))
    return float(np.mean(errs))


def destination_block_ops(cb_j: CodebookEnsemble, cb_j1: CodebookEnsemble, cs: CodeState,
                          ell_prev: int, p: TypicalityParams):
    """Per-block positive operators for the sliding window (j, j+1).

    Returns (P1, P2): P1[m, l] is the five-layer sandwich on block j,
    P2[l] the three-layer sandwich on block j+1 built from the next
    block's relay codeword for candidate l.
    """
    x1row = cb_j.x1_words[ell_prev]
    pi_dbar = _projector(cs, "rho_dbar", p, x1row).dense()
    l_count, m_count = cb_j.l_count, cb_j.m_count
    p1 = np.empty((m_count, l_count), dtype=object)
    for l in range(l_count):
        pi_rbar = _projector(cs, "rho_bar", p, cb_j.u_words[ell_prev, l], x1row).dense()
        outer = pi_dbar @ pi_rbar
        for m in range(m_count):
            pi_rho = _projector(cs, "rho_b", p, cb_j.x_words[ell_prev, l, m], x1row).dense()
            p1[m, l] = outer @ pi_rho @ outer.conj().T

    pi_tbar = _avg_projector(cs, "tau_bar", p).dense()
    p2 = np.empty(l_count, dtype=object)
    for l in range(l_count):
        pi_tau = _projector(cs, "tau", p, cb_j1.x1_words[l]).dense()
        p2[l] = pi_tbar @ pi_tau @ pi_tbar
    return p1, p2


def build_destination_and_measurement(cb_j: CodebookEnsemble, cb_j1: CodebookEnsemble,
                                      cs: CodeState, ell_prev: int, p: TypicalityParams,
                                      dim_cap: int = DEFAULT_DIM_CAP) -> Povm:
    """The square-root AND-measurement on blocks j and j+1.

    Outcomes are indexed (m, l); the detector for (m, l) is the tensor
    product P1[m, l] (x) P2[l], normalized over all |M||L| candidates.
    """
    two_block_dim = cs.channel.dim_b ** (2 * p.n)
    if two_block_dim > dim_cap:
        raise SizeCap(f"dim_b^(2n) = {two_block_dim} exceeds cap {dim_cap}")
    p1, p2 = destination_block_ops(cb_j, cb_j1, cs, ell_prev, p)
    labels, detectors = [], []
    for m in range(cb_j.m_count):
        for l in range(cb_j.l_count):
            labels.append((m, l))
            detectors.append(np.kron(p1[m, l], p2[l]))
    return srm_from_detectors(detectors, labels, {"ell_prev": ell_prev})


def _window_states(cbs, cs, messages, ell_prev):
    (m_j, ell_j), (m_j1, ell_j1) = messages
    cb_j, cb_j1 = cbs
    rho_j = block_state_b(cb_j, cs, m_j, ell_j, ell_prev, ell_prev)
    rho_j1 = block_state_b(cb_j1, cs, m_j1, ell_j1, ell_j, ell_j)
    return rho_j, rho_j1


def destination_error_exact(cbs, cs: CodeState, povm: Povm, messages) -> float:
    """1 - Tr[Lambda_{m_j, l_j} rho(j) (x) rho(j+1)] for the true pair.

    ``messages`` is ((m_j, l_j), (m_{j+1}, l_{j+1})) or a list of such
    window assignments to average over.
    """
    if isinstance(messages[0][0], (int, np.integer)):
        messages = [messages]
    ell_prev = povm.context.get("ell_prev", 0)
    errs = []
    for window in messages:
        rho_j, rho_j1 = _window_states(cbs, cs, window, ell_prev)
        joint = np.kron(rho_j, rho_j1)
        errs.append(1.0 - povm.probability_of(tuple(window[0]), joint))
    return float(np.mean(errs))


@dataclass(frozen=True)
class HnBoundReport:
    """Factorized error-bound components for one sliding window.

    ``alpha``/``beta`` are the per-block miss terms, ``term_a`` the
    matching-l wrong-m sum, ``term_b`` the wrong-l sum assembled from the
    per-block factors b1[l', m'] and b2[l']; ``total`` is
    2(alpha + beta) + 4(term_a + term_b).
    """

    alpha: float
    beta: float
    term_a: float
    term_b: float
    b1: np.ndarray
    b2: np.ndarray
    total: float


def hn_bound_components(cbs, cs: CodeState, p: TypicalityParams, messages,
                        ell_prev: int = 0, dim_cap: int = DEFAULT_DIM_CAP) -> HnBoundReport:
    """Compute the error-bound pieces from per-block operators only.

    Exploits Tr[(A (x) C)(rho (x) sigma)] = Tr[A rho] Tr[C sigma], so only
    dim_b^n matrices are ever formed.
    """
    if cs.channel.dim_b ** p.n > dim_cap:
        raise SizeCap(f"dim_b^n = {cs.channel.dim_b ** p.n} exceeds cap {dim_cap}")
    if isinstance(messages[0][0], (int, np.integer)):
        messages = [messages]
    cb_j, cb_j1 = cbs
    p1, p2 = destination_block_ops(cb_j, cb_j1, cs, ell_prev, p)
    m_count, l_count = cb_j.m_count, cb_j.l_count

    reports = []
    for window in messages:
        (m_j, ell_j), _ = window
        rho_j, rho_j1 = _window_states(cbs, cs, window, ell_prev)
        t1 = np.array([[float(np.sum(p1[m, l].T * rho_j).real) for l in range(l_count)]
                       for m in range(m_count)])
        t2 = np.array([float(np.sum(p2[l].T * rho_j1).real) for l in range(l_count)])
        alpha = 1.0 - t1[m_j, ell_j]
        beta = 1.0 - t2[ell_j]
        term_a = float(sum(t1[m, ell_j] * t2[ell_j] for m in range(m_count) if m != m_j))
        term_b = float(sum(t1[:, l].sum() * t2[l] for l in range(l_count) if l != ell_j))
        total = 2.0 * (alpha + beta) + 4.0 * (term_a + term_b)
        reports.append(HnBoundReport(alpha, beta, term_a, term_b, t1, t2, total))
    if len(reports) == 1:
        return reports[0]
    return HnBoundReport(
        alpha=float(np.mean([r.alpha for r in reports])),
        beta=float(np.mean([r.beta for r in reports])),
        term_a=float(np.mean([r.term_a for r in reports])),
        term_b=float(np.mean([r.term_b for r in reports])),
        b1=np.mean([r.b1 for r in reports], axis=0),
        b2=np.mean([r.b2 for r in reports], axis=0),
        total=float(np.mean([r.total for r in reports])),
    )


# ---------------------------------------------------------------------------
# Operator-lemma checks


def _require_contraction(a, name):
    lo = qops.min_eig(a)
    hi = -qops.min_eig(-np.asarray(a, dtype=complex))
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise PreconditionViolated(f"{name} must satisfy 0 <= {name} <= I (eigs in [{lo:.3e}, {hi:.3e}])")


def check_hayashi_nagaoka(s, t, t_coeff: float = 4.0) -> float:
    """Margin of 2(I-S) + 4T - [I - (S+T)^(-1/2) S (S+T)^(-1/2)].

    Requires 0 <= S <= I and 0 <= T; the inverse square root is taken on
    the support of S + T.  PASS iff the returned margin >= -1e-9.
    The coefficient of T is overridable for mutation testing only.
    """
    s = np.asarray(s, dtype=complex)
    t = np.asarray(t, dtype=complex)
    if s.shape != t.shape:
        raise DimMismatch(f"shapes differ: {s.shape} vs {t.shape}")
    _require_contraction(s, "S")
    if qops.min_eig(t) < -1e-9:
        raise PreconditionViolated(f"T must be PSD (min eig {qops.min_eig(t):.3e})")
    eye = np.eye(s.shape[0])
    r = qops.sqrt_pinv(s + t)
    lhs = eye - r @ s @ r
    rhs = 2.0 * (eye - s) + t_coeff * t
    return qops.min_eig(rhs - lhs)


def hn_adversarial_margins(t_coeff: float = 4.0) -> list:
    """Margins on a fixed near-tight family: S a rank-one projector, T
    scaled and tilted almost onto it.

    With the correct coefficient every margin is nonnegative; weakened
    coefficients go negative here, which is what makes the lemma suite
    sensitive to an injected faulty inequality.
    """
    v = np.array([1.0, 0.0])
    s = np.outer(v, v).astype(complex)
    margins = []
    for eps in (1e-2, 3e-3, 1e-3):
        for tau in (0.05, 0.2, 0.8):
            w = np.array([np.cos(eps), np.sin(eps)])
            t = tau * np.outer(w, w).astype(complex)
            margins.append(check_hayashi_nagaoka(s, t, t_coeff=t_coeff))
    return margins


@dataclass(frozen=True)
class GentleOperatorReport:
    epsilon: float
    avg_trace_distance: float
    bound: float
    passed: bool


def check_gentle_operator(ensemble, lam) -> GentleOperatorReport:
    """Average disturbance of sqrt(L) rho_x sqrt(L) against the 2 sqrt(eps) bound.

    ``ensemble`` is a list of (weight, state matrix) pairs; eps is the
    average miss probability 1 - Tr[L rho_bar].
    """
    lam = np.asarray(lam, dtype=complex)
    _require_contraction(lam, "Lambda")
    weights = np.array([w for w, _ in ensemble], dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9 or np.any(weights < -1e-12):
        raise PreconditionViolated("ensemble weights must form a pmf")
    states = [np.asarray(s, dtype=complex) for _, s in ensemble]
    rho_bar = sum(w * s for w, s in zip(weights, states))
    eps = 1.0 - float(np.trace(lam @ rho_bar).real)
    eps = min(max(eps, 0.0), 1.0)
    root = qops.psd_sqrt(lam)
    avg = float(sum(w * qops.trace_norm(root @ s @ root - s)
                    for w, s in zip(weights, states)))
    bound = 2.0 * math.sqrt(eps)
    return GentleOperatorReport(eps, avg, bound, avg <= bound + 1e-9)


def check_union_bound(p_op, q_op) -> float:
    """Margin of (I-P)(x)I + I(x)(I-Q) - (I - P(x)Q) for 0 <= P, Q <= I."""
    p_op = np.asarray(p_op, dtype=complex)
    q_op = np.asarray(q_op, dtype=complex)
    _require_contraction(p_op, "P")
    _require_contraction(q_op, "Q")
    ia, ib = np.eye(p_op.shape[0]), np.eye(q_op.shape[0])
    lhs = np.kron(ia, ib) - np.kron(p_op, q_op)
    rhs = np.kron(ia - p_op, ib) + np.kron(ia, ib - q_op)
    return qops.min_eig(rhs - lhs)


# ---------------------------------------------------------------------------
# Full multi-block simulation


@dataclass(frozen=True)
class SimulationReport:
    config: dict
    relay_error_mean: list      # per block 1..b
    relay_error_ci: list
    dest_error_mean: list       # per window 1..b-1
    dest_error_ci: list
    hn_components: dict | None  # per-window means of alpha/beta/(A)/(B)/total
    effective_rate_factor: float

    def to_json_dict(self) -> dict:
        out = {
            "config": self.config,
            "relay_error_mean": self.relay_error_mean,
            "relay_error_ci": self.relay_error_ci,
            "dest_error_mean": self.dest_error_mean,
            "dest_error_ci": self.dest_error_ci,
            "effective_rate_factor": self.effective_rate_factor,
        }
        out["hn_components"] = self.hn_components
        return out


def _ci_halfwidth(samples: np.ndarray) -> float:
    if samples.size < 2:
        return 0.0
    return float(1.96 * samples.std(ddof=1) / math.sqrt(samples.size))


def run_simulation(channel: relay_model.RelayChannel, dist: relay_model.InputDistribution,
                   cfg: SimulationConfig) -> SimulationReport:
    """Simulate b blocks of the scheme, Monte Carlo over codebooks and messages.

    Block boundaries follow the standard convention: l_0 = 0 is known to
    all parties and the final block carries the fixed dummy pair (0, 0),
    so only b-1 message pairs are delivered (the effective-rate factor
    (b-1)/b is reported, not hidden).  The relay's sampled decision
    feeds the next block's encoding; the destination either receives the
    true l_{j-1} (genie mode, matching the per-window analysis) or its
    own previous decision (chained mode).
    """
    cs = relay_model.build_code_state(channel, dist)
    p = cfg.typicality()
    n, b = cfg.n, cfg.b
    if channel.dim_b1 ** n > cfg.dim_cap:
        raise SizeCap(f"dim_b1^n = {channel.dim_b1 ** n} exceeds cap {cfg.dim_cap}")
    if cfg.mode == "exact":
        if channel.dim_b ** (2 * n) > cfg.dim_cap:
            raise SizeCap(f"dim_b^(2n) = {channel.dim_b ** (2 * n)} exceeds cap {cfg.dim_cap}")
    elif channel.dim_b ** n > cfg.dim_cap:
        raise SizeCap(f"dim_b^n = {channel.dim_b ** n} exceeds cap {cfg.dim_cap}")

    m_count = cfg.rates.m_count(n)
    l_count = cfg.rates.l_count(n)
    hn_keys = ("alpha", "beta", "term_a", "term_b", "total")

    def run_trial(trial: int):
        cbs = [sample_codebooks(cs, cfg, j, stream=trial) for j in range(1, b + 1)]
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), trial, 0]))
        m_true = rng.integers(m_count, size=b)
        l_true = rng.integers(l_count, size=b)
        m_true[b - 1] = 0
        l_true[b - 1] = 0
        l_prev_true = np.concatenate([[0], l_true[:-1]])
        relay_row = np.zeros(b)
        dest_row = np.zeros(b - 1)
        hn_row = {k: np.zeros(b - 1) for k in hn_keys} if cfg.mode == "hn_bound" else None

        # Relay chain: decode each block with the relay's own previous decision.
        l_hat = np.zeros(b + 1, dtype=int)  # l_hat[j] = decision for block j; l_hat[0] = l_0
        for j in range(1, b + 1):
            cb = cbs[j - 1]
            povm = build_relay_srm(cb, cs, int(l_hat[j - 1]), p, cfg.dim_cap)
            rho = _product_from_table(
                cs.rho_b1,
                cb.x_words[int(l_prev_true[j - 1]), int(l_true[j - 1]), int(m_true[j - 1])],
                cb.x1_words[int(l_hat[j - 1])])
            probs = np.clip(povm.outcome_probabilities(rho), 0.0, None)
            relay_row[j - 1] = 1.0 - probs[list(povm.labels).index(int(l_true[j - 1]))]
            outcome = int(rng.choice(len(probs), p=probs / probs.sum()))
            decoded = povm.labels[outcome]
            l_hat[j] = 0 if decoded is None else int(decoded)

        # Destination windows.
        l_hat_dest = np.zeros(b, dtype=int)  # l_hat_dest[j] = window-j decision for l_j
        for j in range(1, b):
            cb_j, cb_j1 = cbs[j - 1], cbs[j]
            ell_prev_dest = int(l_prev_true[j - 1]) if cfg.genie else int(l_hat_dest[j - 1])
            # Actual two-block state: source uses true branches, the relay its decisions.
            rho_j = _product_from_table(
                cs.rho_b,
                cb_j.x_words[int(l_prev_true[j - 1]), int(l_true[j - 1]), int(m_true[j - 1])],
                cb_j.x1_words[int(l_hat[j - 1])])
            rho_j1 = _product_from_table(
                cs.rho_b,
                cb_j1.x_words[int(l_true[j - 1]), int(l_true[j]), int(m_true[j])],
                cb_j1.x1_words[int(l_hat[j])])
            if cfg.mode == "exact":
                povm = build_destination_and_measurement(cb_j, cb_j1, cs, ell_prev_dest, p, cfg.dim_cap)
                joint = np.kron(rho_j, rho_j1)
                true_pair = (int(m_true[j - 1]), int(l_true[j - 1]))
                if cfg.genie:
                    dest_row[j - 1] = 1.0 - povm.probability_of(true_pair, joint)
                else:
                    probs = np.clip(povm.outcome_probabilities(joint), 0.0, None)
                    outcome = int(rng.choice(len(probs), p=probs / probs.sum()))
                    decoded = povm.labels[outcome]
                    dest_row[j - 1] = float(decoded != true_pair)
                    l_hat_dest[j] = 0 if decoded is None else int(decoded[1])
            else:
                report = hn_bound_components(
                    (cb_j, cb_j1), cs, p,
                    ((int(m_true[j - 1]), int(l_true[j - 1])), (int(m_true[j]), int(l_true[j]))),
                    ell_prev=ell_prev_dest, dim_cap=cfg.dim_cap)
                dest_row[j - 1] = min(1.0, report.total)
                for key in hn_keys:
                    hn_row[key][j - 1] = getattr(report, key)
        return relay_row, dest_row, hn_row

    if cfg.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(run_trial, range(cfg.trials)))
    else:
        rows = [run_trial(t) for t in range(cfg.trials)]
    relay_err = np.stack([r[0] for r in rows])
    dest_err = np.stack([r[1] for r in rows])
    hn_components = None
    if cfg.mode == "hn_bound":
        hn_components = {k: [float(v) for v in np.mean([r[2][k] for r in rows], axis=0)]
                         for k in hn_keys}

    config_echo = {
        "n": n, "b": b, "r_m": cfg.rates.r_m, "r_ell": cfg.rates.r_ell,
        "m_count": m_count, "l_count": l_count, "delta": cfg.delta,
        "trials": cfg.trials, "seed": cfg.seed, "mode": cfg.mode, "genie": cfg.genie,
        "dim_b1": channel.dim_b1, "dim_b": channel.dim_b,
    }
    return SimulationReport(
        config=config_echo,
        relay_error_mean=[float(v) for v in relay_err.mean(axis=0)],
        relay_error_ci=[_ci_halfwidth(relay_err[:, j]) for j in range(b)],
        dest_error_mean=[float(v) for v in dest_err.mean(axis=0)],
        dest_error_ci=[_ci_halfwidth(dest_err[:, j]) for j in range(b - 1)],
        hn_components=hn_components,
        effective_rate_factor=(b - 1) / b,
    )


def rates_at_fraction(cs: CodeState, fraction: float) -> RateSplit:
    """Rate split at a fraction of the achievable-rate bound.

    r_ell takes the fraction of I(U;B1|X1); r_m the fraction of what the
    destination constraints leave: min(I(X;B|X1,U), I(XX1;B) - I(U;B1|X1)).
    """
    q = relay_model.pdf_rate(cs)
    r_ell = fraction * max(q.i_u_b1_given_x1, 0.0)
    headroom = min(q.i_x_b_given_x1u, q.i_xx1_b - q.i_u_b1_given_x1)
    r_m = fraction * max(headroom, 0.0)
    return RateSplit(r_m=r_m, r_ell=r_ell)
