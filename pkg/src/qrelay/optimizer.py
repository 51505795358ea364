"""Maximization of the partial decode-forward rate over input distributions.

Two search modes share one engine:

* ``grid`` enumerates the probability simplex at a fixed resolution
  (all compositions of k among the cells); it is the certifiable
  baseline for small alphabets.
* ``multistart-local`` runs derivative-free Nelder-Mead searches on
  unconstrained logits mapped through softmax, one private generator
  per restart; the objective is a min of smooth terms and therefore
  nonsmooth at the crossover, which rules out naive gradient descent.

The reported value is always re-evaluated through the canonical
CodeState path at the best distribution found, so it is a certified
lower bound on the true maximum (it is attained by ``best_dist``).

Presets evaluated for comparison:

* direct transmission (constant U): min{I(XX1;B), I(X;B|X1)};
* full decode-forward (U = X):      min{I(XX1;B), I(X;B1|X1)}.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import qops, relay_model
from .relay_model import ChannelTables, InputDistribution, RelayChannel

_TIE_TOL = 1e-12
_GRID_CHUNK = 32768


@dataclass(frozen=True)
class OptimizerConfig:
    u_size: int | None = None      # None: match the channel's x alphabet
    restarts: int = 16
    max_iters: int = 400
    seed: int = 0
    mode: str = "multistart-local"  # or "grid"
    grid_resolution: int = 16
    threads: int = 1

    def __post_init__(self):
        if self.mode not in ("grid", "multistart-local"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "grid" and self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2 in grid mode")

    def resolved_u_size(self, channel: RelayChannel) -> int:
        return self.u_size if self.u_size is not None else channel.x_size


@dataclass(frozen=True)
class RateReport:
    best_dist: InputDistribution
    quantities: relay_model.InfoQuantities
    preset_direct: float
    preset_df: float
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        q = self.quantities
        return {
            "pdf_rate": q.pdf_rate,
            "i_xx1_b": q.i_xx1_b,
            "i_u_b1_given_x1": q.i_u_b1_given_x1,
            "i_x_b_given_x1u": q.i_x_b_given_x1u,
            "preset_direct": self.preset_direct,
            "preset_decode_forward": self.preset_df,
            "best_dist": [[[float(v) for v in row] for row in plane] for plane in self.best_dist.probs],
            "diagnostics": self.diagnostics,
        }


def simplex_grid(cells: int, resolution: int) -> np.ndarray:
    """All compositions of ``resolution`` among ``cells``, as pmf rows.

    Deterministic lexicographic order; row count is C(resolution+cells-1, cells-1).
    """
    combos = np.fromiter(
        itertools.chain.from_iterable(
            itertools.combinations(range(resolution + cells - 1), cells - 1)),
        dtype=np.int64).reshape(-1, cells - 1)
    bounded = np.hstack([np.full((len(combos), 1), -1, dtype=np.int64),
                         combos,
                         np.full((len(combos), 1), resolution + cells - 1, dtype=np.int64)])
    counts = np.diff(bounded, axis=1) - 1
    return counts.astype(float) / resolution


def _argmax_first(values: np.ndarray) -> int:
    """Index of the first entry within _TIE_TOL of the maximum."""
    best = float(values.max())
    return int(np.argmax(values >= best - _TIE_TOL))


def _grid_search(objective_batch, cells: int, resolution: int):
    points = simplex_grid(cells, resolution)
    best_val, best_p = -np.inf, None
    for start in range(0, len(points), _GRID_CHUNK):
        chunk = points[start:start + _GRID_CHUNK]
        vals = objective_batch(chunk)
        k = _argmax_first(vals)
        # Keep the earliest grid point achieving the max within tolerance.
        if best_p is None or vals[k] > best_val + _TIE_TOL:
            best_val, best_p = float(vals[k]), chunk[k].copy()
    return best_p, best_val, {"grid_points": len(points)}


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _nm_single(objective_batch, z0, max_iters):
    def neg(z):
        return -float(objective_batch(_softmax(z)[None, :])[0])

    res = minimize(neg, z0, method="Nelder-Mead",
                   options={"maxiter": max_iters, "xatol": 1e-8, "fatol": 1e-12})
    return _softmax(res.x), -float(res.fun)


def _multistart_search(objective_batch, cells: int, cfg: OptimizerConfig, extra_starts):
    # Deterministic starts first (uniform, then embedded preset optima),
    # then one private generator per restart, seeded seed + restart index.
    starts = [np.zeros(cells)]
    for p0 in extra_starts:
        starts.append(np.log(np.clip(np.asarray(p0, dtype=float).ravel(), 1e-12, None)))
    for r in range(cfg.restarts):
        rng = np.random.default_rng(int(cfg.seed) + r)
        starts.append(rng.normal(scale=2.0, size=cells))

    def run(z0):
        return _nm_single(objective_batch, z0, cfg.max_iters)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(z0) for z0 in starts]
    vals = np.array([v for _, v in results])
    k = _argmax_first(vals)
    return results[k][0], float(vals[k]), {"restart_values": [float(v) for v in vals]}


def _search(objective_batch, cells: int, cfg: OptimizerConfig, extra_starts=()):
    if cfg.mode == "grid":
        return _grid_search(objective_batch, cells, cfg.grid_resolution)
    return _multistart_search(objective_batch, cells, cfg, extra_starts)


def _full_objective(tables: ChannelTables, u_size: int):
    x, x1 = tables.channel.x_size, tables.channel.x1_size

    def objective(flat: np.ndarray) -> np.ndarray:
        probs = flat.reshape(-1, u_size, x, x1)
        return relay_model.rate_quantities_batch(tables, probs)["pdf_rate"]

    return objective


def _df_objective(tables: ChannelTables):
    """min{I(XX1;B), I(X;B1|X1)} over p(x, x1) (full decode-forward, U = X)."""
    x, x1 = tables.channel.x_size, tables.channel.x1_size
    rho_b, rho_b1 = tables.rho_b, tables.rho_b1

    def objective(flat: np.ndarray) -> np.ndarray:
        q = flat.reshape(-1, x, x1)
        avg_b = np.einsum("gxy,xyab->gab", q, rho_b)
        i1 = qops.entropy_bits_batch(avg_b) - np.einsum("gxy,xy->g", q, tables.h_b)
        p_x1 = q.sum(axis=1)
        raw = np.einsum("gxy,xyab->gyab", q, rho_b1)
        denom = np.where(p_x1 > 1e-15, p_x1, 1.0)
        avg_b1 = raw / denom[..., None, None]
        avg_b1[p_x1 <= 1e-15] = np.eye(rho_b1.shape[-1]) / rho_b1.shape[-1]
        i2 = ((p_x1 * qops.entropy_bits_batch(avg_b1)).sum(axis=1)
              - np.einsum("gxy,xy->g", q, tables.h_b1))
        return np.minimum(i1, i2)

    return objective


def _preset_direct_search(tables: ChannelTables, cfg: OptimizerConfig):
    """Best u_size=1 distribution; the standard objective already reduces
    to min{I(XX1;B), I(X;B|X1)} when U is constant."""
    x, x1 = tables.channel.x_size, tables.channel.x1_size
    obj = _full_objective(tables, 1)
    p, val, _ = _search(obj, x * x1, cfg)
    return p.reshape(x, x1), val


def _preset_df_search(tables: ChannelTables, cfg: OptimizerConfig):
    x, x1 = tables.channel.x_size, tables.channel.x1_size
    obj = _df_objective(tables)
    p, val, _ = _search(obj, x * x1, cfg)
    return p.reshape(x, x1), val


def preset_direct(channel: RelayChannel, cfg: OptimizerConfig) -> float:
    """Best direct-transmission rate min{I(XX1;B), I(X;B|X1)} over p(x,x1)."""
    _, val = _preset_direct_search(ChannelTables(channel), cfg)
    return val


def preset_decode_forward(channel: RelayChannel, cfg: OptimizerConfig) -> float:
    """Best full decode-forward rate min{I(XX1;B), I(X;B1|X1)} over p(x,x1)."""
    _, val = _preset_df_search(ChannelTables(channel), cfg)
    return val


def _embed_direct(q: np.ndarray, u_size: int) -> np.ndarray:
    p = np.zeros((u_size,) + q.shape)
    p[0] = q
    return p


def _embed_df(q: np.ndarray, u_size: int) -> np.ndarray | None:
    x = q.shape[0]
    if u_size < x:
        return None
    p = np.zeros((u_size,) + q.shape)
    for i in range(x):
        p[i, i, :] = q[i, :]
    return p


def optimize_rate(channel: RelayChannel, cfg: OptimizerConfig) -> RateReport:
    """Maximize min{I(XX1;B), I(U;B1|X1)+I(X;B|X1,U)} over p(u, x, x1).

    Deterministic given the seed.  In multistart mode the preset optima are
    embedded as extra starts, so the result dominates both presets whenever
    the u alphabet is large enough to express them.
    """
    tables = ChannelTables(channel)
    u_size = cfg.resolved_u_size(channel)
    x, x1 = channel.x_size, channel.x1_size

    q_direct, val_direct = _preset_direct_search(tables, cfg)
    q_df, val_df = _preset_df_search(tables, cfg)

    extra = [_embed_direct(q_direct, u_size)]
    df_embed = _embed_df(q_df, u_size)
    if df_embed is not None:
        extra.append(df_embed)

    objective = _full_objective(tables, u_size)
    p_flat, _, diagnostics = _search(objective, u_size * x * x1, cfg, extra_starts=extra)

    best = InputDistribution(np.asarray(p_flat, dtype=float).reshape(u_size, x, x1)
                             / float(np.sum(p_flat)))
    quantities = relay_model.pdf_rate(relay_model.build_code_state(channel, best))
    diagnostics = dict(diagnostics)
    diagnostics["mode"] = cfg.mode
    diagnostics["u_size"] = u_size
    return RateReport(best, quantities, val_direct, val_df, diagnostics)
