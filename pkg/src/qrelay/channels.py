"""Channel-spec files and the built-in example channels.

A channel spec is a JSON document:

    {
      "format_version": 1,
      "x_size": 2, "x1_size": 2, "dim_b1": 2, "dim_b": 2,
      "states": {"x,x1": [[[re, im], ...], ...], ...}
    }

with one row-major matrix of ``[re, im]`` pairs per input pair, keyed by
0-based "x,x1".  Dimensions are declared explicitly; a mismatch with the
matrices is an error, never silently corrected.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from . import qops
from .errors import (DimMismatch, NotHermitian, NotPSD, ParseError, QRelayError, TraceNotOne)
from .relay_model import RelayChannel

FORMAT_VERSION = 1

BUILTIN_NAMES = ("noiseless-binary", "classical-bsc-relay", "pure-overlap", "qubit-relay-test")


def spec_dict_from_channel(channel: RelayChannel) -> dict:
    states = {}
    for x in range(channel.x_size):
        for x1 in range(channel.x1_size):
            states[f"{x},{x1}"] = qops.matrix_to_pairs(channel.states[x, x1])
    return {
        "format_version": FORMAT_VERSION,
        "x_size": channel.x_size,
        "x1_size": channel.x1_size,
        "dim_b1": channel.dim_b1,
        "dim_b": channel.dim_b,
        "states": states,
    }


def spec_diagnostics(doc) -> list:
    """Every violated invariant in a parsed spec document, with location.

    Returns a list of (code, location, detail) triples; empty means clean.
    """
    diags = []
    if not isinstance(doc, dict):
        return [("ParseError", "document", "top level must be an object")]
    for key in ("format_version", "x_size", "x1_size", "dim_b1", "dim_b", "states"):
        if key not in doc:
            diags.append(("MissingField", key, "required field absent"))
    if diags:
        return diags
    if doc["format_version"] != FORMAT_VERSION:
        diags.append(("BadVersion", "format_version",
                      f"expected {FORMAT_VERSION}, got {doc['format_version']}"))
    sizes = {}
    for key in ("x_size", "x1_size", "dim_b1", "dim_b"):
        v = doc[key]
        if not isinstance(v, int) or v < 1:
            diags.append(("BadSize", key, f"must be a positive integer, got {v!r}"))
        else:
            sizes[key] = v
    if len(sizes) < 4:
        return diags
    d = sizes["dim_b1"] * sizes["dim_b"]
    for x in range(sizes["x_size"]):
        for x1 in range(sizes["x1_size"]):
            key = f"{x},{x1}"
            where = f"(x={x},x1={x1})"
            if key not in doc["states"]:
                diags.append(("IncompleteTable", where, "state missing for this input pair"))
                continue
            try:
                m = qops.matrix_from_pairs(doc["states"][key])
            except (QRelayError, ValueError) as err:
                diags.append(("BadMatrix", where, str(err)))
                continue
            if m.shape != (d, d):
                diags.append(("DimMismatch", where, f"matrix is {m.shape[0]}x{m.shape[1]}, declared dim {d}"))
                continue
            try:
                qops.validate_density(m, (sizes["dim_b1"], sizes["dim_b"]))
            except NotHermitian as err:
                diags.append(("NotHermitian", where, str(err)))
            except TraceNotOne as err:
                diags.append(("TraceNotOne", where, str(err)))
            except NotPSD as err:
                diags.append(("NotPSD", where, str(err)))
            except DimMismatch as err:
                diags.append(("DimMismatch", where, str(err)))
    extra = set(doc["states"]) - {f"{x},{x1}" for x in range(sizes["x_size"])
                                  for x1 in range(sizes["x1_size"])}
    for key in sorted(extra):
        diags.append(("UnknownPair", key, "state key outside the declared alphabets"))
    return diags


def channel_from_spec_dict(doc) -> RelayChannel:
    diags = spec_diagnostics(doc)
    if diags:
        code, where, detail = diags[0]
        raise ParseError(f"{code} at {where}: {detail}")
    d = doc["dim_b1"] * doc["dim_b"]
    states = np.zeros((doc["x_size"], doc["x1_size"], d, d), dtype=complex)
    for x in range(doc["x_size"]):
        for x1 in range(doc["x1_size"]):
            states[x, x1] = qops.matrix_from_pairs(doc["states"][f"{x},{x1}"])
    return RelayChannel.from_states(states, doc["dim_b1"], doc["dim_b"])


def parse_spec_text(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, line=err.lineno, column=err.colno) from err


def load_spec_file(path) -> RelayChannel:
    """Load a channel from a spec file or a ``builtin:<name>`` reference."""
    text = read_spec_text(path)
    return channel_from_spec_dict(parse_spec_text(text))


def read_spec_text(path) -> str:
    path = str(path)
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        if name not in BUILTIN_NAMES:
            raise ParseError(f"unknown builtin channel {name!r}; available: {', '.join(BUILTIN_NAMES)}")
        return resources.files("qrelay").joinpath(f"data/{name}.json").read_text()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from err


def write_spec_file(channel: RelayChannel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_dict_from_channel(channel), fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Built-in example channels


def _ket(i: int, d: int) -> np.ndarray:
    v = np.zeros(d)
    v[i] = 1.0
    return v


def _pure(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj()).astype(complex)


def _depolarize(rho: np.ndarray, q: float) -> np.ndarray:
    d = rho.shape[0]
    return (1.0 - q) * rho + q * np.eye(d) / d


def make_noiseless_binary() -> RelayChannel:
    """Both outputs are perfect copies of the source bit: |x><x| (x) |x><x|."""
    states = np.zeros((2, 2, 4, 4), dtype=complex)
    for x in range(2):
        for x1 in range(2):
            states[x, x1] = np.kron(_pure(_ket(x, 2)), _pure(_ket(x, 2)))
    return RelayChannel.from_states(states, 2, 2)


def make_classical_bsc_relay(q_relay: float = 0.1, q_good: float = 0.1,
                             q_bad: float = 0.4) -> RelayChannel:
    """Commuting embedding of a classical relay channel.

    The relay sees the source bit through a BSC(q_relay); the destination
    sees it through a BSC whose flip probability is q_good when the relay
    inputs x1 = 1 and q_bad when x1 = 0, so relay cooperation pays off.
    """
    def bsc_pmf(x, q):
        return np.array([1.0 - q, q]) if x == 0 else np.array([q, 1.0 - q])

    states = np.zeros((2, 2, 4, 4), dtype=complex)
    for x in range(2):
        for x1 in range(2):
            p_y1 = bsc_pmf(x, q_relay)
            p_y = bsc_pmf(x, q_good if x1 == 1 else q_bad)
            states[x, x1] = np.diag(np.outer(p_y1, p_y).ravel())
    return RelayChannel.from_states(states, 2, 2)


def classical_conditionals_bsc_relay(q_relay: float = 0.1, q_good: float = 0.1,
                                     q_bad: float = 0.4):
    """The (p(y1|x,x1), p(y|x,x1)) tables the embedding above diagonalizes."""
    p_y1 = np.zeros((2, 2, 2))
    p_y = np.zeros((2, 2, 2))
    for x in range(2):
        for x1 in range(2):
            p_y1[x, x1] = [1.0 - q_relay, q_relay] if x == 0 else [q_relay, 1.0 - q_relay]
            q = q_good if x1 == 1 else q_bad
            p_y[x, x1] = [1.0 - q, q] if x == 0 else [q, 1.0 - q]
    return p_y1, p_y


def make_pure_overlap(s: float = 0.5) -> RelayChannel:
    """Point-to-point restriction: trivial relay side, binary pure states
    with overlap s at the destination."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("overlap must be in [0, 1]")
    psi0 = np.array([1.0, 0.0])
    psi1 = np.array([s, np.sqrt(1.0 - s * s)])
    states = np.zeros((2, 1, 2, 2), dtype=complex)
    states[0, 0] = _pure(psi0)
    states[1, 0] = _pure(psi1)
    return RelayChannel.from_states(states, 1, 2)


def make_qubit_relay_test(q_b1: float = 0.35, q_b: float = 0.35,
                          tilt: float = np.pi / 5) -> RelayChannel:
    """Full-rank qubit test channel for the coding simulation.

    The relay sees a depolarized copy of x.  The destination sees a
    depolarized pure state whose Bloch angle is set by the relay bit and
    tilted by the source bit, so decoding l leans on block j+1 and
    decoding m on block j.  The default depolarization gives every output
    the spectrum (0.825, 0.175), whose sample-entropy lattice is dense
    enough that typical-set overlaps grow monotonically over desk-scale
    block lengths, and keeps the half-rate codebook at |L| = 2 for
    n up to 6, so Monte Carlo error estimates decay cleanly.
    """
    states = np.zeros((2, 2, 4, 4), dtype=complex)
    for x in range(2):
        for x1 in range(2):
            b1 = _depolarize(_pure(_ket(x, 2)), q_b1)
            bloch = x1 * np.pi + (2 * x - 1) * tilt / 2
            vec = np.array([np.cos(bloch / 2), np.sin(bloch / 2)])
            b = _depolarize(_pure(vec), q_b)
            states[x, x1] = np.kron(b1, b)
    return RelayChannel.from_states(states, 2, 2)


_BUILTIN_FACTORIES = {
    "noiseless-binary": make_noiseless_binary,
    "classical-bsc-relay": make_classical_bsc_relay,
    "pure-overlap": make_pure_overlap,
    "qubit-relay-test": make_qubit_relay_test,
}


def builtin_channel(name: str) -> RelayChannel:
    if name not in _BUILTIN_FACTORIES:
        raise ParseError(f"unknown builtin channel {name!r}; available: {', '.join(BUILTIN_NAMES)}")
    return _BUILTIN_FACTORIES[name]()
