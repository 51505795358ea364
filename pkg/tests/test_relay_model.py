import numpy as np
import pytest

from qrelay import qops, relay_model
from qrelay.errors import AlphabetMismatch
from qrelay.relay_model import ChannelTables, InputDistribution, RelayChannel


def random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_channel(rng, x_size=2, x1_size=2, dim_b1=2, dim_b=2):
    states = np.stack([
        np.stack([random_density(rng, dim_b1 * dim_b) for _ in range(x1_size)])
        for _ in range(x_size)])
    return RelayChannel.from_states(states, dim_b1, dim_b)


def random_dist(rng, u, x, x1):
    p = rng.uniform(0.1, 1.0, size=(u, x, x1))
    return InputDistribution(p / p.sum())


def classical_channel_embedding(p_y1_given_xx1, p_y_given_xx1):
    """Diagonal (commuting) embedding of a classical relay channel."""
    x_size, x1_size, ny1 = p_y1_given_xx1.shape
    ny = p_y_given_xx1.shape[2]
    states = np.zeros((x_size, x1_size, ny1 * ny, ny1 * ny), dtype=complex)
    for x in range(x_size):
        for x1 in range(x1_size):
            joint = np.outer(p_y1_given_xx1[x, x1], p_y_given_xx1[x, x1]).ravel()
            states[x, x1] = np.diag(joint)
    return RelayChannel.from_states(states, ny1, ny)


# Classical Shannon oracles, computed by direct enumeration over pmfs.

def shannon(p):
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def classical_relay_quantities(probs, p_y1_given_xx1, p_y_given_xx1):
    """I(XX1;Y), I(U;Y1|X1), I(X;Y|X1,U) by brute-force enumeration."""
    u_size, x_size, x1_size = probs.shape
    ny1 = p_y1_given_xx1.shape[2]
    ny = p_y_given_xx1.shape[2]

    p_uxx1y = np.zeros((u_size, x_size, x1_size, ny))
    p_uxx1y1 = np.zeros((u_size, x_size, x1_size, ny1))
    for u in range(u_size):
        for x in range(x_size):
            for x1 in range(x1_size):
                p_uxx1y[u, x, x1] = probs[u, x, x1] * p_y_given_xx1[x, x1]
                p_uxx1y1[u, x, x1] = probs[u, x, x1] * p_y1_given_xx1[x, x1]

    # I(XX1;Y) = H(Y) + H(XX1) - H(XX1Y)
    p_xx1y = p_uxx1y.sum(axis=0)
    i_xx1_y = shannon(p_xx1y.sum(axis=(0, 1))) + shannon(p_xx1y.sum(axis=2)) - shannon(p_xx1y)

    # I(U;Y1|X1) = H(UX1) + H(Y1X1) - H(UX1Y1) - H(X1)
    p_ux1y1 = p_uxx1y1.sum(axis=1)
    i_u_y1_x1 = (shannon(p_ux1y1.sum(axis=2)) + shannon(p_ux1y1.sum(axis=0))
                 - shannon(p_ux1y1) - shannon(p_ux1y1.sum(axis=(0, 2))))

    # I(X;Y|X1U) = H(XX1U) + H(YX1U) - H(XX1UY) - H(X1U)
    i_x_y_x1u = (shannon(p_uxx1y.sum(axis=3)) + shannon(p_uxx1y.sum(axis=1))
                 - shannon(p_uxx1y) - shannon(p_uxx1y.sum(axis=(1, 3))))
    return i_xx1_y, i_u_y1_x1, i_x_y_x1u


class TestBuildCodeState:
    def test_constant_channel_reduces_to_marginals(self):
        rng = np.random.default_rng(1)
        rho = random_density(rng, 4)
        states = np.broadcast_to(rho, (2, 2, 4, 4)).copy()
        ch = RelayChannel.from_states(states, 2, 2)
        cs = relay_model.build_code_state(ch, InputDistribution.uniform(2, 2, 2))
        rho_b = qops.partial_trace(qops.validate_density(rho, [2, 2]), keep=[1]).matrix
        rho_b1 = qops.partial_trace(qops.validate_density(rho, [2, 2]), keep=[0]).matrix
        np.testing.assert_allclose(cs.tau_bar, rho_b, atol=1e-12)
        for x1 in range(2):
            np.testing.assert_allclose(cs.tau[x1], rho_b, atol=1e-12)
            np.testing.assert_allclose(cs.sigma_bar[x1], rho_b1, atol=1e-12)

    def test_all_cached_states_unit_trace(self):
        rng = np.random.default_rng(2)
        ch = random_channel(rng)
        # Include a zero-probability x1 symbol to exercise the degenerate path.
        p = rng.uniform(0.1, 1.0, size=(2, 2, 2))
        p[:, :, 1] = 0.0
        cs = relay_model.build_code_state(ch, InputDistribution(p / p.sum()))
        for name in ("sigma", "sigma_bar", "rho_bar", "rho_dbar"):
            arr = getattr(cs, name)
            traces = np.trace(arr, axis1=-2, axis2=-1)
            np.testing.assert_allclose(traces.real, 1.0, atol=1e-9)
        assert abs(np.trace(cs.tau_bar).real - 1.0) < 1e-9

    def test_tau_bar_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(3)
        ch = random_channel(rng)
        dist = random_dist(rng, 2, 2, 2)
        cs = relay_model.build_code_state(ch, dist)
        expect = np.zeros((2, 2), dtype=complex)
        for u in range(2):
            for x in range(2):
                for x1 in range(2):
                    rho = qops.validate_density(ch.states[x, x1], [2, 2])
                    expect += dist.probs[u, x, x1] * qops.partial_trace(rho, keep=[1]).matrix
        np.testing.assert_allclose(cs.tau_bar, expect, atol=1e-10)

    def test_tau_bar_is_x1_average_of_tau(self):
        rng = np.random.default_rng(4)
        ch = random_channel(rng)
        cs = relay_model.build_code_state(ch, random_dist(rng, 3, 2, 2))
        recomposed = np.einsum("y,yab->ab", cs.p_x1, cs.tau)
        np.testing.assert_allclose(cs.tau_bar, recomposed, atol=1e-10)

    def test_alphabet_mismatch(self):
        rng = np.random.default_rng(5)
        with pytest.raises(AlphabetMismatch):
            relay_model.build_code_state(random_channel(rng), InputDistribution.uniform(2, 3, 2))


class TestInfoQuantities:
    def test_output_independent_of_inputs(self):
        rng = np.random.default_rng(6)
        rho = random_density(rng, 4)
        ch = RelayChannel.from_states(np.broadcast_to(rho, (2, 2, 4, 4)).copy(), 2, 2)
        cs = relay_model.build_code_state(ch, random_dist(rng, 2, 2, 2))
        assert relay_model.mutual_info_xx1_b(cs) == pytest.approx(0.0, abs=1e-10)
        assert relay_model.cond_mutual_info_u_b1_given_x1(cs) == pytest.approx(0.0, abs=1e-10)

    def test_u_size_one_gives_zero_relay_information(self):
        rng = np.random.default_rng(7)
        cs = relay_model.build_code_state(random_channel(rng), random_dist(rng, 1, 2, 2))
        assert relay_model.cond_mutual_info_u_b1_given_x1(cs) == pytest.approx(0.0, abs=1e-12)

    def test_x_determined_by_u_gives_zero(self):
        rng = np.random.default_rng(8)
        ch = random_channel(rng)
        p = np.zeros((2, 2, 2))
        p[0, 0, :] = rng.uniform(0.1, 1.0, size=2)
        p[1, 1, :] = rng.uniform(0.1, 1.0, size=2)
        cs = relay_model.build_code_state(ch, InputDistribution(p / p.sum()))
        assert relay_model.cond_mutual_info_x_b_given_x1u(cs) == pytest.approx(0.0, abs=1e-10)

    def test_classical_channel_matches_shannon_oracle(self):
        rng = np.random.default_rng(9)
        p_y1 = rng.dirichlet(np.ones(2), size=(2, 2))
        p_y = rng.dirichlet(np.ones(2), size=(2, 2))
        ch = classical_channel_embedding(p_y1, p_y)
        dist = random_dist(rng, 2, 2, 2)
        cs = relay_model.build_code_state(ch, dist)
        i1, i2, i3 = classical_relay_quantities(dist.probs, p_y1, p_y)
        assert relay_model.mutual_info_xx1_b(cs) == pytest.approx(i1, abs=1e-8)
        assert relay_model.cond_mutual_info_u_b1_given_x1(cs) == pytest.approx(i2, abs=1e-8)
        assert relay_model.cond_mutual_info_x_b_given_x1u(cs) == pytest.approx(i3, abs=1e-8)

    def test_binary_pure_state_ensemble_closed_form(self):
        # Ensemble {1/2, 1/2} of pure states with overlap s: the average
        # state has eigenvalues (1 +/- s)/2, all conditional entropies 0.
        s = 0.5
        psi0 = np.array([1.0, 0.0])
        psi1 = np.array([s, np.sqrt(1 - s * s)])
        states = np.zeros((2, 1, 2, 2), dtype=complex)
        states[0, 0] = np.outer(psi0, psi0)
        states[1, 0] = np.outer(psi1, psi1)
        ch = RelayChannel.from_states(states, 1, 2)
        cs = relay_model.build_code_state(ch, InputDistribution.uniform(1, 2, 1))
        h2 = lambda q: -q * np.log2(q) - (1 - q) * np.log2(1 - q)
        assert relay_model.mutual_info_xx1_b(cs) == pytest.approx(h2((1 + s) / 2), abs=1e-10)

    def test_noiseless_binary_rate_is_one(self):
        states = np.zeros((2, 2, 4, 4), dtype=complex)
        for x in range(2):
            for x1 in range(2):
                e = np.zeros(4)
                e[x * 2 + x] = 1.0  # |x> at B1 and |x> at B
                states[x, x1] = np.diag(e)
        ch = RelayChannel.from_states(states, 2, 2)
        p = np.zeros((2, 2, 2))
        p[0, 0, :] = 0.25
        p[1, 1, :] = 0.25
        cs = relay_model.build_code_state(ch, InputDistribution(p))
        q = relay_model.pdf_rate(cs)
        assert q.pdf_rate == pytest.approx(1.0, abs=1e-10)
        assert q.pdf_rate == min(q.i_xx1_b, q.i_u_b1_given_x1 + q.i_x_b_given_x1u)

    def test_chain_rule_identity(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            ch = random_channel(rng)
            cs = relay_model.build_code_state(ch, random_dist(rng, 2, 2, 2))
            lhs = relay_model.mutual_info_xx1_b(cs)
            rhs = relay_model.mutual_info_x1_b(cs) + relay_model.cond_mutual_info_ux_b_given_x1(cs)
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_quantities_nonnegative_and_bounded(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            ch = random_channel(rng)
            cs = relay_model.build_code_state(ch, random_dist(rng, 2, 2, 2))
            q = relay_model.pdf_rate(cs)
            cap_b = min(np.log2(4), np.log2(ch.dim_b))
            assert -1e-9 <= q.i_xx1_b <= cap_b + 1e-9
            assert -1e-9 <= q.i_u_b1_given_x1 <= np.log2(ch.dim_b1) + 1e-9
            assert -1e-9 <= q.i_x_b_given_x1u <= np.log2(ch.dim_b) + 1e-9

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(12)
        ch = random_channel(rng)
        dist = random_dist(rng, 2, 2, 2)
        base = relay_model.pdf_rate(relay_model.build_code_state(ch, dist)).pdf_rate
        # Permute u; x and x1 relabelings must also permute the channel table.
        perm_u = relay_model.pdf_rate(relay_model.build_code_state(
            ch, InputDistribution(dist.probs[::-1]))).pdf_rate
        assert perm_u == pytest.approx(base, abs=1e-10)
        swapped_states = ch.states[::-1].copy()
        ch_x = RelayChannel.from_states(swapped_states, 2, 2)
        perm_x = relay_model.pdf_rate(relay_model.build_code_state(
            ch_x, InputDistribution(dist.probs[:, ::-1, :].copy()))).pdf_rate
        assert perm_x == pytest.approx(base, abs=1e-10)


class TestBatchEvaluator:
    def test_matches_code_state_path(self):
        rng = np.random.default_rng(13)
        ch = random_channel(rng)
        tables = ChannelTables(ch)
        probs = np.stack([random_dist(rng, 2, 2, 2).probs for _ in range(8)])
        out = relay_model.rate_quantities_batch(tables, probs)
        for g in range(8):
            cs = relay_model.build_code_state(ch, InputDistribution(probs[g]))
            q = relay_model.pdf_rate(cs)
            assert out["i_xx1_b"][g] == pytest.approx(q.i_xx1_b, abs=1e-12)
            assert out["i_u_b1_given_x1"][g] == pytest.approx(q.i_u_b1_given_x1, abs=1e-12)
            assert out["i_x_b_given_x1u"][g] == pytest.approx(q.i_x_b_given_x1u, abs=1e-12)
            assert out["pdf_rate"][g] == pytest.approx(q.pdf_rate, abs=1e-12)

    def test_handles_boundary_distributions(self):
        rng = np.random.default_rng(14)
        ch = random_channel(rng)
        tables = ChannelTables(ch)
        p = np.zeros((1, 2, 2, 2))
        p[0, 0, 1, 0] = 1.0  # point mass
        out = relay_model.rate_quantities_batch(tables, p)
        assert np.isfinite(out["pdf_rate"]).all()
        assert out["pdf_rate"][0] == pytest.approx(0.0, abs=1e-9)
