import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rislink import beamforming as bf
from rislink.channels import cascade, gen_channel, gen_channel_set
from rislink.errors import DegenerateChannelError, DimensionError, DomainError, NumericError


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class TestDecouple:
    def test_identity(self):
        sol = bf.decouple_bd_svd(np.eye(2), np.eye(2))
        E = sol.effective_channel(np.eye(2))
        np.testing.assert_allclose(np.diag(E), [1, 1], atol=1e-12)
        assert np.max(np.abs(E - np.diag(np.diag(E)))) < 1e-12

    def test_sigma_products(self):
        G, H = np.diag([2.0, 1.0]), np.diag([3.0, 1.0])
        E = bf.decouple_bd_svd(G, H).effective_channel(H)
        np.testing.assert_allclose(E, np.diag([6.0, 1.0]), atol=1e-12)

    def test_random_against_standalone_svd(self):
        rng = np.random.default_rng(3)
        H, G = crandn(rng, 2, 4), crandn(rng, 4, 2)
        sol = bf.decouple_bd_svd(G, H)
        E = sol.effective_channel(H)
        assert bf.offdiag_power_ratio(E) < 1e-10
        expect = np.linalg.svd(H, compute_uv=False) * np.linalg.svd(G, compute_uv=False)
        np.testing.assert_allclose(np.abs(np.diag(E)), expect, rtol=1e-10)
        # diagonal is real-positive, not just in magnitude
        np.testing.assert_allclose(np.diag(E).imag, 0, atol=1e-12)

    def test_dimensions(self):
        rng = np.random.default_rng(4)
        sol = bf.decouple_bd_svd(crandn(rng, 16, 4), crandn(rng, 3, 16))
        assert sol.Phi1.shape == sol.Phi2.shape == (16, 16)
        assert sol.compose.shape == (16, 16)
        assert sol.S == 3 and sol.F.shape == (4, 3) and sol.U.shape == (3, 3)

    def test_rank_limited_keeps_effective_channel(self):
        rng = np.random.default_rng(5)
        G, H = crandn(rng, 8, 2), crandn(rng, 2, 8)
        sol = bf.decouple_bd_svd(G, H)
        full = sol.U.conj().T @ cascade(H, sol.compose, G) @ sol.F
        lim = sol.U.conj().T @ cascade(H, sol.rank_limited(), G) @ sol.F
        np.testing.assert_allclose(full, lim, atol=1e-12)

    def test_canonical_and_deterministic(self):
        rng = np.random.default_rng(6)
        G, H = crandn(rng, 6, 3), crandn(rng, 2, 6)
        a, b = bf.decouple_bd_svd(G, H), bf.decouple_bd_svd(G, H)
        np.testing.assert_array_equal(a.Phi1, b.Phi1)
        np.testing.assert_array_equal(a.Phi2, b.Phi2)
        # rows of Phi1 are conjugated left singular vectors of G: first entry real >= 0
        lead = a.Phi1.conj()[:, 0]
        assert np.all(lead.real >= 0) and np.allclose(lead.imag, 0)

    def test_rank_zero(self):
        with pytest.raises(DegenerateChannelError):
            bf.decouple_bd_svd(np.zeros((4, 2)), np.ones((2, 4)))

    def test_streams_override(self):
        rng = np.random.default_rng(7)
        sol = bf.decouple_bd_svd(crandn(rng, 8, 4), crandn(rng, 4, 8), streams=2)
        assert sol.S == 2 and sol.F.shape == (4, 2)
        with pytest.raises(DimensionError):
            bf.decouple_bd_svd(crandn(rng, 8, 4), crandn(rng, 4, 8), streams=5)

    def test_literal_block_diagonal_layout(self):
        rng = np.random.default_rng(8)
        ch = gen_channel_set(2, 4, 1, n_users=2, seed=rng)
        from rislink.channels import block_diag_users

        H = block_diag_users(ch.H_users)
        sol = bf.decouple_bd_svd(ch.G, H)
        assert sol.compose.shape == (8, 8)
        assert bf.offdiag_power_ratio(sol.effective_channel(H)) < 1e-10

    def test_literal_assignment_does_not_diagonalize(self):
        rng = np.random.default_rng(9)
        G, H = crandn(rng, 4, 4), crandn(rng, 4, 4)
        lit = bf.decouple_bd_svd(G, H, assignment="literal")
        assert bf.offdiag_power_ratio(lit.effective_channel(H)) > 1e-3
        with pytest.raises(DimensionError):
            bf.decouple_bd_svd(crandn(rng, 8, 2), crandn(rng, 2, 8), assignment="literal")


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3), st.integers(1, 4), st.integers(0, 10_000))
def test_diagonalization_property(n_nb, extra, n_ue, seed):
    m = max(n_nb, n_ue) + extra
    rng = np.random.default_rng(seed)
    G, H = crandn(rng, m, n_nb), crandn(rng, n_ue, m)
    sol = bf.decouple_bd_svd(G, H)
    E = sol.effective_channel(H)
    assert bf.offdiag_power_ratio(E) < 1e-10
    np.testing.assert_allclose(np.abs(np.diag(E)), sol.expected_gains, rtol=1e-9)


class TestReorder:
    def test_ones(self):
        lhs, rhs = bf.single_antenna_reorder([1, 1], [1, 1], [[1], [1]])
        assert lhs == pytest.approx(2) and rhs == pytest.approx(2)

    def test_analytic(self):
        lhs, rhs = bf.single_antenna_reorder([1j, 1], [-1j, 1], [[1], [1]])
        assert lhs == pytest.approx(2) and rhs == pytest.approx(2)

    def test_random(self):
        rng = np.random.default_rng(5)
        lhs, rhs = bf.single_antenna_reorder(crandn(rng, 8), np.exp(1j * rng.uniform(0, 6, 8)), crandn(rng, 8, 3))
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_dims(self):
        with pytest.raises(DimensionError):
            bf.single_antenna_reorder([1, 2], [1], [[1], [1]])


class TestProjection:
    def test_identity(self):
        r = bf.project_constraint(np.eye(4))
        np.testing.assert_array_equal(r.coefficients, np.ones(4))
        assert r.mode == "unit-modulus"

    def test_unit_modulus(self):
        r = bf.project_constraint(np.diag([2 * np.exp(1j * np.pi / 3)]))
        assert abs(r.coefficients[0] - np.exp(1j * np.pi / 3)) < 1e-15

    def test_quantized_nearest(self):
        r = bf.project_constraint(np.diag([np.exp(1j * 0.9 * np.pi / 2)]), "quantized", 2)
        assert r.phase_index[0] == 1 and r.phases[0] == np.pi / 2

    def test_tie_goes_low(self):
        r = bf.project_constraint(np.array([np.exp(1j * np.pi / 4)]), "quantized", 2)
        assert r.phase_index[0] == 0

    def test_wraparound(self):
        r = bf.project_constraint(np.array([np.exp(-0.1j)]), "quantized", 1)
        assert r.phase_index[0] == 0

    def test_zero_entry_flagged(self):
        r = bf.project_constraint(np.diag([0, 1j]))
        assert r.coefficients[0] == 1 and r.flags["zero_entries"] == [0]

    def test_bad_mode(self):
        with pytest.raises(DomainError):
            bf.project_constraint(np.eye(2), "ideal")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 3), st.lists(st.floats(-10, 10), min_size=1, max_size=10))
    def test_quantized_on_grid(self, bits, phases):
        r = bf.project_constraint(np.exp(1j * np.array(phases)), "quantized", bits)
        grid = 2 * np.pi * np.arange(1 << bits) / (1 << bits)
        assert np.all(np.isin(r.phases, grid))
        np.testing.assert_allclose(np.abs(r.coefficients), 1, atol=1e-12)
        err = np.abs(np.angle(np.exp(1j * (np.array(phases) - r.phases))))
        assert np.all(err <= np.pi / (1 << bits) + 1e-12)


class TestRegulationMatrix:
    def test_unit_modulus_invariant(self):
        with pytest.raises(DomainError):
            bf.RegulationMatrix(np.array([1, 0.5]), mode="unit-modulus")
        with pytest.raises(DimensionError):
            bf.RegulationMatrix(np.eye(2), mode="unit-modulus")

    def test_matrix_view(self):
        r = bf.RegulationMatrix.from_phases([0, np.pi / 2])
        np.testing.assert_allclose(r.matrix, np.diag([1, 1j]), atol=1e-15)


def brute_force(h, g, bits, direct=0.0):
    levels = 1 << bits
    best, arg = -1.0, None
    for idx in itertools.product(range(levels), repeat=len(h)):
        theta = 2 * np.pi * np.array(idx) / levels
        gain = abs(direct + np.sum(h * np.exp(1j * theta) * g)) ** 2
        if gain > best * (1 + 1e-12):
            best, arg = gain, theta
    return arg, best


class TestOracle:
    def test_single(self):
        th, gain = bf.exhaustive_oracle([1], [1], 1)
        assert list(th) == [0] and gain == pytest.approx(1)

    def test_hand_enumerated(self):
        th, gain = bf.exhaustive_oracle([1, -1], [1, 1], 1)
        np.testing.assert_array_equal(th, [0, np.pi])
        assert gain == pytest.approx(4)

    def test_beats_random(self):
        rng = np.random.default_rng(9)
        h, g = crandn(rng, 4), crandn(rng, 4)
        _, best = bf.exhaustive_oracle(h, g, 1)
        rand = np.abs(np.exp(1j * rng.choice([0, np.pi], (100, 4))) @ (h * g)) ** 2
        assert best >= rand.max()

    @pytest.mark.parametrize("bits,m", [(1, 5), (2, 3)])
    def test_matches_itertools(self, bits, m):
        rng = np.random.default_rng(bits * 10 + m)
        h, g = crandn(rng, m), crandn(rng, m)
        th, gain = bf.exhaustive_oracle(h, g, bits, direct=0.3 - 0.2j)
        th2, gain2 = brute_force(h, g, bits, direct=0.3 - 0.2j)
        np.testing.assert_array_equal(th, th2)
        assert gain == pytest.approx(gain2, rel=1e-12)

    def test_guard(self):
        with pytest.raises(DomainError):
            bf.exhaustive_oracle(np.ones(13), np.ones(13), 1)
        with pytest.raises(DomainError):
            bf.exhaustive_oracle(np.ones(2), np.ones(2), 3)

    def test_dominance_and_equality(self):
        hits = 0
        for seed in range(40):
            rng = np.random.default_rng(seed)
            h, g = crandn(rng, 6), crandn(rng, 6)
            _, best = bf.exhaustive_oracle(h, g, 1)
            reg = bf.bd_svd_regulation(g[:, None], h[None, :], "quantized", 1)
            q = bf.single_antenna_gain(h, reg, g)
            assert q <= best * (1 + 1e-12)
            hits += q >= best * (1 - 1e-12)
        assert hits > 0

    def test_monotone_quantization(self):
        rng = np.random.default_rng(0)
        gains = {1: [], 2: [], "rand": []}
        for _ in range(500):
            h, g = crandn(rng, 8), crandn(rng, 8)
            for b in (1, 2):
                reg = bf.bd_svd_regulation(g[:, None], h[None, :], "quantized", b)
                gains[b].append(bf.single_antenna_gain(h, reg, g))
            gains["rand"].append(bf.single_antenna_gain(h, np.exp(1j * rng.uniform(0, 2 * np.pi, 8)), g))
        assert np.mean(gains[2]) >= np.mean(gains[1]) >= np.mean(gains["rand"])


class TestCapacity:
    def test_scalar(self):
        assert bf.capacity([[1]], 1.0) == pytest.approx(1.0)

    def test_zero(self):
        assert bf.capacity(np.zeros((2, 2)), 10.0) == 0.0

    def test_identity(self):
        assert bf.capacity(np.eye(2), 3.0, 2) == pytest.approx(2 * np.log2(2.5))
        assert bf.capacity(np.eye(2), 3.0, 2) == pytest.approx(2.6439, abs=1e-4)

    def test_nonfinite(self):
        with pytest.raises(NumericError):
            bf.capacity([[np.nan]], 1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 1000), st.floats(0, 100), st.floats(0, 100))
    def test_monotone_in_snr(self, seed, a, b):
        H = crandn(np.random.default_rng(seed), 3, 2)
        lo, hi = sorted((a, b))
        assert bf.capacity(H, lo) <= bf.capacity(H, hi) + 1e-12


class TestTuningLoss:
    def test_same_regulation(self):
        ch = gen_channel_set(1, 4, 1, seed=0)
        t = bf.RegulationMatrix.from_phases(np.zeros(4))
        assert bf.tuning_loss(ch, t, t, 10.0) == 1.0

    def test_random_vs_oracle(self):
        ch = gen_channel_set(1, 4, 1, seed=2)
        rng = np.random.default_rng(2)
        phases, _ = bf.exhaustive_oracle(ch.H_users[0].ravel(), ch.G.ravel(), 2, direct=ch.D_users[0][0, 0])
        opt = bf.RegulationMatrix.from_phases(phases)
        used = bf.RegulationMatrix.from_phases(rng.choice(phases, 4))
        assert bf.tuning_loss(ch, used, opt, 10.0) >= 1.0

    def test_zero_capacity_sentinel(self):
        ch = gen_channel_set(1, 2, 1, direct=False, seed=0)
        off = bf.RegulationMatrix.off(2)
        opt = bf.optimal_regulation(ch.H_users[0], ch.G)
        assert bf.tuning_loss(ch, off, opt, 10.0) == np.inf

    def test_mismatched_ue_monte_carlo(self):
        # UE1's matched phases applied to UE2, M=8, snr 10 (linear), 1000 trials
        ratios = []
        for s in np.random.SeedSequence(0).spawn(1000):
            ch = gen_channel_set(1, 8, 1, 2, seed=np.random.default_rng(s))
            t1 = bf.optimal_regulation(ch.H_users[0], ch.G, ch.D_users[0])
            t2 = bf.optimal_regulation(ch.H_users[1], ch.G, ch.D_users[1])
            ratios.append(bf.tuning_loss(ch, t1, t2, 10.0, user=1))
        assert np.mean(ratios) > 1.05
        assert np.mean(ratios) == pytest.approx(1.8734398535026742, rel=1e-9)
        assert min(ratios) >= 1.0


def test_matched_phase_is_continuous_optimum():
    # closed-form single-antenna optimum vs a dense random search
    rng = np.random.default_rng(12)
    h, g, d = crandn(rng, 5), crandn(rng, 5), 0.7 + 0.1j
    reg = bf.optimal_regulation(h[None, :], g[:, None], np.array([[d]]))
    best = bf.single_antenna_gain(h, reg, g, d)
    assert best == pytest.approx((abs(d) + np.sum(np.abs(h * g))) ** 2, rel=1e-12)
    trials = np.exp(1j * rng.uniform(0, 2 * np.pi, (5000, 5)))
    assert np.max(np.abs(d + trials @ (h * g)) ** 2) <= best
