import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsmimo.channel import (
    ArrayGeometry,
    LinkBudget,
    LinkModel,
    PhaseConfig,
    ScenarioLinks,
    draw_scenario,
    total_channel,
)
from irsmimo.errors import DegenerateChannelError, InvalidInputError
from irsmimo.estimation import (
    DirectEstimate,
    all_zero_baseline,
    build_serom_plan,
    cancel_direct,
    coobo_estimate,
    estimate_direct,
    obo_estimate,
    serom_estimate,
    simulate_uplink_block,
    spac_estimate,
    spac_index_set,
    training_length,
)
from irsmimo.numerics import dft_matrix

from conftest import crandn, rel_err

SMALL = ArrayGeometry(2, 4, 2, 2, 2, 4)
LARGE = ArrayGeometry(4, 8, 4, 4, 8, 16)
NOISY = LinkBudget.from_dbm(30.0)
NOISELESS = LinkBudget(p_ul=1.0, p_dl=1.0, n0=0.0)
LOS_ONLY = ScenarioLinks(ib=LinkModel(5.0, 0, 2.5), ui=LinkModel(5.0, 0, 2.2))


def _wrap(x):
    return np.angle(np.exp(1j * x))


class TestTrainingLength:
    def test_small_config(self):
        assert training_length("obo", SMALL) == 32
        assert training_length("coobo", SMALL) == 16
        assert training_length("spac", SMALL) == 20
        assert training_length("serom", SMALL, q=5) == 20
        assert training_length("all-zero", SMALL) == 0

    def test_large_config(self):
        assert training_length("obo", LARGE) + LARGE.m == 2064
        assert training_length("spac", LARGE) + LARGE.m == 384
        assert training_length("serom", LARGE, q=23) + LARGE.m == 384
        assert training_length("coobo", LARGE) + LARGE.m == 272

    def test_serom_needs_q(self):
        with pytest.raises(InvalidInputError):
            training_length("serom", SMALL)

    def test_unknown(self):
        with pytest.raises(InvalidInputError):
            training_length("lskrf", SMALL)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(2, 3), st.integers(2, 3),
           st.integers(1, 8))
    def test_estimators_report_closed_forms(self, mv, mh, lv, lh, q):
        geo = ArrayGeometry(1, 2, mv, mh, lv, lh)
        ch = draw_scenario(geo, NOISY, 0)
        rng = np.random.default_rng(0)
        d = estimate_direct(ch, NOISY, rng)
        m, l = geo.m, geo.l
        assert d.tau == m
        assert obo_estimate(ch, NOISY, rng, d).training_len_cascade == l * m
        assert coobo_estimate(ch, NOISY, rng, d).training_len_cascade == 2 * l
        assert spac_estimate(ch, NOISY, rng, d)[0].training_len_cascade == (lv + lh - 1) * m
        plan = build_serom_plan(q, l)
        assert serom_estimate(ch, NOISY, plan, rng, d).training_len_cascade == q * m


class TestUplinkBlock:
    def test_noiseless(self, rng):
        h = crandn(rng, 4, 3)
        f = dft_matrix(3)
        y = simulate_uplink_block(h, f, 2.0, 0.0, rng)
        np.testing.assert_allclose(y, np.sqrt(2.0) * h @ f, rtol=1e-14)

    def test_per_slot_channel_supplier(self, rng):
        hs = crandn(rng, 3, 4, 2)
        f = dft_matrix(2)[:, [0, 1, 0]]
        y = simulate_uplink_block(lambda t: hs[t], f, 1.0, 0.0, rng)
        for t in range(3):
            np.testing.assert_allclose(y[:, t], hs[t] @ f[:, t])

    def test_noise_variance(self):
        rng = np.random.default_rng(3)
        f = np.ones((1, 100_000), dtype=complex)
        y = simulate_uplink_block(np.zeros((1, 1)), f, 1.0, 0.25, rng)
        assert np.mean(np.abs(y) ** 2) == pytest.approx(0.25, rel=0.03)

    def test_deterministic(self):
        f = dft_matrix(4)
        h = np.ones((2, 4))
        a = simulate_uplink_block(h, f, 1.0, 1.0, np.random.default_rng(1))
        b = simulate_uplink_block(h, f, 1.0, 1.0, np.random.default_rng(1))
        np.testing.assert_array_equal(a, b)

    def test_non_unit_beamformer(self, rng):
        with pytest.raises(InvalidInputError):
            simulate_uplink_block(np.ones((2, 2)), np.ones((2, 1)), 1.0, 0.0, rng)


class TestDirect:
    def test_noiseless_exact(self, rng):
        ch = draw_scenario(SMALL, NOISY, 1)
        d = estimate_direct(ch, NOISELESS, rng)
        assert rel_err(d.h_ub_hat, ch.h_ub) < 1e-10
        assert d.tau == 4

    def test_error_variance(self):
        ch = draw_scenario(SMALL, NOISY, 1)
        budget = LinkBudget(p_ul=4.0, p_dl=4.0, n0=1e-12)
        rng = np.random.default_rng(2)
        errs = np.array([estimate_direct(ch, budget, rng).h_ub_hat - ch.h_ub for _ in range(10_000)])
        assert np.mean(np.abs(errs) ** 2) == pytest.approx(budget.n0 / budget.p_ul, rel=0.05)

    def test_logged_noise_explains_error(self, rng):
        ch = draw_scenario(SMALL, NOISY, 1)
        d = estimate_direct(ch, NOISY, rng)
        f = dft_matrix(4)
        np.testing.assert_allclose(d.h_ub_hat - ch.h_ub, d.noise @ f.conj().T / np.sqrt(NOISY.p_ul),
                                   atol=1e-20)


class TestCancelDirect:
    def test_irs_off_zero(self, rng):
        h = crandn(rng, 4, 2)
        f = dft_matrix(2)[:, 0]
        y = np.sqrt(3.0) * h @ f
        np.testing.assert_allclose(cancel_direct(y, h, f, 3.0), 0, atol=1e-14)

    def test_leaves_cascade(self, rng):
        ch = draw_scenario(SMALL, NOISY, 2)
        phase = PhaseConfig.all_on(rng.uniform(0, 2 * np.pi, 8))
        f = dft_matrix(4)[:, 1]
        y = np.sqrt(2.0) * ch.total(phase) @ f
        cascade = np.tensordot(phase.coefficients, ch.rank_ones, axes=1)
        got = cancel_direct(y, ch.h_ub, f, 2.0)
        assert rel_err(got, np.sqrt(2.0) * cascade @ f) < 1e-10

    def test_imperfect_direct(self, rng):
        ch = draw_scenario(SMALL, NOISY, 2)
        h_hat = ch.h_ub + 1e-7 * crandn(rng, 8, 4)
        phase = PhaseConfig.all_on(rng.uniform(0, 2 * np.pi, 8))
        f = dft_matrix(4)[:, 2]
        y = np.sqrt(2.0) * ch.total(phase) @ f
        cascade = np.tensordot(phase.coefficients, ch.rank_ones, axes=1)
        expected = np.sqrt(2.0) * (ch.h_ub - h_hat) @ f + np.sqrt(2.0) * cascade @ f
        assert rel_err(cancel_direct(y, h_hat, f, 2.0), expected) < 1e-10


class TestObo:
    def test_noiseless_exact(self, rng):
        ch = draw_scenario(SMALL, NOISY, 4)
        est = obo_estimate(ch, NOISELESS, rng, DirectEstimate.perfect(ch))
        for r_hat, r in zip(est.r_hats, ch.rank_ones):
            assert rel_err(r_hat, r) < 1e-10

    def test_total_training_small(self, rng):
        ch = draw_scenario(SMALL, NOISY, 4)
        est = obo_estimate(ch, NOISY, rng, estimate_direct(ch, NOISY, rng))
        assert est.tau_total == 36

    def test_error_decreases_with_power(self):
        ch_seeds = range(200)
        errs = []
        for p in (0.0, 10.0, 20.0, 30.0):
            b = LinkBudget.from_dbm(p)
            total = 0.0
            for s in ch_seeds:
                ch = draw_scenario(SMALL, b, s)
                rng = np.random.default_rng(1000 + s)
                est = obo_estimate(ch, b, rng, estimate_direct(ch, b, rng))
                total += np.linalg.norm(est.r_hats - ch.rank_ones)
            errs.append(total / len(ch_seeds))
        assert all(a > b for a, b in zip(errs, errs[1:]))


class TestCoObo:
    def test_noiseless_exact(self, rng):
        ch = draw_scenario(SMALL, NOISY, 5)
        est = coobo_estimate(ch, NOISELESS, rng, DirectEstimate.perfect(ch))
        for r_hat, r in zip(est.r_hats, ch.rank_ones):
            assert rel_err(r_hat, r) < 1e-10

    def test_total_training_small(self, rng):
        ch = draw_scenario(SMALL, NOISY, 5)
        assert coobo_estimate(ch, NOISY, rng, estimate_direct(ch, NOISY, rng)).tau_total == 20

    def test_noise_expansion(self, rng):
        budget = LinkBudget(p_ul=10.0, p_dl=5.0, n0=1e-13)
        ch = draw_scenario(SMALL, budget, 6)
        direct = estimate_direct(ch, budget, rng)
        est = coobo_estimate(ch, budget, rng, direct)
        f, w = est.diagnostics["f"], est.diagnostics["w"]
        # direct-link estimation error rebuilt from the logged training noise
        delta = -direct.noise @ dft_matrix(4).conj().T / np.sqrt(budget.p_ul)
        for l in range(SMALL.l):
            h_ib, h_ui = ch.h_ib[:, l], ch.h_ui[l, :]
            n_ul = np.sqrt(budget.p_ul) * delta @ f + est.diagnostics["noise_ul"][l]
            n_dl = np.sqrt(budget.p_dl) * delta.conj().T @ w + est.diagnostics["noise_dl"][l]
            s_ul = np.sqrt(budget.p_ul) * h_ui @ f
            s_dl = np.sqrt(budget.p_dl) * np.vdot(h_ib, w)
            n_scalar = np.sqrt(budget.p_dl) * np.vdot(w, n_ul) / (s_ul * np.conj(s_dl))
            n_mat = (np.outer(h_ib, n_dl.conj()) / np.conj(s_dl)
                     + np.outer(n_ul, h_ui) / s_ul
                     + np.outer(n_ul, n_dl.conj()) / (s_ul * np.conj(s_dl))) / (1 + n_scalar)
            expected = ch.rank_ones[l] / (1 + n_scalar) + n_mat
            assert rel_err(est.r_hats[l], expected) < 1e-9

    def test_beamformers_unit_norm(self, rng):
        ch = draw_scenario(SMALL, NOISY, 5)
        est = coobo_estimate(ch, NOISY, rng, DirectEstimate.perfect(ch))
        assert np.linalg.norm(est.diagnostics["f"]) == pytest.approx(1.0)
        assert np.linalg.norm(est.diagnostics["w"]) == pytest.approx(1.0)


class TestSpac:
    def test_index_set(self):
        column, row = spac_index_set(3, 4)
        assert column == [0, 4, 8]
        assert row == [0, 1, 2, 3]
        assert len(set(column) | set(row)) == 3 + 4 - 1

    def test_los_only_noiseless_exact(self, rng):
        for seed in range(20):
            ch = draw_scenario(SMALL, NOISY, seed, links=LOS_ONLY)
            est, _ = spac_estimate(ch, NOISELESS, rng, DirectEstimate.perfect(ch))
            for r_hat, r in zip(est.r_hats, ch.rank_ones):
                assert rel_err(r_hat, r) < 1e-8

    def test_frequency_oracle(self, rng):
        geo = ArrayGeometry(3, 4, 2, 3, 3, 5)
        for seed in range(20):
            ch = draw_scenario(geo, NOISY, seed, links=LOS_ONLY)
            _, est = spac_estimate(ch, NOISELESS, rng, DirectEstimate.perfect(ch))
            ib, ui = ch.los_angles["ib"], ch.los_angles["ui"]
            assert abs(_wrap(est.nu_irs_hat - (ui.nu_rx - ib.nu_tx))) < 1e-8
            assert abs(_wrap(est.xi_irs_hat - (ui.xi_rx - ib.xi_tx))) < 1e-8
            assert est.nu_ib_rx_hat == pytest.approx(ib.nu_rx, abs=1e-8)
            assert est.xi_ib_rx_hat == pytest.approx(ib.xi_rx, abs=1e-8)
            assert est.nu_ui_tx_hat == pytest.approx(ui.nu_tx, abs=1e-8)
            assert est.xi_ui_tx_hat == pytest.approx(ui.xi_tx, abs=1e-8)
            for x in (est.nu_irs_hat, est.xi_irs_hat, est.nu_ib_rx_hat, est.xi_ib_rx_hat):
                assert -np.pi <= x <= np.pi

    def test_total_training_small(self, rng):
        ch = draw_scenario(SMALL, NOISY, 7)
        est, spac = spac_estimate(ch, NOISY, rng, estimate_direct(ch, NOISY, rng))
        assert est.tau_total == 24
        assert set(spac.c_hats) == {0, 1, 2, 3, 4}

    def test_training_elements_keep_observations(self, rng):
        # for sampled elements, SPAC returns the one-by-one estimates unchanged
        ch = draw_scenario(SMALL, NOISY, 8)
        d = estimate_direct(ch, NOISY, rng)
        spac, _ = spac_estimate(ch, NOISY, np.random.default_rng(9), d)
        obo_subset = obo_estimate(ch, NOISY, np.random.default_rng(9), d)
        np.testing.assert_allclose(spac.r_hats[0:4], obo_subset.r_hats[0:4])

    def test_needs_two_elements_per_axis(self, rng):
        geo = ArrayGeometry(2, 2, 1, 2, 1, 4)
        ch = draw_scenario(geo, NOISY, 0)
        with pytest.raises(InvalidInputError):
            spac_estimate(ch, NOISY, rng, DirectEstimate.perfect(ch))

    def test_zero_channel(self, rng):
        ch = draw_scenario(SMALL, NOISY, 0)
        ch.rank_ones = np.zeros_like(ch.rank_ones)
        with pytest.raises(DegenerateChannelError):
            spac_estimate(ch, NOISELESS, rng, DirectEstimate.perfect(ch))


class TestSeromPlan:
    def test_two_point(self):
        plan = build_serom_plan(2, 2)
        np.testing.assert_allclose(plan.omega, [[1, 1], [1, -1]], atol=1e-15)
        assert plan.norm_factor == pytest.approx(0.5)

    def test_tall_plan_is_orthogonal(self):
        plan = build_serom_plan(8, 4)
        assert plan.norm_factor == pytest.approx(1 / 8)
        g = plan.gram
        assert np.abs(g - 8 * np.eye(4)).max() < 1e-12

    def test_wide_plan_pseudo_orthogonal(self):
        plan = build_serom_plan(5, 9)
        g = plan.omega.conj().T @ plan.omega
        off = g - np.diag(np.diag(g))
        np.testing.assert_allclose(np.diag(g), 5.0, atol=1e-12)
        assert np.abs(off).max() < 5.0

    def test_wide_plan_rows_evenly_spaced(self):
        plan = build_serom_plan(5, 9)
        rows = [0, 1, 3, 5, 7]
        dft = np.exp(-2j * np.pi * np.outer(rows, np.arange(9)) / 9)
        np.testing.assert_allclose(plan.omega, dft, atol=1e-12)

    def test_norm_factor_formula(self):
        for q, l, bits in ((5, 8, 2), (23, 128, 4), (3, 7, None)):
            plan = build_serom_plan(q, l, bits)
            g = plan.gram
            off = g - np.diag(np.diag(g))
            expected = l / np.sum(np.abs(q + off.sum(axis=1)))
            assert plan.norm_factor == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("q,l,bits", [(5, 8, 2), (8, 4, 1), (23, 128, 4), (6, 6, 3)])
    def test_unit_modulus_and_quantized(self, q, l, bits):
        plan = build_serom_plan(q, l, bits)
        assert np.abs(np.abs(plan.omega) - 1).max() < 1e-12
        steps = np.mod(np.angle(plan.omega), 2 * np.pi) / (2 * np.pi / 2**bits)
        assert np.abs(steps - np.round(steps)).max() < 1e-9

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            build_serom_plan(0, 4)


class TestSerom:
    def test_noiseless_exact_when_q_at_least_l(self, rng):
        ch = draw_scenario(SMALL, NOISY, 10)
        est = serom_estimate(ch, NOISELESS, build_serom_plan(8, 8), rng, DirectEstimate.perfect(ch))
        for r_hat, r in zip(est.r_hats, ch.rank_ones):
            assert rel_err(r_hat, r) < 1e-10
        assert est.training_len_cascade == 32

    def test_wide_plan_stacked_linear_map(self, rng):
        ch = draw_scenario(SMALL, NOISY, 11)
        plan = build_serom_plan(5, 8, 2)
        est = serom_estimate(ch, NOISELESS, plan, rng, DirectEstimate.perfect(ch))
        n, m = 8, 4
        stacked = ch.rank_ones.reshape(8 * n, m)
        big = np.kron(plan.omega.conj().T @ plan.omega, np.eye(n))
        expected = (plan.norm_factor * big @ stacked).reshape(8, n, m)
        assert rel_err(est.r_hats, expected) < 1e-10

    def test_total_training(self, rng):
        ch = draw_scenario(SMALL, NOISY, 12)
        est = serom_estimate(ch, NOISY, build_serom_plan(5, 8, 2), rng, estimate_direct(ch, NOISY, rng))
        assert est.tau_total == 24

    def test_plan_size_mismatch(self, rng):
        ch = draw_scenario(SMALL, NOISY, 12)
        with pytest.raises(InvalidInputError):
            serom_estimate(ch, NOISY, build_serom_plan(5, 9), rng, DirectEstimate.perfect(ch))


class TestAllZero:
    def test_noiseless_exact(self, rng):
        ch = draw_scenario(SMALL, NOISY, 13)
        h_hat, tau = all_zero_baseline(ch, NOISELESS, rng)
        expected = total_channel(ch.h_ub, ch.rank_ones, PhaseConfig.all_on(np.zeros(8)))
        assert rel_err(h_hat, expected) < 1e-10
        assert tau == 4

    def test_large_training(self, rng):
        ch = draw_scenario(LARGE, NOISY, 0)
        assert all_zero_baseline(ch, NOISY, rng)[1] == 16


class TestNoiselessExactness:
    def test_hundred_channel_sets(self):
        plan = build_serom_plan(8, 8)
        for seed in range(100):
            ch = draw_scenario(SMALL, NOISY, seed)
            perfect = DirectEstimate.perfect(ch)
            rng = np.random.default_rng(seed)
            for est in (obo_estimate(ch, NOISELESS, rng, perfect),
                        coobo_estimate(ch, NOISELESS, rng, perfect),
                        serom_estimate(ch, NOISELESS, plan, rng, perfect)):
                errs = [rel_err(a, b) for a, b in zip(est.r_hats, ch.rank_ones)]
                assert max(errs) < 1e-8, est.method
