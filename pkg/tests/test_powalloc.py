"""Power allocation: water-filling updates, multiplier steps, the
fractional-programming outer loop, and its grid-search oracle."""

import math

import numpy as np
import pytest

from scma_ee.assignment import fixed_assignment, random_assignment
from scma_ee.channel import generate_channel, scenario_by_name
from scma_ee.metrics import sum_rate_mac, total_power
from scma_ee.model import SystemParams, validate_power
from scma_ee.powalloc import (
    SolverConfig,
    auxiliary_value,
    dinkelbach_allocate,
    equal_split_power,
    kkt_power_update,
    multiplier_update,
)

from test_model import CANONICAL_F

SIGMA2 = 7.165929069962951e-16
LN2 = math.log(2.0)


def canonical_params(pmax=1e-4):
    return SystemParams(
        num_subcarriers=4,
        num_users=6,
        codeword_sparsity=2,
        noise_power=SIGMA2,
        circuit_power=1e-3,
        max_power_per_user=pmax,
    )


def single_user_params(pmax, Pc=1e-3):
    return SystemParams(
        num_subcarriers=1,
        num_users=1,
        codeword_sparsity=1,
        noise_power=SIGMA2,
        circuit_power=Pc,
        max_power_per_user=pmax,
    )


def grid_oracle(g2, pmax, Pc, points=10**5):
    """Brute-force single-user EE maximum over a uniform power grid."""
    p = np.linspace(0.0, pmax, points)
    ee = np.log2(1.0 + p * g2 / SIGMA2) / (p + Pc)
    i = int(np.argmax(ee))
    return float(ee[i]), float(p[i])


def random_canonical_instance(rng, pmax_dbm=None):
    params = canonical_params(
        pmax=10.0 ** (((pmax_dbm if pmax_dbm is not None else rng.uniform(-30, 0)) - 30) / 10)
    )
    chan = generate_channel(
        scenario_by_name("uniform"), params, int(rng.integers(2**63))
    )
    F = random_assignment(params, int(rng.integers(2**63)))
    return F, chan, params


class TestSolverConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert c.epsilon == 1e-6
        assert c.max_outer_iters == 500
        assert c.max_inner_iters == 1000
        assert c.mode == "PPC"
        assert c.schedule == "literal"
        assert c.inner_method == "exact"
        assert c.update_order == "gauss_seidel"
        assert c.own_term == "exclude"

    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            SolverConfig(beta=-1.0)
        with pytest.raises(ValueError):
            SolverConfig(max_outer_iters=0)
        with pytest.raises(ValueError):
            SolverConfig(mode="both")
        with pytest.raises(ValueError):
            SolverConfig(schedule="eager")
        with pytest.raises(ValueError):
            SolverConfig(own_term="maybe")

    def test_beta_vector(self):
        assert SolverConfig(beta=2.0).beta_vector(3).tolist() == [2.0, 2.0, 2.0]
        assert SolverConfig(beta=(1.0, 2.0)).beta_vector(2).tolist() == [1.0, 2.0]
        with pytest.raises(ValueError):
            SolverConfig(beta=(1.0, 2.0)).beta_vector(3)


class TestEqualSplitPower:
    def test_canonical_entries(self):
        params = canonical_params(pmax=2e-4)
        P = equal_split_power(fixed_assignment(params), params)
        assert np.count_nonzero(P.p) == 12  # J * N assigned entries
        assert np.all(P.p[P.p > 0] == 1e-4)  # p_max / N each

    def test_row_sums_hit_budget_exactly(self):
        params = canonical_params(pmax=[1e-4, 2e-4, 3e-4, 4e-4, 5e-4, 6e-4])
        P = equal_split_power(fixed_assignment(params), params)
        assert np.allclose(P.row_sums(), params.max_power_per_user, rtol=0, atol=0)

    def test_passes_validation(self):
        params = canonical_params()
        F = fixed_assignment(params)
        assert validate_power(equal_split_power(F, params), F, params).ok


class TestAuxiliaryValue:
    def _instance(self):
        rng = np.random.default_rng(21)
        params = canonical_params()
        F = fixed_assignment(params)
        H = rng.exponential(1.0, (6, 4)) * 1e-8
        P = equal_split_power(F, params)
        return F, P, H, params

    def test_zero_omega_equals_mac_rate(self):
        F, P, H, params = self._instance()
        assert auxiliary_value(0.0, F, P, H, params) == pytest.approx(
            sum_rate_mac(F, P, H, params), rel=1e-12
        )

    def test_at_achieved_ratio_is_zero(self):
        F, P, H, params = self._instance()
        ratio = sum_rate_mac(F, P, H, params) / total_power(F, P, params)
        assert abs(auxiliary_value(ratio, F, P, H, params)) < 1e-9

    def test_huge_omega_negative(self):
        F, P, H, params = self._instance()
        assert auxiliary_value(1e12, F, P, H, params) < 0

    def test_negative_omega_rejected(self):
        F, P, H, params = self._instance()
        with pytest.raises(ValueError):
            auxiliary_value(-1.0, F, P, H, params)


class TestKktPowerUpdate:
    def test_single_user_classic_water_filling(self):
        params = single_user_params(pmax=1.0)
        F = np.array([[1]])
        g2 = np.array([[1e-10]])
        prev = np.array([[0.0]])
        lam, omega = 0.25, 0.25
        for own in ("exclude", "include"):
            P = kkt_power_update(prev, [lam], omega, F, g2, params, own_term=own)
            expected = max(0.0, 1.0 / ((lam + omega) * LN2) - SIGMA2 / 1e-10)
            assert P.p[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_doubling_levels_halves_water_level(self):
        params = single_user_params(pmax=1.0)
        F = np.array([[1]])
        g2 = np.array([[1e-10]])
        prev = np.array([[0.0]])
        floor = SIGMA2 / 1e-10
        p1 = kkt_power_update(prev, [0.5], 0.5, F, g2, params).p[0, 0]
        p2 = kkt_power_update(prev, [1.0], 1.0, F, g2, params).p[0, 0]
        assert p1 + floor == pytest.approx(2.0 * (p2 + floor), rel=1e-12)

    def test_negative_bracket_clamps_to_zero(self):
        params = single_user_params(pmax=1.0)
        F = np.array([[1]])
        g2 = np.array([[1e-30]])  # floor far above any water level
        P = kkt_power_update(np.array([[0.0]]), [1.0], 1.0, F, g2, params)
        assert P.p[0, 0] == 0.0

    def test_unassigned_entries_stay_zero(self):
        params = canonical_params()
        F = fixed_assignment(params)
        prev = equal_split_power(F, params)
        g2 = np.full((6, 4), 1e-8)
        P = kkt_power_update(prev, np.ones(6), 100.0, F, g2, params)
        assert np.all(P.p[F.entries.T == 0] == 0.0)

    def test_matches_scalar_recomputation(self):
        rng = np.random.default_rng(22)
        params = canonical_params()
        F = fixed_assignment(params)
        mask = F.entries.T
        prev = equal_split_power(F, params).p
        g2 = rng.exponential(1.0, (6, 4)) * 1e-8
        lam = rng.uniform(0.1, 2.0, 6)
        omega = 123.0
        P = kkt_power_update(prev, lam, omega, F, g2, params).p
        for j in range(6):
            for k in range(4):
                if mask[j, k] == 0:
                    continue
                agg = sum(
                    mask[t, k] * prev[t, k] * g2[t, k] for t in range(6)
                )
                sub = SIGMA2 + agg - prev[j, k] * g2[j, k]
                expected = max(
                    0.0, 1.0 / ((lam[j] + omega) * LN2) - sub / g2[j, k]
                )
                assert P[j, k] == pytest.approx(expected, rel=1e-9, abs=1e-18)

    def test_own_term_variants_differ_with_prior_power(self):
        params = canonical_params()
        F = fixed_assignment(params)
        prev = equal_split_power(F, params)
        g2 = np.full((6, 4), 1e-8)
        excl = kkt_power_update(prev, np.ones(6), 1.0, F, g2, params, "exclude")
        incl = kkt_power_update(prev, np.ones(6), 1.0, F, g2, params, "include")
        assert not np.allclose(excl.p, incl.p)

    def test_zero_gain_assigned_entry_flagged(self):
        params = canonical_params()
        F = fixed_assignment(params)
        prev = equal_split_power(F, params)
        g2 = np.full((6, 4), 1e-8)
        g2[0, 0] = 0.0  # assigned under the canonical graph
        with pytest.warns(RuntimeWarning):
            P = kkt_power_update(prev, np.ones(6), 1.0, F, g2, params)
        assert P.p[0, 0] == 0.0

    def test_invalid_multipliers_rejected(self):
        params = single_user_params(pmax=1.0)
        F = np.array([[1]])
        g2 = np.array([[1e-10]])
        prev = np.array([[0.0]])
        with pytest.raises(ValueError):
            kkt_power_update(prev, [-0.1], 1.0, F, g2, params)
        with pytest.raises(ValueError):
            kkt_power_update(prev, [0.0], 0.0, F, g2, params)
        with pytest.raises(ValueError):
            kkt_power_update(prev, [1.0], -0.5, F, g2, params)


class TestMultiplierUpdate:
    def test_zero_subgradient_keeps_lambda(self):
        params = canonical_params(pmax=1e-4)
        F = fixed_assignment(params)
        P = equal_split_power(F, params)  # row sums equal budget
        lam = np.array([0.3, 0.6, 0.9, 1.2, 1.5, 1.8])
        out = multiplier_update(lam, P, params, SolverConfig())
        assert np.allclose(out, lam, rtol=0, atol=1e-15)

    def test_slack_with_small_lambda_clamps_at_zero(self):
        params = canonical_params(pmax=1.0)
        P = np.zeros((6, 4))
        out = multiplier_update(np.full(6, 0.5), P, params, SolverConfig())
        assert np.all(out == 0.0)

    def test_overshoot_raises_lambda(self):
        params = canonical_params(pmax=1e-4)
        F = fixed_assignment(params)
        P = equal_split_power(F, params).p * 2.0  # double the budget
        lam = np.ones(6)
        out = multiplier_update(lam, P, params, SolverConfig())
        assert np.all(out > lam)

    def test_diminishing_step_scales_with_sqrt_t(self):
        params = canonical_params(pmax=1.0)
        P = np.zeros((6, 4))  # slack of exactly p_max
        lam = np.full(6, 10.0)
        cfg = SolverConfig(step_rule="diminishing", beta=4.0)
        out = multiplier_update(lam, P, params, cfg, t=4)
        # step is beta/sqrt(4) = 2 times a slack of 1.0
        assert np.allclose(out, 8.0)


class TestDinkelbachSingleUserOracle:
    def test_matches_grid_search(self):
        rng = np.random.default_rng(23)
        F = np.array([[1]])
        for _ in range(10):
            g2 = float(rng.exponential(1.0) * rng.uniform(1, 100) ** -3.67)
            pmax = 10.0 ** ((rng.uniform(-30, 0) - 30) / 10)
            params = single_user_params(pmax=pmax)
            result = dinkelbach_allocate(F, np.array([[g2]]), params, SolverConfig())
            oracle_ee, _ = grid_oracle(g2, pmax, params.circuit_power)
            assert result.converged
            assert result.ee == pytest.approx(oracle_ee, rel=1e-4)

    def test_budget_bound_instance_saturates(self):
        # tiny budget: EE still rising at p_max, so the whole budget is spent
        params = single_user_params(pmax=1e-7)
        F = np.array([[1]])
        result = dinkelbach_allocate(F, np.array([[1e-8]]), params, SolverConfig())
        assert result.power.p[0, 0] == pytest.approx(1e-7, rel=1e-9)
        assert result.multipliers[0] > 0  # budget constraint is active

    def test_interior_optimum_has_zero_multiplier(self):
        params = single_user_params(pmax=1e-3)
        F = np.array([[1]])
        result = dinkelbach_allocate(F, np.array([[4.57e-8]]), params, SolverConfig())
        assert result.power.p[0, 0] < 1e-3 * 0.99
        assert result.multipliers[0] == 0.0


class TestDinkelbachContract:
    def test_trace_monotone_and_final_gap_small(self):
        rng = np.random.default_rng(24)
        for i in range(50):
            F, chan, params = random_canonical_instance(rng)
            mode = "PPC" if i % 2 == 0 else "PMP"
            result = dinkelbach_allocate(F, chan, params, SolverConfig(mode=mode))
            omegas = [e.omega for e in result.dinkelbach_trace]
            assert all(b >= a for a, b in zip(omegas, omegas[1:]))
            if result.converged:
                assert abs(result.dinkelbach_trace[-1].aux) < 1e-6

    def test_ppc_never_below_equal_split(self):
        rng = np.random.default_rng(25)
        for _ in range(30):
            F, chan, params = random_canonical_instance(rng)
            result = dinkelbach_allocate(F, chan, params, SolverConfig(mode="PPC"))
            P0 = equal_split_power(F, params)
            baseline = sum_rate_mac(F, P0, chan, params) / total_power(
                F, P0, params
            )
            assert result.ee >= baseline - 1e-9

    def test_pmp_rows_spend_exact_budget(self):
        rng = np.random.default_rng(26)
        for _ in range(30):
            F, chan, params = random_canonical_instance(rng)
            result = dinkelbach_allocate(F, chan, params, SolverConfig(mode="PMP"))
            assert np.allclose(
                result.power.row_sums(),
                params.max_power_per_user,
                rtol=0,
                atol=1e-9,
            )

    def test_returned_power_validates(self):
        rng = np.random.default_rng(27)
        for i in range(30):
            F, chan, params = random_canonical_instance(rng)
            mode = "PPC" if i % 2 == 0 else "PMP"
            result = dinkelbach_allocate(F, chan, params, SolverConfig(mode=mode))
            assert validate_power(result.power, F, params).ok

    def test_ee_identity(self):
        rng = np.random.default_rng(28)
        F, chan, params = random_canonical_instance(rng)
        result = dinkelbach_allocate(F, chan, params, SolverConfig())
        assert result.ee == pytest.approx(
            result.sum_rate / result.total_power, rel=1e-12
        )
        assert result.sum_rate == pytest.approx(
            sum_rate_mac(F, result.power, chan, params), rel=1e-12
        )

    def test_zero_channel_user_gets_no_power_in_ppc(self):
        params = canonical_params()
        F = fixed_assignment(params)
        rng = np.random.default_rng(29)
        g2 = rng.exponential(1.0, (6, 4)) * 1e-8
        g2[3] = 0.0
        result = dinkelbach_allocate(F, g2, params, SolverConfig(mode="PPC"))
        assert np.all(result.power.p[3] == 0.0)

    def test_zero_channel_user_still_spends_budget_in_pmp(self):
        params = canonical_params()
        F = fixed_assignment(params)
        rng = np.random.default_rng(30)
        g2 = rng.exponential(1.0, (6, 4)) * 1e-8
        g2[3] = 0.0
        result = dinkelbach_allocate(F, g2, params, SolverConfig(mode="PMP"))
        assert result.power.row_sums()[3] == pytest.approx(
            params.max_power_per_user[3], rel=1e-12
        )

    def test_outer_cap_yields_unconverged_best_iterate(self):
        rng = np.random.default_rng(31)
        F, chan, params = random_canonical_instance(rng)
        result = dinkelbach_allocate(
            F, chan, params, SolverConfig(max_outer_iters=1)
        )
        assert not result.converged
        assert len(result.dinkelbach_trace) == 1
        assert validate_power(result.power, F, params).ok

    def test_infeasible_factor_graph_rejected(self):
        params = canonical_params()
        bad = CANONICAL_F.copy()
        bad[:, 5] = bad[:, 0]
        with pytest.raises(ValueError):
            dinkelbach_allocate(bad, np.ones((6, 4)), params, SolverConfig())

    def test_channel_shape_mismatch_rejected(self):
        params = canonical_params()
        F = fixed_assignment(params)
        with pytest.raises(ValueError):
            dinkelbach_allocate(F, np.ones((6, 5)), params, SolverConfig())

    def test_deterministic(self):
        rng = np.random.default_rng(32)
        F, chan, params = random_canonical_instance(rng)
        a = dinkelbach_allocate(F, chan, params, SolverConfig())
        b = dinkelbach_allocate(F, chan, params, SolverConfig())
        assert np.array_equal(a.power.p, b.power.p)
        assert a.ee == b.ee


class TestSolverVariants:
    def test_nested_schedule_agrees_with_literal(self):
        rng = np.random.default_rng(33)
        for _ in range(10):
            F, chan, params = random_canonical_instance(rng, pmax_dbm=-20)
            lit = dinkelbach_allocate(F, chan, params, SolverConfig())
            nest = dinkelbach_allocate(
                F, chan, params, SolverConfig(schedule="nested")
            )
            assert nest.ee == pytest.approx(lit.ee, rel=1e-4)

    def test_jacobi_order_stays_feasible(self):
        rng = np.random.default_rng(34)
        for _ in range(10):
            F, chan, params = random_canonical_instance(rng, pmax_dbm=-20)
            result = dinkelbach_allocate(
                F, chan, params, SolverConfig(update_order="jacobi")
            )
            omegas = [e.omega for e in result.dinkelbach_trace]
            assert all(b >= a for a, b in zip(omegas, omegas[1:]))
            assert validate_power(result.power, F, params).ok

    def test_subgradient_method_feasible_both_modes(self):
        rng = np.random.default_rng(35)
        for mode in ("PPC", "PMP"):
            for schedule in ("literal", "nested"):
                F, chan, params = random_canonical_instance(rng, pmax_dbm=-20)
                cfg = SolverConfig(
                    inner_method="subgradient",
                    schedule=schedule,
                    mode=mode,
                    max_inner_iters=50,
                )
                result = dinkelbach_allocate(F, chan, params, cfg)
                omegas = [e.omega for e in result.dinkelbach_trace]
                assert all(b >= a for a, b in zip(omegas, omegas[1:]))
                assert validate_power(result.power, F, params).ok
                if mode == "PMP":
                    assert np.allclose(
                        result.power.row_sums(),
                        params.max_power_per_user,
                        rtol=0,
                        atol=1e-9,
                    )

    def test_include_own_term_variant_runs(self):
        rng = np.random.default_rng(36)
        F, chan, params = random_canonical_instance(rng, pmax_dbm=-20)
        cfg = SolverConfig(inner_method="subgradient", own_term="include")
        result = dinkelbach_allocate(F, chan, params, cfg)
        assert validate_power(result.power, F, params).ok
