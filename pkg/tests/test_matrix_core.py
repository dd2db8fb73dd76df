import numpy as np
import pytest

from rpg_lab.matrix_core import (
    BoundReport,
    DegenerateGameError,
    DynamicsConfig,
    DynamicsLabel,
    MixedProfile,
    PayoffMatrix,
    critical_threshold,
    exact_gradient,
    run_dynamics,
    run_dynamics_batch,
    theorem1_bound,
    utility,
    verify_theorem1,
    verify_theorem2,
)

ORIGINAL = PayoffMatrix(4, 3, -10, 1)


def enumerate_utility(t1, t2, payoff, agent):
    """Oracle: sum payoff over the four joint outcomes weighted by their probability."""
    total = 0.0
    for a1 in (0, 1):  # 0 = Stag, 1 = Hare
        for a2 in (0, 1):
            p = (t1 if a1 == 0 else 1 - t1) * (t2 if a2 == 0 else 1 - t2)
            table = {
                (0, 0): (payoff.a, payoff.a),
                (0, 1): (payoff.c, payoff.b),
                (1, 0): (payoff.b, payoff.c),
                (1, 1): (payoff.d, payoff.d),
            }
            total += p * table[(a1, a2)][agent - 1]
    return total


def central_difference(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


class TestUtility:
    def test_pure_stag_stag_yields_a(self):
        assert utility(MixedProfile(1, 1), ORIGINAL, agent=1) == 4

    def test_pure_hare_hare_yields_d(self):
        assert utility(MixedProfile(0, 0), ORIGINAL, agent=1) == 1

    def test_half_half_matches_enumeration(self):
        # frozen from the enumeration oracle: (4 - 10 + 3 + 1) / 4 = -0.5
        assert enumerate_utility(0.5, 0.5, ORIGINAL, 1) == -0.5
        assert utility(MixedProfile(0.5, 0.5), ORIGINAL, agent=1) == pytest.approx(-0.5)

    def test_matches_enumeration_randomly(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b, c, d = sorted(rng.uniform(-5, 5, size=4), reverse=True)
            payoff = PayoffMatrix(a, b, c, d, require_ordering=False)
            t1, t2 = rng.uniform(0, 1, size=2)
            for agent in (1, 2):
                got = utility(MixedProfile(t1, t2), payoff, agent)
                want = enumerate_utility(t1, t2, payoff, agent)
                assert got == pytest.approx(want, abs=1e-12)

    def test_symmetry_between_agents(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a, b, c, d = rng.uniform(-5, 5, size=4)
            payoff = PayoffMatrix(a, b, c, d, require_ordering=False)
            t1, t2 = rng.uniform(0, 1, size=2)
            assert utility(MixedProfile(t1, t2), payoff, 1) == utility(
                MixedProfile(t2, t1), payoff, 2
            )

    def test_bad_agent_index(self):
        with pytest.raises(ValueError):
            utility(MixedProfile(0.5, 0.5), ORIGINAL, agent=3)


class TestExactGradient:
    def test_gradient_at_theta2_one_is_a_minus_b(self):
        assert exact_gradient(MixedProfile(0.3, 1.0), ORIGINAL, 1) == pytest.approx(1.0)

    def test_gradient_at_theta2_zero_is_c_minus_d(self):
        assert exact_gradient(MixedProfile(0.3, 0.0), ORIGINAL, 1) == pytest.approx(-11.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            a, b, c, d = rng.uniform(-5, 5, size=4)
            payoff = PayoffMatrix(a, b, c, d, require_ordering=False)
            t1, t2 = rng.uniform(0.01, 0.99, size=2)
            g1 = exact_gradient(MixedProfile(t1, t2), payoff, 1)
            fd1 = central_difference(lambda x: utility(MixedProfile(x, t2), payoff, 1), t1)
            assert g1 == pytest.approx(fd1, rel=1e-6, abs=1e-6)
            g2 = exact_gradient(MixedProfile(t1, t2), payoff, 2)
            fd2 = central_difference(lambda x: utility(MixedProfile(t1, x), payoff, 2), t2)
            assert g2 == pytest.approx(fd2, rel=1e-6, abs=1e-6)

    def test_sign_matches_threshold_side(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b, c, d = sorted(rng.uniform(-5, 5, size=4), reverse=True)
            payoff = PayoffMatrix(a, b, c, d, require_ordering=False)
            if payoff.a + payoff.d - payoff.b - payoff.c <= 0:
                continue
            star = critical_threshold(payoff)
            t2 = rng.uniform(0, 1)
            if abs(t2 - star) < 1e-9:
                continue
            grad = exact_gradient(MixedProfile(0.5, t2), payoff, 1)
            assert np.sign(grad) == np.sign(t2 - star)


class TestCriticalThreshold:
    def test_known_value_c_minus5(self):
        assert critical_threshold(PayoffMatrix(4, 3, -5, 1)) == pytest.approx(6 / 7)

    def test_epsilon_one_gives_half(self):
        # a - b = d - c  =>  theta* = 1/(1+1)
        assert critical_threshold(PayoffMatrix(4, 3, 0, 1)) == pytest.approx(0.5)

    def test_known_value_c_minus10(self):
        assert critical_threshold(ORIGINAL) == pytest.approx(11 / 12)

    def test_degenerate_denominator(self):
        bad = PayoffMatrix(1, 3, 1, 1, require_ordering=False)
        with pytest.raises(DegenerateGameError):
            critical_threshold(bad)


class TestRunDynamics:
    def test_high_init_reaches_stag(self):
        res = run_dynamics(MixedProfile(0.99, 0.99), ORIGINAL, DynamicsConfig())
        assert res.label == DynamicsLabel.STAG_NE

    def test_low_init_reaches_hare(self):
        res = run_dynamics(MixedProfile(0.01, 0.01), ORIGINAL, DynamicsConfig())
        assert res.label == DynamicsLabel.HARE_NE

    def test_thetas_stay_in_unit_interval_each_step(self):
        # iterate the map one step at a time so every intermediate profile is visible
        rng = np.random.default_rng(4)
        for _ in range(50):
            a, b, c, d = rng.uniform(-50, 50, size=4)
            payoff = PayoffMatrix(a, b, c, d, require_ordering=False)
            profile = MixedProfile(*rng.uniform(0, 1, size=2))
            cfg = DynamicsConfig(learning_rate=0.5, max_steps=1)
            for _ in range(100):
                res = run_dynamics(profile, payoff, cfg)
                profile = res.profile
                assert 0.0 <= profile.theta1 <= 1.0
                assert 0.0 <= profile.theta2 <= 1.0

    def test_batch_agrees_with_scalar(self):
        rng = np.random.default_rng(5)
        n = 64
        entries = rng.uniform(-1, 1, size=(n, 4))
        inits = rng.uniform(0, 1, size=(n, 2))
        cfg = DynamicsConfig(learning_rate=0.05, max_steps=20_000)
        f1, f2, labels = run_dynamics_batch(
            inits[:, 0], inits[:, 1], (entries[:, 0], entries[:, 1], entries[:, 2], entries[:, 3]), cfg
        )
        for i in range(n):
            payoff = PayoffMatrix(*entries[i], require_ordering=False)
            res = run_dynamics(MixedProfile(*inits[i]), payoff, cfg)
            assert res.profile.theta1 == pytest.approx(f1[i], abs=1e-12)
            assert res.profile.theta2 == pytest.approx(f2[i], abs=1e-12)
            assert res.label.value == {0: "NonConverged", 1: "StagNE", 2: "HareNE"}[labels[i]]

    def test_basin_map_agrees_with_fine_step_oracle(self):
        # 50x50 init grid; the oracle integrates the same map at lr/100 for 100x steps
        grid = np.linspace(0.0, 1.0, 50)
        t1, t2 = np.meshgrid(grid, grid)
        t1, t2 = t1.ravel(), t2.ravel()
        payoff_arrays = tuple(np.full(t1.shape, v) for v in (4.0, 3.0, -10.0, 1.0))
        coarse = DynamicsConfig(learning_rate=0.05, max_steps=5_000)
        fine = DynamicsConfig(learning_rate=0.0005, max_steps=500_000)
        _, _, coarse_labels = run_dynamics_batch(t1, t2, payoff_arrays, coarse)
        _, _, fine_labels = run_dynamics_batch(t1, t2, payoff_arrays, fine)
        agreement = np.mean(coarse_labels == fine_labels)
        assert agreement >= 0.98


class TestTheorem1Bound:
    def test_boundary_value(self):
        assert theorem1_bound(1.0) == pytest.approx(0.75)

    def test_one_sixth(self):
        assert theorem1_bound(1 / 6) == pytest.approx(13 / 49)

    def test_monotone_vanishing_at_zero(self):
        values = [theorem1_bound(e) for e in (0.5, 0.1, 0.01, 0.001)]
        assert all(x > y for x, y in zip(values, values[1:]))
        assert values[-1] < 0.01

    def test_domain(self):
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                theorem1_bound(bad)


class TestVerifyTheorem1:
    def test_bound_holds_for_eps_one_sixth(self):
        report = verify_theorem1(PayoffMatrix(4, 3, -5, 1), 4000, DynamicsConfig(), seed=0)
        assert report.theoretical_bound == pytest.approx(13 / 49)
        assert report.satisfied
        assert report.ci_halfwidth == pytest.approx(
            1.96 * np.sqrt(report.empirical_rate * (1 - report.empirical_rate) / 4000)
        )

    def test_rate_drops_with_larger_penalty(self):
        r5 = verify_theorem1(PayoffMatrix(4, 3, -5, 1), 4000, DynamicsConfig(), seed=0)
        r100 = verify_theorem1(PayoffMatrix(4, 3, -100, 1), 4000, DynamicsConfig(), seed=0)
        assert r100.satisfied
        assert r100.empirical_rate < r5.empirical_rate

    def test_zero_trials_rejected(self):
        with pytest.raises(ValueError, match="insufficient trials"):
            verify_theorem1(ORIGINAL, 0, DynamicsConfig(), seed=0)

    def test_deterministic_under_seed(self):
        a = verify_theorem1(PayoffMatrix(4, 3, -5, 1), 500, DynamicsConfig(), seed=7)
        b = verify_theorem1(PayoffMatrix(4, 3, -5, 1), 500, DynamicsConfig(), seed=7)
        assert a == b


def classify_saddle_flow(entries, t1, t2):
    """Analytic oracle for where the projected gradient flow ends up.

    With k = a+d-b-c and g = c-d the flow is linear with saddle at
    theta* = -g/k. For k > 0 the Stag corner is reached iff the gradient is
    positive everywhere (g >= 0) or the init lies on the growing side of the
    saddle (t1 + t2 > 2*theta* with theta* < 1); for k < 0 only games whose
    gradient is positive on all of [0,1] (k + g >= 0) reach it.
    """
    a, b, c, d = entries[:, 0], entries[:, 1], entries[:, 2], entries[:, 3]
    k = a + d - b - c
    g = c - d
    star = -g / np.where(k == 0, np.nan, k)
    stag = np.zeros(len(t1), dtype=bool)
    stag |= (k > 0) & (g >= 0)
    stag |= (k > 0) & (g < 0) & (star < 1) & (t1 + t2 > 2 * star)
    stag |= (k < 0) & (k + g >= 0)
    return stag


class TestVerifyTheorem2:
    def test_population_of_five(self):
        report = verify_theorem2(5, trials=400, seed=0)
        assert report.theoretical_bound == pytest.approx(1 - 0.6**5)
        assert report.satisfied

    def test_single_round_rate_matches_analytic_oracle(self):
        # reconstruct the verifier's per-trial draws and classify them analytically
        trials = 2000
        report = verify_theorem2(1, trials=trials, seed=3)
        entries = np.empty((trials, 4))
        inits = np.empty((trials, 2))
        for i in range(trials):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((3, i))))
            entries[i] = rng.uniform(-1, 1, size=(1, 4))
            inits[i] = rng.uniform(0, 1, size=(1, 2))
        oracle_rate = classify_saddle_flow(entries, inits[:, 0], inits[:, 1]).mean()
        # small shortfall allowed: slow games that hit max_steps count as failures
        assert report.empirical_rate <= oracle_rate + 1e-9
        assert report.empirical_rate >= oracle_rate - 0.02

    def test_success_rate_grows_with_population(self):
        rates = [verify_theorem2(n, trials=400, seed=0).empirical_rate for n in (1, 3, 8)]
        assert rates[0] < rates[1] < rates[2]

    def test_deterministic_under_seed(self):
        assert verify_theorem2(2, trials=200, seed=5) == verify_theorem2(2, trials=200, seed=5)

    def test_population_size_zero_rejected(self):
        with pytest.raises(ValueError, match="population size"):
            verify_theorem2(0, trials=10, seed=0)


class TestPayoffMatrix:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            PayoffMatrix(1, 3, -5, 1)

    def test_unordered_flag(self):
        m = PayoffMatrix(-1, 0.5, 0.2, -0.3, require_ordering=False)
        assert m.a == -1

    def test_epsilon(self):
        assert PayoffMatrix(4, 3, -5, 1).epsilon == pytest.approx(1 / 6)


class TestBoundReport:
    def test_serialization_round_trip(self):
        r = BoundReport(0.5, 0.75, 0.2, 100, 0.05)
        d = r.to_dict()
        assert d["satisfied"] is True
        assert d["empirical_rate"] == 0.2
