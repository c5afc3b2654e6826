"""Advantage normalization and surrogate-kernel tests."""

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopkit.grpo import (
    DEFAULT_CONFIG,
    GrpoConfig,
    RolloutGroup,
    group_advantages,
    group_from_json,
    group_result_to_json,
    grpo_surrogate,
    zero_signal_fraction,
)

from oracles import oracle_advantages


class TestGroupAdvantages:
    def test_uniform_group_is_exactly_zero(self):
        result = group_advantages([5.0] * 7)
        assert result == [0.0] * 7
        assert all(a == 0.0 for a in result)  # exact, not approximate

    def test_two_point_symmetry(self):
        result = group_advantages([0.0, 10.0])
        assert result == pytest.approx([-1.0, 1.0], abs=1e-7)

    def test_sums_to_zero(self):
        rng = random.Random(5)
        for _ in range(200):
            rewards = [rng.uniform(-10, 12) for _ in range(7)]
            assert abs(math.fsum(group_advantages(rewards))) < 1e-9

    def test_matches_exact_oracle(self):
        rng = random.Random(99)
        for _ in range(2000):
            rewards = [round(rng.uniform(-6, 12), 3) for _ in range(7)]
            got = group_advantages(rewards)
            want = oracle_advantages(rewards)
            assert got == pytest.approx(want, abs=1e-9)

    def test_small_groups_rejected(self):
        with pytest.raises(ValueError):
            group_advantages([1.0])
        with pytest.raises(ValueError):
            group_advantages([])


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=9),
       st.floats(-100, 100))
def test_translation_invariance(rewards, shift):
    base = group_advantages(rewards)
    shifted = group_advantages([r + shift for r in rewards])
    for a, b in zip(base, shifted):
        assert abs(a - b) < 1e-6


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=9),
       st.floats(0.5, 20))
def test_positive_scaling_preserves_signs(rewards, scale):
    base = group_advantages(rewards)
    scaled = group_advantages([r * scale for r in rewards])
    for a, b in zip(base, scaled):
        assert a == 0 or b == 0 or (a > 0) == (b > 0) or abs(a) < 1e-9


class TestZeroSignalFraction:
    def test_all_uniform(self):
        groups = [RolloutGroup(f"p{i}", [3.0] * 7) for i in range(4)]
        assert zero_signal_fraction(groups) == 1.0

    def test_none_uniform(self):
        groups = [RolloutGroup(f"p{i}", [1.0, 2.0]) for i in range(4)]
        assert zero_signal_fraction(groups) == 0.0

    def test_counting(self):
        groups = [RolloutGroup(f"u{i}", [2.0, 2.0]) for i in range(3)]
        groups += [RolloutGroup(f"v{i}", [0.0, 1.0]) for i in range(7)]
        assert zero_signal_fraction(groups) == pytest.approx(0.3)

    def test_empty(self):
        assert zero_signal_fraction([]) == 0.0


class TestSurrogate:
    def test_identity_policy_returns_advantage(self):
        logs = [-1.2, -0.3, -2.2]
        for advantage in (-2.0, 0.0, 3.5):
            value = grpo_surrogate(logs, logs, logs, advantage)
            assert value == pytest.approx(advantage)

    def test_zero_advantage_is_minus_beta_kl(self):
        logp_new = [-1.0, -2.0]
        logp_old = [-1.5, -1.8]
        logp_ref = [-0.7, -2.4]
        kls = [math.exp(r - n) - (r - n) - 1 for n, r in zip(logp_new, logp_ref)]
        expected = -DEFAULT_CONFIG.kl_beta * (sum(kls) / 2)
        assert grpo_surrogate(logp_new, logp_old, logp_ref, 0.0) == pytest.approx(expected)

    def test_clipped_at_upper_bound(self):
        # rho = 1.5 everywhere, A = 1, eps = 0.2, beta = 0 -> clipped to 1.2
        config = GrpoConfig(clip_epsilon=0.2, kl_beta=0.0)
        shift = math.log(1.5)
        logp_old = [-1.0, -2.0, -0.5]
        logp_new = [l + shift for l in logp_old]
        value = grpo_surrogate(logp_new, logp_old, logp_new, 1.0, config)
        assert value == pytest.approx(1.2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            grpo_surrogate([-1.0], [-1.0, -2.0], [-1.0], 1.0)
        with pytest.raises(ValueError):
            grpo_surrogate([], [], [], 1.0)

    def test_monotone_no_gain_beyond_clip(self):
        config = GrpoConfig(clip_epsilon=0.2, kl_beta=0.0)
        old = [-1.0]
        clipped_value = None
        last = None
        for rho in (1.2, 1.3, 1.7, 2.5, 4.0):
            new = [old[0] + math.log(rho)]
            value = grpo_surrogate(new, old, new, 1.0, config)
            if clipped_value is None:
                clipped_value = value
            assert value <= clipped_value + 1e-12
            if last is not None:
                assert value <= last + 1e-12
            last = value


@given(st.lists(st.floats(-8, 0), min_size=1, max_size=6),
       st.lists(st.floats(-8, 0), min_size=1, max_size=6))
def test_kl_estimator_nonnegative(logp_new, logp_ref):
    n = min(len(logp_new), len(logp_ref))
    for ln, lr in zip(logp_new[:n], logp_ref[:n]):
        x = lr - ln
        assert math.exp(x) - x - 1 >= 0.0


@given(st.lists(st.floats(-8, 0), min_size=1, max_size=6), st.floats(-3, 3))
def test_surrogate_kl_penalty_never_helps(logp_new, advantage):
    # a drifted reference can only lower the objective relative to kl = 0
    logp_ref = [l - 0.5 for l in logp_new]
    with_kl = grpo_surrogate(logp_new, logp_new, logp_ref, advantage)
    without_kl = grpo_surrogate(logp_new, logp_new, logp_new, advantage)
    assert with_kl <= without_kl + 1e-12


class TestBatchFormat:
    def test_round_trip(self):
        group = group_from_json('{"prompt_id": "p1", "rewards": [1, 2, 3]}')
        assert group.prompt_id == "p1" and group.rewards == [1.0, 2.0, 3.0]
        group.advantages = group_advantages(group.rewards)
        line = group_result_to_json(group)
        assert '"prompt_id": "p1"' in line
        assert '"is_zero_signal": false' in line

    def test_zero_signal_flag(self):
        group = RolloutGroup("p2", [4.0, 4.0], advantages=[0.0, 0.0])
        assert '"is_zero_signal": true' in group_result_to_json(group)
