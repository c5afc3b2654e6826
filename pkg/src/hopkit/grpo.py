"""Group-relative advantage math and the clipped-surrogate/KL kernel.

Numeric kernels only: no optimizer, no model state. Advantages are
standardized within each prompt's rollout group; a group whose rewards
are all equal carries no learning signal and gets exactly-zero
advantages.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .rewards import format_number


@dataclass(frozen=True)
class GrpoConfig:
    clip_epsilon: float = 0.2
    kl_beta: float = 0.01
    std_epsilon: float = 1e-8
    group_size: int = 7

    def __post_init__(self):
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be > 0")
        if self.kl_beta < 0:
            raise ValueError("kl_beta must be >= 0")


DEFAULT_CONFIG = GrpoConfig()


@dataclass
class RolloutGroup:
    prompt_id: str
    rewards: list[float]
    advantages: list[float] | None = None

    @property
    def is_zero_signal(self) -> bool:
        return all(r == self.rewards[0] for r in self.rewards)


def group_advantages(rewards: Sequence[float],
                     config: GrpoConfig = DEFAULT_CONFIG) -> list[float]:
    """Standardize rewards within a rollout group: (r - mean) / (std + eps).

    Population standard deviation; a uniform-reward group short-circuits
    to exactly zero advantages.
    """
    n = len(rewards)
    if n < 2:
        raise ValueError("rollout group must have at least 2 rewards")
    if all(r == rewards[0] for r in rewards):
        return [0.0] * n
    mean = math.fsum(rewards) / n
    variance = math.fsum((r - mean) ** 2 for r in rewards) / n
    denom = math.sqrt(variance) + config.std_epsilon
    return [(r - mean) / denom for r in rewards]


def zero_signal_fraction(groups: Sequence[RolloutGroup]) -> float:
    """Fraction of groups whose rewards are all equal (no policy update)."""
    if not groups:
        return 0.0
    return sum(1 for g in groups if g.is_zero_signal) / len(groups)


def grpo_surrogate(
    logp_new: Sequence[float],
    logp_old: Sequence[float],
    logp_ref: Sequence[float],
    advantage: float,
    config: GrpoConfig = DEFAULT_CONFIG,
) -> float:
    """Token-mean clipped surrogate objective minus the KL penalty.

    Per token: min(rho*A, clip(rho, 1-eps, 1+eps)*A) - beta*kl, where
    rho = exp(logp_new - logp_old) and kl is the nonnegative estimator
    exp(x) - x - 1 on x = logp_ref - logp_new. Higher is better.
    """
    if not (len(logp_new) == len(logp_old) == len(logp_ref)):
        raise ValueError("log-probability sequences must have equal length")
    if not logp_new:
        raise ValueError("log-probability sequences must be non-empty")
    lo, hi = 1 - config.clip_epsilon, 1 + config.clip_epsilon
    terms = []
    for ln, lo_p, lr in zip(logp_new, logp_old, logp_ref):
        rho = math.exp(ln - lo_p)
        surrogate = min(rho * advantage, min(max(rho, lo), hi) * advantage)
        x = lr - ln
        kl = math.exp(x) - x - 1
        terms.append(surrogate - config.kl_beta * kl)
    return math.fsum(terms) / len(terms)


# ---------------------------------------------------------------------------
# batch format: {prompt_id, rewards[]} in, {prompt_id, advantages[], is_zero_signal} out

def group_from_json(line: str) -> RolloutGroup:
    obj = json.loads(line)
    return RolloutGroup(
        prompt_id=str(obj["prompt_id"]),
        rewards=[float(r) for r in obj["rewards"]],
    )


def group_result_to_json(group: RolloutGroup) -> str:
    advantages = group.advantages if group.advantages is not None else []
    return (
        '{{"prompt_id": {}, "advantages": [{}], "is_zero_signal": {}}}'.format(
            json.dumps(group.prompt_id, ensure_ascii=False),
            ", ".join(format_number(a) for a in advantages),
            "true" if group.is_zero_signal else "false",
        )
    )
