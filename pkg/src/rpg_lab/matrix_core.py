"""Closed-form utilities, gradients, and projected self-play dynamics for 2x2 stag-hunt games.

The payoff matrix follows the row/column convention

              Stag       Hare
    Stag     (a, a)     (c, b)
    Hare     (b, c)     (d, d)

with the stag-hunt ordering a > b >= d > c. Agent i plays Stag with
probability theta_i; everything here is exact in (theta1, theta2), so the
self-play gradient dynamics can be iterated without sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "PayoffMatrix",
    "MixedProfile",
    "DynamicsConfig",
    "DynamicsLabel",
    "DynamicsResult",
    "BoundReport",
    "utility",
    "exact_gradient",
    "critical_threshold",
    "run_dynamics",
    "run_dynamics_batch",
    "theorem1_bound",
    "verify_theorem1",
    "verify_theorem2",
]


class DegenerateGameError(ValueError):
    """Raised when a + d - b - c <= 0 and the coordination threshold is undefined."""


@dataclass(frozen=True)
class PayoffMatrix:
    """Payoff entries (a, b, c, d); `require_ordering=False` permits arbitrary matrices."""

    a: float
    b: float
    c: float
    d: float
    require_ordering: bool = True

    def __post_init__(self):
        if self.require_ordering and not (self.a > self.b >= self.d > self.c):
            raise ValueError(
                f"stag-hunt ordering a > b >= d > c violated: "
                f"a={self.a}, b={self.b}, c={self.c}, d={self.d}"
            )

    @property
    def epsilon(self) -> float:
        """Risk ratio (a - b) / (d - c); in (0, 1) for the games Theorem 1 covers."""
        return (self.a - self.b) / (self.d - self.c)


@dataclass(frozen=True)
class MixedProfile:
    """Per-agent probability of playing Stag."""

    theta1: float
    theta2: float

    def __post_init__(self):
        if not (0.0 <= self.theta1 <= 1.0 and 0.0 <= self.theta2 <= 1.0):
            raise ValueError(f"thetas must lie in [0,1]: {self.theta1}, {self.theta2}")


@dataclass(frozen=True)
class DynamicsConfig:
    """Step size, iteration cap, and the tolerance band used to label equilibria."""

    learning_rate: float = 0.01
    max_steps: int = 100_000
    convergence_tol: float = 1e-3

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be nonnegative")


class DynamicsLabel(Enum):
    STAG_NE = "StagNE"
    HARE_NE = "HareNE"
    NON_CONVERGED = "NonConverged"


@dataclass(frozen=True)
class DynamicsResult:
    profile: MixedProfile
    label: DynamicsLabel
    steps: int


@dataclass(frozen=True)
class BoundReport:
    """Monte Carlo estimate against a theoretical probability bound.

    `bound_kind` records the direction of the check: "upper" means the
    empirical rate must not exceed the bound (plus CI), "lower" means it
    must not fall below (minus CI).
    """

    epsilon: float
    theoretical_bound: float
    empirical_rate: float
    trials: int
    ci_halfwidth: float
    bound_kind: str = "upper"

    @property
    def satisfied(self) -> bool:
        if self.bound_kind == "upper":
            return self.empirical_rate <= self.theoretical_bound + self.ci_halfwidth
        return self.empirical_rate >= self.theoretical_bound - self.ci_halfwidth

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "theoretical_bound": self.theoretical_bound,
            "empirical_rate": self.empirical_rate,
            "trials": self.trials,
            "ci_halfwidth": self.ci_halfwidth,
            "bound_kind": self.bound_kind,
            "satisfied": self.satisfied,
        }


def _wald_ci_halfwidth(rate: float, trials: int) -> float:
    return 1.96 * float(np.sqrt(rate * (1.0 - rate) / trials))


def utility(profile: MixedProfile, payoff: PayoffMatrix, agent: int) -> float:
    """Exact expected payoff for `agent` (1 or 2) under the mixed profile.

    Agent 2's utility is agent 1's with the thetas swapped (the b and c roles
    trade places), evaluated through the identical expression so the symmetry
    U1(t1, t2) == U2(t2, t1) holds bit-exactly.
    """
    if agent == 2:
        return utility(MixedProfile(profile.theta2, profile.theta1), payoff, 1)
    if agent != 1:
        raise ValueError(f"agent must be 1 or 2, got {agent}")
    t1, t2 = profile.theta1, profile.theta2
    a, b, c, d = payoff.a, payoff.b, payoff.c, payoff.d
    return a * t1 * t2 + c * t1 * (1 - t2) + b * (1 - t1) * t2 + d * (1 - t1) * (1 - t2)


def exact_gradient(profile: MixedProfile, payoff: PayoffMatrix, agent: int) -> float:
    """Partial derivative of agent's utility w.r.t. its own theta: (a+d-b-c)*theta_other + c - d."""
    a, b, c, d = payoff.a, payoff.b, payoff.c, payoff.d
    if agent == 1:
        other = profile.theta2
    elif agent == 2:
        other = profile.theta1
    else:
        raise ValueError(f"agent must be 1 or 2, got {agent}")
    return (a + d - b - c) * other + c - d


def critical_threshold(payoff: PayoffMatrix) -> float:
    """Opponent theta above which an agent's gradient turns positive: (d-c)/(a+d-b-c)."""
    denom = payoff.a + payoff.d - payoff.b - payoff.c
    if denom <= 0:
        raise DegenerateGameError(f"a + d - b - c must be positive, got {denom}")
    return (payoff.d - payoff.c) / denom


def theorem1_bound(epsilon: float) -> float:
    """Upper bound (2e + e^2) / (1 + 2e + e^2) on the Stag-NE discovery probability."""
    if not (0 < epsilon <= 1):
        raise ValueError(f"epsilon must lie in (0, 1] , got {epsilon}")
    return (2 * epsilon + epsilon**2) / (1 + 2 * epsilon + epsilon**2)


def run_dynamics(init: MixedProfile, payoff: PayoffMatrix, cfg: DynamicsConfig) -> DynamicsResult:
    """Iterate simultaneous projected gradient ascent from `init` until a band is hit.

    Both thetas are updated in the same step from the same pre-update profile,
    then clamped to [0,1]. Labels: StagNE when both thetas >= 1 - tol, HareNE
    when both <= tol, NonConverged when neither band is reached within
    max_steps (including stalls at corners/saddles).
    """
    t1, t2 = float(init.theta1), float(init.theta2)
    lr, tol = cfg.learning_rate, cfg.convergence_tol
    a, b, c, d = payoff.a, payoff.b, payoff.c, payoff.d
    k = a + d - b - c
    g0 = c - d
    for step in range(1, cfg.max_steps + 1):
        n1 = min(1.0, max(0.0, t1 + lr * (k * t2 + g0)))
        n2 = min(1.0, max(0.0, t2 + lr * (k * t1 + g0)))
        moved = (n1 != t1) or (n2 != t2)
        t1, t2 = n1, n2
        if t1 >= 1 - tol and t2 >= 1 - tol:
            return DynamicsResult(MixedProfile(t1, t2), DynamicsLabel.STAG_NE, step)
        if t1 <= tol and t2 <= tol:
            return DynamicsResult(MixedProfile(t1, t2), DynamicsLabel.HARE_NE, step)
        if not moved:
            # pinned at a corner/edge or numerically stationary; no band will be reached
            return DynamicsResult(MixedProfile(t1, t2), DynamicsLabel.NON_CONVERGED, step)
    return DynamicsResult(MixedProfile(t1, t2), DynamicsLabel.NON_CONVERGED, cfg.max_steps)


_LABEL_CODES = {0: DynamicsLabel.NON_CONVERGED, 1: DynamicsLabel.STAG_NE, 2: DynamicsLabel.HARE_NE}


def run_dynamics_batch(
    theta1: np.ndarray,
    theta2: np.ndarray,
    payoffs: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    cfg: DynamicsConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized run_dynamics over many (init, payoff) pairs at once.

    Returns (final_theta1, final_theta2, label_codes) where label codes are
    0 = NonConverged, 1 = StagNE, 2 = HareNE. Semantics match run_dynamics
    exactly; trials that hit a band or stall are frozen in place while the
    rest keep iterating.
    """
    t1 = np.array(theta1, dtype=np.float64).copy()
    t2 = np.array(theta2, dtype=np.float64).copy()
    a, b, c, d = (np.asarray(x, dtype=np.float64) for x in payoffs)
    k = a + d - b - c
    g0 = c - d
    lr, tol = cfg.learning_rate, cfg.convergence_tol
    n = t1.shape[0]
    labels = np.zeros(n, dtype=np.int8)
    active = np.ones(n, dtype=bool)
    for _ in range(cfg.max_steps):
        if not active.any():
            break
        ta1, ta2 = t1[active], t2[active]
        ka, ga = k[active], g0[active]
        n1 = np.clip(ta1 + lr * (ka * ta2 + ga), 0.0, 1.0)
        n2 = np.clip(ta2 + lr * (ka * ta1 + ga), 0.0, 1.0)
        stalled = (n1 == ta1) & (n2 == ta2)
        stag = (n1 >= 1 - tol) & (n2 >= 1 - tol)
        hare = (n1 <= tol) & (n2 <= tol)
        idx = np.flatnonzero(active)
        t1[idx] = n1
        t2[idx] = n2
        labels[idx[stag]] = 1
        labels[idx[hare & ~stag]] = 2
        active[idx[stag | hare | stalled]] = False
    return t1, t2, labels


def _trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Private deterministic stream per Monte Carlo trial."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, trial_index))))


def verify_theorem1(
    payoff: PayoffMatrix, trials: int, cfg: DynamicsConfig, seed: int
) -> BoundReport:
    """Estimate the Stag-NE discovery rate from uniform inits and compare to the bound.

    NonConverged trials count as failures, which keeps the upper-bound check
    conservative.
    """
    if trials < 1:
        raise ValueError("insufficient trials: need at least 1")
    eps = payoff.epsilon
    if not (0 < eps < 1):
        raise ValueError(f"epsilon = (a-b)/(d-c) must lie in (0,1), got {eps}")
    critical_threshold(payoff)  # propagate degenerate-denominator error
    inits = np.empty((trials, 2), dtype=np.float64)
    for i in range(trials):
        inits[i] = _trial_rng(seed, i).uniform(0.0, 1.0, size=2)
    payoff_arrays = tuple(np.full(trials, v) for v in (payoff.a, payoff.b, payoff.c, payoff.d))
    _, _, labels = run_dynamics_batch(inits[:, 0], inits[:, 1], payoff_arrays, cfg)
    rate = float(np.mean(labels == 1))
    return BoundReport(
        epsilon=eps,
        theoretical_bound=theorem1_bound(eps),
        empirical_rate=rate,
        trials=trials,
        ci_halfwidth=_wald_ci_halfwidth(rate, trials),
        bound_kind="upper",
    )


def verify_theorem2(
    population_size: int,
    trials: int,
    seed: int,
    cfg: DynamicsConfig | None = None,
) -> BoundReport:
    """Estimate the reward-randomization success rate against the 1 - 0.6^N bound.

    Per trial, N payoff matrices with entries Unif[-1,1] are drawn along with
    uniform inits; the trial succeeds if any perturbed run converges to the
    profile that yields the Stag outcome under the original game (both thetas
    inside the StagNE band).
    """
    if population_size < 1:
        raise ValueError("population size must be >= 1")
    if trials < 1:
        raise ValueError("insufficient trials: need at least 1")
    cfg = cfg or DynamicsConfig()
    n_games = trials * population_size
    entries = np.empty((n_games, 4), dtype=np.float64)
    inits = np.empty((n_games, 2), dtype=np.float64)
    for i in range(trials):
        rng = _trial_rng(seed, i)
        lo = i * population_size
        hi = lo + population_size
        entries[lo:hi] = rng.uniform(-1.0, 1.0, size=(population_size, 4))
        inits[lo:hi] = rng.uniform(0.0, 1.0, size=(population_size, 2))
    payoff_arrays = (entries[:, 0], entries[:, 1], entries[:, 2], entries[:, 3])
    _, _, labels = run_dynamics_batch(inits[:, 0], inits[:, 1], payoff_arrays, cfg)
    stag = (labels == 1).reshape(trials, population_size)
    rate = float(np.mean(stag.any(axis=1)))
    return BoundReport(
        epsilon=0.6,  # per-round failure constant from the bound
        theoretical_bound=1.0 - 0.6**population_size,
        empirical_rate=rate,
        trials=trials,
        ci_halfwidth=_wald_ci_halfwidth(rate, trials),
        bound_kind="lower",
    )
