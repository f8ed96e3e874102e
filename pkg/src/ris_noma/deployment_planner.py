"""Weighted-sum-rate optimal RIS placement along a line of candidate positions."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy.optimize import linprog

from ris_noma.channel_models import (
    ChannelSet,
    LinkFading,
    NetworkGeometry,
    SystemParams,
    draw_channels,
    path_loss,
)
from ris_noma.errors import DomainError, InfeasibleError
from ris_noma.region_engine import ProfileEnumeration, candidate_gains
from ris_noma.scalar_rates import (
    fdma_max_weighted_sum_rate_batch,
    noma_max_weighted_sum_rate,
    optional_min_rates,
)

logger = structlog.get_logger(__name__)

DEFAULT_GRID_BOUNDS = (30.0, 45.0)
DEFAULT_GRID_STEP = 0.25
DEFAULT_CHANNEL_DRAWS = 100


class DeploymentScheme(str, Enum):
    S_NOMA = "s-noma"
    S_FDMA = "s-fdma"
    D_TDMA = "d-tdma"


class DeploymentClass(str, Enum):
    CONSOLIDATION = "consolidation"
    REVERSE = "reverse"
    SYMMETRIC = "symmetric"


def default_grid(
    bounds: Tuple[float, float] = DEFAULT_GRID_BOUNDS, step: float = DEFAULT_GRID_STEP
) -> Tuple[float, ...]:
    count = int(round((bounds[1] - bounds[0]) / step)) + 1
    return tuple(float(x) for x in np.linspace(bounds[0], bounds[1], count))


def _weights(weights: Sequence[float], users: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (users,):
        msg = f"expected {users} weights, got {w.shape}"
        raise DomainError(msg)
    if np.any(w < 0):
        msg = "weights must be >= 0"
        raise DomainError(msg)
    return w


def _require_profiles(gains: np.ndarray) -> None:
    if gains.shape[0] == 0:
        msg = "profile search produced no candidate profiles"
        raise DomainError(msg)


def wsr_s_noma(
    channels: ChannelSet,
    weights: Sequence[float],
    total_power: float,
    profile_search: ProfileEnumeration,
) -> float:
    """Best NOMA weighted sum rate over the candidate profiles.

    Each profile gets the exact optimal power split; the SIC order follows
    that profile's effective gains.
    """
    w = _weights(weights, channels.num_users)
    gains = candidate_gains(channels, profile_search)
    _require_profiles(gains)
    return max(noma_max_weighted_sum_rate(g, w, total_power)[0] for g in gains)


def wsr_s_fdma(
    channels: ChannelSet,
    weights: Sequence[float],
    total_power: float,
    profile_search: ProfileEnumeration,
) -> float:
    """Best FDMA weighted sum rate over the candidate profiles."""
    w = _weights(weights, channels.num_users)
    gains = candidate_gains(channels, profile_search)
    _require_profiles(gains)
    return float(np.max(fdma_max_weighted_sum_rate_batch(gains, w, total_power)))


def tdma_time_shares(
    capacities: np.ndarray, weights: np.ndarray, min_rates: Optional[np.ndarray]
) -> np.ndarray:
    """Time shares for the dynamic TDMA schedule.

    Without minimum rates every user gets 1/K. Otherwise the linear program
    max sum w_k tau_k c_k subject to tau_k c_k >= r_k, sum tau_k <= 1.
    """
    users = capacities.shape[0]
    if min_rates is None:
        return np.full(users, 1.0 / users)
    need = np.zeros(users)
    demanding = min_rates > 0
    if np.any(demanding & (capacities <= 0)):
        msg = "a user with zero capacity cannot meet a positive minimum rate"
        raise InfeasibleError(msg, {"deficit": float("inf")})
    need[demanding] = min_rates[demanding] / capacities[demanding]
    deficit = float(need.sum() - 1.0)
    if deficit > 1e-12:
        msg = f"minimum rates need {need.sum():.6g} of the frame, deficit {deficit:.6g}"
        logger.warning("tdma_min_rates_infeasible", deficit=deficit)
        raise InfeasibleError(msg, {"deficit": deficit, "required_shares": need.tolist()})
    result = linprog(
        -(weights * capacities),
        A_ub=np.ones((1, users)),
        b_ub=np.ones(1),
        bounds=[(lo, 1.0) for lo in need],
        method="highs",
    )
    if result.status != 0:
        msg = f"time-share program failed: {result.message}"
        raise InfeasibleError(msg, {"deficit": deficit})
    return np.asarray(result.x)


def wsr_d_tdma(
    channels: ChannelSet,
    weights: Sequence[float],
    total_power: float,
    min_rates: Optional[Sequence[float]] = None,
) -> float:
    """TDMA with the RIS re-aligned to whichever user holds the slot."""
    w = _weights(weights, channels.num_users)
    capacities = np.log2(1.0 + total_power * channels.aligned_gains())
    shares = tdma_time_shares(
        capacities, w, optional_min_rates(min_rates, channels.num_users)
    )
    return float(np.dot(w, shares * capacities))


@dataclass(frozen=True)
class DeploymentProblem:
    """RIS placement sweep along the x-axis."""

    geometry_template: NetworkGeometry
    weights: Tuple[float, ...]
    scheme: DeploymentScheme
    candidate_grid: Tuple[float, ...] = field(default_factory=default_grid)
    channel_draws: int = DEFAULT_CHANNEL_DRAWS
    seed: int = 0
    fading: LinkFading = field(default_factory=LinkFading)
    system: SystemParams = field(default_factory=SystemParams)
    elements: int = 8
    profile_search: ProfileEnumeration = field(
        default_factory=lambda: ProfileEnumeration(include_aligned=True)
    )
    min_rates: Optional[Tuple[float, ...]] = None
    grid_bounds: Tuple[float, float] = DEFAULT_GRID_BOUNDS
    blocked_direct: Union[bool, Tuple[bool, ...]] = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", DeploymentScheme(self.scheme))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "candidate_grid", tuple(float(x) for x in self.candidate_grid))
        w = _weights(self.weights, self.geometry_template.num_users)
        if abs(w.sum() - 1.0) > 1e-9:
            msg = f"weights must sum to 1, got {w.sum():.12g}"
            raise DomainError(msg)
        if not self.candidate_grid:
            msg = "candidate grid is empty"
            raise DomainError(msg)
        lo, hi = self.grid_bounds
        outside = [x for x in self.candidate_grid if x < lo or x > hi]
        if outside:
            msg = f"candidate positions {outside} lie outside [{lo}, {hi}]"
            raise DomainError(msg)
        if self.channel_draws < 1:
            msg = f"channel_draws must be >= 1, got {self.channel_draws}"
            raise DomainError(msg)
        if not self.geometry_template.ris_positions:
            msg = "deployment needs a geometry with one RIS"
            raise DomainError(msg)


@dataclass
class DeploymentResult:
    per_x: List[Tuple[float, float]]
    optimum_x: float
    optimum_value: float
    stderr: List[float] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)


def evaluate_scheme(problem: DeploymentProblem, channels: ChannelSet) -> float:
    power = problem.system.transmit_power_w
    if problem.scheme is DeploymentScheme.S_NOMA:
        return wsr_s_noma(channels, problem.weights, power, problem.profile_search)
    if problem.scheme is DeploymentScheme.S_FDMA:
        return wsr_s_fdma(channels, problem.weights, power, problem.profile_search)
    return wsr_d_tdma(channels, problem.weights, power, problem.min_rates)


def optimize_deployment(problem: DeploymentProblem) -> DeploymentResult:
    """Average each candidate's weighted sum rate over seeded draws.

    Every candidate position reuses the same draw indices, so the sweep
    compares positions under common fading. Ties go to the smaller x.
    """
    grid = np.sort(np.asarray(problem.candidate_grid, dtype=float))
    averages = np.empty(grid.shape[0])
    errors = np.empty(grid.shape[0])
    for i, x in enumerate(grid):
        geometry = problem.geometry_template.with_ris_x(float(x))
        values = np.array(
            [
                evaluate_scheme(
                    problem,
                    draw_channels(
                        geometry,
                        problem.fading,
                        problem.system,
                        seed=problem.seed,
                        draw=d,
                        elements=problem.elements,
                        blocked_direct=problem.blocked_direct,
                    ),
                )
                for d in range(problem.channel_draws)
            ]
        )
        averages[i] = np.sum(values) / values.shape[0]
        errors[i] = (
            float(np.std(values, ddof=1) / np.sqrt(values.shape[0]))
            if values.shape[0] > 1
            else 0.0
        )
        logger.debug("deployment_point", scheme=problem.scheme.value, x=float(x), wsr=averages[i])

    best = int(np.argmax(averages))
    ties = int(np.sum(averages == averages[best]))
    result = DeploymentResult(
        per_x=[(float(x), float(v)) for x, v in zip(grid, averages)],
        optimum_x=float(grid[best]),
        optimum_value=float(averages[best]),
        stderr=[float(e) for e in errors],
        metadata={
            "scheme": problem.scheme.value,
            "tie_break": "smallest_x",
            "tied_candidates": ties,
            "channel_draws": problem.channel_draws,
            "seed": problem.seed,
        },
    )
    logger.info(
        "deployment_optimized",
        scheme=problem.scheme.value,
        optimum_x=result.optimum_x,
        optimum_value=result.optimum_value,
    )
    return result


def path_loss_product(geometry: NetworkGeometry, fading: LinkFading, x: float, user: int) -> float:
    """Cascaded BS-RIS-user power gain with the RIS moved to ``x``."""
    moved = geometry.with_ris_x(x)
    bs = np.asarray(moved.bs_position)
    ris = np.asarray(moved.ris_positions[0])
    target = np.asarray(moved.user_positions[user])
    return path_loss(float(np.linalg.norm(ris - bs)), fading.reflected) * path_loss(
        float(np.linalg.norm(target - ris)), fading.reflected
    )


def classify_deployment(
    result: DeploymentResult,
    geometry: NetworkGeometry,
    fading: Optional[LinkFading] = None,
) -> DeploymentClass:
    """Label the optimum relative to the users' mean x-position.

    ``symmetric`` means within one grid step of the midpoint; otherwise
    ``consolidation`` when the RIS sits on the side of the users with the
    larger direct-link gain, ``reverse`` when it sits with the weaker ones.
    """
    fading = fading or LinkFading()
    xs = np.array([x for x, _ in result.per_x])
    step = float(np.min(np.diff(xs))) if xs.shape[0] > 1 else 0.0
    users = np.asarray(geometry.user_positions)
    midpoint = float(users[:, 0].mean())
    offset = result.optimum_x - midpoint
    if abs(offset) <= step + 1e-9:
        return DeploymentClass.SYMMETRIC
    bs = np.asarray(geometry.bs_position)
    direct = np.array(
        [path_loss(float(np.linalg.norm(u - bs)), fading.direct) for u in users]
    )
    near = np.sign(users[:, 0] - midpoint) == np.sign(offset)
    if not np.any(near) or np.all(near):
        return DeploymentClass.SYMMETRIC
    stronger_near = direct[near].mean() >= direct[~near].mean()
    return DeploymentClass.CONSOLIDATION if stronger_near else DeploymentClass.REVERSE
