"""Achievable rates of the single-antenna broadcast channel.

Gains are noise-normalized (SNR per watt), powers are in watts and every
rate is in bits/s/Hz.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ris_noma.errors import DomainError

logger = structlog.get_logger(__name__)

_SUM_SLACK = 1e-9

ArrayLike = Union[Sequence[float], np.ndarray]


def _vector(values: ArrayLike, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.shape[0] < 1:
        msg = f"{name} must be a non-empty vector, got shape {arr.shape}"
        raise DomainError(msg)
    if not np.all(np.isfinite(arr)):
        msg = f"{name} must be finite"
        raise DomainError(msg)
    return arr


@dataclass(frozen=True, eq=False)
class EffectiveGains:
    """Per-user |h_k|^2 / noise."""

    gains: np.ndarray

    def __post_init__(self) -> None:
        arr = _vector(self.gains, "gains")
        if np.any(arr < 0):
            msg = "gains must be >= 0"
            raise DomainError(msg)
        object.__setattr__(self, "gains", arr)

    @classmethod
    def coerce(cls, value: Union["EffectiveGains", ArrayLike]) -> "EffectiveGains":
        return value if isinstance(value, cls) else cls(np.asarray(value))

    def __len__(self) -> int:
        return int(self.gains.shape[0])


@dataclass(frozen=True, eq=False)
class _Fractions:
    fractions: np.ndarray

    def __post_init__(self) -> None:
        arr = _vector(self.fractions, type(self).__name__)
        if np.any(arr < 0) or np.any(arr > 1):
            msg = f"{type(self).__name__} fractions must lie in [0, 1]"
            raise DomainError(msg)
        if arr.sum() > 1 + _SUM_SLACK:
            msg = f"{type(self).__name__} fractions sum to {arr.sum():.12g} > 1"
            raise DomainError(msg)
        object.__setattr__(self, "fractions", arr)

    @classmethod
    def coerce(cls, value):  # type: ignore[no-untyped-def]
        return value if isinstance(value, cls) else cls(np.asarray(value))

    def __len__(self) -> int:
        return int(self.fractions.shape[0])


class PowerSplit(_Fractions):
    """Fractions of the total transmit power per user."""


class ResourceShare(_Fractions):
    """Time (TDMA) or bandwidth (FDMA) fractions per user."""


@dataclass(frozen=True, eq=False)
class RateTuple:
    """Per-user rates in bits/s/Hz."""

    rates: np.ndarray

    def __post_init__(self) -> None:
        arr = _vector(self.rates, "rates")
        if np.any(arr < 0):
            msg = "rates must be >= 0"
            raise DomainError(msg)
        object.__setattr__(self, "rates", arr)

    def __len__(self) -> int:
        return int(self.rates.shape[0])

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter(self.rates.tolist())

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())


def _check_power(total_power: float) -> float:
    if not total_power >= 0:
        msg = f"total power must be >= 0, got {total_power}"
        raise DomainError(msg)
    return float(total_power)


def _check_length(expected: int, got: int, name: str) -> None:
    if expected != got:
        msg = f"{name} has {got} entries for {expected} users"
        raise DomainError(msg)


def noma_decoding_order(gains: ArrayLike) -> np.ndarray:
    """Ascending-gain SIC order; equal gains keep the lower index first."""
    return np.argsort(np.asarray(gains, dtype=float), kind="stable")


def single_user_capacity(gain: float, power: float) -> float:
    return math.log2(1.0 + power * gain)


def noma_rate_matrix(gains: np.ndarray, total_power: float, splits: np.ndarray) -> np.ndarray:
    """Vectorized SC-SIC rates for a stack of power splits.

    ``splits`` has shape (S, K); the result has the same shape.
    """
    order = noma_decoding_order(gains)
    powers = np.asarray(splits, dtype=float)[:, order] * total_power
    g = gains[order]
    # interference from the users decoded after k, i.e. the stronger ones
    after = np.cumsum(powers[:, ::-1], axis=1)[:, ::-1] - powers
    sorted_rates = np.log2(1.0 + powers * g / (g * after + 1.0))
    rates = np.empty_like(sorted_rates)
    rates[:, order] = sorted_rates
    return rates


def noma_rates(
    gains: Union[EffectiveGains, ArrayLike],
    total_power: float,
    split: Union[PowerSplit, ArrayLike],
) -> RateTuple:
    """Superposition coding with SIC in ascending-gain order."""
    g = EffectiveGains.coerce(gains).gains
    p = PowerSplit.coerce(split).fractions
    _check_length(len(g), len(p), "power split")
    power = _check_power(total_power)
    return RateTuple(noma_rate_matrix(g, power, p[None, :])[0])


def sic_feasible(gains: Union[EffectiveGains, ArrayLike], order: Sequence[int]) -> bool:
    """True iff ``order`` decodes users by non-decreasing gain."""
    g = EffectiveGains.coerce(gains).gains
    idx = np.asarray(order)
    if idx.shape != g.shape or sorted(idx.tolist()) != list(range(len(g))):
        msg = f"order {list(order)} is not a permutation of {len(g)} users"
        raise DomainError(msg)
    return bool(np.all(np.diff(g[idx]) >= 0))


def tdma_rate_matrix(gains: np.ndarray, total_power: float, shares: np.ndarray) -> np.ndarray:
    return np.asarray(shares, dtype=float) * np.log2(1.0 + total_power * gains)[None, :]


def tdma_rates(
    gains: Union[EffectiveGains, ArrayLike],
    total_power: float,
    shares: Union[ResourceShare, ArrayLike],
) -> RateTuple:
    """Full power during each user's own slot."""
    g = EffectiveGains.coerce(gains).gains
    s = ResourceShare.coerce(shares).fractions
    _check_length(len(g), len(s), "resource share")
    power = _check_power(total_power)
    return RateTuple(tdma_rate_matrix(g, power, s[None, :])[0])


def fdma_rate_matrix(
    gains: np.ndarray, total_power: float, shares: np.ndarray, splits: np.ndarray
) -> np.ndarray:
    """Vectorized FDMA rates; noise scales with the bandwidth share.

    Entries with zero share and zero power are zero. Zero share with positive
    power is rejected.
    """
    shares = np.asarray(shares, dtype=float)
    splits = np.asarray(splits, dtype=float)
    starved = (shares <= 0) & (splits > 0)
    if np.any(starved):
        msg = "a user with zero bandwidth cannot be given positive power"
        raise DomainError(msg)
    safe = np.where(shares > 0, shares, 1.0)
    snr = splits * total_power * gains[None, :] / safe
    return np.where(shares > 0, shares * np.log2(1.0 + snr), 0.0)


def fdma_rates(
    gains: Union[EffectiveGains, ArrayLike],
    total_power: float,
    shares: Union[ResourceShare, ArrayLike],
    split: Union[PowerSplit, ArrayLike],
) -> RateTuple:
    """Orthogonal bands with bandwidth-scaled noise.

    Args:
        gains: Effective channel gains, one per user
        total_power: Transmit power budget in watts
        shares: Bandwidth fractions summing to at most one
        split: Power fractions summing to at most one

    Returns:
        RateTuple with R_k = b_k log2(1 + p_k P gamma_k / b_k)

    Raises:
        DomainError: If a user has power but no bandwidth, or lengths differ
    """
    g = EffectiveGains.coerce(gains).gains
    s = ResourceShare.coerce(shares).fractions
    p = PowerSplit.coerce(split).fractions
    _check_length(len(g), len(s), "resource share")
    _check_length(len(g), len(p), "power split")
    power = _check_power(total_power)
    return RateTuple(fdma_rate_matrix(g, power, s[None, :], p[None, :])[0])


def _weak_strong(gains: np.ndarray) -> Tuple[int, int]:
    if gains.shape != (2,):
        msg = f"two-user sweep needs 2 gains, got shape {gains.shape}"
        raise DomainError(msg)
    order = noma_decoding_order(gains)
    return int(order[0]), int(order[1])


def rate_targets(samples: int) -> np.ndarray:
    """Fractions t_j = j / (samples - 1) of the weaker user's full-power rate."""
    return np.linspace(0.0, 1.0, samples)


def two_user_noma_splits(gains: np.ndarray, total_power: float, samples: int) -> np.ndarray:
    """Power splits placing the weaker user's rate on the target grid.

    Split j gives the weaker user exactly t_j log2(1 + P gamma_w), the rest
    of the power going to the stronger user. Since the SC-SIC frontier is the
    capacity boundary, each sample dominates every TDMA or FDMA pair that
    gives the weaker user the same rate.

    Returns:
        Array of shape (samples, 2) in user order
    """
    g = np.asarray(gains, dtype=float)
    weak, strong = _weak_strong(g)
    power = _check_power(total_power)
    t = rate_targets(samples)
    x = power * g[weak]
    # strong-user fraction beta solves (1 + x) / (1 + beta x) = (1 + x)^t
    beta = np.expm1((1.0 - t) * np.log1p(x)) / x if x > 0 else 1.0 - t
    beta = np.clip(beta, 0.0, 1.0)
    splits = np.empty((samples, 2))
    splits[:, strong] = beta
    splits[:, weak] = 1.0 - beta
    return splits


def two_user_fdma_rate_matrix(
    gains: np.ndarray, total_power: float, samples: int, share_steps: int
) -> np.ndarray:
    """FDMA rate pairs over a (rate target, bandwidth share) grid.

    For each target t_j and each bandwidth share b of the weaker user on a
    ``share_steps + 1`` point grid, the weaker user gets exactly the power
    reaching t_j log2(1 + P gamma_w) in its band and the stronger user the
    remainder. Combinations needing more than the budget are dropped.

    Returns:
        Array of shape (n, 2) in user order
    """
    g = np.asarray(gains, dtype=float)
    weak, strong = _weak_strong(g)
    power = _check_power(total_power)
    target = rate_targets(samples)[:, None] * math.log2(1.0 + power * g[weak])
    share = np.linspace(0.0, 1.0, share_steps + 1)[None, :]
    safe_share = np.where(share > 0, share, 1.0)
    safe_gain = g[weak] if g[weak] > 0 else 1.0
    with np.errstate(over="ignore"):
        needed = safe_share * np.expm1(target * math.log(2.0) / safe_share) / safe_gain
    needed = np.where(target > 0, np.where(share > 0, needed, np.inf), 0.0)
    feasible = needed <= power * (1.0 + 1e-12)
    rest = np.maximum(power - needed, 0.0)
    other = 1.0 - share
    safe_other = np.where(other > 0, other, 1.0)
    strong_rate = np.where(other > 0, other * np.log2(1.0 + rest * g[strong] / safe_other), 0.0)
    target_full = np.broadcast_to(target, needed.shape)
    rates = np.empty((int(feasible.sum()), 2))
    rates[:, weak] = target_full[feasible]
    rates[:, strong] = strong_rate[feasible]
    return rates


def sum_rate(rates: Union[RateTuple, ArrayLike]) -> float:
    r = rates.rates if isinstance(rates, RateTuple) else np.asarray(rates, dtype=float)
    return float(np.sum(r))


def weighted_sum_rate(rates: Union[RateTuple, ArrayLike], weights: ArrayLike) -> float:
    r = rates.rates if isinstance(rates, RateTuple) else np.asarray(rates, dtype=float)
    w = np.asarray(weights, dtype=float)
    _check_length(len(r), len(w), "weights")
    return float(np.dot(w, r))


def noma_max_weighted_sum_rate(
    gains: ArrayLike, weights: ArrayLike, total_power: float
) -> Tuple[float, np.ndarray]:
    """Exact WSR-optimal SC-SIC power split.

    The weighted sum rate equals the integral over the stacked power level z
    of w_k / (1/gamma_k + z); the optimum hands every slice of power to the
    user with the largest marginal utility, which respects the degraded
    decoding order. Returns (value in bits/s/Hz, power split).
    """
    g = EffectiveGains.coerce(gains).gains
    w = np.asarray(weights, dtype=float)
    _check_length(len(g), len(w), "weights")
    power = _check_power(total_power)
    split = np.zeros(len(g))
    usable = (g > 0) & (w > 0)
    if power == 0 or not np.any(usable):
        return 0.0, split

    inv = np.full(len(g), np.inf)
    inv[usable] = 1.0 / g[usable]
    z = 0.0
    total = 0.0
    utility = np.where(usable, w / (inv + z), -np.inf)
    current = int(np.argmax(utility))
    while z < power:
        # first level at which another user's marginal utility overtakes
        next_z = power
        challenger = -1
        for j in np.flatnonzero(usable):
            if j == current or w[j] <= w[current]:
                continue
            crossing = (w[current] * inv[j] - w[j] * inv[current]) / (w[j] - w[current])
            if z < crossing < next_z:
                next_z = crossing
                challenger = int(j)
        total += w[current] * math.log((inv[current] + next_z) / (inv[current] + z))
        split[current] += (next_z - z) / power
        z = next_z
        if challenger < 0:
            break
        current = challenger
    return total / math.log(2.0), split


def _fdma_dual_terms(c: np.ndarray, w: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """max_x w log(1 + c x) - lam x per user, in nats; shape (..., K)."""
    lam = lam[..., None]
    ratio = np.where(c > 0, w * c / lam, 0.0)
    active = ratio > 1.0
    safe_ratio = np.where(active, ratio, 1.0)
    safe_c = np.where(c > 0, c, 1.0)
    value = w * np.log(safe_ratio) - w + lam / safe_c
    return np.where(active, value, 0.0)


def fdma_max_weighted_sum_rate_batch(
    gains: np.ndarray, weights: ArrayLike, total_power: float, iterations: int = 200
) -> np.ndarray:
    """WSR-optimal joint bandwidth/power allocation for many gain vectors.

    Uses the dual min over the power price lam of lam + max_k h_k(lam), a
    one-dimensional convex problem solved by log-domain bisection on its
    subgradient. ``gains`` has shape (P, K); returns P values in bits/s/Hz.
    """
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    w = np.asarray(weights, dtype=float)
    c = gains * total_power
    top = np.max(np.where(w > 0, w * c, 0.0), axis=1)
    result = np.zeros(gains.shape[0])
    live = top > 0
    if not np.any(live):
        return result
    c_live = c[live]
    hi = np.log(top[live])
    lo = hi - 60.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        lam = np.exp(mid)
        terms = _fdma_dual_terms(c_live, w, lam)
        best = np.argmax(terms, axis=1)
        cb = c_live[np.arange(len(best)), best]
        wb = w[best]
        x_best = np.where(cb > 0, np.maximum(wb / lam - 1.0 / np.where(cb > 0, cb, 1.0), 0.0), 0.0)
        # subgradient 1 - x_best: positive means lam is too high
        too_high = x_best < 1.0
        hi = np.where(too_high, mid, hi)
        lo = np.where(too_high, lo, mid)
    lam_lo = np.exp(lo)
    lam_hi = np.exp(hi)
    dual_lo = lam_lo + np.max(_fdma_dual_terms(c_live, w, lam_lo), axis=1)
    dual_hi = lam_hi + np.max(_fdma_dual_terms(c_live, w, lam_hi), axis=1)
    result[live] = np.minimum(dual_lo, dual_hi) / math.log(2.0)
    return result


def fdma_max_weighted_sum_rate(
    gains: ArrayLike, weights: ArrayLike, total_power: float
) -> Tuple[float, np.ndarray, np.ndarray]:
    """WSR-optimal FDMA allocation for one gain vector.

    Returns (value, shares, split). When several users tie at the optimal
    price the two extreme power densities are mixed so that the bandwidth and
    power budgets are both met.
    """
    g = EffectiveGains.coerce(gains).gains
    w = np.asarray(weights, dtype=float)
    _check_length(len(g), len(w), "weights")
    power = _check_power(total_power)
    value = float(fdma_max_weighted_sum_rate_batch(g[None, :], w, power)[0])
    shares = np.zeros(len(g))
    split = np.zeros(len(g))
    if value <= 0:
        return 0.0, shares, split

    c = g * power
    lo, hi = 1e-300, float(np.max(w * c))
    for _ in range(200):
        lam = math.sqrt(lo * hi)
        terms = _fdma_dual_terms(c, w, np.asarray(lam))
        k = int(np.argmax(terms))
        density = max(w[k] / lam - 1.0 / c[k], 0.0) if c[k] > 0 else 0.0
        if density < 1.0:
            hi = lam
        else:
            lo = lam
    lam = math.sqrt(lo * hi)
    terms = _fdma_dual_terms(c, w, np.asarray(lam))
    tied = np.flatnonzero(terms >= terms.max() - 1e-9 * max(1.0, abs(terms.max())))
    densities = np.array(
        [max(w[j] / lam - 1.0 / c[j], 0.0) if c[j] > 0 else 0.0 for j in tied]
    )
    low, high = int(np.argmin(densities)), int(np.argmax(densities))
    if densities[high] - densities[low] < 1e-12:
        shares[tied] = 1.0 / len(tied)
    else:
        frac_low = np.clip(
            (densities[high] - 1.0) / (densities[high] - densities[low]), 0.0, 1.0
        )
        shares[tied[low]] = frac_low
        shares[tied[high]] = 1.0 - frac_low
    split = shares * np.array(
        [max(w[j] / lam - 1.0 / c[j], 0.0) if c[j] > 0 else 0.0 for j in range(len(g))]
    )
    if split.sum() > 0:
        split = split / split.sum()
    return value, shares, split


def resource_grid(users: int, steps: int) -> np.ndarray:
    """All compositions of ``steps`` into ``users`` parts, as fractions.

    For two users this is the ``steps + 1`` point sweep [a, 1 - a].
    """
    if users == 1:
        return np.ones((1, 1))
    if users == 2:
        a = np.linspace(0.0, 1.0, steps + 1)
        return np.column_stack([a, 1.0 - a])
    rows = []
    for head in range(steps + 1):
        tail = resource_grid(users - 1, steps - head) if steps - head > 0 else np.zeros((1, users - 1))
        scale = (steps - head) / steps
        rows.append(np.column_stack([np.full(tail.shape[0], head / steps), tail * scale]))
    return np.vstack(rows)


def optional_min_rates(min_rates: Optional[ArrayLike], users: int) -> Optional[np.ndarray]:
    if min_rates is None:
        return None
    arr = np.asarray(min_rates, dtype=float)
    _check_length(users, len(arr), "min_rates")
    if np.any(arr < 0):
        msg = "minimum rates must be >= 0"
        raise DomainError(msg)
    return arr
