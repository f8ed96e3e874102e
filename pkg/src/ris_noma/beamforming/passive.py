"""Passive (RIS-side) beamforming by element-wise coordinate ascent.

Every objective handled here is a function of a few received powers
``|a_i(theta)|^2`` whose amplitudes are affine in the reflection
coefficients: ``a_i = base_i + slopes_i @ theta``. Updating one element at a
time leaves a one-dimensional problem on the unit circle.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.optimize import minimize_scalar

from ris_noma.beamforming.sinr import BeamformerSet
from ris_noma.channel_models import ChannelSet, RisProfile
from ris_noma.errors import DimensionError, DomainError

logger = structlog.get_logger(__name__)

Score = Callable[[np.ndarray], np.ndarray]

DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_SWEEPS = 100
_PHASE_GRID = 64
_TINY = 1e-300
SIC_VIOLATION = -1e6
_SIC_SLACK = 1e-12


class PassiveObjective(str, Enum):
    MIN_POWER_MARGIN = "min_power_margin"
    WEIGHTED_SUM_RATE = "weighted_sum_rate"


@dataclass
class PassiveResult:
    profile: RisProfile
    objective: float
    sweeps: int
    improved: bool


def amplitude_terms(
    channels: ChannelSet,
    pairs: Sequence[Tuple[int, np.ndarray]],
    profiles: Sequence[RisProfile],
    ris_index: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Affine decomposition of ``r_k(theta) @ w`` for every (user k, w) pair.

    Returns ``base`` of shape (T,) holding the direct link plus every other
    RIS at its given profile, and ``slopes`` of shape (T, M) for the RIS
    being optimized.
    """
    rows_without = channels.direct.copy()
    for r, (f, g, profile) in enumerate(zip(channels.bs_ris, channels.ris_user, profiles)):
        if r != ris_index:
            rows_without += (g.conj() * profile.coefficients[None, :]) @ f
    cascade = channels.cascade(ris_index)
    base = np.empty(len(pairs), dtype=complex)
    slopes = np.empty((len(pairs), cascade.shape[1]), dtype=complex)
    for i, (user, w) in enumerate(pairs):
        w = np.asarray(w, dtype=complex).reshape(-1)
        if w.shape[0] != channels.num_antennas:
            msg = f"beamformer has {w.shape[0]} antennas, channels have {channels.num_antennas}"
            raise DimensionError(msg)
        base[i] = rows_without[user] @ w
        slopes[i] = cascade[user] @ w
    return base, slopes


def _evaluate(score: Score, amplitudes: np.ndarray) -> np.ndarray:
    return np.asarray(score(np.abs(amplitudes) ** 2), dtype=float)


def coordinate_ascent(
    base: np.ndarray,
    slopes: np.ndarray,
    score: Score,
    profile: RisProfile,
    *,
    monotone_single: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> PassiveResult:
    """Maximize ``score(|base + slopes @ theta|^2)`` one element at a time.

    ``score`` maps an array of shape (..., T) of received powers to (...).
    With a single term and ``monotone_single`` set, each element takes its
    closed-form co-phasing value. Otherwise candidate phases are scanned and
    continuous phases get a bounded refinement. The current phase is always a
    candidate, so no update can lower the score. Discrete profiles stay on
    their phase grid.
    """
    slopes = np.atleast_2d(np.asarray(slopes, dtype=complex))
    base = np.asarray(base, dtype=complex).reshape(-1)
    if slopes.shape != (base.shape[0], profile.elements):
        msg = f"slopes have shape {slopes.shape}, expected ({base.shape[0]}, {profile.elements})"
        raise DimensionError(msg)
    theta = profile.coefficients.copy()
    amplitudes = base + slopes @ theta
    start = float(_evaluate(score, amplitudes))
    current = start
    bits = profile.resolution_bits
    levels = None if bits is None else np.arange(2**bits) * (2 * np.pi / 2**bits)
    closed_form = monotone_single and base.shape[0] == 1

    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        before = current
        for m in range(theta.shape[0]):
            amp = abs(theta[m])
            if amp == 0:
                continue
            rest = amplitudes - slopes[:, m] * theta[m]
            phase_now = float(np.angle(theta[m]))

            if closed_form and abs(slopes[0, m]) > 0:
                ideal = np.angle(rest[0]) - np.angle(slopes[0, m]) if abs(rest[0]) > 0 else -np.angle(slopes[0, m])
                candidates = np.array([phase_now, ideal])
                if levels is not None:
                    step = levels[1] if levels.shape[0] > 1 else 2 * np.pi
                    candidates = np.array([phase_now, np.round(ideal / step) * step])
            elif levels is not None:
                candidates = np.concatenate([[phase_now], levels])
            else:
                candidates = np.concatenate(
                    [[phase_now], phase_now + np.linspace(0, 2 * np.pi, _PHASE_GRID, endpoint=False)]
                )

            trial = rest[None, :] + slopes[None, :, m] * (amp * np.exp(1j * candidates))[:, None]
            values = _evaluate(score, trial)
            best = int(np.argmax(values))
            best_phase, best_value = float(candidates[best]), float(values[best])

            if levels is None and not closed_form:
                width = 2 * np.pi / _PHASE_GRID

                def negative(phi: float, rest=rest, m=m, amp=amp) -> float:
                    value = _evaluate(score, rest + slopes[:, m] * amp * np.exp(1j * phi))
                    return -float(value)

                refined = minimize_scalar(
                    negative, bounds=(best_phase - width, best_phase + width), method="bounded"
                )
                if refined.success and -refined.fun > best_value:
                    best_phase, best_value = float(refined.x), -float(refined.fun)

            if best_value > current:
                theta[m] = amp * np.exp(1j * best_phase)
                amplitudes = rest + slopes[:, m] * theta[m]
                current = best_value
        if current - before < tolerance * max(1.0, abs(before)):
            break

    if current <= start:
        return PassiveResult(profile, start, sweeps, improved=False)
    if bits is not None:
        # snap away floating drift so the grid check in RisProfile passes
        step = 2 * np.pi / 2**bits
        index = np.mod(np.round(np.angle(theta) / step), 2**bits)
        theta = np.abs(theta) * np.exp(1j * index * step)
    return PassiveResult(RisProfile(theta, bits), current, sweeps, improved=True)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.full(np.broadcast(num, den).shape, np.inf), where=den > _TINY)


def min_power_margin_score(targets: Sequence[float], noise: float) -> Score:
    """Smallest slack over the SINR targets and the SIC rate ordering.

    Term order is (mm, mn, nm, nn): user m and user n each seeing w_m and w_n.
    """
    t_m, t_n = (float(t) for t in targets)

    def score(p: np.ndarray) -> np.ndarray:
        sinr_mm = p[..., 0] / (p[..., 1] + noise)
        sinr_nm = p[..., 2] / (p[..., 3] + noise)
        sinr_nn = p[..., 3] / noise
        ordering = _ratio(sinr_nm, sinr_mm)
        return np.minimum.reduce([sinr_mm / t_m, sinr_nm / t_m, sinr_nn / t_n, ordering])

    return score


def weighted_sum_rate_score(weights: Sequence[float], noise: float) -> Score:
    """w_m * r_mm + w_n * r_nn over the (mm, mn, nm, nn) terms.

    Profiles that leave r_nm < r_mm score SIC_VIOLATION.
    """
    w_m, w_n = (float(w) for w in weights)

    def score(p: np.ndarray) -> np.ndarray:
        r_mm = np.log2(1 + p[..., 0] / (p[..., 1] + noise))
        r_nm = np.log2(1 + p[..., 2] / (p[..., 3] + noise))
        r_nn = np.log2(1 + p[..., 3] / noise)
        return np.where(r_nm >= r_mm - _SIC_SLACK, w_m * r_mm + w_n * r_nn, SIC_VIOLATION)

    return score


def pair_objective(
    objective: PassiveObjective,
    *,
    targets: Sequence[float] = (1.0, 1.0),
    weights: Sequence[float] = (0.5, 0.5),
    noise: float = 1.0,
) -> Score:
    objective = PassiveObjective(objective)
    if not noise > 0:
        msg = f"noise power must be > 0, got {noise}"
        raise DomainError(msg)
    if objective is PassiveObjective.MIN_POWER_MARGIN:
        return min_power_margin_score(targets, noise)
    return weighted_sum_rate_score(weights, noise)


def _pair_terms(
    channels: ChannelSet,
    beamformers: BeamformerSet,
    users: Sequence[int],
    profiles: Sequence[RisProfile],
    ris_index: int,
) -> Tuple[np.ndarray, np.ndarray]:
    m, n = users
    pairs = [(m, beamformers[0]), (m, beamformers[1]), (n, beamformers[0]), (n, beamformers[1])]
    return amplitude_terms(channels, pairs, profiles, ris_index)


def evaluate_pair_objective(
    channels: ChannelSet,
    beamformers: BeamformerSet,
    profiles: Sequence[RisProfile],
    score: Score,
    *,
    users: Sequence[int] = (0, 1),
) -> float:
    rows = channels.equivalent_rows(profiles)
    m, n = users
    amplitudes = np.array(
        [rows[m] @ beamformers[0], rows[m] @ beamformers[1], rows[n] @ beamformers[0], rows[n] @ beamformers[1]]
    )
    return float(_evaluate(score, amplitudes))


def passive_step(
    channels: ChannelSet,
    beamformers: BeamformerSet,
    profile: RisProfile,
    objective: PassiveObjective,
    *,
    users: Sequence[int] = (0, 1),
    targets: Sequence[float] = (1.0, 1.0),
    weights: Sequence[float] = (0.5, 0.5),
    noise: float = 1.0,
    ris_index: int = 0,
    profiles: Optional[Sequence[RisProfile]] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> PassiveResult:
    """Coordinate ascent on one RIS for a two-user SIC pair."""
    if len(beamformers) != 2:
        msg = f"two-user design needs two beamformers, got {len(beamformers)}"
        raise DimensionError(msg)
    if channels.num_ris == 0:
        score = pair_objective(objective, targets=targets, weights=weights, noise=noise)
        value = evaluate_pair_objective(channels, beamformers, (), score, users=users)
        return PassiveResult(profile, value, 0, improved=False)
    all_profiles = list(profiles) if profiles is not None else list(channels.unit_profiles())
    all_profiles[ris_index] = profile
    base, slopes = _pair_terms(channels, beamformers, users, all_profiles, ris_index)
    score = pair_objective(objective, targets=targets, weights=weights, noise=noise)
    result = coordinate_ascent(
        base, slopes, score, profile, tolerance=tolerance, max_sweeps=max_sweeps
    )
    logger.debug(
        "passive_step",
        objective=PassiveObjective(objective).value,
        value=result.objective,
        sweeps=result.sweeps,
        improved=result.improved,
    )
    return result


def passive_update(
    channels: ChannelSet,
    beamformers: BeamformerSet,
    profile: RisProfile,
    objective: PassiveObjective,
    **options,
) -> RisProfile:
    """Profile whose objective is no lower than the input profile's."""
    return passive_step(channels, beamformers, profile, objective, **options).profile


def maximize_gain(
    channels: ChannelSet,
    user: int,
    profile: RisProfile,
    beamformer: Optional[np.ndarray] = None,
    *,
    ris_index: int = 0,
    profiles: Optional[Sequence[RisProfile]] = None,
) -> PassiveResult:
    """Single-ratio case: maximize one user's received power in closed form."""
    w = np.ones(channels.num_antennas) if beamformer is None else beamformer
    all_profiles = list(profiles) if profiles is not None else list(channels.unit_profiles())
    all_profiles[ris_index] = profile
    base, slopes = amplitude_terms(channels, [(user, w)], all_profiles, ris_index)
    return coordinate_ascent(
        base, slopes, lambda p: p[..., 0], profile, monotone_single=True
    )
