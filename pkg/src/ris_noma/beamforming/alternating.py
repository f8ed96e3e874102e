"""Alternating active/passive design for a two-user RIS-NOMA pair."""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ris_noma.beamforming.active import (
    ActiveMethod,
    solve_active_power_min,
    wsr_active_step,
)
from ris_noma.beamforming.passive import (
    PassiveObjective,
    maximize_gain,
    passive_step,
)
from ris_noma.beamforming.sinr import (
    BeamformerSet,
    SicRateTriple,
    sic_condition,
    sic_rate_triple,
)
from ris_noma.channel_models import ChannelSet, RisProfile, discrete_profiles
from ris_noma.converters import write_points_csv
from ris_noma.errors import DimensionError, DomainError, InfeasibleError

logger = structlog.get_logger(__name__)

MONOTONE_SLACK = 1e-9
SIC_TOLERANCE = 1e-9
EXHAUSTIVE_START_LIMIT = 64


class DesignMode(str, Enum):
    POWER_MIN = "power_min"
    WEIGHTED_SUM_RATE = "weighted_sum_rate"


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    sic_margin: float
    power: float


@dataclass
class AlternatingTrace:
    rows: List[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([row.objective for row in self.rows])

    def is_monotone(self, mode: DesignMode, slack: float = MONOTONE_SLACK) -> bool:
        steps = np.diff(self.objectives)
        if DesignMode(mode) is DesignMode.POWER_MIN:
            return bool(np.all(steps <= slack))
        return bool(np.all(steps >= -slack))

    def to_csv(self, path: Union[str, Path], metadata: Optional[dict] = None) -> Path:
        table = np.array(
            [[r.iteration, r.objective, r.sic_margin, r.power] for r in self.rows]
        ).reshape(-1, 4)
        return write_points_csv(
            path, ["iteration", "objective", "sic_margin", "power"], table, metadata or {}
        )


@dataclass
class AlternatingResult:
    beamformers: BeamformerSet
    profile: RisProfile
    trace: AlternatingTrace
    order: Tuple[int, int]
    triple: SicRateTriple
    sic_satisfied: bool
    converged: bool
    iterations: int

    @property
    def objective(self) -> float:
        return self.trace.rows[-1].objective


def _profiles(channels: ChannelSet, profile: RisProfile, ris_index: int) -> List[RisProfile]:
    profiles = list(channels.unit_profiles())
    if profiles:
        profiles[ris_index] = profile
    return profiles


def _vectors(channels: ChannelSet, profile: RisProfile, ris_index: int) -> np.ndarray:
    """Conjugated equivalent rows, so that ``np.vdot(h_k, w)`` is user k's amplitude."""
    return channels.equivalent_rows(_profiles(channels, profile, ris_index)).conj()


def _order(vectors: np.ndarray) -> Tuple[int, int]:
    gains = np.sum(np.abs(vectors) ** 2, axis=1)
    m, n = (int(i) for i in np.argsort(gains, kind="stable"))
    return m, n


class _Step:
    """One active solve in either design mode."""

    def __init__(
        self,
        mode: DesignMode,
        values: Sequence[float],
        noise: float,
        power: Optional[float],
        active_method: ActiveMethod,
    ):
        self.mode = mode
        self.values = tuple(float(v) for v in values)
        self.noise = noise
        self.power = power
        self.active_method = active_method

    def solve(self, h_m: np.ndarray, h_n: np.ndarray) -> Tuple[BeamformerSet, float]:
        if self.mode is DesignMode.POWER_MIN:
            solution = solve_active_power_min(
                h_m, h_n, self.values, self.noise, method=self.active_method
            )
            if not solution.certified:
                msg = "active solution misses the SINR targets"
                raise InfeasibleError(msg, {"method": solution.method.value, **solution.report})
            return solution.beamformers, solution.power
        return wsr_active_step(h_m, h_n, self.values, float(self.power or 0.0), self.noise)

    def better(self, candidate: float, incumbent: float) -> bool:
        if self.mode is DesignMode.POWER_MIN:
            return candidate <= incumbent
        return candidate >= incumbent

    def score(self, beamformers: BeamformerSet, h_m: np.ndarray, h_n: np.ndarray) -> float:
        if self.mode is DesignMode.POWER_MIN:
            return beamformers.total_power
        triple = sic_rate_triple(h_m, h_n, beamformers[0], beamformers[1], self.noise)
        w_m, w_n = self.values
        return w_m * min(triple.r_mm, triple.r_nm) + w_n * triple.r_nn


def _initial_candidates(
    channels: ChannelSet, bits: Optional[int], ris_index: int
) -> List[RisProfile]:
    """Unit and per-user aligned profiles; every grid profile when the grid is small."""
    if channels.num_ris == 0:
        return [RisProfile.unit(0)]
    elements = channels.elements(ris_index)
    unit = RisProfile.unit(elements, bits)
    candidates = [unit]
    if bits is not None and 2 ** (bits * elements) <= EXHAUSTIVE_START_LIMIT:
        candidates.extend(discrete_profiles(bits, elements))
    rows = channels.equivalent_rows(_profiles(channels, unit, ris_index))
    for user in range(channels.num_users):
        mrt = rows[user].conj()
        if np.any(mrt):
            aligned = maximize_gain(channels, user, unit, mrt, ris_index=ris_index)
            candidates.append(aligned.profile)
    return candidates


def alternating_design(
    channels: ChannelSet,
    targets_or_weights: Sequence[float],
    mode: Union[DesignMode, str] = DesignMode.POWER_MIN,
    max_iters: int = 50,
    tolerance: float = 1e-6,
    *,
    power: Optional[float] = None,
    noise: float = 1.0,
    bits: Optional[int] = None,
    ris_index: int = 0,
    active_method: ActiveMethod = ActiveMethod.STRUCTURED,
    reorder: bool = False,
) -> AlternatingResult:
    """Alternate active beamforming with passive coordinate ascent.

    The decoding order is fixed from the equivalent-channel gains of the
    initial profile; ``reorder`` re-derives it every iteration, which can
    break the monotone trace. A new active solution replaces the incumbent
    only when it does not worsen the objective.

    Raises:
        InfeasibleError: If no initial profile admits feasible beamformers
    """
    mode = DesignMode(mode)
    if channels.num_users != 2:
        msg = f"the two-user design needs K=2, channels have K={channels.num_users}"
        raise DimensionError(msg)
    if mode is DesignMode.WEIGHTED_SUM_RATE and (power is None or power < 0):
        msg = "weighted-sum-rate design needs a non-negative power budget"
        raise DomainError(msg)
    if max_iters < 1:
        msg = f"max_iters must be >= 1, got {max_iters}"
        raise DomainError(msg)
    step = _Step(mode, targets_or_weights, noise, power, active_method)
    objective_kind = (
        PassiveObjective.MIN_POWER_MARGIN
        if mode is DesignMode.POWER_MIN
        else PassiveObjective.WEIGHTED_SUM_RATE
    )

    best: Optional[Tuple[float, RisProfile, BeamformerSet, Tuple[int, int]]] = None
    last_error: Optional[InfeasibleError] = None
    for candidate in _initial_candidates(channels, bits, ris_index):
        vectors = _vectors(channels, candidate, ris_index)
        m, n = _order(vectors)
        try:
            beamformers, value = step.solve(vectors[m], vectors[n])
        except InfeasibleError as e:
            last_error = e
            continue
        if best is None or step.better(value, best[0]):
            best = (value, candidate, beamformers, (m, n))
    if best is None:
        logger.warning("alternating_infeasible", iteration=0)
        msg = "no initial RIS profile admits beamformers meeting the targets"
        report = last_error.report if last_error is not None else {}
        raise InfeasibleError(msg, report) from last_error

    value, profile, beamformers, order = best
    logger.info("decoding_order_fixed", weak=order[0], strong=order[1], mode=mode.value)

    trace = AlternatingTrace()

    def record(iteration: int) -> SicRateTriple:
        vectors = _vectors(channels, profile, ris_index)
        triple = sic_rate_triple(
            vectors[order[0]], vectors[order[1]], beamformers[0], beamformers[1], noise
        )
        trace.append(TraceRow(iteration, value, triple.margin, beamformers.total_power))
        return triple

    triple = record(0)
    converged = False
    iteration = 0
    for iteration in range(1, max_iters + 1):
        previous = value
        if channels.num_ris > 0:
            passive = passive_step(
                channels,
                beamformers,
                profile,
                objective_kind,
                users=order,
                targets=step.values,
                weights=step.values,
                noise=noise,
                ris_index=ris_index,
                profiles=_profiles(channels, profile, ris_index),
            )
            profile = passive.profile

        vectors = _vectors(channels, profile, ris_index)
        if reorder:
            new_order = _order(vectors)
            if new_order != order:
                logger.warning("decoding_order_changed", iteration=iteration, order=new_order)
                order = new_order
                beamformers = BeamformerSet.of(beamformers[1], beamformers[0])
        value = step.score(beamformers, vectors[order[0]], vectors[order[1]])
        try:
            candidate, candidate_value = step.solve(vectors[order[0]], vectors[order[1]])
        except InfeasibleError:
            logger.debug("active_step_kept_incumbent", iteration=iteration)
        else:
            if step.better(candidate_value, value):
                beamformers, value = candidate, candidate_value

        triple = record(iteration)
        logger.debug("alternating_iteration", iteration=iteration, objective=value)
        if abs(value - previous) <= tolerance * max(1.0, abs(previous)):
            converged = True
            break

    satisfied = sic_condition(triple, tolerance=SIC_TOLERANCE)
    if not satisfied:
        logger.warning("sic_condition_violated", margin=triple.margin)
    logger.info(
        "alternating_design_done",
        mode=mode.value,
        objective=value,
        iterations=iteration,
        converged=converged,
    )
    return AlternatingResult(
        beamformers=beamformers,
        profile=profile,
        trace=trace,
        order=order,
        triple=triple,
        sic_satisfied=satisfied,
        converged=converged,
        iterations=iteration,
    )
