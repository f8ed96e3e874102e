"""Cluster-based RIS designs.

Users are partitioned into clusters that share one BS beamformer. A single
central RIS can trade inter-cluster leakage against intra-cluster gain, while
distributed RISs each boost the cluster in their own coverage.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ris_noma.beamforming.passive import Score, amplitude_terms, coordinate_ascent
from ris_noma.beamforming.sinr import BeamformerSet
from ris_noma.channel_models import ChannelSet, RisProfile
from ris_noma.errors import DimensionError, DomainError
from ris_noma.scalar_rates import RateTuple, noma_rates

logger = structlog.get_logger(__name__)

DEFAULT_FLOOR_PENALTY = 10.0


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of users into clusters, plus the RIS serving each cluster."""

    clusters: Tuple[Tuple[int, ...], ...]
    serving_ris: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        clusters = tuple(tuple(int(k) for k in c) for c in self.clusters)
        if not clusters or any(len(c) == 0 for c in clusters):
            msg = "every cluster must contain at least one user"
            raise DomainError(msg)
        members = [k for c in clusters for k in c]
        if len(set(members)) != len(members):
            msg = f"clusters overlap: {clusters}"
            raise DomainError(msg)
        serving = tuple(int(r) for r in self.serving_ris) or (0,) * len(clusters)
        if len(serving) != len(clusters):
            msg = f"{len(serving)} serving RIS indices for {len(clusters)} clusters"
            raise DimensionError(msg)
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "serving_ris", serving)

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def validate(self, users: int) -> None:
        """Check that the clusters cover users 0..users-1 exactly once.

        Args:
            users: Number of users in the channel set

        Raises:
            DomainError: If a user is missing or out of range
        """
        members = sorted(k for c in self.clusters for k in c)
        if members != list(range(users)):
            msg = f"clusters {self.clusters} do not cover users 0..{users - 1}"
            raise DomainError(msg)

    def cluster_of(self, user: int) -> int:
        """Index of the cluster containing ``user``.

        Args:
            user: User index

        Returns:
            Position of the user's cluster in ``clusters``

        Raises:
            DomainError: If no cluster contains the user
        """
        for index, members in enumerate(self.clusters):
            if user in members:
                return index
        msg = f"user {user} is in no cluster"
        raise DomainError(msg)


@dataclass
class CentralizedDesign:
    profile: RisProfile
    leakage: float
    intra_gains: Dict[int, float]
    shortfall: Dict[int, float]
    objective: float

    @property
    def floors_met(self) -> bool:
        return not any(v > 0 for v in self.shortfall.values())


@dataclass
class DistributedDesign:
    profiles: List[RisProfile]
    min_gains: Dict[int, float]
    serving_power: Dict[int, float] = field(default_factory=dict)
    cross_leakage: Dict[int, float] = field(default_factory=dict)

    def leakage_ratio(self, ris_index: int) -> float:
        serving = self.serving_power.get(ris_index, 0.0)
        if serving <= 0:
            return float("inf")
        return self.cross_leakage.get(ris_index, 0.0) / serving


def _check(channels: ChannelSet, assignment: ClusterAssignment, beamformers: BeamformerSet) -> None:
    assignment.validate(channels.num_users)
    if len(beamformers) != assignment.num_clusters:
        msg = f"{len(beamformers)} beamformers for {assignment.num_clusters} clusters"
        raise DimensionError(msg)
    if beamformers.num_antennas != channels.num_antennas:
        msg = f"beamformers have {beamformers.num_antennas} antennas, channels have {channels.num_antennas}"
        raise DimensionError(msg)


def _floors(assignment: ClusterAssignment, gain_floors: Optional[Sequence[float]]) -> np.ndarray:
    if gain_floors is None:
        return np.zeros(assignment.num_clusters)
    floors = np.asarray(gain_floors, dtype=float)
    if floors.shape != (assignment.num_clusters,):
        msg = f"expected {assignment.num_clusters} gain floors, got {floors.shape}"
        raise DimensionError(msg)
    return floors


def centralized_cluster_design(
    channels: ChannelSet,
    assignment: ClusterAssignment,
    beamformers: BeamformerSet,
    *,
    gain_floors: Optional[Sequence[float]] = None,
    penalty: float = DEFAULT_FLOOR_PENALTY,
    bits: Optional[int] = None,
    initial: Optional[RisProfile] = None,
) -> CentralizedDesign:
    """One central RIS minimizing inter-cluster leakage under gain floors.

    The score is minus the leakage minus ``penalty`` times the total shortfall
    below each cluster's floor on |h_k^H w_c|^2. With a single cluster there is
    nothing to leak and the RIS maximizes the weakest member's gain instead.
    Unmet floors are reported with the best profile found.
    """
    if channels.num_ris != 1:
        msg = f"the centralized design needs exactly one RIS, channels have {channels.num_ris}"
        raise DimensionError(msg)
    _check(channels, assignment, beamformers)
    floors = _floors(assignment, gain_floors)
    users = channels.num_users
    clusters = assignment.num_clusters
    home = np.array([assignment.cluster_of(k) for k in range(users)])

    pairs = [(k, beamformers[c]) for k in range(users) for c in range(clusters)]
    start = initial or RisProfile.unit(channels.elements(0), bits)
    base, slopes = amplitude_terms(channels, pairs, [start], 0)

    own = np.zeros((users, clusters), dtype=bool)
    own[np.arange(users), home] = True
    own_flat = own.ravel()
    floor_per_user = floors[home]

    def components(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        intra = p[..., own_flat]
        leak = np.sum(p[..., ~own_flat], axis=-1)
        return intra, leak

    if clusters == 1:

        def score(p: np.ndarray) -> np.ndarray:
            return np.min(p[..., own_flat], axis=-1)

    else:

        def score(p: np.ndarray) -> np.ndarray:
            intra, leak = components(p)
            shortfall = np.sum(np.maximum(floor_per_user - intra, 0.0), axis=-1)
            return -leak - penalty * shortfall

    result = coordinate_ascent(base, slopes, score, start)
    powers = np.abs(base + slopes @ result.profile.coefficients) ** 2
    intra, leak = components(powers)
    intra_gains = {k: float(intra[k]) for k in range(users)}
    shortfall = {k: float(max(floor_per_user[k] - intra[k], 0.0)) for k in range(users)}
    design = CentralizedDesign(result.profile, float(leak), intra_gains, shortfall, result.objective)
    if not design.floors_met:
        logger.warning(
            "cluster_gain_floor_unmet",
            shortfall={k: v for k, v in shortfall.items() if v > 0},
        )
    logger.info("centralized_cluster_design", leakage=design.leakage, clusters=clusters)
    return design


def _reflected_power(
    channels: ChannelSet, ris_index: int, profile: RisProfile, user: int, w: np.ndarray
) -> float:
    row = (channels.ris_user[ris_index][user].conj() * profile.coefficients) @ channels.bs_ris[ris_index]
    return float(abs(row @ w) ** 2)


def min_gain_score(count: int) -> Score:
    """Score a profile by the weakest of the first ``count`` received powers.

    Args:
        count: Number of leading (user, beam) pairs that form the cluster

    Returns:
        Callable mapping a (..., pairs) power array to its row-wise minimum
    """
    return lambda p: np.min(p[..., :count], axis=-1)


def distributed_cluster_design(
    channels: ChannelSet,
    assignment: ClusterAssignment,
    beamformers: BeamformerSet,
    *,
    bits: Optional[int] = None,
) -> DistributedDesign:
    """Each RIS maximizes the weakest gain in the cluster it serves.

    Other RISs stay at their unit starting profiles during every solve, so the
    result does not depend on the order in which RISs are visited. The report
    compares what each RIS reflects of its cluster's beam to the members
    against what it reflects of the same beam toward every other user.
    """
    _check(channels, assignment, beamformers)
    for c, r in enumerate(assignment.serving_ris):
        if not 0 <= r < channels.num_ris:
            msg = f"cluster {c} is served by RIS {r}, channels have {channels.num_ris}"
            raise DomainError(msg)
    served = list(assignment.serving_ris)
    if len(set(served)) != len(served):
        msg = f"each RIS serves at most one cluster, got {served}"
        raise DomainError(msg)

    starting = [RisProfile.unit(channels.elements(r), bits) for r in range(channels.num_ris)]
    profiles = list(starting)
    min_gains: Dict[int, float] = {}
    for c, ris in enumerate(assignment.serving_ris):
        members = assignment.clusters[c]
        pairs = [(k, beamformers[c]) for k in members]
        base, slopes = amplitude_terms(channels, pairs, starting, ris)
        result = coordinate_ascent(base, slopes, min_gain_score(len(members)), starting[ris])
        profiles[ris] = result.profile
        min_gains[c] = result.objective

    serving_power: Dict[int, float] = {}
    cross_leakage: Dict[int, float] = {}
    for c, ris in enumerate(assignment.serving_ris):
        own = set(assignment.clusters[c])
        serving_power[ris] = sum(
            _reflected_power(channels, ris, profiles[ris], k, beamformers[c]) for k in own
        )
        # cluster c's beam reflected toward users it does not serve
        cross_leakage[ris] = sum(
            _reflected_power(channels, ris, profiles[ris], k, beamformers[c])
            for k in range(channels.num_users)
            if k not in own
        )
    logger.info(
        "distributed_cluster_design",
        clusters=assignment.num_clusters,
        leakage={r: cross_leakage[r] for r in sorted(cross_leakage)},
    )
    return DistributedDesign(profiles, min_gains, serving_power, cross_leakage)


def cluster_noma_rates(
    channels: ChannelSet,
    assignment: ClusterAssignment,
    beamformers: BeamformerSet,
    profiles: Sequence[RisProfile],
    splits: Optional[Sequence[Sequence[float]]] = None,
) -> List[RateTuple]:
    """Scalar NOMA inside each cluster on its common-beamformer gains.

    A member's effective gain is |h_k^H w_c|^2 / ||w_c||^2 over unit noise
    plus the other clusters' beams; the cluster power is ||w_c||^2. Power is
    split equally unless ``splits`` gives one split per cluster.
    """
    _check(channels, assignment, beamformers)
    rows = channels.equivalent_rows(profiles)
    received = np.abs(rows @ beamformers.vectors.T) ** 2
    rates = []
    for c, members in enumerate(assignment.clusters):
        power = float(np.sum(np.abs(beamformers[c]) ** 2))
        interference = np.array(
            [received[k].sum() - received[k, c] for k in members]
        )
        signal = received[list(members), c] / power if power > 0 else np.zeros(len(members))
        gains = signal / (1.0 + interference)
        split = (
            np.full(len(members), 1.0 / len(members))
            if splits is None
            else np.asarray(splits[c], dtype=float)
        )
        rates.append(noma_rates(gains, power, split))
    return rates
