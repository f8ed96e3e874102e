"""Rate regions under static and dynamic RIS configuration.

A static region is the union, over the enumerated reflection profiles, of the
rate tuples reachable with one fixed profile. The dynamic region time-shares
between profiles and is therefore the convex hull of that union.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
import structlog
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from ris_noma.channel_models import (
    ChannelSet,
    RisProfile,
    align_phases,
    discrete_phase_matrix,
    quantize_profile,
    stream_rng,
)
from ris_noma.converters import read_points_csv, write_points_csv
from ris_noma.errors import DimensionError, DomainError, EnumerationCapError
from ris_noma.scalar_rates import (
    fdma_rate_matrix,
    noma_rate_matrix,
    resource_grid,
    tdma_rate_matrix,
    two_user_fdma_rate_matrix,
    two_user_noma_splits,
)

logger = structlog.get_logger(__name__)

DEFAULT_BOUNDARY_SAMPLES = 201
DEFAULT_FDMA_GRID = 101
DEFAULT_ENUMERATION_CAP = 2**20

# sampled-phase sub-stream, disjoint from the channel streams
_PROFILE_STREAM = 3


class Scheme(str, Enum):
    NOMA = "noma"
    TDMA = "tdma"
    FDMA = "fdma"


class ConfigMode(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class EnumerationMode(str, Enum):
    DISCRETE_EXHAUSTIVE = "discrete"
    CONTINUOUS_SAMPLED = "continuous"


@dataclass(frozen=True)
class ProfileEnumeration:
    """Which reflection profiles a search visits.

    ``DISCRETE_EXHAUSTIVE`` walks all 2^(bits*M) unit-modulus profiles;
    ``CONTINUOUS_SAMPLED`` draws ``count`` uniform-phase profiles from
    ``seed``. ``include_aligned`` adds the profiles co-phased to each user
    (quantized in discrete mode).
    """

    mode: EnumerationMode = EnumerationMode.DISCRETE_EXHAUSTIVE
    bits: int = 1
    count: int = 256
    seed: int = 0
    cap: int = DEFAULT_ENUMERATION_CAP
    include_aligned: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", EnumerationMode(self.mode))
        if self.bits < 1:
            msg = f"bits must be >= 1, got {self.bits}"
            raise DomainError(msg)
        if self.count < 1:
            msg = f"sampled profile count must be >= 1, got {self.count}"
            raise DomainError(msg)
        if self.cap < 1:
            msg = f"enumeration cap must be >= 1, got {self.cap}"
            raise DomainError(msg)

    def size(self, elements: int) -> int:
        if elements == 0:
            return 1
        if self.mode is EnumerationMode.DISCRETE_EXHAUSTIVE:
            return 2 ** (self.bits * elements)
        return self.count

    def describe(self) -> str:
        if self.mode is EnumerationMode.DISCRETE_EXHAUSTIVE:
            text = f"discrete:bits={self.bits}"
        else:
            text = f"continuous:count={self.count}:seed={self.seed}"
        return text + (":aligned" if self.include_aligned else "")


def profile_matrix(enumeration: ProfileEnumeration, elements: int) -> np.ndarray:
    """Reflection coefficients of every enumerated profile as a (P, M) array.

    Raises:
        EnumerationCapError: If a discrete enumeration exceeds the cap; raised
            before anything is materialized
    """
    size = enumeration.size(elements)
    if elements == 0:
        return np.ones((1, 0), dtype=complex)
    if enumeration.mode is EnumerationMode.DISCRETE_EXHAUSTIVE:
        if size > enumeration.cap:
            raise EnumerationCapError(size, enumeration.cap)
        return np.exp(1j * discrete_phase_matrix(enumeration.bits, elements))
    rng = stream_rng(enumeration.seed, _PROFILE_STREAM)
    phases = rng.uniform(0.0, 2 * np.pi, size=(enumeration.count, elements))
    return np.exp(1j * phases)


def enumerate_profiles(enumeration: ProfileEnumeration, elements: int) -> Iterator[RisProfile]:
    bits = (
        enumeration.bits
        if enumeration.mode is EnumerationMode.DISCRETE_EXHAUSTIVE
        else None
    )
    for row in profile_matrix(enumeration, elements):
        yield RisProfile(row, bits)


def aligned_profile_matrix(
    channels: ChannelSet, enumeration: ProfileEnumeration, ris_index: int = 0
) -> np.ndarray:
    """One profile per user co-phasing that user's cascaded and direct links."""
    f = channels.bs_ris[ris_index][:, 0]
    g = channels.ris_user[ris_index]
    rows = []
    for k in range(channels.num_users):
        profile = align_phases(channels.direct[k, 0], g[k], f)
        if enumeration.mode is EnumerationMode.DISCRETE_EXHAUSTIVE:
            profile = quantize_profile(profile, enumeration.bits)
        rows.append(profile.coefficients)
    return np.asarray(rows, dtype=complex).reshape(channels.num_users, -1)


def candidate_gains(
    channels: ChannelSet, enumeration: ProfileEnumeration, ris_index: int = 0
) -> np.ndarray:
    """Effective gains of every candidate profile as a (P, K) array."""
    if channels.num_antennas != 1:
        msg = f"scalar rate regions need N_t=1, channels have N_t={channels.num_antennas}"
        raise DimensionError(msg)
    elements = channels.elements(ris_index)
    coefficients = profile_matrix(enumeration, elements)
    if enumeration.include_aligned and channels.num_ris > 0 and elements > 0:
        aligned = aligned_profile_matrix(channels, enumeration, ris_index)
        coefficients = np.vstack([coefficients, aligned])
    rows = channels.batch_rows(coefficients, ris_index)
    gains = np.abs(rows[:, :, 0]) ** 2
    logger.debug(
        "profiles_enumerated",
        enumeration=enumeration.describe(),
        elements=elements,
        profiles=int(gains.shape[0]),
    )
    return gains


def pareto_frontier(points: np.ndarray) -> np.ndarray:
    """Non-dominated subset of 2-D points sorted by ascending first rate.

    Sort-and-scan; duplicate points collapse to one.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return pts
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    kept = []
    best_y = -np.inf
    for idx in order:
        if pts[idx, 1] > best_y:
            kept.append(idx)
            best_y = pts[idx, 1]
    return pts[kept][::-1]


def pareto_filter(points: np.ndarray) -> np.ndarray:
    """Non-dominated subset of points in any dimension."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] == 0 or pts.shape[1] == 2:
        return pareto_frontier(pts)
    keep = np.ones(pts.shape[0], dtype=bool)
    for i in range(pts.shape[0]):
        if not keep[i]:
            continue
        dominates = np.all(pts >= pts[i], axis=1) & np.any(pts > pts[i], axis=1)
        if np.any(dominates):
            keep[i] = False
    return pts[keep]


@dataclass(eq=False)
class RateRegion:
    """Sampled rate region.

    ``points`` are the retained achievable tuples; ``boundary`` is their
    Pareto frontier (for K=2 sorted by the first rate).
    """

    points: np.ndarray
    boundary: np.ndarray
    scheme: Scheme
    config_mode: ConfigMode
    total_power: float
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.boundary = np.atleast_2d(np.asarray(self.boundary, dtype=float))
        self.scheme = Scheme(self.scheme)
        self.config_mode = ConfigMode(self.config_mode)
        if self.points.shape[1] != self.boundary.shape[1]:
            msg = "points and boundary disagree on the number of users"
            raise DimensionError(msg)

    @property
    def num_users(self) -> int:
        return int(self.boundary.shape[1])

    @property
    def is_empty(self) -> bool:
        return self.boundary.shape[0] == 0


def _profile_points(
    gains: np.ndarray,
    scheme: Scheme,
    total_power: float,
    boundary_samples: int,
    fdma_grid: int,
) -> np.ndarray:
    """Pareto-filtered rate tuples of one profile.

    Two-user NOMA and FDMA sweep the weaker user's rate over a common target
    grid; other cases sweep resource fractions directly.
    """
    users = gains.shape[0]
    if users == 2 and scheme is Scheme.NOMA:
        splits = two_user_noma_splits(gains, total_power, boundary_samples)
        rates = noma_rate_matrix(gains, total_power, splits)
    elif users == 2 and scheme is Scheme.FDMA:
        rates = two_user_fdma_rate_matrix(gains, total_power, boundary_samples, fdma_grid - 1)
    elif scheme is Scheme.NOMA:
        rates = noma_rate_matrix(gains, total_power, resource_grid(users, boundary_samples - 1))
    elif scheme is Scheme.TDMA:
        rates = tdma_rate_matrix(gains, total_power, resource_grid(users, boundary_samples - 1))
    else:
        steps = fdma_grid - 1 if users == 1 else max(2, round((fdma_grid - 1) ** (1 / (users - 1))))
        fractions = resource_grid(users, steps)
        share_idx, split_idx = np.meshgrid(
            np.arange(fractions.shape[0]), np.arange(fractions.shape[0]), indexing="ij"
        )
        shares = fractions[share_idx.ravel()]
        splits = fractions[split_idx.ravel()]
        valid = ~np.any((shares <= 0) & (splits > 0), axis=1)
        rates = fdma_rate_matrix(gains, total_power, shares[valid], splits[valid])
    return pareto_filter(rates)


def _check_samples(boundary_samples: int, fdma_grid: int) -> None:
    if boundary_samples < 2:
        msg = f"boundary_samples must be >= 2, got {boundary_samples}"
        raise DomainError(msg)
    if fdma_grid < 2:
        msg = f"fdma_grid must be >= 2, got {fdma_grid}"
        raise DomainError(msg)


def profile_regions(
    channels: ChannelSet,
    enumeration: ProfileEnumeration,
    scheme: Union[Scheme, str],
    total_power: float,
    boundary_samples: int = DEFAULT_BOUNDARY_SAMPLES,
    fdma_grid: int = DEFAULT_FDMA_GRID,
) -> List[RateRegion]:
    """One static region per candidate profile."""
    scheme = Scheme(scheme)
    _check_samples(boundary_samples, fdma_grid)
    if total_power < 0:
        msg = f"total power must be >= 0, got {total_power}"
        raise DomainError(msg)
    regions = []
    for index, gains in enumerate(candidate_gains(channels, enumeration)):
        points = _profile_points(gains, scheme, total_power, boundary_samples, fdma_grid)
        regions.append(
            RateRegion(
                points,
                points,
                scheme,
                ConfigMode.STATIC,
                total_power,
                {"profile_index": index},
            )
        )
    return regions


def union_region(regions: Sequence[RateRegion]) -> RateRegion:
    """Static region formed by the union of per-profile regions."""
    scheme, power = _common_setting(regions)
    points = pareto_filter(np.vstack([r.points for r in regions]))
    return RateRegion(points, points, scheme, ConfigMode.STATIC, power, {"profiles": len(regions)})


def static_region(
    channels: ChannelSet,
    enumeration: ProfileEnumeration,
    scheme: Union[Scheme, str],
    total_power: float,
    boundary_samples: int = DEFAULT_BOUNDARY_SAMPLES,
    fdma_grid: int = DEFAULT_FDMA_GRID,
) -> RateRegion:
    """Union over enumerated profiles of the scheme's rate tuples."""
    regions = profile_regions(
        channels, enumeration, scheme, total_power, boundary_samples, fdma_grid
    )
    region = union_region(regions)
    region.metadata["enumeration"] = enumeration.describe()
    logger.info(
        "static_region_built",
        scheme=region.scheme.value,
        profiles=len(regions),
        boundary_points=int(region.boundary.shape[0]),
    )
    return region


def _common_setting(regions: Sequence[RateRegion]) -> tuple:
    if not regions:
        msg = "cannot combine an empty list of regions"
        raise DomainError(msg)
    scheme = regions[0].scheme
    power = regions[0].total_power
    users = regions[0].num_users
    for region in regions[1:]:
        if region.scheme is not scheme:
            msg = f"regions mix schemes {scheme.value} and {region.scheme.value}"
            raise DomainError(msg)
        if not np.isclose(region.total_power, power, rtol=1e-12, atol=0.0):
            msg = f"regions mix total powers {power} and {region.total_power}"
            raise DomainError(msg)
        if region.num_users != users:
            msg = "regions disagree on the number of users"
            raise DimensionError(msg)
    return scheme, power


def _drop_collinear(chain: np.ndarray) -> np.ndarray:
    if chain.shape[0] < 3:
        return chain
    kept = [chain[0]]
    for i in range(1, chain.shape[0] - 1):
        a, b, c = kept[-1], chain[i], chain[i + 1]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        scale = max(1.0, float(np.max(np.abs(chain))))
        if abs(cross) > 1e-12 * scale * scale:
            kept.append(b)
    kept.append(chain[-1])
    return np.asarray(kept)


def _upper_hull_2d(points: np.ndarray) -> np.ndarray:
    pts = pareto_frontier(points)
    if pts.shape[0] <= 2:
        return pts
    anchors = np.array(
        [[0.0, 0.0], [pts[:, 0].max(), 0.0], [0.0, pts[:, 1].max()]]
    )
    cloud = np.vstack([pts, anchors])
    try:
        hull = ConvexHull(cloud)
    except QhullError:
        logger.debug("hull_degenerate", points=int(pts.shape[0]))
        return pts
    return _drop_collinear(pareto_frontier(cloud[hull.vertices]))


def dynamic_region(static_regions: Sequence[RateRegion]) -> RateRegion:
    """Convex hull of the union of the given static regions."""
    scheme, power = _common_setting(static_regions)
    cloud = np.vstack([r.points for r in static_regions])
    if cloud.shape[1] == 2:
        boundary = _upper_hull_2d(cloud)
    else:
        pts = pareto_filter(cloud)
        try:
            hull = ConvexHull(np.vstack([pts, np.zeros((1, pts.shape[1]))]))
            vertices = hull.points[hull.vertices]
            boundary = pareto_filter(vertices[np.any(vertices > 0, axis=1)])
        except QhullError:
            boundary = pts
    logger.debug(
        "dynamic_region_built", inputs=len(static_regions), vertices=int(boundary.shape[0])
    )
    return RateRegion(
        boundary,
        boundary,
        scheme,
        ConfigMode.DYNAMIC,
        power,
        {"profiles": len(static_regions)},
    )


def contains(region: RateRegion, point: Sequence[float], tolerance: float = 1e-9) -> bool:
    """Downward-closed membership test.

    A static region is a union of sampled tuples and need not be convex, so
    a point is inside only when a single boundary tuple dominates it. A
    dynamic region is convex: for two users its frontier is read as a
    polyline, for more users a convex-combination LP decides.
    """
    p = np.asarray(point, dtype=float)
    if p.shape != (region.num_users,):
        msg = f"point has {p.shape} entries, region has {region.num_users} users"
        raise DimensionError(msg)
    if region.is_empty:
        return False
    if np.any(p < -tolerance):
        return False
    boundary = region.boundary
    if region.config_mode is ConfigMode.STATIC:
        return bool(np.any(np.all(boundary >= p - tolerance, axis=1)))
    if region.num_users == 2:
        bx, by = boundary[:, 0], boundary[:, 1]
        if p[0] > bx[-1] + tolerance:
            return False
        x = max(p[0] - tolerance, bx[0])
        height = float(np.interp(x, bx, by))
        return bool(p[1] <= height + tolerance)
    count = boundary.shape[0]
    result = linprog(
        np.zeros(count),
        A_ub=-boundary.T,
        b_ub=-(p - tolerance),
        A_eq=np.ones((1, count)),
        b_eq=np.ones(1),
        bounds=[(0, None)] * count,
        method="highs",
    )
    return bool(result.status == 0)


def region_area(region: RateRegion) -> float:
    """Area under the frontier polyline down to both axes."""
    if region.num_users != 2:
        msg = f"region area is defined for two users, region has {region.num_users}"
        raise DomainError(msg)
    if region.is_empty:
        msg = "region has no boundary points"
        raise DomainError(msg)
    bx, by = region.boundary[:, 0], region.boundary[:, 1]
    return float(bx[0] * by[0] + np.sum(np.diff(bx) * (by[:-1] + by[1:]) / 2.0))


def dynamic_gain(static: RateRegion, dynamic: RateRegion) -> float:
    """area(dynamic) / area(static)."""
    base = region_area(static)
    if base <= 0:
        msg = "static region has zero area"
        raise DomainError(msg)
    return region_area(dynamic) / base


def region_to_csv(
    region: RateRegion, path: Union[str, Path], metadata: Optional[Dict[str, Any]] = None
) -> Path:
    header: Dict[str, Any] = {
        "scheme": region.scheme.value,
        "mode": region.config_mode.value,
        "total_power": repr(float(region.total_power)),
    }
    header.update(region.metadata)
    header.update(metadata or {})
    columns = [f"R{k + 1}" for k in range(region.num_users)]
    return write_points_csv(path, columns, region.boundary, header)


def region_from_csv(path: Union[str, Path]) -> RateRegion:
    meta, columns, rows = read_points_csv(path)
    for key in ("scheme", "mode", "total_power"):
        if key not in meta:
            msg = f"{path} lacks the '#{key}=' metadata line"
            raise DomainError(msg)
    boundary = rows.reshape(-1, len(columns))
    extra = {k: v for k, v in meta.items() if k not in ("scheme", "mode", "total_power")}
    return RateRegion(
        boundary,
        boundary,
        Scheme(meta["scheme"]),
        ConfigMode(meta["mode"]),
        float(meta["total_power"]),
        extra,
    )
