"""Channel generation and composition of direct plus RIS-reflected links.

All channels handed out by :func:`draw_channels` are already divided by the
noise amplitude, so ``|h|**2`` is an SNR per watt of transmit power and the
rate formulas downstream use a unit noise floor.
"""

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ris_noma.errors import DimensionError, DomainError

logger = structlog.get_logger(__name__)

# Conventional defaults; every one of them is overridable from the config.
DEFAULT_REFERENCE_LOSS_DB = 30.0
DEFAULT_REFLECTED_EXPONENT = 2.2
DEFAULT_DIRECT_EXPONENT = 3.5
DEFAULT_RICIAN_K = 3.0
DEFAULT_NOISE_DBM = -80.0
DEFAULT_TRANSMIT_POWER_DBM = 20.0

_AMPLITUDE_SLACK = 1e-9
_PHASE_GRID_SLACK = 1e-9

Position = Tuple[float, float, float]


class FadingModel(str, Enum):
    """Small-scale fading law of a link."""

    RAYLEIGH = "rayleigh"
    RICIAN = "rician"


@dataclass(frozen=True)
class FadingSpec:
    """Fading law plus distance-dependent path loss of one link type."""

    model: FadingModel = FadingModel.RAYLEIGH
    rician_k: float = DEFAULT_RICIAN_K
    path_loss_exponent: float = DEFAULT_REFLECTED_EXPONENT
    reference_loss_db: float = DEFAULT_REFERENCE_LOSS_DB

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", FadingModel(self.model))
        if not self.rician_k >= 0:
            msg = f"rician_k must be >= 0, got {self.rician_k}"
            raise DomainError(msg)
        if not self.path_loss_exponent > 0:
            msg = f"path_loss_exponent must be > 0, got {self.path_loss_exponent}"
            raise DomainError(msg)


def _default_direct() -> FadingSpec:
    return FadingSpec(FadingModel.RAYLEIGH, path_loss_exponent=DEFAULT_DIRECT_EXPONENT)


def _default_reflected() -> FadingSpec:
    return FadingSpec(FadingModel.RICIAN, path_loss_exponent=DEFAULT_REFLECTED_EXPONENT)


@dataclass(frozen=True)
class LinkFading:
    """Fading of the direct BS-user links and of both hops of the reflected links."""

    direct: FadingSpec = field(default_factory=_default_direct)
    reflected: FadingSpec = field(default_factory=_default_reflected)


@dataclass(frozen=True)
class SystemParams:
    """Transmit power and receiver noise, both in dBm."""

    transmit_power_dbm: float = DEFAULT_TRANSMIT_POWER_DBM
    noise_dbm: float = DEFAULT_NOISE_DBM

    @property
    def transmit_power_w(self) -> float:
        return dbm_to_watts(self.transmit_power_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)


@dataclass(frozen=True)
class NetworkGeometry:
    """3D positions in meters of the BS, the RISs and the users."""

    bs_position: Position = (0.0, 0.0, 5.0)
    ris_positions: Tuple[Position, ...] = ((37.5, 0.0, 1.5),)
    user_positions: Tuple[Position, ...] = ((37.5, 2.0, 0.0),)

    def __post_init__(self) -> None:
        bs = _as_position(self.bs_position, "bs_position")
        ris = tuple(_as_position(p, "ris_positions") for p in self.ris_positions)
        users = tuple(_as_position(p, "user_positions") for p in self.user_positions)
        if not users:
            msg = "NetworkGeometry needs at least one user"
            raise DomainError(msg)
        object.__setattr__(self, "bs_position", bs)
        object.__setattr__(self, "ris_positions", ris)
        object.__setattr__(self, "user_positions", users)

    @property
    def num_users(self) -> int:
        return len(self.user_positions)

    def with_ris_x(self, x: float, ris_index: int = 0) -> "NetworkGeometry":
        """Return a copy with one RIS moved to horizontal coordinate ``x``."""
        moved = list(self.ris_positions)
        _, y, z = moved[ris_index]
        moved[ris_index] = (float(x), y, z)
        return replace(self, ris_positions=tuple(moved))


def _as_position(value: Sequence[float], name: str) -> Position:
    coords = tuple(float(c) for c in value)
    if len(coords) != 3:
        msg = f"{name} entries must have 3 coordinates, got {len(coords)}"
        raise DomainError(msg)
    if not all(math.isfinite(c) for c in coords):
        msg = f"{name} entries must be finite, got {coords}"
        raise DomainError(msg)
    if coords[2] < 0:
        msg = f"{name} heights must be >= 0, got {coords[2]}"
        raise DomainError(msg)
    return coords  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class RisProfile:
    """Per-element reflection coefficients of one RIS.

    ``resolution_bits`` is ``None`` for continuous phase shifters.
    """

    coefficients: np.ndarray
    resolution_bits: Optional[int] = None

    def __post_init__(self) -> None:
        coeffs = np.atleast_1d(np.asarray(self.coefficients, dtype=complex))
        if coeffs.ndim != 1:
            msg = f"coefficients must be one-dimensional, got shape {coeffs.shape}"
            raise DimensionError(msg)
        if np.any(np.abs(coeffs) > 1 + _AMPLITUDE_SLACK):
            msg = "reflection coefficients must satisfy |c| <= 1"
            raise DomainError(msg)
        bits = self.resolution_bits
        if bits is not None:
            if int(bits) != bits or bits < 1:
                msg = f"resolution_bits must be a positive integer, got {bits}"
                raise DomainError(msg)
            step = 2 * np.pi / 2**bits
            active = np.abs(coeffs) > 0
            ratio = np.mod(np.angle(coeffs[active]), 2 * np.pi) / step
            off_grid = np.abs(ratio - np.round(ratio)) > _PHASE_GRID_SLACK
            if np.any(off_grid):
                msg = f"phases are not on the {bits}-bit grid"
                raise DomainError(msg)
            object.__setattr__(self, "resolution_bits", int(bits))
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_phases(
        cls,
        phases: Sequence[float],
        bits: Optional[int] = None,
        amplitudes: Optional[Sequence[float]] = None,
    ) -> "RisProfile":
        phases_arr = np.asarray(phases, dtype=float)
        amps = np.ones_like(phases_arr) if amplitudes is None else np.asarray(amplitudes)
        if np.any(amps < 0) or np.any(amps > 1):
            msg = "amplitudes must lie in [0, 1]"
            raise DomainError(msg)
        return cls(amps * np.exp(1j * phases_arr), bits)

    @classmethod
    def unit(cls, elements: int, bits: Optional[int] = None) -> "RisProfile":
        """Lossless profile with every phase at zero."""
        return cls(np.ones(elements, dtype=complex), bits)

    @property
    def elements(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.coefficients)

    @property
    def phases(self) -> np.ndarray:
        return np.mod(np.angle(self.coefficients), 2 * np.pi)

    @property
    def is_continuous(self) -> bool:
        return self.resolution_bits is None

    def quantize(self, bits: int) -> "RisProfile":
        return quantize_profile(self, bits)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Complex channels of one realization.

    Shapes: ``direct`` (K, N_t); per RIS r ``bs_ris[r]`` (M_r, N_t) and
    ``ris_user[r]`` (K, M_r); ``blocked_direct`` (K,). Single-antenna BSs use
    N_t = 1.
    """

    direct: np.ndarray
    bs_ris: Tuple[np.ndarray, ...]
    ris_user: Tuple[np.ndarray, ...]
    blocked_direct: np.ndarray

    def __post_init__(self) -> None:
        direct = np.asarray(self.direct, dtype=complex)
        if direct.ndim == 1:
            direct = direct[:, None]
        if direct.ndim != 2 or direct.shape[0] < 1:
            msg = f"direct must have shape (K, N_t), got {direct.shape}"
            raise DimensionError(msg)
        users, antennas = direct.shape

        bs_ris = tuple(np.asarray(f, dtype=complex) for f in self.bs_ris)
        bs_ris = tuple(f[:, None] if f.ndim == 1 else f for f in bs_ris)
        ris_user = tuple(np.asarray(g, dtype=complex) for g in self.ris_user)
        if len(bs_ris) != len(ris_user):
            msg = f"got {len(bs_ris)} BS-RIS and {len(ris_user)} RIS-user channel sets"
            raise DimensionError(msg)
        for r, (f, g) in enumerate(zip(bs_ris, ris_user)):
            if f.ndim != 2 or f.shape[1] != antennas:
                msg = f"bs_ris[{r}] must have shape (M, {antennas}), got {f.shape}"
                raise DimensionError(msg)
            if g.shape != (users, f.shape[0]):
                msg = f"ris_user[{r}] must have shape ({users}, {f.shape[0]}), got {g.shape}"
                raise DimensionError(msg)

        blocked = np.broadcast_to(
            np.asarray(self.blocked_direct, dtype=bool), (users,)
        ).copy()
        if np.any(direct[blocked] != 0):
            msg = "blocked users must have an identically zero direct channel"
            raise DomainError(msg)

        object.__setattr__(self, "direct", direct)
        object.__setattr__(self, "bs_ris", bs_ris)
        object.__setattr__(self, "ris_user", ris_user)
        object.__setattr__(self, "blocked_direct", blocked)

    @property
    def num_users(self) -> int:
        return int(self.direct.shape[0])

    @property
    def num_antennas(self) -> int:
        return int(self.direct.shape[1])

    @property
    def num_ris(self) -> int:
        return len(self.bs_ris)

    def elements(self, ris_index: int = 0) -> int:
        if self.num_ris == 0:
            return 0
        return int(self.bs_ris[ris_index].shape[0])

    def unit_profiles(self) -> Tuple[RisProfile, ...]:
        return tuple(RisProfile.unit(f.shape[0]) for f in self.bs_ris)

    def _check_profiles(self, profiles: Sequence[RisProfile]) -> None:
        if len(profiles) != self.num_ris:
            msg = f"expected {self.num_ris} RIS profiles, got {len(profiles)}"
            raise DimensionError(msg)

    def equivalent(self, user: int, profiles: Sequence[RisProfile]) -> np.ndarray:
        """Equivalent channel of one user, summed over every RIS."""
        self._check_profiles(profiles)
        total = self.direct[user].copy()
        for f, g, profile in zip(self.bs_ris, self.ris_user, profiles):
            total += equivalent_channel(0, g[user], f, profile)
        return total

    def equivalent_rows(self, profiles: Sequence[RisProfile]) -> np.ndarray:
        """Equivalent channels of all users as a (K, N_t) array."""
        self._check_profiles(profiles)
        rows = self.direct.copy()
        for f, g, profile in zip(self.bs_ris, self.ris_user, profiles):
            if profile.elements != f.shape[0]:
                msg = f"profile has {profile.elements} elements, RIS has {f.shape[0]}"
                raise DimensionError(msg)
            rows += (g.conj() * profile.coefficients[None, :]) @ f
        return rows

    def cascade(self, ris_index: int = 0) -> np.ndarray:
        """Per-element cascaded coefficients conj(g_km) * F_m as (K, M, N_t)."""
        f = self.bs_ris[ris_index]
        g = self.ris_user[ris_index]
        return g.conj()[:, :, None] * f[None, :, :]

    def batch_rows(self, coefficients: np.ndarray, ris_index: int = 0) -> np.ndarray:
        """Equivalent channels for a stack of profiles of one RIS.

        ``coefficients`` has shape (P, M); the other RISs, if any, keep unit
        profiles. Returns a (P, K, N_t) array.
        """
        coefficients = np.atleast_2d(np.asarray(coefficients, dtype=complex))
        base = self.direct.copy()
        for r, f in enumerate(self.bs_ris):
            if r != ris_index:
                base += self.ris_user[r].conj() @ f
        if self.num_ris == 0:
            return np.broadcast_to(base, (coefficients.shape[0], *base.shape)).copy()
        cascade = self.cascade(ris_index)
        if coefficients.shape[1] != cascade.shape[1]:
            msg = (
                f"profiles have {coefficients.shape[1]} elements, "
                f"RIS has {cascade.shape[1]}"
            )
            raise DimensionError(msg)
        return base[None] + np.einsum("pm,kmn->pkn", coefficients, cascade)

    def effective_gains(self, profiles: Sequence[RisProfile]) -> np.ndarray:
        """Per-user |h_k|^2 for a single-antenna BS."""
        self._require_single_antenna()
        return np.abs(self.equivalent_rows(profiles)[:, 0]) ** 2

    def aligned_gains(self) -> np.ndarray:
        """Per-user gain when every RIS is phase-aligned to that user."""
        self._require_single_antenna()
        gains = np.empty(self.num_users)
        for k in range(self.num_users):
            profiles = [
                align_phases(self.direct[k, 0], g[k], f[:, 0])
                for f, g in zip(self.bs_ris, self.ris_user)
            ]
            gains[k] = float(np.abs(self.equivalent(k, profiles)[0]) ** 2)
        return gains

    def _require_single_antenna(self) -> None:
        if self.num_antennas != 1:
            msg = f"operation needs a single-antenna BS, channels have N_t={self.num_antennas}"
            raise DimensionError(msg)

    def permuted(self, order: Sequence[int]) -> "ChannelSet":
        """Relabel users so that new user i is old user ``order[i]``."""
        idx = np.asarray(order)
        return ChannelSet(
            self.direct[idx],
            self.bs_ris,
            tuple(g[idx] for g in self.ris_user),
            self.blocked_direct[idx],
        )


def dbm_to_watts(dbm: float) -> float:
    return 10 ** ((dbm - 30.0) / 10.0)


def path_loss(distance: float, spec: FadingSpec) -> float:
    """Linear power gain 10^(-L0/10) * d^(-alpha) of a link of length ``distance``."""
    if not distance > 0:
        msg = f"path loss needs a positive distance, got {distance}"
        raise DomainError(msg)
    return 10 ** (-spec.reference_loss_db / 10.0) * distance ** (-spec.path_loss_exponent)


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for the sub-stream ``key`` of ``seed``.

    Keys used by :func:`draw_channels`: (draw, 0, r) for BS-RIS r,
    (draw, 1, r, k) for RIS r to user k and (draw, 2, k) for BS to user k.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


def steering_vector(count: int, source: Sequence[float], target: Sequence[float]) -> np.ndarray:
    """Far-field unit-modulus response of a half-wavelength array along x.

    The phase progresses linearly with the direction cosine from ``source``
    towards ``target``.
    """
    delta = np.asarray(target, dtype=float) - np.asarray(source, dtype=float)
    distance = float(np.linalg.norm(delta))
    cosine = delta[0] / distance if distance > 0 else 0.0
    return np.exp(-1j * np.pi * np.arange(count) * cosine)


def sample_channel(
    dimension: int,
    spec: FadingSpec,
    los_direction: Optional[np.ndarray],
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one unit-power fading vector.

    Rayleigh entries are CN(0, 1). Rician entries mix the deterministic LoS
    vector and a CN(0, 1) scattered part with weights sqrt(K/(K+1)) and
    sqrt(1/(K+1)). Path loss is applied by the caller.
    """
    if dimension < 1:
        msg = f"dimension must be >= 1, got {dimension}"
        raise DomainError(msg)
    scattered = (
        rng.standard_normal(dimension) + 1j * rng.standard_normal(dimension)
    ) / np.sqrt(2.0)
    if spec.model is FadingModel.RAYLEIGH:
        return scattered

    if los_direction is None:
        msg = "Rician fading needs a LoS direction"
        raise DomainError(msg)
    los = np.asarray(los_direction, dtype=complex).reshape(-1)
    if los.shape[0] != dimension:
        msg = f"LoS direction has {los.shape[0]} entries, expected {dimension}"
        raise DimensionError(msg)
    if np.any(np.abs(np.abs(los) - 1.0) > 1e-9):
        msg = "LoS direction entries must have unit magnitude"
        raise DomainError(msg)
    k = spec.rician_k
    return np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * scattered


def equivalent_channel(
    direct: Union[complex, np.ndarray],
    ris_user: np.ndarray,
    bs_ris: np.ndarray,
    profile: RisProfile,
) -> np.ndarray:
    """direct + g^H diag(theta) F as a length-N_t vector."""
    g = np.asarray(ris_user, dtype=complex).reshape(-1)
    f = np.asarray(bs_ris, dtype=complex)
    if f.ndim == 1:
        f = f[:, None]
    antennas = f.shape[1]
    d = np.asarray(direct, dtype=complex).reshape(-1)
    if d.shape[0] == 1 and antennas > 1:
        d = np.broadcast_to(d, (antennas,))
    if f.shape[0] != g.shape[0] or profile.elements != g.shape[0]:
        msg = (
            f"element counts disagree: ris_user {g.shape[0]}, bs_ris {f.shape[0]}, "
            f"profile {profile.elements}"
        )
        raise DimensionError(msg)
    if d.shape[0] != antennas:
        msg = f"direct channel has {d.shape[0]} entries, bs_ris has {antennas} columns"
        raise DimensionError(msg)
    return d + (g.conj() * profile.coefficients) @ f


def align_phases(
    direct: complex, ris_user: np.ndarray, bs_ris: np.ndarray
) -> RisProfile:
    """Continuous profile that co-phases every cascaded term with the direct link."""
    g = np.asarray(ris_user, dtype=complex).reshape(-1)
    f = np.asarray(bs_ris, dtype=complex).reshape(-1)
    if g.shape != f.shape:
        msg = f"ris_user has {g.shape[0]} elements, bs_ris has {f.shape[0]}"
        raise DimensionError(msg)
    phases = np.angle(complex(direct)) - np.angle(g.conj()) - np.angle(f)
    return RisProfile(np.exp(1j * phases))


def quantize_profile(profile: RisProfile, bits: int) -> RisProfile:
    """Project every phase onto the nearest of the 2^bits uniform levels."""
    if bits < 1:
        msg = f"bits must be >= 1, got {bits}"
        raise DomainError(msg)
    levels = 2**bits
    step = 2 * np.pi / levels
    index = np.mod(np.round(profile.phases / step), levels)
    return RisProfile(profile.amplitudes * np.exp(1j * index * step), bits)


def discrete_phase_matrix(bits: int, elements: int) -> np.ndarray:
    """All 2^(bits*elements) phase vectors as rows, first element slowest."""
    step = 2 * np.pi / 2**bits
    if elements == 0:
        return np.zeros((1, 0))
    grid = np.array(list(itertools.product(range(2**bits), repeat=elements)))
    return grid * step


def discrete_profiles(bits: int, elements: int) -> Iterator[RisProfile]:
    for phases in discrete_phase_matrix(bits, elements):
        yield RisProfile.from_phases(phases, bits)


def draw_channels(
    geometry: NetworkGeometry,
    fading: LinkFading,
    system: SystemParams,
    *,
    seed: int,
    draw: int = 0,
    antennas: int = 1,
    elements: Union[int, Sequence[int]] = 8,
    blocked_direct: Union[bool, Sequence[bool]] = False,
) -> ChannelSet:
    """Noise-normalized channels of one Monte Carlo realization.

    Every link has its own generator sub-stream, so blocking a link or moving
    the RIS never changes the fading drawn for any other link. Cascaded path
    loss is the product of the two hop losses.
    """
    if antennas < 1:
        msg = f"antennas must be >= 1, got {antennas}"
        raise DomainError(msg)
    counts = (
        [int(elements)] * len(geometry.ris_positions)
        if isinstance(elements, (int, np.integer))
        else [int(m) for m in elements]
    )
    if len(counts) != len(geometry.ris_positions):
        msg = f"got {len(counts)} element counts for {len(geometry.ris_positions)} RISs"
        raise DimensionError(msg)
    users = geometry.num_users
    blocked = np.broadcast_to(np.asarray(blocked_direct, dtype=bool), (users,))
    noise_amplitude = math.sqrt(system.noise_w)
    bs = np.asarray(geometry.bs_position)

    direct = np.zeros((users, antennas), dtype=complex)
    for k, user in enumerate(geometry.user_positions):
        distance = float(np.linalg.norm(np.asarray(user) - bs))
        scale = math.sqrt(path_loss(distance, fading.direct)) / noise_amplitude
        los = steering_vector(antennas, bs, user)
        h = sample_channel(antennas, fading.direct, los, stream_rng(seed, draw, 2, k))
        if not blocked[k]:
            direct[k] = scale * h

    bs_ris = []
    ris_user = []
    for r, (ris, count) in enumerate(zip(geometry.ris_positions, counts)):
        if count == 0:
            bs_ris.append(np.zeros((0, antennas), dtype=complex))
            ris_user.append(np.zeros((users, 0), dtype=complex))
            continue
        hop = float(np.linalg.norm(np.asarray(ris) - bs))
        los = np.outer(steering_vector(count, ris, bs), steering_vector(antennas, bs, ris))
        f = sample_channel(
            count * antennas, fading.reflected, los.ravel(), stream_rng(seed, draw, 0, r)
        ).reshape(count, antennas)
        bs_ris.append(math.sqrt(path_loss(hop, fading.reflected)) * f)

        g = np.empty((users, count), dtype=complex)
        for k, user in enumerate(geometry.user_positions):
            distance = float(np.linalg.norm(np.asarray(user) - np.asarray(ris)))
            scale = math.sqrt(path_loss(distance, fading.reflected)) / noise_amplitude
            los_user = steering_vector(count, ris, user)
            g[k] = scale * sample_channel(
                count, fading.reflected, los_user, stream_rng(seed, draw, 1, r, k)
            )
        ris_user.append(g)

    logger.debug(
        "channels_drawn",
        seed=seed,
        draw=draw,
        users=users,
        antennas=antennas,
        elements=counts,
        blocked=int(blocked.sum()),
    )
    return ChannelSet(direct, tuple(bs_ris), tuple(ris_user), blocked)
