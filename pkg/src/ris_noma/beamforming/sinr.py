"""Two-user SIC rates for a multi-antenna BS.

Channel vectors follow the ``h^H w`` convention: the amplitude user k sees
from beamformer w is ``np.vdot(h_k, w)``.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ris_noma.errors import DimensionError, DomainError


@dataclass(frozen=True, eq=False)
class BeamformerSet:
    """Per-user or per-cluster transmit beamformers as rows of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=complex))
        if vectors.ndim != 2:
            msg = f"beamformers must form a (count, N_t) array, got {vectors.shape}"
            raise DimensionError(msg)
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def of(cls, *vectors: Sequence[complex]) -> "BeamformerSet":
        """Stack one beamformer per argument.

        Args:
            *vectors: Equal-length complex vectors, one per user or cluster

        Returns:
            BeamformerSet whose rows are the flattened vectors
        """
        return cls(np.vstack([np.asarray(v, dtype=complex).reshape(-1) for v in vectors]))

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def __getitem__(self, index: int) -> np.ndarray:
        return self.vectors[index]

    @property
    def num_antennas(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def total_power(self) -> float:
        """Sum of squared beamformer norms."""
        return float(np.sum(np.abs(self.vectors) ** 2))

    def within_budget(self, budget: float, tolerance: float = 1e-9) -> bool:
        """Whether the total power fits the budget.

        Args:
            budget: Transmit power budget
            tolerance: Relative and absolute slack on the comparison

        Returns:
            True if total_power <= budget (1 + tolerance) + tolerance
        """
        return self.total_power <= budget * (1 + tolerance) + tolerance


@dataclass(frozen=True)
class SicRateTriple:
    r_mm: float
    r_nm: float
    r_nn: float

    def __post_init__(self) -> None:
        if min(self.r_mm, self.r_nm, self.r_nn) < 0:
            msg = f"rates must be >= 0, got {self}"
            raise DomainError(msg)

    @property
    def margin(self) -> float:
        """r_nm - r_mm; non-negative when the strong user can cancel m."""
        return self.r_nm - self.r_mm


def _pair(h_m: np.ndarray, h_n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(h_m, dtype=complex).reshape(-1)
    b = np.asarray(h_n, dtype=complex).reshape(-1)
    if a.shape != b.shape:
        msg = f"channel vectors disagree in length: {a.shape[0]} vs {b.shape[0]}"
        raise DimensionError(msg)
    return a, b


def received_powers(h: np.ndarray, beamformers: BeamformerSet) -> np.ndarray:
    """|h^H w_j|^2 for every beamformer j."""
    h = np.asarray(h, dtype=complex).reshape(-1)
    if h.shape[0] != beamformers.num_antennas:
        msg = f"channel has {h.shape[0]} antennas, beamformers have {beamformers.num_antennas}"
        raise DimensionError(msg)
    return np.abs(beamformers.vectors.conj() @ h) ** 2


def sic_sinrs(
    h_m: np.ndarray, h_n: np.ndarray, w_m: np.ndarray, w_n: np.ndarray, noise: float
) -> Tuple[float, float, float]:
    """(SINR_mm, SINR_nm, SNR_nn) of the two-user SIC receiver pair."""
    if not noise > 0:
        msg = f"noise power must be > 0, got {noise}"
        raise DomainError(msg)
    a, b = _pair(h_m, h_n)
    wm, wn = _pair(w_m, w_n)
    if wm.shape != a.shape:
        msg = f"beamformers have {wm.shape[0]} antennas, channels have {a.shape[0]}"
        raise DimensionError(msg)
    mm = abs(np.vdot(a, wm)) ** 2 / (abs(np.vdot(a, wn)) ** 2 + noise)
    nm = abs(np.vdot(b, wm)) ** 2 / (abs(np.vdot(b, wn)) ** 2 + noise)
    nn = abs(np.vdot(b, wn)) ** 2 / noise
    return float(mm), float(nm), float(nn)


def sic_rate_triple(
    h_m: np.ndarray, h_n: np.ndarray, w_m: np.ndarray, w_n: np.ndarray, noise: float
) -> SicRateTriple:
    """Rates of user m at both receivers and of user n after cancellation."""
    mm, nm, nn = sic_sinrs(h_m, h_n, w_m, w_n, noise)
    return SicRateTriple(float(np.log2(1 + mm)), float(np.log2(1 + nm)), float(np.log2(1 + nn)))


def sic_condition(triple: SicRateTriple, tolerance: float = 0.0) -> bool:
    """True iff user n can decode user m: r_nm >= r_mm - tolerance."""
    return triple.r_nm >= triple.r_mm - tolerance
