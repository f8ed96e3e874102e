"""Shared fixtures: small random channel sets and acceptance geometries."""

import numpy as np
import pytest

from ris_noma.channel_models import ChannelSet, NetworkGeometry


def gaussian(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@pytest.fixture
def make_channels():
    """Factory for unit-scale Rayleigh channel sets with one RIS."""

    def factory(
        seed: int = 0,
        users: int = 2,
        antennas: int = 1,
        elements: int = 2,
        blocked: bool = False,
        direct_scale: float = 1.0,
    ) -> ChannelSet:
        rng = np.random.default_rng(seed)
        direct = direct_scale * gaussian(rng, users, antennas)
        if blocked:
            direct = np.zeros((users, antennas), dtype=complex)
        return ChannelSet(
            direct,
            (gaussian(rng, elements, antennas),),
            (gaussian(rng, users, elements),),
            np.full(users, blocked),
        )

    return factory


@pytest.fixture
def symmetric_geometry() -> NetworkGeometry:
    """Four users mirrored about x = 37.5 m, RIS on the x-axis."""
    return NetworkGeometry(
        bs_position=(0.0, 0.0, 5.0),
        ris_positions=((37.5, 0.0, 1.5),),
        user_positions=(
            (36.5, 1.32, 0.0),
            (38.5, 1.32, 0.0),
            (36.5, -1.32, 0.0),
            (38.5, -1.32, 0.0),
        ),
    )


def direction_grid(points: int = 40) -> np.ndarray:
    """Unit vectors [cos t, sin t e^{i p}] covering C^2 up to a global phase."""
    theta, phi = np.meshgrid(
        np.linspace(0, np.pi / 2, points), np.linspace(0, 2 * np.pi, points, endpoint=False)
    )
    theta, phi = theta.ravel(), phi.ravel()
    return np.column_stack([np.cos(theta), np.sin(theta) * np.exp(1j * phi)])


def grid_power_oracle(h_m, h_n, targets, noise, points: int = 40) -> float:
    """Cheapest SIC-feasible power over a grid of two-antenna beam directions.

    User n is kept tight; user m takes the larger of its two requirements and
    direction pairs whose SINR_nm would fall below SINR_mm are dropped.
    """
    t_m, t_n = targets
    dirs = direction_grid(points)
    mm = np.abs(dirs.conj() @ h_m) ** 2
    nm = np.abs(dirs.conj() @ h_n) ** 2
    mn, nn = mm[None, :], nm[None, :]
    mm, nm = mm[:, None], nm[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        p_n = t_n * noise / nn
        p_m = t_m * np.maximum((p_n * mn + noise) / mm, (p_n * nn + noise) / nm)
        ordered = nm * (p_n * mn + noise) >= mm * (p_n * nn + noise)
        total = np.where(ordered & np.isfinite(p_m), p_m + p_n, np.inf)
    return float(np.min(total))
