"""Tests for channel generation and equivalent-channel composition."""

import numpy as np
import pytest

from ris_noma.channel_models import (
    ChannelSet,
    FadingModel,
    FadingSpec,
    LinkFading,
    NetworkGeometry,
    RisProfile,
    SystemParams,
    align_phases,
    dbm_to_watts,
    discrete_profiles,
    draw_channels,
    equivalent_channel,
    path_loss,
    quantize_profile,
    sample_channel,
    stream_rng,
)
from ris_noma.errors import DimensionError, DomainError


class TestPathLoss:
    """Test cases for distance-dependent path loss."""

    def test_reference_distance(self):
        """At 1 m the gain equals the reference loss."""
        spec = FadingSpec(path_loss_exponent=2.2, reference_loss_db=30.0)
        assert path_loss(1.0, spec) == pytest.approx(1e-3)

    def test_exponent(self):
        """Doubling the distance scales the gain by 2^-alpha."""
        spec = FadingSpec(path_loss_exponent=3.5)
        assert path_loss(20.0, spec) / path_loss(10.0, spec) == pytest.approx(2**-3.5)

    def test_zero_distance_rejected(self):
        """A link of length zero has no defined path loss."""
        with pytest.raises(DomainError):
            path_loss(0.0, FadingSpec())

    def test_dbm_conversion(self):
        """30 dBm is one watt."""
        assert dbm_to_watts(30.0) == pytest.approx(1.0)
        assert dbm_to_watts(-80.0) == pytest.approx(1e-11)

    def test_invalid_fading_spec(self):
        """Negative Rician factors and exponents are rejected."""
        with pytest.raises(DomainError):
            FadingSpec(rician_k=-1.0)
        with pytest.raises(DomainError):
            FadingSpec(path_loss_exponent=0.0)


class TestRisProfile:
    """Test cases for reflection profiles."""

    def test_amplitude_bound(self):
        """Coefficients with modulus above one are rejected."""
        with pytest.raises(DomainError):
            RisProfile(np.array([1.5 + 0j]))

    def test_off_grid_phase_rejected(self):
        """A B-bit profile must sit on the uniform phase grid."""
        with pytest.raises(DomainError):
            RisProfile(np.exp(1j * np.array([0.3])), resolution_bits=1)

    def test_from_phases_on_grid(self):
        """from_phases accepts grid phases and reports them back."""
        profile = RisProfile.from_phases([0.0, np.pi / 2, np.pi], bits=2)
        assert profile.resolution_bits == 2
        assert np.allclose(profile.phases, [0.0, np.pi / 2, np.pi])

    def test_quantize_to_nearest_level(self):
        """Quantization moves every phase by at most half a level."""
        rng = np.random.default_rng(3)
        profile = RisProfile.from_phases(rng.uniform(0, 2 * np.pi, 16))
        for bits in (1, 2, 3):
            quantized = quantize_profile(profile, bits)
            diff = np.angle(quantized.coefficients * profile.coefficients.conj())
            assert np.all(np.abs(diff) <= np.pi / 2**bits + 1e-12)

    def test_discrete_profiles_count(self):
        """All 2^(B*M) profiles are enumerated exactly once."""
        profiles = list(discrete_profiles(2, 3))
        assert len(profiles) == 64
        keys = {tuple(np.round(p.phases, 9)) for p in profiles}
        assert len(keys) == 64


class TestEquivalentChannel:
    """Test cases for direct plus reflected composition."""

    def test_no_ris(self):
        """With zero elements the equivalent channel is the direct link."""
        direct = np.array([0.3 - 0.2j])
        result = equivalent_channel(
            direct, np.zeros(0), np.zeros((0, 1)), RisProfile(np.zeros(0))
        )
        assert np.allclose(result, direct)

    def test_matches_explicit_sum(self):
        """d + sum_m conj(g_m) theta_m f_m for a single antenna."""
        rng = np.random.default_rng(7)
        g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        f = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        profile = RisProfile.from_phases(rng.uniform(0, 2 * np.pi, 4))
        expected = 0.5 + sum(np.conj(g[m]) * profile.coefficients[m] * f[m] for m in range(4))
        assert equivalent_channel(0.5, g, f, profile)[0] == pytest.approx(expected)

    def test_element_mismatch(self):
        """Profiles must match the RIS element count."""
        with pytest.raises(DimensionError):
            equivalent_channel(0.0, np.ones(3), np.ones(3), RisProfile(np.ones(2)))

    def test_align_phases_is_extremal(self):
        """Aligned phases reach (|d| + sum |g||f|)^2 and beat random profiles."""
        rng = np.random.default_rng(11)
        for _ in range(1000):
            d = complex(rng.standard_normal(), rng.standard_normal())
            g = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            f = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            aligned = align_phases(d, g, f)
            gain = abs(equivalent_channel(d, g, f, aligned)[0]) ** 2
            bound = (abs(d) + np.sum(np.abs(g) * np.abs(f))) ** 2
            assert gain == pytest.approx(bound, rel=1e-10)
            other = RisProfile.from_phases(rng.uniform(0, 2 * np.pi, 5))
            assert abs(equivalent_channel(d, g, f, other)[0]) ** 2 <= gain + 1e-10


class TestChannelSet:
    """Test cases for the ChannelSet container."""

    def test_blocked_user_needs_zero_direct(self):
        """Blocked users cannot carry a direct channel."""
        with pytest.raises(DomainError):
            ChannelSet(np.ones((1, 1)), (), (), np.array([True]))

    def test_shape_mismatch(self):
        """RIS-user channels must have one row per user."""
        with pytest.raises(DimensionError):
            ChannelSet(np.ones((2, 1)), (np.ones((3, 1)),), (np.ones((1, 3)),), np.zeros(2))

    def test_batch_rows_match_equivalent_rows(self, make_channels):
        """The batched path agrees with per-profile composition."""
        channels = make_channels(seed=2, users=3, antennas=2, elements=3)
        profiles = [RisProfile(c) for c in np.exp(1j * np.random.default_rng(0).uniform(0, 6, (5, 3)))]
        batch = channels.batch_rows(np.vstack([p.coefficients for p in profiles]))
        for p, profile in enumerate(profiles):
            assert np.allclose(batch[p], channels.equivalent_rows([profile]))

    def test_aligned_gains_single_user(self, make_channels):
        """A single user's aligned gain matches align_phases directly."""
        channels = make_channels(seed=5, users=1, elements=4)
        profile = align_phases(
            channels.direct[0, 0], channels.ris_user[0][0], channels.bs_ris[0][:, 0]
        )
        expected = abs(channels.equivalent(0, [profile])[0]) ** 2
        assert channels.aligned_gains()[0] == pytest.approx(expected)

    def test_permuted_relabels_users(self, make_channels):
        """Permutation moves users together with their RIS channels."""
        channels = make_channels(seed=4, users=3)
        swapped = channels.permuted([2, 0, 1])
        unit = channels.unit_profiles()
        assert np.allclose(swapped.effective_gains(unit), channels.effective_gains(unit)[[2, 0, 1]])

    def test_effective_gains_need_single_antenna(self, make_channels):
        """Scalar gains are only defined for N_t = 1."""
        channels = make_channels(antennas=2)
        with pytest.raises(DimensionError):
            channels.effective_gains(channels.unit_profiles())


class TestDrawChannels:
    """Test cases for seeded channel realizations."""

    def _geometry(self, x: float = 37.5) -> NetworkGeometry:
        return NetworkGeometry(
            ris_positions=((x, 0.0, 1.5),),
            user_positions=((36.5, 1.0, 0.0), (38.5, -1.0, 0.0)),
        )

    def test_deterministic(self):
        """Same seed and draw index give identical channels."""
        a = draw_channels(self._geometry(), LinkFading(), SystemParams(), seed=9, draw=3)
        b = draw_channels(self._geometry(), LinkFading(), SystemParams(), seed=9, draw=3)
        assert np.array_equal(a.direct, b.direct)
        assert np.array_equal(a.ris_user[0], b.ris_user[0])

    def test_draws_differ(self):
        """Different draw indices give different fading."""
        a = draw_channels(self._geometry(), LinkFading(), SystemParams(), seed=9, draw=0)
        b = draw_channels(self._geometry(), LinkFading(), SystemParams(), seed=9, draw=1)
        assert not np.allclose(a.direct, b.direct)

    def test_blocking_keeps_other_streams(self):
        """Blocking the direct links leaves the reflected links untouched."""
        open_ = draw_channels(self._geometry(), LinkFading(), SystemParams(), seed=1)
        blocked = draw_channels(
            self._geometry(), LinkFading(), SystemParams(), seed=1, blocked_direct=True
        )
        assert np.all(blocked.direct == 0)
        assert np.all(blocked.blocked_direct)
        assert np.array_equal(open_.ris_user[0], blocked.ris_user[0])
        assert np.array_equal(open_.bs_ris[0], blocked.bs_ris[0])

    def test_moving_ris_keeps_direct_links(self):
        """Common random numbers: the direct links do not depend on the RIS position."""
        a = draw_channels(self._geometry(32.0), LinkFading(), SystemParams(), seed=5)
        b = draw_channels(self._geometry(42.0), LinkFading(), SystemParams(), seed=5)
        assert np.array_equal(a.direct, b.direct)

    def test_shapes(self):
        """Multi-antenna draws carry (K, N_t), (M, N_t) and (K, M) blocks."""
        channels = draw_channels(
            self._geometry(), LinkFading(), SystemParams(), seed=0, antennas=3, elements=5
        )
        assert channels.direct.shape == (2, 3)
        assert channels.bs_ris[0].shape == (5, 3)
        assert channels.ris_user[0].shape == (2, 5)

    def test_noise_normalization(self):
        """Raising the noise floor by 10 dB scales every channel by 1/sqrt(10)."""
        quiet = draw_channels(self._geometry(), LinkFading(), SystemParams(noise_dbm=-90.0), seed=2)
        loud = draw_channels(self._geometry(), LinkFading(), SystemParams(noise_dbm=-80.0), seed=2)
        assert np.allclose(loud.direct, quiet.direct / np.sqrt(10.0))

    def test_rician_limit_is_line_of_sight(self):
        """A huge Rician factor leaves only the unit-modulus LoS component."""
        spec = FadingSpec(FadingModel.RICIAN, rician_k=1e12)
        los = np.exp(1j * np.array([0.1, 0.7, 2.0]))
        sample = sample_channel(3, spec, los, stream_rng(0, 1))
        assert np.allclose(sample, los, atol=1e-5)

    def test_with_ris_x(self):
        """with_ris_x moves only the horizontal coordinate."""
        moved = self._geometry().with_ris_x(31.0)
        assert moved.ris_positions[0] == (31.0, 0.0, 1.5)
        assert moved.user_positions == self._geometry().user_positions
