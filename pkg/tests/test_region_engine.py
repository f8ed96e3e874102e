"""Tests for static/dynamic rate regions, containment and area."""

import itertools

import numpy as np
import pytest

from ris_noma.channel_models import ChannelSet
from ris_noma.errors import DimensionError, DomainError, EnumerationCapError
from ris_noma.region_engine import (
    ConfigMode,
    EnumerationMode,
    ProfileEnumeration,
    RateRegion,
    Scheme,
    candidate_gains,
    contains,
    dynamic_gain,
    dynamic_region,
    enumerate_profiles,
    pareto_filter,
    pareto_frontier,
    profile_regions,
    region_area,
    region_from_csv,
    region_to_csv,
    static_region,
    union_region,
)
from tests.conftest import gaussian

POWER = 10.0


def _region(boundary, mode=ConfigMode.STATIC, scheme=Scheme.NOMA):
    pts = np.asarray(boundary, dtype=float)
    return RateRegion(pts, pts, scheme, mode, POWER)


def _brute_force_frontier(channels: ChannelSet, samples: int) -> np.ndarray:
    """Explicit loops over profiles and rate targets with an O(n^2) dominance filter.

    Target t gives the weaker user t * log2(1 + P gamma_w); the stronger user's
    power fraction follows from (1 + P gamma_w) / (1 + beta P gamma_w) = (1 + P gamma_w)^t.
    """
    f = channels.bs_ris[0][:, 0]
    g = channels.ris_user[0]
    points = []
    for phases in itertools.product([0.0, np.pi], repeat=f.shape[0]):
        theta = np.exp(1j * np.array(phases))
        gains = [
            abs(channels.direct[k, 0] + np.sum(np.conj(g[k]) * theta * f)) ** 2
            for k in range(channels.num_users)
        ]
        strong = int(np.argmax(gains)) if gains[0] != gains[1] else 1
        weak = 1 - strong
        x = POWER * gains[weak]
        for t in np.linspace(0.0, 1.0, samples):
            beta = ((1 + x) ** (1 - t) - 1) / x if x > 0 else 1 - t
            p = [0.0, 0.0]
            p[strong], p[weak] = beta * POWER, (1 - beta) * POWER
            rates = [0.0, 0.0]
            rates[strong] = np.log2(1 + p[strong] * gains[strong])
            rates[weak] = np.log2(
                1 + p[weak] * gains[weak] / (p[strong] * gains[weak] + 1)
            )
            points.append(rates)
    pts = np.unique(np.asarray(points), axis=0)
    kept = [
        p
        for p in pts
        if not np.any(np.all(pts >= p, axis=1) & np.any(pts > p, axis=1))
    ]
    return np.asarray(sorted(kept, key=lambda p: p[0]))


def _gift_wrap(points: np.ndarray) -> np.ndarray:
    """Jarvis march; collinear points are skipped in favour of the farthest."""
    pts = np.unique(points, axis=0)
    start = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    hull = []
    current = start
    while True:
        hull.append(pts[current])
        candidate = (current + 1) % len(pts)
        for i in range(len(pts)):
            if i == current:
                continue
            a, b, c = pts[current], pts[candidate], pts[i]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            farther = np.sum((c - a) ** 2) > np.sum((b - a) ** 2)
            if cross < -1e-12 or (abs(cross) <= 1e-12 and farther):
                candidate = i
        current = candidate
        if current == start or len(hull) > len(pts):
            break
    return np.asarray(hull)


def _non_dominated(points: np.ndarray) -> np.ndarray:
    kept = [
        p
        for p in points
        if not np.any(np.all(points >= p - 1e-12, axis=1) & np.any(points > p + 1e-12, axis=1))
    ]
    return np.asarray(sorted(kept, key=lambda p: p[0]))


class TestProfileEnumeration:
    """Test cases for profile enumeration."""

    def test_discrete_size(self):
        """Discrete enumeration visits 2^(B*M) profiles."""
        enumeration = ProfileEnumeration(bits=2)
        assert enumeration.size(3) == 64
        assert len(list(enumerate_profiles(enumeration, 3))) == 64

    def test_no_elements(self):
        """M = 0 has exactly one (empty) profile."""
        profiles = list(enumerate_profiles(ProfileEnumeration(), 0))
        assert len(profiles) == 1
        assert profiles[0].elements == 0

    def test_cap_exceeded(self):
        """The cap error names the cap and the size."""
        enumeration = ProfileEnumeration(bits=1, cap=8)
        with pytest.raises(EnumerationCapError, match="cap of 8") as info:
            next(enumerate_profiles(enumeration, 4))
        assert info.value.size == 16

    def test_sampled_is_seeded(self):
        """Sampled profiles depend only on the seed."""
        a = [p.coefficients for p in enumerate_profiles(
            ProfileEnumeration(EnumerationMode.CONTINUOUS_SAMPLED, count=5, seed=3), 4)]
        b = [p.coefficients for p in enumerate_profiles(
            ProfileEnumeration(EnumerationMode.CONTINUOUS_SAMPLED, count=5, seed=3), 4)]
        assert np.array_equal(np.array(a), np.array(b))
        assert all(p is not None for p in a)

    def test_invalid_count(self):
        """A sampled enumeration needs at least one profile."""
        with pytest.raises(DomainError):
            ProfileEnumeration(EnumerationMode.CONTINUOUS_SAMPLED, count=0)

    def test_multi_antenna_rejected(self, make_channels):
        """Scalar regions need a single-antenna BS."""
        with pytest.raises(DimensionError):
            candidate_gains(make_channels(antennas=2), ProfileEnumeration())

    def test_aligned_profiles_appended(self, make_channels):
        """include_aligned adds one candidate per user."""
        channels = make_channels(seed=2, users=2, elements=3)
        plain = candidate_gains(channels, ProfileEnumeration())
        extended = candidate_gains(channels, ProfileEnumeration(include_aligned=True))
        assert extended.shape == (plain.shape[0] + 2, 2)


class TestPareto:
    """Test cases for non-dominated filtering."""

    def test_frontier_sorted_and_collapsed(self):
        """Dominated points and duplicates are dropped; x ascends."""
        pts = np.array([[1, 3], [2, 2], [1, 3], [1.5, 1], [3, 0]], dtype=float)
        assert pareto_frontier(pts).tolist() == [[1, 3], [2, 2], [3, 0]]

    def test_filter_three_dimensions(self):
        """Dominance works in any dimension."""
        pts = np.array([[1, 1, 1], [0.5, 0.5, 0.5], [2, 0, 0]], dtype=float)
        kept = pareto_filter(pts)
        assert sorted(map(tuple, kept)) == [(1, 1, 1), (2, 0, 0)]


class TestStaticRegion:
    """Test cases for static_region."""

    def test_brute_force_oracle(self, make_channels):
        """M = 2, B = 1, K = 2 NOMA frontier equals an explicit enumeration."""
        channels = make_channels(seed=8, elements=2)
        region = static_region(channels, ProfileEnumeration(bits=1), Scheme.NOMA, POWER)
        oracle = _brute_force_frontier(channels, 201)
        assert region.boundary.shape == oracle.shape
        assert np.allclose(region.boundary, oracle, atol=1e-9)

    def test_finer_oracle_is_close(self, make_channels):
        """A 1001-target oracle is dominated once one sampling step is allowed."""
        channels = make_channels(seed=8, elements=2)
        region = static_region(channels, ProfileEnumeration(bits=1), Scheme.NOMA, POWER)
        step = max(
            float(np.max(np.abs(np.diff(r.boundary, axis=0))))
            for r in profile_regions(channels, ProfileEnumeration(bits=1), Scheme.NOMA, POWER)
        )
        for point in _brute_force_frontier(channels, 1001):
            assert contains(region, point, tolerance=step + 1e-9)

    def test_no_ris(self, make_channels):
        """Without elements the region comes from the fixed channel only."""
        channels = make_channels(seed=1, elements=0)
        regions = profile_regions(channels, ProfileEnumeration(), Scheme.NOMA, POWER)
        assert len(regions) == 1

    def test_blocked_ris_irrelevant(self, make_channels):
        """With zero RIS-user channels every profile gives the same region."""
        channels = make_channels(seed=3, elements=3)
        channels = ChannelSet(
            channels.direct,
            channels.bs_ris,
            (np.zeros_like(channels.ris_user[0]),),
            channels.blocked_direct,
        )
        regions = profile_regions(channels, ProfileEnumeration(), Scheme.TDMA, POWER)
        for region in regions[1:]:
            assert np.allclose(region.boundary, regions[0].boundary)

    def test_more_profiles_never_shrink(self, make_channels):
        """The union is monotone in the enumerated set."""
        channels = make_channels(seed=6, elements=4)
        small = static_region(
            channels, ProfileEnumeration(EnumerationMode.CONTINUOUS_SAMPLED, count=8), Scheme.NOMA, POWER
        )
        large = static_region(
            channels, ProfileEnumeration(EnumerationMode.CONTINUOUS_SAMPLED, count=16), Scheme.NOMA, POWER
        )
        for point in small.boundary:
            assert contains(large, point)

    @pytest.mark.parametrize("seed", range(3))
    def test_noma_contains_oma(self, make_channels, seed):
        """Every TDMA and FDMA sample is dominated by a NOMA sample."""
        channels = make_channels(seed=seed, elements=2)
        enumeration = ProfileEnumeration(bits=1)
        noma = static_region(channels, enumeration, Scheme.NOMA, POWER)
        tdma = static_region(channels, enumeration, Scheme.TDMA, POWER)
        fdma = static_region(channels, enumeration, Scheme.FDMA, POWER, fdma_grid=41)
        for point in np.vstack([tdma.boundary, fdma.boundary]):
            assert contains(noma, point, tolerance=1e-6)

    def test_bad_sampling(self, make_channels):
        """At least two boundary samples are required."""
        with pytest.raises(DomainError):
            static_region(make_channels(), ProfileEnumeration(), Scheme.NOMA, POWER, boundary_samples=1)

    def test_three_users(self, make_channels):
        """K > 2 yields mutually non-dominated points."""
        channels = make_channels(seed=2, users=3, elements=2)
        region = static_region(channels, ProfileEnumeration(), Scheme.NOMA, 1.0, boundary_samples=11)
        assert region.num_users == 3
        assert pareto_filter(region.boundary).shape == region.boundary.shape


class TestDynamicRegion:
    """Test cases for the convex-hull construction."""

    def test_gift_wrapping_oracle(self, make_channels):
        """Hull vertices match an independent Jarvis march."""
        channels = make_channels(seed=8, elements=2)
        regions = profile_regions(channels, ProfileEnumeration(bits=1), Scheme.NOMA, POWER)
        dynamic = dynamic_region(regions)
        cloud = np.vstack([r.points for r in regions])
        anchors = np.array([[0.0, 0.0], [cloud[:, 0].max(), 0.0], [0.0, cloud[:, 1].max()]])
        oracle = _non_dominated(_gift_wrap(np.vstack([cloud, anchors])))
        assert dynamic.boundary.shape == oracle.shape
        assert np.allclose(dynamic.boundary, oracle, atol=1e-12)

    def test_two_corner_points(self):
        """The hull of (a, 0) and (0, b) contains their midpoint."""
        dynamic = dynamic_region([_region([[2.0, 0.0]]), _region([[0.0, 4.0]])])
        assert contains(dynamic, [1.0, 2.0])
        assert not contains(dynamic, [1.0, 2.1])

    def test_convex_input_is_unchanged(self, make_channels):
        """A single TDMA region (a segment) is its own hull."""
        channels = make_channels(seed=4, elements=0)
        (region,) = profile_regions(channels, ProfileEnumeration(), Scheme.TDMA, POWER)
        dynamic = dynamic_region([region])
        assert region_area(dynamic) == pytest.approx(region_area(region), rel=1e-12)
        for point in region.boundary:
            assert contains(dynamic, point)
        for point in dynamic.boundary:
            assert contains(region, point)

    def test_order_invariant(self, make_channels):
        """Shuffling the inputs does not change the hull."""
        channels = make_channels(seed=5, elements=2)
        regions = profile_regions(channels, ProfileEnumeration(), Scheme.NOMA, POWER)
        a = dynamic_region(regions).boundary
        b = dynamic_region(regions[::-1]).boundary
        assert np.allclose(a, b)

    def test_contains_static(self, make_channels):
        """Dynamic always holds the static union."""
        channels = make_channels(seed=9, elements=3)
        for scheme in Scheme:
            regions = profile_regions(channels, ProfileEnumeration(), scheme, POWER, fdma_grid=21)
            dynamic = dynamic_region(regions)
            static = static_region(channels, ProfileEnumeration(), scheme, POWER, fdma_grid=21)
            for point in static.boundary:
                assert contains(dynamic, point)

    def test_midpoints_contained(self, make_channels):
        """The dynamic region is convex."""
        channels = make_channels(seed=10, elements=2)
        dynamic = dynamic_region(profile_regions(channels, ProfileEnumeration(), Scheme.NOMA, POWER))
        b = dynamic.boundary
        for i in range(len(b)):
            for j in range(i + 1, len(b)):
                assert contains(dynamic, (b[i] + b[j]) / 2)

    def test_degenerate_broadcast_channel(self, make_channels):
        """With identical users NOMA static equals TDMA dynamic."""
        base = make_channels(seed=11, users=1, elements=2)
        channels = ChannelSet(
            np.repeat(base.direct, 2, axis=0),
            base.bs_ris,
            (np.repeat(base.ris_user[0], 2, axis=0),),
            np.zeros(2, dtype=bool),
        )
        enumeration = ProfileEnumeration()
        noma = static_region(channels, enumeration, Scheme.NOMA, POWER)
        tdma = dynamic_region(profile_regions(channels, enumeration, Scheme.TDMA, POWER))
        for point in noma.boundary:
            assert contains(tdma, point, tolerance=1e-9)
        for point in tdma.boundary:
            assert contains(noma, point, tolerance=1e-9)

    def test_mixed_schemes_rejected(self):
        """Inputs must share scheme and power."""
        with pytest.raises(DomainError):
            dynamic_region([_region([[1.0, 0.0]]), _region([[0.0, 1.0]], scheme=Scheme.TDMA)])
        with pytest.raises(DomainError):
            dynamic_region([])

    def test_three_users(self, make_channels):
        """K > 2 hulls support convex-combination containment."""
        channels = make_channels(seed=2, users=3, elements=2)
        regions = profile_regions(channels, ProfileEnumeration(), Scheme.TDMA, 1.0, boundary_samples=5)
        dynamic = dynamic_region(regions)
        vertices = dynamic.boundary
        assert contains(dynamic, vertices.mean(axis=0))
        assert not contains(dynamic, vertices.max(axis=0) * 1.5)


class TestContainsAndArea:
    """Test cases for membership and area queries."""

    def test_origin_and_boundary(self, make_channels):
        """The origin and every boundary point are inside at tolerance 0."""
        region = static_region(make_channels(seed=1), ProfileEnumeration(), Scheme.NOMA, POWER)
        assert contains(region, [0.0, 0.0], tolerance=0.0)
        for point in region.boundary:
            assert contains(region, point, tolerance=0.0)

    def test_scaled_point_outside(self, make_channels):
        """Boundary points pushed out by 1% leave the region."""
        region = static_region(make_channels(seed=1), ProfileEnumeration(), Scheme.NOMA, POWER)
        for point in region.boundary:
            if np.all(point > 0):
                assert not contains(region, point * 1.01)

    def test_dimension_mismatch(self):
        """Points must have K entries."""
        with pytest.raises(DimensionError):
            contains(_region([[1.0, 1.0]]), [0.5, 0.5, 0.5])

    def test_rectangle_and_triangle(self):
        """Single point gives a*b; the segment (a, 0)-(0, b) gives a*b/2."""
        assert region_area(_region([[2.0, 3.0]])) == pytest.approx(6.0)
        assert region_area(_region([[0.0, 3.0], [2.0, 0.0]])) == pytest.approx(3.0)

    def test_area_needs_two_users(self):
        """Area is only defined for K = 2."""
        with pytest.raises(DomainError):
            region_area(_region([[1.0, 1.0, 1.0]]))

    def test_monte_carlo_area(self, make_channels):
        """Area matches a Monte Carlo membership estimate within 1%."""
        region = static_region(make_channels(seed=3), ProfileEnumeration(), Scheme.NOMA, POWER)
        bx, by = region.boundary[:, 0], region.boundary[:, 1]
        rng = np.random.default_rng(0)
        samples = rng.uniform(size=(1_000_000, 2)) * [bx.max(), by.max()]
        # first vertex at or right of x has the largest rate among those that can dominate
        idx = np.searchsorted(bx, samples[:, 0], side="left")
        inside = (idx < len(bx)) & (by[np.minimum(idx, len(bx) - 1)] >= samples[:, 1])
        estimate = inside.mean() * bx.max() * by.max()
        assert region_area(region) == pytest.approx(estimate, rel=0.01)
        for point, expected in zip(samples[:50], inside[:50]):
            assert contains(region, point, tolerance=0.0) == bool(expected)

    def test_static_region_is_not_interpolated(self):
        """A static union between two corners does not hold their midpoint."""
        corners = [[0.0, 1.0], [1.0, 0.0]]
        static = _region(corners)
        assert not contains(static, [0.5, 0.5], tolerance=0.0)
        assert contains(static, [0.0, 1.0], tolerance=0.0)
        assert contains(static, [0.2, 0.0], tolerance=0.0)
        assert contains(_region(corners, mode=ConfigMode.DYNAMIC), [0.5, 0.5], tolerance=1e-12)

    def test_static_staircase_in_three_dimensions(self):
        """Dominance is the rule for static regions at every K."""
        static = _region([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert not contains(static, [0.3, 0.3, 0.3])
        assert contains(static, [0.0, 0.9, 0.0])

    def test_dynamic_gain_at_least_one(self, make_channels):
        """Time sharing across profiles never loses area."""
        channels = make_channels(seed=7, elements=3)
        regions = profile_regions(channels, ProfileEnumeration(), Scheme.TDMA, POWER)
        static = static_region(channels, ProfileEnumeration(), Scheme.TDMA, POWER)
        assert dynamic_gain(static, dynamic_region(regions)) >= 1.0 - 1e-12


class TestRegionCsv:
    """Test cases for the region CSV interface."""

    def test_write_and_read(self, tmp_path, make_channels):
        """Boundary and metadata survive the CSV file."""
        region = static_region(make_channels(seed=2), ProfileEnumeration(), Scheme.TDMA, POWER)
        path = region_to_csv(region, tmp_path / "region.csv", {"seed": 4})
        text = path.read_text()
        assert "#scheme=tdma" in text
        assert "#mode=static" in text
        restored = region_from_csv(path)
        assert restored.scheme is Scheme.TDMA
        assert restored.config_mode is ConfigMode.STATIC
        assert restored.total_power == POWER
        assert restored.metadata["seed"] == "4"
        assert np.array_equal(restored.boundary, region.boundary)

    def test_missing_metadata(self, tmp_path):
        """A CSV without the scheme line is rejected."""
        path = tmp_path / "r.csv"
        path.write_text("#mode=static\n#total_power=1.0\nR1,R2\n1,0\n")
        with pytest.raises(DomainError, match="scheme"):
            region_from_csv(path)


def _realization(seed: int, elements: int) -> ChannelSet:
    rng = np.random.default_rng(seed)
    return ChannelSet(
        gaussian(rng, 2, 1),
        (gaussian(rng, elements, 1),),
        (gaussian(rng, 2, elements),),
        np.zeros(2, dtype=bool),
    )


@pytest.fixture(scope="module")
def acceptance_regions():
    """Static and dynamic regions per scheme on 20 realizations with K = 2, M = 4, B = 2."""
    enumeration = ProfileEnumeration(bits=2)
    ensemble = []
    for seed in range(20):
        channels = _realization(1000 + seed, 4)
        regions = {}
        for scheme in Scheme:
            per_profile = profile_regions(channels, enumeration, scheme, POWER)
            regions[scheme] = {
                ConfigMode.STATIC: union_region(per_profile),
                ConfigMode.DYNAMIC: dynamic_region(per_profile),
            }
        ensemble.append(regions)
    return ensemble


@pytest.mark.slow
class TestRegionAcceptance:
    """Seeded ensembles for the containment chain and the dynamic gain."""

    def test_oma_samples_inside_noma(self, acceptance_regions):
        """Every TDMA and FDMA boundary sample lies in NOMA's region of the same mode."""
        for regions in acceptance_regions:
            for mode in ConfigMode:
                noma = regions[Scheme.NOMA][mode]
                for scheme in (Scheme.TDMA, Scheme.FDMA):
                    for point in regions[scheme][mode].boundary:
                        assert contains(noma, point, tolerance=1e-6)

    def test_dynamic_holds_static(self, acceptance_regions):
        """Dynamic contains static for every scheme on all 20 realizations."""
        for regions in acceptance_regions:
            for scheme in Scheme:
                static = regions[scheme][ConfigMode.STATIC]
                dynamic = regions[scheme][ConfigMode.DYNAMIC]
                for point in static.boundary:
                    assert contains(dynamic, point, tolerance=1e-9)
                assert dynamic_gain(static, dynamic) >= 1.0 - 1e-12

    def test_time_sharing_helps_tdma_more(self, acceptance_regions):
        """TDMA's dynamic-over-static area ratio beats NOMA's on at least 18 of 20."""
        wins = 0
        for regions in acceptance_regions:
            ratios = {
                scheme: dynamic_gain(regions[scheme][ConfigMode.STATIC], regions[scheme][ConfigMode.DYNAMIC])
                for scheme in (Scheme.NOMA, Scheme.TDMA)
            }
            wins += ratios[Scheme.TDMA] > ratios[Scheme.NOMA]
        assert wins >= 18

    def test_dynamic_gain_over_many_draws(self):
        """area(dynamic) >= area(static) on 1000 draws for every scheme."""
        enumeration = ProfileEnumeration(bits=1)
        for seed in range(1000):
            channels = _realization(seed, 2)
            for scheme in Scheme:
                per_profile = profile_regions(
                    channels, enumeration, scheme, POWER, boundary_samples=51, fdma_grid=11
                )
                gain = dynamic_gain(union_region(per_profile), dynamic_region(per_profile))
                assert gain >= 1.0 - 1e-12
