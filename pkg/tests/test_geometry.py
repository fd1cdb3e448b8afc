import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msalab.geometry import (
    Annulus,
    Cube,
    ScaleGrid,
    annulus_sites,
    as_site,
    custom_region,
    grid_cover,
    is_odd_side,
    is_suitable_side,
    lattice_distance,
    make_cube,
    region,
    set_distance,
)


def brute_sites(center, side, dim):
    """Independent enumeration: all points within (side-1)/2 in every axis."""
    r = (side - 1) // 2
    axes = [range(c - r, c + r + 1) for c in center]
    return set(itertools.product(*axes))


class TestSuitability:
    def test_odd_multiples_of_three(self):
        assert [s for s in range(1, 30) if is_suitable_side(s)] == [3, 9, 15, 21, 27]

    def test_make_cube_suitable_flag(self):
        assert make_cube(0, 9).suitable
        assert not make_cube(0, 7).suitable

    def test_even_side_rejected(self):
        with pytest.raises(ValueError):
            make_cube(0, 12)
        with pytest.raises(ValueError):
            make_cube(0, -3)

    def test_oddness_wider_than_suitability(self):
        # definition admits all odd sides; suitability is the stricter predicate
        assert is_odd_side(7) and not is_suitable_side(7)


class TestCubeRegions:
    def test_interior_boundary_1d(self):
        cube = make_cube(0, 9)
        assert region(cube, "interior").sites == ((-1,), (0,), (1,))
        assert region(cube, "boundary").sites == ((-4,), (4,))

    def test_shifted_cube(self):
        cube = make_cube(5, 15)
        assert cube.suitable
        assert region(cube, "interior").sites == tuple((c,) for c in range(3, 8))
        assert region(cube, "boundary").sites == ((-2,), (12,))

    def test_boundary_ring_2d(self):
        cube = make_cube((0, 0), 3)
        expected = brute_sites((0, 0), 3, 2) - brute_sites((0, 0), 1, 2)
        got = set(region(cube, "boundary").sites)
        assert got == expected
        assert len(got) == 8

    def test_interior_needs_suitable(self):
        with pytest.raises(ValueError):
            region(make_cube(0, 7), "interior")

    def test_region_sizes_match_counting(self):
        for side in (3, 9, 15, 21):
            for dim in (1, 2):
                cube = make_cube((0,) * dim, side)
                assert len(region(cube, "interior")) == (side // 3) ** dim
                assert len(region(cube, "boundary")) == side ** dim - (side - 2) ** dim
                inter = set(region(cube, "interior").sites)
                bound = set(region(cube, "boundary").sites)
                full = set(region(cube, "full").sites)
                assert inter.isdisjoint(bound)
                assert inter <= full and bound <= full

    def test_sites_lexicographic(self):
        cube = make_cube((1, -1), 3)
        sites = cube.sites()
        assert sites == sorted(sites)
        assert set(sites) == brute_sites((1, -1), 3, 2)


class TestDistance:
    def test_examples(self):
        assert lattice_distance((0, 0), (3, 1)) == 3
        assert lattice_distance(-2, 5) == 7
        assert lattice_distance((4, 4), (4, 4)) == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lattice_distance((0, 0), (1,))

    @given(st.lists(st.integers(-50, 50), min_size=2, max_size=2),
           st.lists(st.integers(-50, 50), min_size=2, max_size=2),
           st.lists(st.integers(-50, 50), min_size=2, max_size=2))
    def test_metric_axioms(self, a, b, c):
        d_ab = lattice_distance(a, b)
        assert d_ab == lattice_distance(b, a)
        assert d_ab >= 0 and (d_ab == 0) == (a == b)
        assert lattice_distance(a, c) <= d_ab + lattice_distance(b, c)

    def test_distant_cubes_disjoint(self):
        # d(x, y) >= L makes side-L cubes site-disjoint (the independence geometry)
        for offset in (9, 10, 15):
            a = set(make_cube(0, 9).sites())
            b = set(make_cube(offset, 9).sites())
            assert a.isdisjoint(b)
        assert not set(make_cube(0, 9).sites()).isdisjoint(set(make_cube(8, 9).sites()))


class TestAnnuli:
    def test_example_sites(self):
        got = set(annulus_sites(0, [9, 27], dim=1))
        expected = {(k,) for k in range(-40, 41) if abs(k) >= 14}
        assert got == expected

    def test_partition_of_complement(self):
        scales = [9, 15, 27, 45, 81]
        pieces = [set(annulus_sites(i, scales, dim=1)) for i in range(len(scales) - 1)]
        for a, b in itertools.combinations(pieces, 2):
            assert a.isdisjoint(b)
        union = set().union(*pieces)
        outer = set(Cube((0,), 3 * scales[-1]).sites())
        inner = set(Cube((0,), 3 * scales[0]).sites())
        assert union == outer - inner

    def test_bad_index(self):
        with pytest.raises(ValueError):
            annulus_sites(3, [9, 27], dim=1)


class TestScaleGrid:
    def test_sites_are_multiples(self):
        grid = ScaleGrid(9, Cube((0,), 81))
        assert all(s[0] % 3 == 0 for s in grid.sites())

    def test_nearest_is_unique_cover(self):
        grid = ScaleGrid(9, Cube((0,), 81))
        for c in range(-30, 31):
            g = grid.nearest((c,))
            assert g[0] % 3 == 0
            assert abs(c - g[0]) <= 1  # interior radius of the spacing-3 tile

    def test_cover_includes_self(self):
        grid = ScaleGrid(9, Cube((0,), 81))
        cubes = grid_cover(make_cube(0, 9), grid)
        assert Cube((0,), 9) in cubes

    def test_cover_property(self):
        grid = ScaleGrid(9, Cube((0, 0), 27))
        target = make_cube((1, -2), 9)
        cover = grid_cover(target, grid)
        covered = set()
        for cube in cover:
            assert cube.side == 9
            covered |= set(cube.interior_cube().sites())
        assert set(target.sites()) <= covered

    def test_interiors_tile_exactly(self):
        # grid-cube interiors partition the box: no overlaps, no gaps
        grid = ScaleGrid(9, Cube((0,), 27))
        box = make_cube(0, 27)
        cover = grid_cover(box, grid)
        interiors = [set(c.interior_cube().sites()) for c in cover]
        for a, b in itertools.combinations(interiors, 2):
            assert a.isdisjoint(b)
        assert set().union(*interiors) == set(box.sites())

    def test_empty_cover(self):
        grid = ScaleGrid(9, Cube((0,), 81))
        assert grid_cover([], grid) == []

    def test_same_scale_distant_centers_disjoint(self):
        grid = ScaleGrid(9, Cube((0,), 81))
        cover = grid_cover(make_cube(0, 81), grid)
        for a, b in itertools.combinations(cover, 2):
            if lattice_distance(a.center, b.center) >= 9:
                assert set(a.sites()).isdisjoint(set(b.sites()))

    def test_bounding_too_small(self):
        grid = ScaleGrid(9, Cube((0,), 9))
        with pytest.raises(ValueError):
            grid_cover(make_cube(30, 9), grid)


class TestRegionsMisc:
    def test_custom_region_canonical(self):
        r = custom_region([(3,), (1,), (3,)])
        assert r.sites == ((1,), (3,))

    def test_set_distance(self):
        assert set_distance([(0,)], [(7,)]) == 7
        assert set_distance(make_cube(0, 9).sites(), make_cube(20, 9).sites()) == 12

    def test_as_site_forms(self):
        assert as_site(5) == (5,)
        assert as_site((1, 2)) == (1, 2)
        with pytest.raises((TypeError, ValueError)):
            as_site("abc")


@settings(max_examples=50)
@given(st.integers(1, 300))
def test_suitable_iff_mod6_is_3(k):
    side = k
    assert is_suitable_side(side) == (side % 6 == 3)
