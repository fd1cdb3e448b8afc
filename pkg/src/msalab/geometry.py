"""Integer-lattice cube geometry for multi-scale bookkeeping.

A cube of odd side L centered at x is the set of lattice sites within
sup-distance (L - 1) / 2 of x.  Sides that are odd multiples of 3 are
"suitable": such a cube carries a concentric one-third interior cube and a
one-site-thick boundary shell, the split every resolvent-decay estimate is
phrased in.  Scale grids (sublattices of pitch L/3) and origin-centered
annuli provide the exact covers used when eigenfunction mass is summed
shell by shell.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

Site = tuple
SiteLike = Union[int, Sequence[int]]

REGION_KINDS = ("interior", "boundary", "full", "custom")


def as_site(value: SiteLike) -> Site:
    """Normalize an integer (d = 1) or a coordinate sequence to a site tuple."""
    if isinstance(value, str):
        raise TypeError(f"not a lattice site: {value!r}")
    try:
        return (int(value),)
    except (TypeError, ValueError):
        pass
    site = tuple(int(c) for c in value)
    if not site:
        raise ValueError("a lattice site needs at least one coordinate")
    return site


def is_odd_side(side: int) -> bool:
    return side >= 1 and side % 2 == 1


def is_suitable_side(side: int) -> bool:
    """True for odd multiples of 3, the sides whose third is lattice-aligned."""
    return side >= 3 and side % 3 == 0 and side % 6 != 0


def lattice_distance(x: SiteLike, y: SiteLike) -> int:
    """Sup-norm distance; with it, cubes of side L at distance >= L are disjoint."""
    a, b = as_site(x), as_site(y)
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return max(abs(p - q) for p, q in zip(a, b))


@dataclass(frozen=True)
class Cube:
    """Axis-aligned lattice cube: sites within (side - 1) / 2 of the center."""

    center: Site
    side: int

    def __post_init__(self):
        object.__setattr__(self, "center", as_site(self.center))
        object.__setattr__(self, "side", int(self.side))
        if not is_odd_side(self.side):
            raise ValueError(f"cube side must be a positive odd integer, got {self.side}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def radius(self) -> int:
        return (self.side - 1) // 2

    @property
    def suitable(self) -> bool:
        return is_suitable_side(self.side)

    @property
    def site_count(self) -> int:
        return self.side ** self.dim

    def sites(self) -> list:
        """All sites in lexicographic order (the canonical matrix ordering)."""
        r = self.radius
        ranges = [range(c - r, c + r + 1) for c in self.center]
        return list(itertools.product(*ranges))

    def contains(self, site: SiteLike) -> bool:
        s = as_site(site)
        if len(s) != self.dim:
            return False
        return all(abs(p - q) <= self.radius for p, q in zip(s, self.center))

    def contains_cube(self, other: "Cube") -> bool:
        if other.dim != self.dim:
            return False
        return lattice_distance(other.center, self.center) + other.radius <= self.radius

    def interior_cube(self) -> "Cube":
        if not self.suitable:
            raise ValueError(f"interior cube needs a suitable side, got {self.side}")
        return Cube(self.center, self.side // 3)


def make_cube(center: SiteLike, side: int) -> Cube:
    return Cube(as_site(center), side)


@dataclass(frozen=True)
class Region:
    """A named site set; `sites` is a lex-sorted tuple."""

    kind: str
    sites: tuple
    owner: Cube | None = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def site_set(self) -> frozenset:
        return frozenset(self.sites)


def region(cube: Cube, kind: str) -> Region:
    """Interior (one-third cube), boundary (one-site shell) or full site set."""
    if kind == "full":
        return Region("full", tuple(cube.sites()), cube)
    if kind == "interior":
        return Region("interior", tuple(cube.interior_cube().sites()), cube)
    if kind == "boundary":
        shell = tuple(
            s for s in cube.sites() if lattice_distance(s, cube.center) == cube.radius
        )
        return Region("boundary", shell, cube)
    raise ValueError(f"region kind must be interior, boundary or full, got {kind!r}")


def custom_region(sites: Iterable[SiteLike], owner: Cube | None = None) -> Region:
    canon = tuple(sorted({as_site(s) for s in sites}))
    return Region("custom", canon, owner)


def set_distance(a: Iterable[SiteLike], b: Iterable[SiteLike]) -> int:
    """Minimum sup-distance between two nonempty site sets."""
    a_sites = [as_site(s) for s in a]
    b_sites = [as_site(s) for s in b]
    if not a_sites or not b_sites:
        raise ValueError("set_distance needs nonempty site sets")
    return min(lattice_distance(p, q) for p in a_sites for q in b_sites)


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


@dataclass(frozen=True)
class ScaleGrid:
    """Sublattice of pitch scale/3 clipped to a bounding cube.

    The interiors of side-`scale` cubes centered on the grid tile the lattice
    exactly, which is what makes grid covers lossless.
    """

    scale: int
    bounding: Cube

    def __post_init__(self):
        if not is_suitable_side(self.scale):
            raise ValueError(f"grid scale must be a suitable side, got {self.scale}")

    @property
    def spacing(self) -> int:
        return self.scale // 3

    def sites(self) -> list:
        m = self.spacing
        r = self.bounding.radius
        axes = []
        for c in self.bounding.center:
            lo, hi = c - r, c + r
            axes.append([k * m for k in range(_ceil_div(lo, m), hi // m + 1)])
        return list(itertools.product(*axes))

    def nearest(self, site: SiteLike) -> Site:
        """Unique grid point whose interior cube holds the site (spacing is odd)."""
        m = self.spacing
        half = (m - 1) // 2
        return tuple((c + half) // m * m for c in as_site(site))

    def contains(self, site: SiteLike) -> bool:
        s = as_site(site)
        return all(c % self.spacing == 0 for c in s) and self.bounding.contains(s)


def grid_cover(target, grid: ScaleGrid) -> list:
    """Suitable cubes centered on grid sites whose interiors cover the target.

    Every target site lands in the interior of exactly one returned cube.
    """
    if isinstance(target, Region):
        sites = target.sites
    elif isinstance(target, Cube):
        sites = target.sites()
    else:
        sites = [as_site(s) for s in target]
    centers = set()
    for s in sites:
        g = grid.nearest(s)
        if not grid.bounding.contains(g):
            raise ValueError(
                f"grid bounding cube does not cover the target near site {s}"
            )
        centers.add(g)
    return [Cube(g, grid.scale) for g in sorted(centers)]


@dataclass(frozen=True)
class Annulus:
    """Origin-centered shell between the 3x blow-ups of two consecutive scales."""

    index: int
    inner: Cube
    outer: Cube

    def sites(self) -> list:
        return [s for s in self.outer.sites() if not self.inner.contains(s)]


def annulus(index: int, scales: Sequence[int], dim: int) -> Annulus:
    if not 0 <= index < len(scales) - 1:
        raise ValueError(f"annulus index {index} outside scale sequence of length {len(scales)}")
    origin = (0,) * dim
    return Annulus(index, Cube(origin, 3 * scales[index]), Cube(origin, 3 * scales[index + 1]))


def annulus_sites(index: int, scales: Sequence[int], dim: int) -> list:
    return annulus(index, scales, dim).sites()
