"""Product disorder: single-site measures and per-site reproducible sampling.

Couplings are drawn from counter-style random streams keyed by (seed, site),
so the value at a site never depends on evaluation order or on which box is
being assembled.  Disjoint site sets therefore carry independent couplings by
construction, and enlarging a box extends a configuration without disturbing
the sites it already covered.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import SiteLike, as_site

_MASK64 = (1 << 64) - 1
_STREAM_TAG = 0x6D73616C6162  # domain separator for site streams

MEASURE_KINDS = ("uniform", "hoelder", "bernoulli", "pointlist")


class UndefinedTailError(ValueError):
    """Tail exponent requested for a measure without a usable left tail."""


def _zigzag(c: int) -> int:
    return 2 * c if c >= 0 else -2 * c - 1


def site_uniform(seed: int, site: SiteLike) -> float:
    """Uniform draw in [0, 1) keyed to (seed, site); order-independent."""
    coords = as_site(site)
    entropy = [_STREAM_TAG, int(seed) & _MASK64, len(coords)]
    entropy.extend(_zigzag(c) for c in coords)
    bitgen = np.random.Philox(seed=np.random.SeedSequence(entropy))
    return float(np.random.Generator(bitgen).random())


@dataclass(frozen=True)
class SingleSiteMeasure:
    """Coupling distribution on a bounded support [lo, hi].

    kind:
      uniform    flat density on [lo, hi]
      hoelder    one-sided power law, CDF ((x - lo)/(hi - lo))**exponent;
                 the left-tail mass of [lo, lo + h] is exactly (h/width)**exponent
      bernoulli  two atoms lo and hi, weight `weight_hi` on hi
      pointlist  finite atoms ((value, weight), ...)
    """

    kind: str
    lo: float = 0.0
    hi: float = 1.0
    exponent: float = 1.0
    weight_hi: float = 0.5
    atoms: tuple = ()

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "pointlist":
            if not self.atoms:
                raise ValueError("pointlist measure needs at least one atom")
            values = [float(v) for v, _ in self.atoms]
            weights = [float(w) for _, w in self.atoms]
            if any(w < 0 for w in weights):
                raise ValueError("atom weights must be nonnegative")
            if abs(sum(weights) - 1.0) > 1e-12:
                raise ValueError(f"atom weights must sum to 1, got {sum(weights)}")
            object.__setattr__(self, "atoms", tuple(zip(values, weights)))
            object.__setattr__(self, "lo", min(values))
            object.__setattr__(self, "hi", max(values))
        else:
            if not self.lo < self.hi:
                raise ValueError(f"support needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.kind == "hoelder" and self.exponent <= 0:
            raise ValueError("hoelder exponent must be positive")
        if self.kind == "bernoulli" and not 0.0 <= self.weight_hi <= 1.0:
            raise ValueError("bernoulli weight must lie in [0, 1]")

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "SingleSiteMeasure":
        return cls("uniform", lo=float(lo), hi=float(hi))

    @classmethod
    def hoelder(cls, exponent: float, lo: float = 0.0, hi: float = 1.0) -> "SingleSiteMeasure":
        return cls("hoelder", lo=float(lo), hi=float(hi), exponent=float(exponent))

    @classmethod
    def bernoulli(cls, weight_hi: float = 0.5, lo: float = 0.0, hi: float = 1.0) -> "SingleSiteMeasure":
        return cls("bernoulli", lo=float(lo), hi=float(hi), weight_hi=float(weight_hi))

    @classmethod
    def pointlist(cls, atoms) -> "SingleSiteMeasure":
        return cls("pointlist", atoms=tuple((float(v), float(w)) for v, w in atoms))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_atomic(self) -> bool:
        return self.kind in ("bernoulli", "pointlist")

    def sample(self, u: float) -> float:
        """Inverse-CDF transform of a uniform draw u in [0, 1)."""
        if self.kind == "uniform":
            return self.lo + self.width * u
        if self.kind == "hoelder":
            return self.lo + self.width * u ** (1.0 / self.exponent)
        if self.kind == "bernoulli":
            return self.hi if u < self.weight_hi else self.lo
        cum = 0.0
        for value, weight in self.atoms:
            cum += weight
            if u < cum:
                return value
        return self.atoms[-1][0]

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.clip((xa - self.lo) / self.width, 0.0, 1.0)
        elif self.kind == "hoelder":
            out = np.clip((xa - self.lo) / self.width, 0.0, 1.0) ** self.exponent
        elif self.kind == "bernoulli":
            out = np.where(xa < self.lo, 0.0,
                           np.where(xa < self.hi, 1.0 - self.weight_hi, 1.0))
        else:
            out = np.zeros_like(xa)
            for v, w in self.atoms:
                out = out + np.where(xa >= v, w, 0.0)
        return out if out.ndim else float(out)

    def left_mass(self, h: float) -> float:
        """Measure of [lo, lo + h]."""
        if h < 0:
            return 0.0
        return self.cdf(self.lo + h)

    def density(self, x: float) -> float:
        if self.is_atomic:
            raise ValueError(f"{self.kind} measure has no density")
        if not self.lo <= x <= self.hi:
            return 0.0
        if self.kind == "uniform":
            return 1.0 / self.width
        a, w = self.exponent, self.width
        if x == self.lo:
            return 0.0 if a > 1 else (a / w if a == 1 else float("inf"))
        return (a / w) * ((x - self.lo) / w) ** (a - 1.0)

    def describe(self) -> str:
        if self.kind == "uniform":
            return f"uniform[{self.lo:g},{self.hi:g}]"
        if self.kind == "hoelder":
            return f"hoelder(a={self.exponent:g})[{self.lo:g},{self.hi:g}]"
        if self.kind == "bernoulli":
            return f"bernoulli(p={self.weight_hi:g})[{self.lo:g},{self.hi:g}]"
        inner = ",".join(f"{v:g}:{w:g}" for v, w in self.atoms)
        return f"pointlist({inner})"


@dataclass(frozen=True)
class TailFit:
    """Least-squares left-tail exponent with per-grid-point violation flags."""

    exponent: float
    intercept: float
    declared: float
    h_grid: tuple
    masses: tuple
    violations: tuple

    @property
    def violated(self) -> bool:
        return len(self.violations) > 0


def measure_tail_exponent(
    measure: SingleSiteMeasure,
    h_grid: Sequence[float] | None = None,
    declared: float | None = None,
) -> TailFit:
    """Fit mu([lo, lo+h]) ~ h**tau on a log-log grid near the lower edge."""
    if measure.is_atomic:
        raise UndefinedTailError(
            f"tail exponent undefined for atomic measure {measure.describe()}"
        )
    if h_grid is None:
        h_grid = measure.width * np.geomspace(1e-4, 1e-1, 16)
    h = np.asarray(h_grid, dtype=float)
    if np.any(h <= 0) or np.any(h > measure.width):
        raise ValueError("h grid must lie in (0, width]")
    masses = np.array([measure.left_mass(v) for v in h])
    if np.any(masses <= 0):
        raise UndefinedTailError("left-tail mass vanished on the grid")
    slope, intercept = np.polyfit(np.log(h), np.log(masses), 1)
    if declared is None:
        declared = measure.exponent if measure.kind == "hoelder" else 1.0
    bad = tuple(float(v) for v, m in zip(h, masses) if m > v ** declared + 1e-15)
    return TailFit(float(slope), float(intercept), float(declared),
                   tuple(map(float, h)), tuple(map(float, masses)), bad)


def holder_mass_check(measure: SingleSiteMeasure, exponent: float,
                      max_len: float, n_intervals: int = 200, seed: int = 0) -> float:
    """Worst mu(J) - |J|**exponent over random small intervals (<= 0 means the
    Hoelder bound holds on the probe set)."""
    rng = np.random.Generator(np.random.Philox(seed=seed))
    worst = -np.inf
    for _ in range(n_intervals):
        length = max_len * rng.random()
        start = measure.lo + (measure.width - length) * rng.random()
        mass = measure.cdf(start + length) - measure.cdf(start)
        worst = max(worst, mass - length ** exponent)
    return float(worst)


@dataclass(frozen=True)
class DisorderModel:
    """Dimension, single-site measure, on-site coupling weight, periodic background.

    The single-site potential acts on its own site with weight `site_weight`
    (> 0, so the coupling is never invisible).  `background` holds one periodic
    cell of deterministic potential values, flattened in C order with shape
    `background_shape`; an empty cell means zero background.
    """

    dim: int
    measure: SingleSiteMeasure
    site_weight: float = 1.0
    background: tuple = ()
    background_shape: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.site_weight <= 0:
            raise ValueError("site_weight must be positive")
        bg = tuple(float(v) for v in self.background)
        shape = tuple(int(s) for s in self.background_shape)
        if bg and not shape:
            shape = (len(bg),)
        if bg:
            if len(shape) != self.dim:
                raise ValueError("background_shape must have one entry per dimension")
            size = 1
            for s in shape:
                size *= s
            if size != len(bg):
                raise ValueError("background cell size does not match its shape")
        object.__setattr__(self, "background", bg)
        object.__setattr__(self, "background_shape", shape)

    @classmethod
    def anderson(cls, dim: int, measure: SingleSiteMeasure) -> "DisorderModel":
        return cls(dim=dim, measure=measure)

    def background_at(self, site: SiteLike) -> float:
        if not self.background:
            return 0.0
        coords = as_site(site)
        idx = 0
        for c, s in zip(coords, self.background_shape):
            idx = idx * s + (c % s)
        return self.background[idx]

    def model_id(self) -> str:
        text = (
            f"d={self.dim};{self.measure.describe()};w={self.site_weight:.17g};"
            f"v0={self.background};shape={self.background_shape}"
        )
        return hashlib.sha256(text.encode()).hexdigest()[:12]


class Configuration:
    """One realization of the coupling field, addressable site by site.

    Immutable after creation; repeated queries of the same site return the
    identical float, whatever the query order.
    """

    def __init__(self, model: DisorderModel, seed: int):
        if seed < 0:
            raise ValueError("configuration seed must be nonnegative")
        self.model = model
        self.seed = int(seed)
        self._cache: dict = {}

    def coupling(self, site: SiteLike) -> float:
        s = as_site(site)
        if len(s) != self.model.dim:
            raise ValueError(f"site {s} has wrong dimension for model d={self.model.dim}")
        value = self._cache.get(s)
        if value is None:
            value = self.model.measure.sample(site_uniform(self.seed, s))
            self._cache[s] = value
        return value

    def potential(self, site: SiteLike) -> float:
        return potential(self.model, self, site)

    def __repr__(self):
        return f"Configuration(model={self.model.model_id()}, seed={self.seed})"


def sample_configuration(model: DisorderModel, seed: int) -> Configuration:
    return Configuration(model, seed)


def potential(model: DisorderModel, config: Configuration, site: SiteLike) -> float:
    """Background plus the site's coupling times the on-site weight."""
    return model.background_at(site) + config.coupling(site) * model.site_weight


# --- model description files (key = value text) ------------------------------

_SEED_POLICY = "site-keyed"


def model_to_text(model: DisorderModel) -> str:
    m = model.measure
    lines = [
        f"dim = {model.dim}",
        f"measure = {m.kind}",
    ]
    if m.kind == "pointlist":
        lines.append("atoms = " + ", ".join(f"{v:.17g}:{w:.17g}" for v, w in m.atoms))
    else:
        lines.append(f"support = {m.lo:.17g}, {m.hi:.17g}")
    if m.kind == "hoelder":
        lines.append(f"exponent = {m.exponent:.17g}")
    if m.kind == "bernoulli":
        lines.append(f"weight_hi = {m.weight_hi:.17g}")
    lines.append(f"site_weight = {model.site_weight:.17g}")
    if model.background:
        lines.append("background = " + ", ".join(f"{v:.17g}" for v in model.background))
        lines.append("background_shape = " + ", ".join(str(s) for s in model.background_shape))
    lines.append(f"seed_policy = {_SEED_POLICY}")
    return "\n".join(lines) + "\n"


class ModelParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def _parse_kv(text: str) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelParseError(f"expected 'key = value', got {raw!r}", lineno)
        key, value = line.split("=", 1)
        pairs[key.strip()] = (value.strip(), lineno)
    return pairs


def model_from_text(text: str) -> DisorderModel:
    pairs = _parse_kv(text)

    def take(key, default=None, required=False):
        if key in pairs:
            return pairs.pop(key)[0]
        if required:
            raise ModelParseError(f"missing required key {key!r}")
        return default

    try:
        dim = int(take("dim", required=True))
        kind = take("measure", required=True)
        if kind == "pointlist":
            atoms_text = take("atoms", required=True)
            atoms = []
            for chunk in atoms_text.split(","):
                v, w = chunk.split(":")
                atoms.append((float(v), float(w)))
            measure = SingleSiteMeasure.pointlist(atoms)
        else:
            support = take("support", required=True)
            lo, hi = (float(v) for v in support.split(","))
            if kind == "uniform":
                measure = SingleSiteMeasure.uniform(lo, hi)
            elif kind == "hoelder":
                measure = SingleSiteMeasure.hoelder(float(take("exponent", "1")), lo, hi)
            elif kind == "bernoulli":
                measure = SingleSiteMeasure.bernoulli(float(take("weight_hi", "0.5")), lo, hi)
            else:
                raise ModelParseError(f"unknown measure kind {kind!r}")
        site_weight = float(take("site_weight", "1"))
        background = take("background")
        shape = take("background_shape")
        bg = tuple(float(v) for v in background.split(",")) if background else ()
        bg_shape = tuple(int(v) for v in shape.split(",")) if shape else ()
        policy = take("seed_policy", _SEED_POLICY)
        if policy != _SEED_POLICY:
            raise ModelParseError(f"unsupported seed_policy {policy!r}")
    except ModelParseError:
        raise
    except (ValueError, TypeError) as exc:
        raise ModelParseError(str(exc)) from exc
    if pairs:
        key, (_, lineno) = next(iter(pairs.items()))
        raise ModelParseError(f"unknown key {key!r}", lineno)
    return DisorderModel(dim=dim, measure=measure, site_weight=site_weight,
                         background=bg, background_shape=bg_shape)
