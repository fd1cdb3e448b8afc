"""Localization diagnostics on a full box: centers of localization, the
eigenfunction decay inequality, eigenvalue counting per window, kernel-decay
expectations, sup-in-time transport moments, and the two-bad-cubes event.

The largest assembled box stands in for the infinite-volume operator; every
report discloses the box side and the edge mass of the eigenfunctions it used,
so finite-size truncation stays visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .disorder import Configuration, DisorderModel, sample_configuration
from .geometry import (
    Cube,
    Region,
    ScaleGrid,
    as_site,
    lattice_distance,
    region,
    set_distance,
)
from .msa import _map_samples, sample_seeds
from .operators import (
    EnergyFunction,
    EnergyInterval,
    RESONANCE_TOL,
    SpectralData,
    assemble,
    resolvent_block_norm,
)
from .stats import clopper_pearson, fit_exponential, fit_power_law, mean_interval


def default_time_grid(t_min: float = 1e-2, t_max: float = 1e3, count: int = 512) -> np.ndarray:
    """Log-spaced probe times for the sup-in-time moment."""
    return np.geomspace(t_min, t_max, count)


# --- centers of localization ---------------------------------------------------


@dataclass
class EigenRecord:
    """One eigenpair: localization center, peak mass, tail masses, decay fit."""

    index: int
    energy: float
    center: tuple
    peak_mass: float
    tail_masses: tuple = ()
    decay_rate: float | None = None


def centers(spec: SpectralData, interval: EnergyInterval, *,
            tail_sides: Sequence[int] = (), fit_decay: bool = False) -> list:
    """Localization centers (lexicographic argmax of single-site mass) for all
    eigenvalues in the interval."""
    spec.require_covers(interval, "localization centers")
    sites = spec.op.sites
    box = spec.op.cube
    records = []
    for n in spec.indices_in(interval):
        amp = np.abs(spec.vectors[:, n])
        best = int(np.argmax(amp))  # first maximum = lexicographically smallest site
        center = sites[best]
        tails = []
        for side in tail_sides:
            inside = Cube((0,) * box.dim, side)
            mask = np.fromiter((not inside.contains(s) for s in sites), dtype=bool,
                               count=len(sites))
            tails.append(float(np.sum(spec.vectors[mask, n] ** 2)))
        rate = _profile_decay_rate(spec.vectors[:, n], sites, center, box) if fit_decay else None
        records.append(EigenRecord(int(n), float(spec.eigenvalues[n]), center,
                                   float(amp[best]), tuple(tails), rate))
    return records


def _profile_decay_rate(vec: np.ndarray, sites, center, box: Cube) -> float | None:
    """Exponential rate of the per-shell peak mass, fitted below half the box."""
    dists = np.fromiter((lattice_distance(s, center) for s in sites), dtype=int,
                        count=len(sites))
    r_max = min(int(dists.max()), box.side // 2)
    radii, masses = [], []
    amp = np.abs(vec)
    for r in range(r_max + 1):
        shell = amp[dists == r]
        if shell.size and shell.max() > 0:
            radii.append(r)
            masses.append(float(shell.max()))
    if len(radii) < 3:
        return None
    slope, _ = fit_exponential(radii, masses)
    return -slope


# --- eigenfunction decay inequality ---------------------------------------------


@dataclass
class EdiEntry:
    eigen_index: int
    energy: float
    cube: Cube
    interior_mass: float
    boundary_mass: float
    block_norm: float
    ratio: float
    skipped_resonant: bool = False
    impossible: bool = False


@dataclass
class EdiReport:
    entries: list
    c_edi: float
    skipped: int
    impossible: int

    @property
    def all_finite(self) -> bool:
        return self.impossible == 0 and math.isfinite(self.c_edi)


def edi_check(spec: SpectralData, interval: EnergyInterval, cubes: Sequence[Cube],
              model: DisorderModel, config: Configuration, *,
              resonance_tol: float = RESONANCE_TOL) -> EdiReport:
    """Measured decay-inequality ratios |chi_int u| / (||chi_out R chi_int|| |chi_out u|)
    for every eigenfunction in the interval and every probed cube.

    Cubes resonant with an eigenvalue are skipped and flagged; the summary
    constant is the maximum ratio over everything else.
    """
    spec.require_covers(interval, "decay-inequality check")
    box = spec.op.cube
    for cube in cubes:
        padded = Cube(cube.center, cube.side + 2)
        if not box.contains_cube(padded):
            raise ValueError(f"probe cube {cube} is not strictly inside the box")
    entries = []
    cube_specs = {}
    for cube in cubes:
        op = assemble(cube, model, config)
        cube_specs[cube] = (op, op.spectral(), region(cube, "boundary"), region(cube, "interior"))
    idx = spec.indices_in(interval)
    for n in idx:
        u = spec.vectors[:, n]
        energy = float(spec.eigenvalues[n])
        for cube in cubes:
            op, cspec, out, inner = cube_specs[cube]
            if cspec.min_distance(energy) < resonance_tol:
                entries.append(EdiEntry(int(n), energy, cube, math.nan, math.nan,
                                        math.nan, math.nan, skipped_resonant=True))
                continue
            num = float(np.linalg.norm(u[spec.op.indices(inner)]))
            out_mass = float(np.linalg.norm(u[spec.op.indices(out)]))
            norm = resolvent_block_norm(op, energy, out, inner, spectral=cspec,
                                        resonance_tol=resonance_tol)
            den = norm * out_mass
            if den == 0.0:
                ratio = 0.0 if num == 0.0 else math.inf
                entries.append(EdiEntry(int(n), energy, cube, num, out_mass, norm,
                                        ratio, impossible=num > 0.0))
            else:
                entries.append(EdiEntry(int(n), energy, cube, num, out_mass, norm, num / den))
    live = [e.ratio for e in entries if not e.skipped_resonant and not e.impossible]
    c_edi = max(live) if live else 0.0
    return EdiReport(entries, c_edi,
                     skipped=sum(e.skipped_resonant for e in entries),
                     impossible=sum(e.impossible for e in entries))


# --- eigenvalue counting per window ----------------------------------------------


@dataclass
class WindowCountReport:
    window_sides: tuple
    counts: np.ndarray  # (samples, windows)
    means: np.ndarray
    exponent: float | None
    reference_exponent: float = 1.0


def count_in_window(spectra: Sequence[SpectralData], interval: EnergyInterval,
                    window_sides: Sequence[int], *, center=None) -> WindowCountReport:
    """Per-sample counts of localization centers inside origin-centered windows,
    with a log-log growth fit against the window side."""
    sides = tuple(int(s) for s in window_sides)
    counts = np.zeros((len(spectra), len(sides)), dtype=int)
    for si, spec in enumerate(spectra):
        c = as_site(center) if center is not None else (0,) * spec.op.dim
        recs = centers(spec, interval)
        for wi, side in enumerate(sides):
            window = Cube(c, side)
            counts[si, wi] = sum(window.contains(r.center) for r in recs)
    means = counts.mean(axis=0)
    positive = means > 0
    exponent = None
    if positive.sum() >= 2:
        exponent, _ = fit_power_law(np.array(sides)[positive], means[positive])
    return WindowCountReport(sides, counts, means, exponent)


# --- kernel decay -----------------------------------------------------------------


def _block_norm_of_function(spec: SpectralData, eta: EnergyFunction,
                            rows: np.ndarray, cols: np.ndarray) -> tuple:
    """Exact ||chi_1 eta(H) chi_2|| and the triangle-inequality bounding sum."""
    weights = eta(spec.eigenvalues)
    live = np.nonzero(weights)[0]
    if live.size == 0 or rows.size == 0 or cols.size == 0:
        return 0.0, 0.0
    v1 = spec.vectors[np.ix_(rows, live)]
    v2 = spec.vectors[np.ix_(cols, live)]
    block = (v1 * weights[live]) @ v2.T
    exact = float(np.linalg.svd(block, compute_uv=False)[0])
    bound = float(np.sum(np.linalg.norm(v1, axis=0) * np.linalg.norm(v2, axis=0)
                         * np.abs(weights[live])))
    return exact, bound


@dataclass
class KernelPairResult:
    distance: int
    norms: np.ndarray
    bounds: np.ndarray
    mean: float
    ci_low: float
    ci_high: float
    bound_mean: float


@dataclass
class KernelDecayReport:
    pairs: list
    n_samples: int
    box_side: int
    exponent: float | None
    sample_seeds: list

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.pairs])

    @property
    def distances(self) -> np.ndarray:
        return np.array([p.distance for p in self.pairs])


def kernel_decay_sweep(model: DisorderModel, box: Cube, eta: EnergyFunction,
                       pairs: Sequence[tuple], n_samples: int, seed: int, *,
                       workers: int = 1) -> KernelDecayReport:
    """Sampled E||chi_1 eta(H) chi_2|| for several region pairs, sharing the
    same realizations across pairs, plus a log-log decay fit over distance."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    resolved = []
    for r1, r2 in pairs:
        s1 = r1.sites if isinstance(r1, Region) else tuple(as_site(s) for s in
                                                           (r1.sites() if isinstance(r1, Cube) else r1))
        s2 = r2.sites if isinstance(r2, Region) else tuple(as_site(s) for s in
                                                           (r2.sites() if isinstance(r2, Cube) else r2))
        if set(s1) & set(s2):
            raise ValueError("kernel regions must be disjoint")
        for s in (*s1, *s2):
            if not box.contains(s):
                raise ValueError(f"region site {s} lies outside the box")
        resolved.append((s1, s2, set_distance(s1, s2)))
    seeds = sample_seeds(seed, n_samples)

    def one(i: int) -> list:
        cfg = sample_configuration(model, seeds[i])
        spec = assemble(box, model, cfg).spectral()
        rows_cols = [(spec.op.indices(s1), spec.op.indices(s2)) for s1, s2, _ in resolved]
        return [_block_norm_of_function(spec, eta, r, c) for r, c in rows_cols]

    raw = _map_samples(one, n_samples, workers)
    results = []
    for pi, (_, _, dist) in enumerate(resolved):
        norms = np.array([raw[i][pi][0] for i in range(n_samples)])
        bounds = np.array([raw[i][pi][1] for i in range(n_samples)])
        mean, lo, hi = mean_interval(norms)
        results.append(KernelPairResult(dist, norms, bounds, mean, lo, hi,
                                        float(bounds.mean())))
    means = np.array([r.mean for r in results])
    dists = np.array([r.distance for r in results], dtype=float)
    keep = means > 0
    exponent = None
    if keep.sum() >= 2:
        slope, _ = fit_power_law(dists[keep], means[keep])
        exponent = -slope
    return KernelDecayReport(results, n_samples, box.side, exponent, seeds)


def kernel_decay(model: DisorderModel, box: Cube, eta: EnergyFunction,
                 region1, region2, n_samples: int, seed: int, *,
                 workers: int = 1) -> KernelDecayReport:
    """Single-pair kernel-decay expectation report."""
    return kernel_decay_sweep(model, box, eta, [(region1, region2)], n_samples,
                              seed, workers=workers)


# --- dynamical moments --------------------------------------------------------------


@dataclass
class MomentSample:
    seed: int
    sup_moment: float
    bound: float
    edge_tail: float
    states_in_interval: int


@dataclass
class MomentReport:
    """Sup-over-time-grid transport moments against the time-independent
    eigenfunction-sum bound, per configuration and in aggregate."""

    moment_power: float
    interval: EnergyInterval
    box_side: int
    window_side: int
    n_samples: int
    times: np.ndarray
    samples: list
    sup_mean: float
    sup_ci: tuple
    bound_mean: float
    bound_ci: tuple
    domination_ok: bool
    max_edge_tail: float

    @property
    def sup_values(self) -> np.ndarray:
        return np.array([s.sup_moment for s in self.samples])

    @property
    def bound_values(self) -> np.ndarray:
        return np.array([s.bound for s in self.samples])


def _moment_profile(spec: SpectralData, weights: np.ndarray, window_idx: np.ndarray,
                    live: np.ndarray, times: np.ndarray) -> tuple:
    """Sup over the time grid of || |X|^p exp(-itH) P_I chi_K || and the bound."""
    if live.size == 0 or window_idx.size == 0:
        return 0.0, 0.0
    q_live = spec.vectors[:, live]
    wq = q_live * weights[:, None]          # rows scaled by |x|^p
    qk = q_live[window_idx, :]              # window rows
    bound = float(np.sum(np.linalg.norm(wq, axis=0) * np.linalg.norm(qk, axis=0)))
    lam = spec.eigenvalues[live]
    sup = 0.0
    for t in times:
        phases = np.exp(-1j * t * lam)
        mat = (wq * phases) @ qk.conj().T
        sup = max(sup, float(np.linalg.svd(mat, compute_uv=False)[0]))
    return sup, bound


def dynamical_moment(model: DisorderModel, box: Cube, moment_power: float,
                     interval: EnergyInterval, window: Cube, times: np.ndarray | None,
                     n_samples: int, seed: int, *, workers: int = 1) -> MomentReport:
    """Sample sup_t || |X|^p exp(-itH) P_I chi_K || on a finite time grid together
    with its t-independent spectral bound; the bound dominates per realization."""
    if moment_power < 0:
        raise ValueError("moment power must be nonnegative")
    if not box.contains_cube(window):
        raise ValueError("window must sit inside the box")
    t_grid = default_time_grid() if times is None else np.asarray(times, dtype=float)
    origin = (0,) * box.dim
    sites = box.sites()
    dists = np.fromiter((lattice_distance(s, origin) for s in sites), dtype=float,
                        count=len(sites))
    weights = dists ** moment_power
    shell = region(box, "boundary")
    seeds = sample_seeds(seed, n_samples)

    def one(i: int) -> MomentSample:
        cfg = sample_configuration(model, seeds[i])
        spec = assemble(box, model, cfg).spectral()
        live = spec.indices_in(interval)
        window_idx = spec.op.indices(window)
        sup, bound = _moment_profile(spec, weights, window_idx, live, t_grid)
        shell_idx = spec.op.indices(shell)
        tail = float(np.linalg.norm(spec.vectors[np.ix_(shell_idx, live)], axis=0).max()) \
            if live.size else 0.0
        return MomentSample(seeds[i], sup, bound, tail, int(live.size))

    samples = _map_samples(one, n_samples, workers)
    sups = np.array([s.sup_moment for s in samples])
    bounds = np.array([s.bound for s in samples])
    sup_mean, sup_lo, sup_hi = mean_interval(sups)
    bound_mean, bound_lo, bound_hi = mean_interval(bounds)
    domination = bool(np.all(sups <= bounds + 1e-10))
    return MomentReport(
        moment_power=moment_power, interval=interval, box_side=box.side,
        window_side=window.side, n_samples=n_samples, times=t_grid,
        samples=samples, sup_mean=sup_mean, sup_ci=(sup_lo, sup_hi),
        bound_mean=bound_mean, bound_ci=(bound_lo, bound_hi),
        domination_ok=domination,
        max_edge_tail=float(max(s.edge_tail for s in samples)),
    )


# --- two-bad-cubes event --------------------------------------------------------------


@dataclass
class TwoBadRung:
    rung: int
    side: int
    n_centers: int
    events: int
    freq: float
    ci_low: float
    ci_high: float


@dataclass
class TwoBadReport:
    rungs: list
    n_samples: int
    truncated_at: int | None
    slope: float | None
    reference_slope: float | None


def two_bad_probability(model: DisorderModel, interval, gamma: float,
                        scales: Sequence[int], start: int, n_samples: int, seed: int, *,
                        grid_points: int = 8, budget_sites: int = 250_000,
                        reference_slope: float | None = None, workers: int = 1,
                        resonance_tol: float = RESONANCE_TOL) -> TwoBadReport:
    """Frequency, per rung, of two disjoint bad cubes on the scale grid inside
    the 3x blow-up of the next scale, at a shared probe energy."""
    grid_energies = interval.grid(grid_points) if isinstance(interval, EnergyInterval) \
        else np.asarray(interval, dtype=float)
    rows = []
    truncated_at = None
    seeds = sample_seeds(seed, n_samples)
    for j in range(start, len(scales) - 1):
        side = int(scales[j])
        bounding = Cube((0,) * model.dim, 3 * int(scales[j + 1]))
        grid = ScaleGrid(side, bounding)
        centers_j = grid.sites()
        total_sites = len(centers_j) * side ** model.dim
        if total_sites > budget_sites:
            truncated_at = j
            break
        cubes = [Cube(c, side) for c in centers_j]
        threshold = math.exp(-gamma * side)

        def one(i: int) -> bool:
            cfg = sample_configuration(model, seeds[i])
            bad = np.zeros((len(cubes), grid_energies.size), dtype=bool)
            for ci, cube in enumerate(cubes):
                op = assemble(cube, model, cfg)
                spec = op.spectral()
                out = region(cube, "boundary")
                inner = region(cube, "interior")
                for ei, e in enumerate(grid_energies):
                    if spec.min_distance(float(e)) < resonance_tol:
                        bad[ci, ei] = True
                    else:
                        norm = resolvent_block_norm(op, float(e), out, inner,
                                                    spectral=spec,
                                                    resonance_tol=resonance_tol)
                        bad[ci, ei] = norm > threshold
            for ei in range(grid_energies.size):
                marked = [cubes[ci].center for ci in np.nonzero(bad[:, ei])[0]]
                if len(marked) >= 2 and _max_spread(marked) >= side:
                    return True
            return False

        flags = _map_samples(one, n_samples, workers)
        events = int(sum(flags))
        lo, hi = clopper_pearson(events, n_samples)
        rows.append(TwoBadRung(j, side, len(cubes), events, events / n_samples, lo, hi))
    freqs = [(r.side, r.freq) for r in rows if r.freq > 0]
    slope = None
    if len(freqs) >= 2:
        slope, _ = fit_power_law([s for s, _ in freqs], [f for _, f in freqs])
    return TwoBadReport(rows, n_samples, truncated_at, slope, reference_slope)


def _max_spread(sites) -> int:
    """Largest pairwise sup-distance: the max per-axis coordinate spread."""
    arr = np.asarray(sites, dtype=int)
    return int((arr.max(axis=0) - arr.min(axis=0)).max())
