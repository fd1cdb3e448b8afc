"""Multi-scale analysis engine: cube classification, Monte Carlo estimation of
the two-cube decay hypothesis (G) and the weak resonance bound (W), parameter
feasibility gates, and the scale-induction ladder.

A cube is (gamma, E)-good when the boundary-to-interior resolvent block norm
is at most exp(-gamma * L).  All statistical verdicts are phrased through
exact Clopper-Pearson bounds, never through point estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .disorder import DisorderModel, sample_configuration
from .geometry import Cube, as_site, is_suitable_side, lattice_distance, region
from .operators import (
    EnergyInterval,
    RESONANCE_TOL,
    assemble,
    resolvent_block_norm,
)
from .stats import clopper_pearson, clopper_pearson_lower

DEFAULT_GRID_POINTS = 32


class GateError(ValueError):
    """A parameter gate failed; the message names the violated inequality."""

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        super().__init__(f"parameter gate violated: {constraint}" + (f" ({detail})" if detail else ""))


def characteristic_exponent(dim: int, q: float, xi0: float) -> float:
    """xi = min(xi0, (q - d)/4), the exponent the two-cube estimate runs on."""
    return min(xi0, 0.25 * (q - dim))


@dataclass(frozen=True)
class MsaParameters:
    """Induction parameters and their feasibility gates."""

    dim: int
    xi0: float
    beta: float
    theta: float
    q: float
    alpha: float
    c1: float = 2.0
    moment_power: float = 0.0

    @property
    def xi(self) -> float:
        return characteristic_exponent(self.dim, self.q, self.xi0)

    def validate(self) -> None:
        d = self.dim
        if d < 1:
            raise GateError("d >= 1", f"d = {d}")
        if not self.q > d:
            raise GateError("q > d", f"q = {self.q}, d = {d}")
        if not self.xi0 > 0:
            raise GateError("xi0 > 0", f"xi0 = {self.xi0}")
        if not 0.0 < self.theta < 0.5:
            raise GateError("theta in (0, 1/2)", f"theta = {self.theta}")
        if not self.beta > 2 * self.theta:
            raise GateError("beta > 2*theta", f"beta = {self.beta}, theta = {self.theta}")
        if not 1.0 < self.alpha < 2.0:
            raise GateError("alpha in (1, 2)", f"alpha = {self.alpha}")
        xi = self.xi
        lhs = 4 * d * (self.alpha - 1) / (2 - self.alpha)
        if lhs > xi + 1e-12:
            raise GateError("4d(alpha-1)/(2-alpha) <= min(xi0, (q-d)/4)",
                            f"lhs = {lhs:.6g}, xi = {xi:.6g}")
        if self.c1 < 0:
            raise GateError("c1 >= 0", f"c1 = {self.c1}")
        p = self.moment_power
        if p < 0:
            raise GateError("p >= 0", f"p = {p}")
        if p > 0:
            if not p < 2 * xi:
                raise GateError("p < 2*xi", f"p = {p}, xi = {xi:.6g}")
            step1 = 3 * d * (self.alpha - 1) + self.alpha * p
            if not step1 < 2 * xi:
                raise GateError("3d(alpha-1) + alpha*p < 2*xi",
                                f"lhs = {step1:.6g}, 2*xi = {2 * xi:.6g}")


def feasible_alpha(dim: int, q: float, xi0: float, moment_power: float = 0.0) -> tuple:
    """Largest alpha in (1, 2) passing both scale-choice gates, plus a working
    choice 90% of the way to it."""
    if not q > dim:
        raise GateError("q > d", f"q = {q}, d = {dim}")
    if not xi0 > 0:
        raise GateError("xi0 > 0", f"xi0 = {xi0}")
    if moment_power < 0:
        raise GateError("p >= 0", f"p = {moment_power}")
    xi = characteristic_exponent(dim, q, xi0)
    if not moment_power < 2 * xi:
        raise GateError("p < 2*xi", f"p = {moment_power}, xi = {xi:.6g}")
    # 4d(a-1)/(2-a) <= xi  <=>  a <= (4d + 2xi) / (4d + xi)
    bound_volume = (4 * dim + 2 * xi) / (4 * dim + xi)
    # 3d(a-1) + a p < 2xi  <=>  a < (3d + 2xi) / (3d + p)
    bound_moment = (3 * dim + 2 * xi) / (3 * dim + moment_power)
    alpha_max = min(bound_volume, bound_moment)
    chosen = 1.0 + 0.9 * (alpha_max - 1.0)
    return alpha_max, chosen


def next_scale(side: int, alpha: float) -> int:
    """Smallest suitable integer in [side**alpha, side**alpha + 6]."""
    if not is_suitable_side(side):
        raise ValueError(f"side {side} is not suitable (odd multiple of 3)")
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    target = float(side) ** alpha
    base = math.ceil(target)
    candidate = base + (3 - base) % 6
    assert candidate <= target + 6.0
    return candidate


def gamma_recursion(gamma: float, side: int, alpha: float, theta: float, c1: float) -> float:
    """One-rung decay-rate update: multiplicative geometric loss, a boundary
    term c1/L and a resonance-width term 6 L**(alpha(theta-1))."""
    return (gamma * (1.0 - 8.0 * side ** (1.0 - alpha))
            - c1 / side
            - 6.0 * side ** (alpha * (theta - 1.0)))


def rung_floor(side: int, beta: float) -> float:
    """Per-rung lower bar for the decay rate."""
    return side ** (1.0 - beta)


@dataclass(frozen=True)
class GammaStep:
    value: float
    floor: float | None = None
    failed: bool | None = None


def gamma_step(gamma: float, side: int, alpha: float, theta: float, c1: float,
               beta: float | None = None) -> GammaStep:
    """gamma_recursion plus the pass/fail flag against the next rung's floor."""
    value = gamma_recursion(gamma, side, alpha, theta, c1)
    if beta is None:
        return GammaStep(value)
    floor = rung_floor(next_scale(side, alpha), beta)
    return GammaStep(value, floor, value < floor)


@dataclass(frozen=True)
class ScaleRung:
    index: int
    side: int
    gamma: float
    floor: float
    gamma_ok: bool


@dataclass(frozen=True)
class ScaleSequence:
    """Arithmetic ladder (L_k, gamma_k) with per-rung floor flags."""

    rungs: tuple

    @classmethod
    def build(cls, side0: int, gamma0: float, params: MsaParameters, count: int) -> "ScaleSequence":
        if count < 1:
            raise ValueError("ladder needs at least one rung")
        side, gamma = side0, gamma0
        rungs = []
        for k in range(count):
            floor = rung_floor(side, params.beta)
            rungs.append(ScaleRung(k, side, gamma, floor, gamma >= floor))
            if k + 1 < count:
                nxt = next_scale(side, params.alpha)
                gamma = gamma_recursion(gamma, side, params.alpha, params.theta, params.c1)
                side = nxt
        return cls(tuple(rungs))

    @property
    def sides(self) -> list:
        return [r.side for r in self.rungs]


def scale_ladder(side0: int, alpha: float, count: int) -> list:
    """Sides only: side0 and its next_scale iterates."""
    sides = [side0]
    for _ in range(count - 1):
        sides.append(next_scale(sides[-1], alpha))
    return sides


# --- cube classification ------------------------------------------------------


@dataclass
class GoodnessVerdict:
    """Per-energy goodness of one cube at decay rate gamma.

    min_margin is min over energies of log(threshold) - log(norm); positive
    margins mean the cube is good with room to spare.  `certified` is True only
    when resolvent-identity bounds close every grid gap, so the verdict holds
    for the whole interval and not just the probe grid.
    """

    cube: Cube
    gamma: float
    energies: np.ndarray
    norms: np.ndarray
    good: np.ndarray
    resonant: np.ndarray
    threshold: float
    certified: bool
    min_margin: float

    @property
    def all_good(self) -> bool:
        return bool(self.good.all())


def classify_cube(model: DisorderModel, config, cube: Cube, energies, gamma: float, *,
                  grid_points: int = DEFAULT_GRID_POINTS, certify: bool = True,
                  resonance_tol: float = RESONANCE_TOL) -> GoodnessVerdict:
    """Classify one cube as (gamma, E)-good or bad across an energy grid."""
    if gamma < 0:
        raise ValueError(f"decay rate gamma must be nonnegative, got {gamma}")
    interval = energies if isinstance(energies, EnergyInterval) else None
    grid = interval.grid(grid_points) if interval is not None else np.asarray(energies, dtype=float)
    if grid.size == 0:
        raise ValueError("no probe energies")
    op = assemble(cube, model, config)
    spec = op.spectral()
    out = region(cube, "boundary")
    inner = region(cube, "interior")
    threshold = math.exp(-gamma * cube.side)
    norms = np.empty(grid.size)
    resonant = np.zeros(grid.size, dtype=bool)
    for i, e in enumerate(grid):
        dist = spec.min_distance(float(e))
        if dist < resonance_tol:
            norms[i] = np.inf
            resonant[i] = True
        else:
            norms[i] = resolvent_block_norm(op, float(e), out, inner, spectral=spec,
                                            resonance_tol=resonance_tol)
    good = norms <= threshold
    certified = False
    if certify and interval is not None and grid.size >= 2 and bool(good.all()):
        certified = _certify_gaps(spec, grid, norms, threshold)
    with np.errstate(divide="ignore"):
        margins = -gamma * cube.side - np.log(np.maximum(norms, 1e-300))
    min_margin = float(np.min(np.where(resonant, -np.inf, margins)))
    return GoodnessVerdict(cube, gamma, grid, norms, good, resonant, threshold,
                           certified, min_margin)


def _certify_gaps(spec, grid: np.ndarray, norms: np.ndarray, threshold: float) -> bool:
    """Close each grid gap with the resolvent-identity perturbation bound."""
    for i in range(grid.size - 1):
        half = 0.5 * (grid[i + 1] - grid[i])
        for e, norm in ((grid[i], norms[i]), (grid[i + 1], norms[i + 1])):
            dist = spec.min_distance(float(e))
            if dist <= half:
                return False
            bound = norm + half * (1.0 / dist) * (1.0 / (dist - half))
            if bound > threshold:
                return False
    return True


# --- Monte Carlo estimates ----------------------------------------------------


@dataclass
class EstimateReport:
    """Outcome of a sampled hypothesis check against its theoretical threshold."""

    hypothesis: str
    dim: int
    side: int
    n_samples: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    lower_one_sided: float
    threshold: float
    holds: bool
    params: dict
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "hypothesis": self.hypothesis,
            "dim": self.dim,
            "side": self.side,
            "n_samples": self.n_samples,
            "successes": self.successes,
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "lower_one_sided": self.lower_one_sided,
            "threshold": self.threshold,
            "holds": self.holds,
            "seed": self.seed,
        }
        out.update(self.params)
        return out


def sample_seeds(seed: int, n: int) -> list:
    """Derive n per-sample configuration seeds from one root seed."""
    state = np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)
    return [int(v) for v in state]


def default_pair(dim: int, side: int) -> tuple:
    return (0,) * dim, (side,) + (0,) * (dim - 1)


def _map_samples(worker: Callable, n: int, workers: int) -> list:
    if workers <= 1:
        return [worker(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(n)))


def _pair_margin(model: DisorderModel, cubes, grid: np.ndarray, cfg,
                 resonance_tol: float) -> float:
    """Largest gamma at which the two-cube event holds for this realization:
    min over energies of max over the pair of -log(norm)/L."""
    side = cubes[0].side
    per_cube = []
    for cube in cubes:
        op = assemble(cube, model, cfg)
        spec = op.spectral()
        out = region(cube, "boundary")
        inner = region(cube, "interior")
        margins = np.empty(grid.size)
        for i, e in enumerate(grid):
            if spec.min_distance(float(e)) < resonance_tol:
                margins[i] = -np.inf
            else:
                norm = resolvent_block_norm(op, float(e), out, inner, spectral=spec,
                                            resonance_tol=resonance_tol)
                margins[i] = -math.log(max(norm, 1e-300)) / side
        per_cube.append(margins)
    return float(np.max(np.vstack(per_cube), axis=0).min())


def two_cube_margins(model: DisorderModel, interval, side: int, n_samples: int, seed: int, *,
                     placement: tuple | None = None, grid_points: int = DEFAULT_GRID_POINTS,
                     workers: int = 1, resonance_tol: float = RESONANCE_TOL) -> tuple:
    """Per-sample attainable decay rates for the two-cube event, plus the seeds."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    x, y = placement if placement is not None else default_pair(model.dim, side)
    x, y = as_site(x), as_site(y)
    if lattice_distance(x, y) < side:
        raise ValueError(f"cube centers must be at distance >= {side}, got {lattice_distance(x, y)}")
    cubes = (Cube(x, side), Cube(y, side))
    grid = interval.grid(grid_points) if isinstance(interval, EnergyInterval) \
        else np.asarray(interval, dtype=float)
    seeds = sample_seeds(seed, n_samples)

    def one(i: int) -> float:
        cfg = sample_configuration(model, seeds[i])
        return _pair_margin(model, cubes, grid, cfg, resonance_tol)

    margins = np.array(_map_samples(one, n_samples, workers))
    return margins, seeds


def estimate_G(model: DisorderModel, interval, side: int, gamma: float, xi: float,
               n_samples: int, seed: int, *, placement: tuple | None = None,
               grid_points: int = DEFAULT_GRID_POINTS, workers: int = 1,
               confidence: float = 0.95) -> EstimateReport:
    """Estimate P{at every probed energy, one of two distant cubes is good}.

    The hypothesis holds empirically when the two-sided CI lower bound clears
    1 - L**(-2 xi).
    """
    margins, seeds = two_cube_margins(model, interval, side, n_samples, seed,
                                      placement=placement, grid_points=grid_points,
                                      workers=workers)
    successes = int((margins >= gamma).sum())
    p_hat = successes / n_samples
    ci_low, ci_high = clopper_pearson(successes, n_samples, confidence)
    threshold = 1.0 - side ** (-2.0 * xi)
    return EstimateReport(
        hypothesis="G", dim=model.dim, side=side, n_samples=n_samples,
        successes=successes, p_hat=p_hat, ci_low=ci_low, ci_high=ci_high,
        lower_one_sided=clopper_pearson_lower(successes, n_samples, confidence),
        threshold=threshold, holds=ci_low >= threshold,
        params={"gamma": gamma, "xi": xi, "grid_points": grid_points},
        seed=seed,
        extra={"sample_margins": margins.tolist(), "sample_seeds": seeds},
    )


def estimate_W(model: DisorderModel, energy, side: int, theta: float, q: float,
               n_samples: int, seed: int, *, center=None,
               grid_points: int = DEFAULT_GRID_POINTS, workers: int = 1,
               confidence: float = 0.95) -> EstimateReport:
    """Estimate the resonance probability P{dist(spec, E) <= exp(-L**theta)}.

    For an interval input every grid energy is tested and the worst one is
    reported.  The bound holds empirically when the CI upper bound stays below
    L**(-q).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < theta < 0.5:
        raise GateError("theta in (0, 1/2)", f"theta = {theta}")
    grid = energy.grid(grid_points) if isinstance(energy, EnergyInterval) \
        else np.atleast_1d(np.asarray(energy, dtype=float))
    c = as_site(center) if center is not None else (0,) * model.dim
    cube = Cube(c, side)
    cutoff = math.exp(-float(side) ** theta)
    seeds = sample_seeds(seed, n_samples)

    def one(i: int) -> np.ndarray:
        cfg = sample_configuration(model, seeds[i])
        op = assemble(cube, model, cfg)
        vals = np.linalg.eigvalsh(op.matrix)
        return np.abs(vals[None, :] - grid[:, None]).min(axis=1) <= cutoff

    events = np.array(_map_samples(one, n_samples, workers))  # (n, n_grid)
    counts = events.sum(axis=0)
    worst = int(np.argmax(counts))
    successes = int(counts[worst])
    p_hat = successes / n_samples
    ci_low, ci_high = clopper_pearson(successes, n_samples, confidence)
    threshold = side ** (-q)
    per_energy = [
        {"energy": float(grid[j]), "events": int(counts[j]),
         "p_hat": counts[j] / n_samples}
        for j in range(grid.size)
    ]
    return EstimateReport(
        hypothesis="W", dim=model.dim, side=side, n_samples=n_samples,
        successes=successes, p_hat=p_hat, ci_low=ci_low, ci_high=ci_high,
        lower_one_sided=clopper_pearson_lower(successes, n_samples, confidence),
        threshold=threshold, holds=ci_high <= threshold,
        params={"theta": theta, "q": q, "energy": float(grid[worst]),
                "resonance_cutoff": cutoff},
        seed=seed,
        extra={"per_energy": per_energy, "sample_seeds": seeds},
    )


# --- initial-scale search -----------------------------------------------------


@dataclass
class GCalibration:
    """Search result for (gamma, xi) making the two-cube estimate hold."""

    found: bool
    gamma: float | None
    xi: float | None
    gamma_floor: float
    xi_min: float
    best_gamma: float
    best_xi: float
    side: int
    n_samples: int
    margins: np.ndarray

    def to_dict(self) -> dict:
        return {
            "found": self.found, "gamma": self.gamma, "xi": self.xi,
            "gamma_floor": self.gamma_floor, "xi_min": self.xi_min,
            "best_gamma": self.best_gamma, "best_xi": self.best_xi,
            "side": self.side, "n_samples": self.n_samples,
        }


def _xi_from_ci(successes: int, n: int, side: int, confidence: float) -> float:
    """Largest xi with CI lower bound >= 1 - side**(-2 xi)."""
    lo = clopper_pearson(successes, n, confidence)[0]
    gap = 1.0 - lo
    if gap <= 0.0:
        return math.inf
    if gap >= 1.0:
        return -math.inf
    return -math.log(gap) / (2.0 * math.log(side))


def calibrate_G(model: DisorderModel, interval, side: int, n_samples: int, seed: int, *,
                beta: float, xi_min: float = 0.5, gamma_floor: float | None = None,
                placement: tuple | None = None, grid_points: int = DEFAULT_GRID_POINTS,
                workers: int = 1, confidence: float = 0.95) -> GCalibration:
    """Search for (gamma, xi) with gamma >= side**(beta-1) and xi >= xi_min such
    that the two-cube estimate holds at the CI level; report the best attainable
    pair either way."""
    floor = side ** (beta - 1.0) if gamma_floor is None else float(gamma_floor)
    margins, _ = two_cube_margins(model, interval, side, n_samples, seed,
                                  placement=placement, grid_points=grid_points,
                                  workers=workers)

    def best_over(candidates) -> tuple:
        best = (-math.inf, math.nan)
        for g in candidates:
            k = int((margins >= g).sum())
            xi = _xi_from_ci(k, n_samples, side, confidence)
            if xi > best[0] or (xi == best[0] and g > best[1]):
                best = (xi, g)
        return best

    finite = sorted({float(m) for m in margins if math.isfinite(m)})
    best_xi_all, best_gamma_all = best_over(finite or [0.0])
    eligible = [g for g in finite if g >= floor] + [floor]
    xi_at, gamma_at = best_over(eligible)
    found = math.isfinite(xi_at) and xi_at >= xi_min
    return GCalibration(
        found=found,
        gamma=gamma_at if found else None,
        xi=min(xi_at, best_xi_all) if found else None,
        gamma_floor=floor, xi_min=xi_min,
        best_gamma=best_gamma_all, best_xi=best_xi_all,
        side=side, n_samples=n_samples, margins=margins,
    )


# --- scale induction ----------------------------------------------------------


@dataclass
class InductionRung:
    index: int
    side: int
    gamma: float
    floor: float
    gamma_ok: bool
    report: EstimateReport | None
    note: str = ""


@dataclass
class InductionReport:
    rungs: list
    halted: str
    params: MsaParameters
    seed: int

    @property
    def all_hold(self) -> bool:
        return all(r.report is not None and r.report.holds for r in self.rungs)


def run_induction(model: DisorderModel, params: MsaParameters, side0: int, gamma0: float,
                  interval, n_per_rung: int, max_rungs: int, seed: int, *,
                  budget_sites: int = 200_000, grid_points: int = DEFAULT_GRID_POINTS,
                  workers: int = 1, safety: float = 2.0) -> InductionReport:
    """Walk the ladder: estimate the two-cube hypothesis at each scale, advance
    with next_scale and the decay-rate recursion, halt on the first empirical
    failure, budget overrun, or collapsed decay rate."""
    params.validate()
    if not is_suitable_side(side0):
        raise ValueError(f"initial side {side0} is not suitable")
    gate = safety * side0 ** (params.beta - 1.0)
    if gamma0 < gate:
        raise GateError("gamma0 >= safety * L0**(beta-1)",
                        f"gamma0 = {gamma0:.6g}, bar = {gate:.6g}")
    rungs = []
    side, gamma = side0, gamma0
    halted = "completed"
    rung_seeds = sample_seeds(seed, max_rungs)
    for k in range(max_rungs):
        floor = rung_floor(side, params.beta)
        if side ** params.dim > budget_sites:
            rungs.append(InductionRung(k, side, gamma, floor, gamma >= floor, None,
                                       note="budget-exceeded"))
            halted = "budget-exceeded"
            break
        if gamma <= 0:
            rungs.append(InductionRung(k, side, gamma, floor, False, None,
                                       note="gamma-collapsed"))
            halted = "gamma-collapsed"
            break
        report = estimate_G(model, interval, side, gamma, params.xi, n_per_rung,
                            rung_seeds[k], grid_points=grid_points, workers=workers)
        rungs.append(InductionRung(k, side, gamma, floor, gamma >= floor, report))
        if not report.holds:
            halted = "empirical-failure"
            break
        gamma = gamma_recursion(gamma, side, params.alpha, params.theta, params.c1)
        side = next_scale(side, params.alpha)
    return InductionReport(rungs, halted, params, seed)
