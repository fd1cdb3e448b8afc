"""Finite-volume Hamiltonians on cube site sets and their spectral calculus.

The operator on a box is the real symmetric matrix with 2d + V on the
diagonal and -1 between nearest neighbors inside the box (hard truncation by
default, the discrete Dirichlet restriction).  Everything downstream --
resolvent block norms, spectral projectors, bounded functions of the
operator, the unitary propagator, eigenvalue counting -- is computed from one
eigendecomposition per box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .disorder import Configuration, DisorderModel, potential
from .geometry import Cube, Region, SiteLike, as_site

DENSE_LIMIT = 4000
RESONANCE_TOL = 1e-12
DEFAULT_EIG_TOL = 1e-10


class SingularEnergyError(ValueError):
    """Probe energy within the resonance tolerance of the spectrum."""

    def __init__(self, energy: float, distance: float):
        self.energy = energy
        self.distance = distance
        super().__init__(f"energy {energy!r} is within {distance:.3e} of the spectrum")


class IncompleteSpectrumError(RuntimeError):
    """Requested spectral content outside the computed range."""


class SolverConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


@dataclass(frozen=True)
class EnergyInterval:
    """Bounded interval with endpoint inclusion flags."""

    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = True

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")
        if self.lo == self.hi and not (self.closed_lo and self.closed_hi):
            raise ValueError("degenerate interval must be closed on both sides")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, energy: float) -> bool:
        above = energy >= self.lo if self.closed_lo else energy > self.lo
        below = energy <= self.hi if self.closed_hi else energy < self.hi
        return above and below

    def mask(self, energies: np.ndarray) -> np.ndarray:
        e = np.asarray(energies)
        above = e >= self.lo if self.closed_lo else e > self.lo
        below = e <= self.hi if self.closed_hi else e < self.hi
        return above & below

    def covers(self, other: "EnergyInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def grid(self, n: int) -> np.ndarray:
        """Uniform probe grid including both endpoints (midpoint for n = 1)."""
        if n < 1:
            raise ValueError("grid needs at least one point")
        if n == 1:
            return np.array([self.midpoint])
        return np.linspace(self.lo, self.hi, n)


class BoxOperator:
    """Assembled finite-volume Hamiltonian plus its site bookkeeping."""

    def __init__(self, cube: Cube, matrix: np.ndarray, sites: Sequence, *,
                 model: DisorderModel | None = None,
                 config: Configuration | None = None,
                 boundary: str = "dirichlet"):
        self.cube = cube
        self.matrix = matrix
        self.sites = list(sites)
        self.model = model
        self.config = config
        self.boundary = boundary
        self._index = {s: i for i, s in enumerate(self.sites)}
        self._spectral: SpectralData | None = None

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return self.cube.dim

    def index_of(self, site: SiteLike) -> int:
        s = as_site(site)
        try:
            return self._index[s]
        except KeyError:
            raise ValueError(f"site {s} lies outside the box") from None

    def indices(self, where) -> np.ndarray:
        """Row indices for a Region, Cube or explicit site collection."""
        if isinstance(where, Region):
            sites = where.sites
        elif isinstance(where, Cube):
            sites = where.sites()
        else:
            sites = [as_site(s) for s in where]
        return np.array([self.index_of(s) for s in sites], dtype=int)

    def spectral(self, tol: float = DEFAULT_EIG_TOL) -> "SpectralData":
        if self._spectral is None:
            self._spectral = spectrum(self, tol=tol)
        return self._spectral

    def dump_coordinate(self, path) -> None:
        """Text dump, one `row col value` line per nonzero entry."""
        with open(path, "w") as fh:
            nz = np.nonzero(self.matrix)
            fh.write(f"# symmetric {self.n_sites} x {self.n_sites}, {len(nz[0])} nonzeros\n")
            for i, j in zip(*nz):
                fh.write(f"{i} {j} {self.matrix[i, j]:.17g}\n")


def _wrap(coord: int, center: int, radius: int) -> int:
    side = 2 * radius + 1
    return center + ((coord - center + radius) % side) - radius


def assemble(cube: Cube, model: DisorderModel, config: Configuration, *,
             boundary: str = "dirichlet") -> BoxOperator:
    """Build the box Hamiltonian for one disorder realization."""
    if boundary not in ("dirichlet", "periodic"):
        raise ValueError(f"boundary must be dirichlet or periodic, got {boundary!r}")
    if cube.dim != model.dim:
        raise ValueError(f"cube dimension {cube.dim} != model dimension {model.dim}")
    sites = cube.sites()
    index = {s: i for i, s in enumerate(sites)}
    n = len(sites)
    h = np.zeros((n, n))
    two_d = 2.0 * cube.dim
    for i, site in enumerate(sites):
        h[i, i] = two_d + potential(model, config, site)
        for axis in range(cube.dim):
            for step in (-1, 1):
                nb = list(site)
                nb[axis] += step
                if boundary == "periodic":
                    nb[axis] = _wrap(nb[axis], cube.center[axis], cube.radius)
                nb = tuple(nb)
                if nb == site:
                    continue
                j = index.get(nb)
                if j is not None:
                    h[i, j] = -1.0
    return BoxOperator(cube, h, sites, model=model, config=config, boundary=boundary)


class SpectralData:
    """Eigenpairs of a box operator with residual and orthonormality audits.

    `complete` is True when every eigenpair is present (dense path); iterative
    solves carry the interval they certifiably cover instead.
    """

    def __init__(self, op: BoxOperator, eigenvalues: np.ndarray, vectors: np.ndarray, *,
                 tol: float = DEFAULT_EIG_TOL, complete: bool = True,
                 covered: EnergyInterval | None = None, check_columns: int = 512):
        order = np.argsort(eigenvalues, kind="stable")
        self.op = op
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)[order]
        self.vectors = np.asarray(vectors, dtype=float)[:, order]
        self.complete = complete
        self.covered = covered
        self.tol = tol
        m = self.vectors.shape[1]
        cols = np.arange(m)
        if m > check_columns:
            # spot-check a deterministic subset on large solves
            picks = np.linspace(0, m - 1, check_columns).astype(int)
            cols = np.unique(picks)
        res = op.matrix @ self.vectors[:, cols] - self.vectors[:, cols] * self.eigenvalues[cols]
        self.residual_max = float(np.linalg.norm(res, axis=0).max())
        gram = self.vectors[:, cols].T @ self.vectors[:, cols]
        self.orth_max = float(np.abs(gram - np.eye(len(cols))).max())
        self.checked_columns = len(cols)
        scale = max(1.0, float(np.abs(self.eigenvalues).max(initial=0.0)))
        if self.residual_max > tol * scale or self.orth_max > tol:
            raise SolverConvergenceError(
                f"eigensolve did not meet tolerance {tol:g}: residual {self.residual_max:.3e}, "
                f"orthonormality defect {self.orth_max:.3e}",
                residual=self.residual_max,
            )

    @property
    def n_states(self) -> int:
        return self.eigenvalues.size

    def indices_in(self, interval: EnergyInterval) -> np.ndarray:
        return np.nonzero(interval.mask(self.eigenvalues))[0]

    def min_distance(self, energy: float) -> float:
        return float(np.abs(self.eigenvalues - energy).min())

    def require_complete(self, what: str) -> None:
        if not self.complete:
            raise IncompleteSpectrumError(f"{what} needs the complete spectrum")

    def require_covers(self, interval: EnergyInterval, what: str) -> None:
        if self.complete:
            return
        if self.covered is None or not self.covered.covers(interval):
            raise IncompleteSpectrumError(
                f"{what} needs spectral data on [{interval.lo}, {interval.hi}], "
                f"computed range is {self.covered}"
            )


def spectrum(op: BoxOperator, tol: float = DEFAULT_EIG_TOL,
             interval: EnergyInterval | None = None,
             dense_limit: int = DENSE_LIMIT) -> SpectralData:
    """All eigenpairs (dense) or the eigenpairs inside `interval` (shift-invert)."""
    if op.n_sites <= dense_limit:
        vals, vecs = np.linalg.eigh(op.matrix)
        return SpectralData(op, vals, vecs, tol=tol, complete=True)
    if interval is None:
        raise IncompleteSpectrumError(
            f"box has {op.n_sites} sites > dense limit {dense_limit}; "
            "pass an energy interval for the iterative path"
        )
    return _iterative_spectrum(op, interval, tol)


def _iterative_spectrum(op: BoxOperator, interval: EnergyInterval, tol: float) -> SpectralData:
    from scipy.sparse import csr_matrix
    from scipy.sparse.linalg import eigsh

    n = op.n_sites
    a = csr_matrix(op.matrix)
    sigma = interval.midpoint
    k = min(n - 2, 32)
    while True:
        vals, vecs = eigsh(a, k=k, sigma=sigma, which="LM")
        spans = vals.min() < interval.lo and vals.max() > interval.hi
        if spans or k >= n - 2:
            break
        k = min(n - 2, 2 * k)
    if not (vals.min() < interval.lo and vals.max() > interval.hi):
        raise IncompleteSpectrumError(
            f"iterative solve could not bracket [{interval.lo}, {interval.hi}]"
        )
    inside = interval.mask(vals)
    # consistency pass with a displaced shift; counts must agree
    shift = interval.lo - max(interval.width, 1e-3)
    vals2 = eigsh(a, k=k, sigma=shift, which="LM", return_eigenvectors=False)
    n1, n2 = int(inside.sum()), int(interval.mask(vals2).sum())
    if n1 != n2 and vals2.max() > interval.hi:
        raise SolverConvergenceError(
            f"eigenvalue count in the target window disagrees between shifts ({n1} vs {n2})"
        )
    return SpectralData(op, vals[inside], vecs[:, inside], tol=tol,
                        complete=False, covered=interval)


def resolvent_block_norm(op: BoxOperator, energy: float, rows, cols, *,
                         spectral: SpectralData | None = None,
                         resonance_tol: float = RESONANCE_TOL) -> float:
    """Operator norm of the rows x cols block of (H - E)^{-1}."""
    spec = spectral if spectral is not None else op.spectral()
    spec.require_complete("resolvent block norm")
    dist = spec.min_distance(energy)
    if dist < resonance_tol:
        raise SingularEnergyError(energy, dist)
    ri = op.indices(rows)
    ci = op.indices(cols)
    if ri.size == 0 or ci.size == 0:
        return 0.0
    weights = 1.0 / (spec.eigenvalues - energy)
    block = (spec.vectors[ri] * weights) @ spec.vectors[ci].T
    return float(np.linalg.svd(block, compute_uv=False)[0])


def spectral_projector_apply(spec: SpectralData, interval: EnergyInterval,
                             vector: np.ndarray) -> np.ndarray:
    """Apply the spectral projector onto `interval`."""
    spec.require_covers(interval, "spectral projector")
    idx = spec.indices_in(interval)
    v = np.asarray(vector)
    if v.shape[0] != spec.vectors.shape[0]:
        raise ValueError("vector length does not match the box")
    if idx.size == 0:
        return np.zeros_like(v)
    basis = spec.vectors[:, idx]
    return basis @ (basis.T @ v)


class EnergyFunction:
    """Bounded spectral multiplier: a value table with linear interpolation,
    identically zero outside its support interval."""

    def __init__(self, energies: Sequence[float], values: Sequence[float],
                 support: EnergyInterval | None = None):
        e = np.asarray(energies, dtype=float)
        v = np.asarray(values, dtype=float)
        if e.ndim != 1 or e.shape != v.shape or e.size == 0:
            raise ValueError("table needs matching 1-d energy and value arrays")
        if np.any(np.diff(e) < 0):
            raise ValueError("table energies must be nondecreasing")
        self.energies = e
        self.values = v
        self.support = support if support is not None else EnergyInterval(float(e[0]), float(e[-1]))
        self.sup_norm = float(np.abs(v).max())

    def __call__(self, energy) -> np.ndarray:
        e = np.asarray(energy, dtype=float)
        out = np.interp(e, self.energies, self.values)
        out = np.where(self.support.mask(e), out, 0.0)
        return out if out.ndim else float(out)

    @classmethod
    def indicator(cls, interval: EnergyInterval) -> "EnergyFunction":
        return cls([interval.lo, interval.hi], [1.0, 1.0], support=interval)

    @classmethod
    def bump(cls, interval: EnergyInterval, points: int = 65) -> "EnergyFunction":
        """Smooth cosine-squared bump supported on the interval."""
        grid = np.linspace(interval.lo, interval.hi, points)
        u = (grid - interval.midpoint) / (interval.width / 2 if interval.width else 1.0)
        return cls(grid, np.cos(np.pi * u / 2) ** 2, support=interval)


def function_apply(spec: SpectralData, eta: EnergyFunction, vector: np.ndarray) -> np.ndarray:
    """Apply eta(H) for a bounded table function eta supported inside I."""
    spec.require_covers(eta.support, "function of the operator")
    v = np.asarray(vector)
    weights = eta(spec.eigenvalues)
    coeff = spec.vectors.T @ v
    return spec.vectors @ (weights * coeff)


def propagate(spec: SpectralData, t: float, vector: np.ndarray) -> np.ndarray:
    """Apply the unitary exp(-itH) through the eigenbasis."""
    spec.require_complete("time propagation")
    v = np.asarray(vector, dtype=complex)
    phases = np.exp(-1j * t * spec.eigenvalues)
    return spec.vectors @ (phases * (spec.vectors.T @ v))


def trace_count(spec: SpectralData, interval: EnergyInterval) -> int:
    """Number of eigenvalues in the interval (the volume-bound observable)."""
    spec.require_covers(interval, "eigenvalue counting")
    return int(spec.indices_in(interval).size)


def gershgorin_interval(op: BoxOperator) -> EnergyInterval:
    radii = np.abs(op.matrix).sum(axis=1) - np.abs(np.diag(op.matrix))
    diag = np.diag(op.matrix)
    return EnergyInterval(float((diag - radii).min()), float((diag + radii).max()))
