import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from msalab.disorder import DisorderModel, SingleSiteMeasure, sample_configuration
from msalab.geometry import custom_region, make_cube, region
from msalab.operators import (
    EnergyFunction,
    EnergyInterval,
    IncompleteSpectrumError,
    SingularEnergyError,
    assemble,
    function_apply,
    gershgorin_interval,
    propagate,
    resolvent_block_norm,
    spectral_projector_apply,
    spectrum,
    trace_count,
)


def random_chain(rng, side=51, width=4.0):
    model = DisorderModel.anderson(1, SingleSiteMeasure.uniform(0.0, width))
    cfg = sample_configuration(model, int(rng.integers(0, 2**32)))
    return assemble(make_cube(0, side), model, cfg)


class TestAssemble:
    def test_free_chain_matrix(self, free_model):
        cfg = sample_configuration(free_model, 0)
        op = assemble(make_cube(0, 3), free_model, cfg)
        expected = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
        assert np.array_equal(op.matrix, expected)
        eigs = np.sort(np.linalg.eigvalsh(expected))
        assert np.allclose(op.spectral().eigenvalues, eigs)
        assert np.allclose(eigs, [2 - np.sqrt(2), 2.0, 2 + np.sqrt(2)], atol=1e-12)

    def test_single_site_box(self):
        model = DisorderModel.anderson(1, SingleSiteMeasure.pointlist([(0.9, 1.0)]))
        cfg = sample_configuration(model, 0)
        op = assemble(make_cube(0, 1), model, cfg)
        assert op.matrix.shape == (1, 1)
        assert op.matrix[0, 0] == pytest.approx(2.0 + 0.9)

    def test_2d_free_tensor_sum_oracle(self):
        model = DisorderModel.anderson(2, SingleSiteMeasure.pointlist([(0.0, 1.0)]))
        cfg = sample_configuration(model, 0)
        op = assemble(make_cube((0, 0), 3), model, cfg)
        assert np.all(np.diag(op.matrix) == 4.0)
        lam = np.array([-np.sqrt(2), 0.0, np.sqrt(2)])
        oracle = np.sort([4 + a + b for a in lam for b in lam])
        assert np.allclose(op.spectral().eigenvalues, oracle, atol=1e-12)

    def test_symmetry_and_adjacency(self, anderson_2d):
        cfg = sample_configuration(anderson_2d, 77)
        op = assemble(make_cube((0, 0), 9), anderson_2d, cfg)
        assert np.array_equal(op.matrix, op.matrix.T)
        sites = op.sites
        for i, j in itertools.combinations(range(len(sites)), 2):
            hop = sum(abs(a - b) for a, b in zip(sites[i], sites[j])) == 1
            assert (op.matrix[i, j] == -1.0) == hop

    def test_deterministic_given_seed(self, anderson_w4):
        a = assemble(make_cube(0, 21), anderson_w4, sample_configuration(anderson_w4, 4))
        b = assemble(make_cube(0, 21), anderson_w4, sample_configuration(anderson_w4, 4))
        assert np.array_equal(a.matrix, b.matrix)

    def test_gershgorin_bound(self, anderson_w4):
        cfg = sample_configuration(anderson_w4, 12)
        op = assemble(make_cube(0, 33), anderson_w4, cfg)
        band = gershgorin_interval(op)
        eigs = op.spectral().eigenvalues
        assert band.lo <= eigs.min() and eigs.max() <= band.hi
        assert band.hi <= 0.0 + 4.0 + 4 * 1  # max V plus 4d

    def test_periodic_ring(self, free_model):
        cfg = sample_configuration(free_model, 0)
        op = assemble(make_cube(0, 9), free_model, cfg, boundary="periodic")
        oracle = np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(9) / 9))
        assert np.allclose(np.sort(op.spectral().eigenvalues), oracle, atol=1e-12)


class TestSpectrum:
    def test_diagonal_matrix_pairs(self):
        model = DisorderModel.anderson(1, SingleSiteMeasure.pointlist([(5.0, 1.0)]))
        cfg = sample_configuration(model, 0)
        op = assemble(make_cube(0, 1), model, cfg)
        spec = op.spectral()
        assert spec.eigenvalues[0] == pytest.approx(7.0)

    def test_cross_solver_agreement(self, rng):
        # eigh against an independent second diagonalization of the same matrix
        op = random_chain(rng, side=51)
        spec = op.spectral()
        import scipy.linalg as sla
        vals = sla.eigh(op.matrix, eigvals_only=True)
        assert np.allclose(spec.eigenvalues, vals, atol=1e-9)

    def test_residuals_and_orthonormality(self, rng):
        spec = random_chain(rng).spectral()
        assert spec.residual_max <= 1e-10 * max(1, np.abs(spec.eigenvalues).max())
        assert spec.orth_max <= 1e-10

    def test_iterative_path_matches_dense(self, anderson_w4):
        cfg = sample_configuration(anderson_w4, 99)
        op = assemble(make_cube(0, 63), anderson_w4, cfg)
        dense = np.linalg.eigvalsh(op.matrix)
        window = EnergyInterval(float(dense[5]) - 1e-9, float(dense[12]) + 1e-9)
        it = spectrum(op, interval=window, dense_limit=32)
        assert not it.complete
        got = it.eigenvalues
        expect = dense[(dense >= window.lo) & (dense <= window.hi)]
        assert np.allclose(np.sort(got), expect, atol=1e-8)

    def test_iterative_needs_interval(self, anderson_w4):
        cfg = sample_configuration(anderson_w4, 99)
        op = assemble(make_cube(0, 63), anderson_w4, cfg)
        with pytest.raises(IncompleteSpectrumError):
            spectrum(op, dense_limit=32)


class TestResolvent:
    def test_full_block_is_inverse_distance(self, rng):
        op = random_chain(rng, side=21)
        spec = op.spectral()
        e = float(spec.eigenvalues[4] + 0.37)
        delta = spec.min_distance(e)
        full = region(op.cube, "full")
        norm = resolvent_block_norm(op, e, full, full)
        assert norm == pytest.approx(1.0 / delta, rel=1e-10)

    def test_out_int_matches_dense_inverse(self, free_model):
        cfg = sample_configuration(free_model, 0)
        op = assemble(make_cube(0, 9), free_model, cfg)
        got = resolvent_block_norm(op, -1.0, region(op.cube, "boundary"),
                                   region(op.cube, "interior"))
        inv = np.linalg.inv(op.matrix - (-1.0) * np.eye(9))
        rows = op.indices(region(op.cube, "boundary"))
        cols = op.indices(region(op.cube, "interior"))
        oracle = np.linalg.svd(inv[np.ix_(rows, cols)], compute_uv=False)[0]
        assert got == pytest.approx(oracle, rel=1e-10)

    def test_block_below_full_below_inverse_distance(self, rng):
        op = random_chain(rng, side=33)
        spec = op.spectral()
        e = float(spec.eigenvalues[0] - 0.4)
        out, inner = region(op.cube, "boundary"), region(op.cube, "interior")
        block = resolvent_block_norm(op, e, out, inner)
        full = resolvent_block_norm(op, e, region(op.cube, "full"), region(op.cube, "full"))
        assert block <= full + 1e-14
        assert full <= 1.0 / spec.min_distance(e) + 1e-14

    def test_singular_energy_raises(self, rng):
        op = random_chain(rng, side=15)
        e = float(op.spectral().eigenvalues[3])
        with pytest.raises(SingularEnergyError):
            resolvent_block_norm(op, e, region(op.cube, "full"), region(op.cube, "full"))

    def test_resolvent_identity(self, rng):
        # R(E) - R(E') = (E - E') R(E) R(E')
        op = random_chain(rng, side=15)
        h = op.matrix
        e1, e2 = -0.7, -1.9
        r1 = np.linalg.inv(h - e1 * np.eye(15))
        r2 = np.linalg.inv(h - e2 * np.eye(15))
        assert np.linalg.norm(r1 - r2 - (e1 - e2) * (r1 @ r2), 2) < 1e-10

    def test_gri_ratio_bounded_over_sweep(self, anderson_w4):
        # nested-cube factorization ratio stays bounded; record the sweep max
        ratios = []
        for seed in range(8):
            cfg = sample_configuration(anderson_w4, seed)
            outer = assemble(make_cube(0, 27), anderson_w4, cfg)
            inner_cube = make_cube(0, 9)
            inner = assemble(inner_cube, anderson_w4, cfg)
            e = -0.5 - 0.1 * seed
            a = custom_region([(0,)])
            b = custom_region([(11,), (12,)])
            lhs = resolvent_block_norm(outer, e, b, a)
            mid = resolvent_block_norm(outer, e, b, region(inner_cube, "boundary"))
            rhs = resolvent_block_norm(inner, e, region(inner_cube, "boundary"), a)
            if mid * rhs > 0:
                ratios.append(lhs / (mid * rhs))
        assert ratios and all(np.isfinite(r) for r in ratios)
        assert max(ratios) < 100.0


class TestFunctionsOfOperator:
    def test_projector_disjoint_interval_zero(self, rng):
        op = random_chain(rng, side=31)
        spec = op.spectral()
        v = rng.standard_normal(31)
        out = spectral_projector_apply(spec, EnergyInterval(-10.0, -9.0), v)
        assert np.allclose(out, 0.0)

    def test_projector_full_interval_identity(self, rng):
        op = random_chain(rng, side=31)
        spec = op.spectral()
        v = rng.standard_normal(31)
        band = EnergyInterval(float(spec.eigenvalues[0]) - 1, float(spec.eigenvalues[-1]) + 1)
        assert np.allclose(spectral_projector_apply(spec, band, v), v, atol=1e-10)

    def test_projector_idempotent(self, rng):
        op = random_chain(rng, side=31)
        spec = op.spectral()
        v = rng.standard_normal(31)
        window = EnergyInterval(1.0, 3.0)
        once = spectral_projector_apply(spec, window, v)
        twice = spectral_projector_apply(spec, window, once)
        assert np.linalg.norm(twice - once) <= 1e-10

    def test_rank_one_projector(self, rng):
        op = random_chain(rng, side=15)
        spec = op.spectral()
        e1 = float(spec.eigenvalues[0])
        eta = EnergyFunction.indicator(EnergyInterval(e1 - 1e-6, e1 + 1e-6))
        v = rng.standard_normal(15)
        out = function_apply(spec, eta, v)
        coeff = spec.vectors[:, 0] @ v
        assert np.linalg.norm(out) ** 2 == pytest.approx(coeff ** 2, rel=1e-10)

    def test_table_interpolation_and_support(self):
        eta = EnergyFunction([0.0, 1.0], [0.0, 2.0])
        assert eta(0.5) == pytest.approx(1.0)
        assert eta(1.5) == 0.0
        assert eta.sup_norm == 2.0

    def test_bump_vanishes_at_edges(self):
        eta = EnergyFunction.bump(EnergyInterval(0.0, 1.0))
        assert eta(0.0) == pytest.approx(0.0, abs=1e-12)
        assert eta(0.5) == pytest.approx(1.0)


class TestPropagation:
    def test_t_zero_identity(self, rng):
        op = random_chain(rng, side=21)
        spec = op.spectral()
        v = rng.standard_normal(21)
        assert np.allclose(propagate(spec, 0.0, v), v, atol=1e-12)

    def test_eigenvector_phase(self, rng):
        op = random_chain(rng, side=21)
        spec = op.spectral()
        phi = spec.vectors[:, 5]
        t = 2.3
        out = propagate(spec, t, phi)
        assert np.allclose(out, np.exp(-1j * t * spec.eigenvalues[5]) * phi, atol=1e-10)

    def test_unitarity(self, rng):
        op = random_chain(rng, side=51)
        spec = op.spectral()
        for t in (0.1, 1.0, 57.0):
            v = rng.standard_normal(51) + 1j * rng.standard_normal(51)
            assert abs(np.linalg.norm(propagate(spec, t, v)) - np.linalg.norm(v)) <= 1e-10

    def test_matrix_exponential_oracle(self, rng):
        # 30-site instance against scaling-and-squaring expm
        model = DisorderModel.anderson(1, SingleSiteMeasure.uniform(0.0, 4.0))
        cfg = sample_configuration(model, 2024)
        op = assemble(make_cube(0, 29), model, cfg)
        spec = op.spectral()
        v = rng.standard_normal(29)
        direct = expm(-1j * op.matrix) @ v
        assert np.linalg.norm(propagate(spec, 1.0, v) - direct) <= 1e-8


class TestTraceCount:
    def test_below_spectrum_zero(self, rng):
        spec = random_chain(rng, side=21).spectral()
        assert trace_count(spec, EnergyInterval(-5.0, -4.0)) == 0

    def test_covering_interval_counts_all(self, rng):
        spec = random_chain(rng, side=21).spectral()
        assert trace_count(spec, EnergyInterval(-100.0, 100.0)) == 21

    def test_free_chain_closed_form(self, free_model):
        cfg = sample_configuration(free_model, 0)
        spec = assemble(make_cube(0, 9), free_model, cfg).spectral()
        oracle = 2 - 2 * np.cos(np.arange(1, 10) * np.pi / 10)
        # k = 5 sits exactly at 2 in exact arithmetic; guard the open endpoint
        expected = int(np.sum((oracle >= 0.0) & (oracle < 2.0 - 1e-9)))
        got = trace_count(spec, EnergyInterval(0.0, 2.0, closed_hi=False))
        assert got == expected == 4

    def test_volume_bound(self, anderson_w4):
        for seed in range(5):
            cfg = sample_configuration(anderson_w4, seed)
            spec = assemble(make_cube(0, 15), anderson_w4, cfg).spectral()
            assert trace_count(spec, EnergyInterval(0.0, 8.0)) <= 15


class TestDump:
    def test_coordinate_dump(self, free_model, tmp_path):
        cfg = sample_configuration(free_model, 0)
        op = assemble(make_cube(0, 3), free_model, cfg)
        path = tmp_path / "h.coo"
        op.dump_coordinate(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("#")
        entries = {(int(a), int(b)): float(c) for a, b, c in
                   (line.split() for line in lines[1:])}
        assert entries[(0, 0)] == 2.0 and entries[(0, 1)] == -1.0
