import numpy as np
import pytest

from igabem.inclusions import Cell, LinearInclusion
from igabem.kernels import ElasticConstants, kelvin_U
from igabem.nurbs import bilinear_patch, line_curve, refine_surface
from igabem.oracles import (
    PerturbedConstants,
    bar_regular_reference,
    bar_singular_reference,
    closed_box_T,
    unit_cube_patches,
)
from igabem.quadrature.bar import bar_block, bar_block_local, bar_integral_regular, bar_integral_singular, classify_source
from igabem.quadrature.gauss import box_rule_2d, box_rule_3d, gauss_rule
from igabem.quadrature.options import QuadratureOptions
from igabem.quadrature.surface import PatchIntegrator, fan_rule
from igabem.quadrature.volume import (
    corner_pyramids,
    integrate_volume,
    integrate_volume_regular,
    pyramid_rule,
    singular_region_rule,
)
from helpers import box_inclusion

MAT = ElasticConstants(1.0, 0.3)
UNIT_FACE = bilinear_patch([0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0])

REGULAR_NONZERO = {(0, 3), (0, 5), (1, 0), (1, 1), (1, 2), (1, 4), (2, 0), (2, 1), (2, 2), (2, 4)}


class TestGauss:
    def test_small_rules(self):
        r = gauss_rule(1)
        assert r.nodes[0] == 0.0 and r.weights[0] == 2.0
        r = gauss_rule(2)
        np.testing.assert_allclose(np.abs(r.nodes), 1 / np.sqrt(3), atol=1e-15)

    def test_exactness(self):
        r = gauss_rule(4)
        assert abs(r.weights @ r.nodes**6 - 2 / 7) < 1e-14

    @pytest.mark.parametrize("n", [0, 65])
    def test_order_range(self, n):
        with pytest.raises(ValueError):
            gauss_rule(n)

    def test_box_rule_volume(self):
        _, w = box_rule_3d([0, 0, 0], [1, 2, 3], 3)
        assert w.sum() == pytest.approx(6.0)


class TestSurface:
    def test_unit_face_area(self):
        assert PatchIntegrator(UNIT_FACE).integrate_scalar(lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-14)

    def test_fan_rule_area(self):
        for p in ([0.3, 0.6], [0.0, 0.0], [1.0, 0.4]):
            for layout in ("edges", "split"):
                _, _, w = fan_rule([0, 0], [1, 1], p, 6, layout)
                assert w.sum() == pytest.approx(1.0, abs=1e-14)

    def test_far_U_against_high_order(self):
        src = np.array([0.4, 0.3, 2.0])
        ig = PatchIntegrator(UNIT_FACE)
        Ub, _ = ig.integrate(src, MAT)
        u, v, w = box_rule_2d([0, 0], [1, 1], 32)
        x, _, jac, R = ig.geometry(u, v)
        ref = np.einsum("g,gij,gb->bij", w * jac, kelvin_U(src, x, MAT), R)
        assert np.abs(Ub - ref).max() < 1e-8 * np.abs(ref).max()

    def test_singular_layouts_agree(self):
        src = np.array([0.5, 0.5, 0.0])
        a = PatchIntegrator(UNIT_FACE, QuadratureOptions(fan_layout="edges")).integrate(src, MAT, (0.5, 0.5))[0]
        b = PatchIntegrator(UNIT_FACE, QuadratureOptions(fan_layout="split")).integrate(src, MAT, (0.5, 0.5))[0]
        assert np.abs(a - b).max() < 1e-7 * np.abs(a).max()

    def test_singular_order_convergence(self):
        srf = refine_surface(UNIT_FACE, (1, 1), ((0.5,), (0.5,)))
        src = srf.evaluate(0.3, 0.7)
        out = [PatchIntegrator(srf, QuadratureOptions(singular_order=n)).integrate(src, MAT, (0.3, 0.7))
               for n in (8, 16)]
        for k in (0, 1):
            assert np.abs(out[0][k] - out[1][k]).max() < 1e-6 * np.abs(out[1][k]).max()

    def test_regularised_T_annihilates_constants(self):
        srf = refine_surface(UNIT_FACE, (1, 1), ((0.5,), (0.5,)))
        _, Tb = PatchIntegrator(srf).integrate(srf.evaluate(0.3, 0.7), MAT, (0.3, 0.7))
        assert np.abs(Tb.sum(axis=0)).max() < 1e-13

    def test_closed_box_identity(self, rng):
        assert closed_box_T(rng.uniform(0.1, 0.9, (3, 3)), MAT).max() < 1e-4


class TestVolume:
    def test_pyramid_volume_and_vanishing_jacobian(self):
        base = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        _, w = pyramid_rule(base, [0.2, 0.3, 1.0], 4)
        assert abs(w.sum() - 1 / 3) < 1e-12
        _, w_apex = pyramid_rule(base, [0.2, 0.3, 1.0], 1)
        # (1 - rho)^2 factor: the single midpoint node carries 1/4 of the base-apex determinant
        assert w_apex[0] == pytest.approx(0.25)

    @pytest.mark.parametrize("src", [[0, 0, 0], [1, 1, 1], [0.3, 0.5, 0.9], [0.5, 0, 0.2]])
    def test_singular_decomposition_volume(self, src):
        _, w = singular_region_rule(Cell(np.zeros(3), np.ones(3), (0, 0, 0)), src, 3)
        assert abs(w.sum() - 1.0) < 1e-12

    def test_corner_pyramids_count(self):
        assert len(corner_pyramids([0, 0, 0], [1, 1, 1], [1, 0, 1])) == 3

    def test_unit_volume_with_constant_kernel(self):
        inc = box_inclusion(grid=(3, 2, 2))
        const = lambda s, x: np.ones(x.shape[:-1] + (3, 6))  # noqa: E731
        B = integrate_volume(inc, np.array([5.0, 5.0, 5.0]), MAT, kernel=const)
        assert B[:, 0, 0].sum() == pytest.approx(1.0, abs=1e-13)

    def test_region_jacobian(self):
        assert Cell(np.zeros(3), np.array([0.5, 0.5, 1.0]), (0, 0, 0)).jacobian == pytest.approx(1 / 32)

    def test_far_source_self_convergence(self):
        inc = box_inclusion(grid=(2, 2, 2))
        cell = inc.cells()[0]
        src = np.array([3.0, 2.5, -1.0])
        lo = integrate_volume_regular(inc, cell, src, MAT, 0, QuadratureOptions(volume_base_order=6, escalation=0))
        hi = integrate_volume_regular(inc, cell, src, MAT, 0, QuadratureOptions(volume_base_order=20, escalation=0))
        assert np.abs(lo - hi).max() < 1e-8 * np.abs(hi).max()

    def test_volume_integral_matches_surface_identity(self):
        # uniform sigma0 over a box: int E sigma0 dV = int U sigma0 n dS
        inc = box_inclusion(grid=(2, 2, 2))
        src = np.array([0.5, 0.5, 1.6])
        s0 = np.array([1.0, 0.4, -0.3, 0.2, 0.5, -0.1])
        vol = integrate_volume(inc, src, MAT).sum(axis=0) @ s0
        S = np.array([[s0[0], s0[3], s0[5]], [s0[3], s0[1], s0[4]], [s0[5], s0[4], s0[2]]])
        surf = np.zeros(3)
        for p in unit_cube_patches((0, 0), ((), ())):
            x, n, w, _ = PatchIntegrator(p, QuadratureOptions(base_order=16)).quadrature_points(src)
            surf += np.einsum("g,gij,gjk,gk->i", w, kelvin_U(src, x, MAT), np.broadcast_to(S, (len(w), 3, 3)), n)
        np.testing.assert_allclose(vol, surf, rtol=1e-5, atol=1e-7)


class TestBar:
    def test_regular_against_reference(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            H, R = rng.uniform(0.1, 1.0), rng.uniform(0.01, 0.1)
            y, z = rng.uniform(0.05, 1.0), rng.uniform(-1.0, 2.0)
            ref, res = bar_regular_reference(y, z, H, R, MAT)
            got = bar_integral_regular(y, z, H, R, MAT)
            assert res < 1e-10
            assert np.abs(got - ref).max() < 1e-8 * np.abs(ref).max()
            zero = [(i, j) for i in range(3) for j in range(6) if (i, j) not in REGULAR_NONZERO]
            assert all(got[ij] == 0.0 for ij in zero)

    def test_on_axis_outside_segment(self):
        got = bar_integral_regular(0.0, 2.0, 1.0, 0.05, MAT)
        for ij in ((0, 3), (1, 0), (1, 1), (2, 4)):
            assert got[ij] == 0.0
        ref, _ = bar_regular_reference(0.0, 2.0, 1.0, 0.05, MAT)
        assert np.abs(got - ref).max() < 1e-8 * np.abs(ref).max()
        with pytest.raises(ValueError):
            bar_integral_regular(0.0, 0.5, 1.0, 0.05, MAT)

    @pytest.mark.parametrize("H,R", [(1.0, 0.05), (0.25, 0.2)])
    def test_singular_against_reference(self, H, R):
        ref, _ = bar_singular_reference(H, R, MAT)
        got = bar_integral_singular(H, R, MAT)
        assert np.abs(got - ref).max() < 1e-6 * np.abs(ref).max()
        assert got[0, 5] == got[1, 4] and got[2, 0] == got[2, 1]
        assert np.count_nonzero(got) == 5

    def test_singular_vanishes_with_radius(self):
        a = np.abs(bar_integral_singular(1.0, 1e-6, MAT)).max()
        b = np.abs(bar_integral_singular(1.0, 1e-9, MAT)).max()
        assert b < 1e-8
        assert b / a == pytest.approx(1e-3, rel=1e-3)

    def test_negative_control(self):
        got = bar_integral_singular(1.0, 0.05, PerturbedConstants(1.0, 0.3, 1.01))
        ref, _ = bar_singular_reference(1.0, 0.05, MAT)
        assert np.abs(got - ref).max() > 1e-6 * np.abs(ref).max()

    def test_source_routing(self):
        bar = LinearInclusion(line_curve([0, 0, 0], [0, 0, 1]), 0.05, 2, MAT)
        sub = bar.subregions()[0]
        assert classify_source(sub, bar.vz, [0, 0, 0])[0] == "singular"
        assert classify_source(sub, bar.vz, [0.01, 0, 0.5])[0] == "singular"
        assert classify_source(sub, bar.vz, [0.2, 0, 0.5])[0] == "regular"
        assert classify_source(sub, bar.vz, [0, 0, 1.5])[0] == "regular"

    def test_end_blocks_are_opposite(self):
        bar = LinearInclusion(line_curve([0, 0, 0], [0, 0, 1]), 0.05, 2, MAT)
        sub = bar.subregions()[0]
        a = bar_block(bar, sub, bar.start, MAT)
        b = bar_block(bar, sub, bar.end, MAT)
        np.testing.assert_allclose(a, -b, atol=1e-15)
        # source at the far end: the cylinder lies on the -z' side
        ref, _ = bar_singular_reference(1.0, 0.05, MAT)
        np.testing.assert_allclose(bar_block_local(sub, bar.vz, bar.end, MAT), ref, rtol=0, atol=1e-6 * np.abs(ref).max())
