import math

import numpy as np
import pytest

from bubblemesh.sizing import (SizingError, SizingParams, allowable_edge_3d,
                               g_of_eps, jacobian, max_normal_curvature,
                               principal_curvatures, radius_bound, sigma1)
from bubblemesh.surfaces import (cylinder_patch, make_surface, plane,
                                 sphere_patch, torus_patch, wavy_patch)

# frozen by direct numeric evaluation of (1-eps)*sqrt(40*(1-sqrt(1-1.2*eps)))
G_OF_0_01 = 0.4857303141213317
G_OF_0_02 = 0.6810225031620099


class TestGofEps:
    def test_known_values(self):
        assert g_of_eps(0.01) == pytest.approx(G_OF_0_01, rel=1e-12)
        assert g_of_eps(0.02) == pytest.approx(G_OF_0_02, rel=1e-12)

    def test_zero_tolerance_limit(self):
        assert g_of_eps(1e-12) < 1e-5

    def test_monotone_on_small_tolerances(self):
        eps = np.linspace(1e-4, 0.05, 40)
        vals = [g_of_eps(e) for e in eps]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("bad", [0.0, -0.01, 1.0 / 1.2, 0.9])
    def test_out_of_range(self, bad):
        with pytest.raises(SizingError):
            g_of_eps(bad)


class TestCurvature:
    def test_plane_is_flat(self):
        assert max_normal_curvature(plane(), 0.3, 0.7) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("R", [1.0, 2.0, 0.5])
    def test_sphere(self, R):
        surf = sphere_patch(radius=R)
        assert max_normal_curvature(surf, 0.4, 1.0) == pytest.approx(1.0 / R, rel=1e-7)

    def test_cylinder(self):
        surf = cylinder_patch(radius=2.0)
        k1, k2 = principal_curvatures(surf, 0.5, 0.5)
        ks = sorted([abs(k1), abs(k2)])
        assert ks[0] == pytest.approx(0.0, abs=1e-12)
        assert ks[1] == pytest.approx(0.5, rel=1e-9)
        assert max_normal_curvature(surf, 0.5, 0.5) == pytest.approx(0.5, rel=1e-9)

    def test_torus(self):
        surf = torus_patch(major=2.0, minor=0.5)
        # at v=0 (outer equator) curvatures are 1/r and cos(v)/(R + r cos v)
        k = max_normal_curvature(surf, 0.3, 0.0)
        assert k == pytest.approx(2.0, rel=1e-9)


class TestSigma1:
    def test_identity_embedding(self):
        assert sigma1(plane(), 0.2, 0.9) == pytest.approx(1.0, rel=1e-12)

    def test_axis_scaling(self):
        surf = wavy_patch(amplitude=0.0)
        # zero amplitude wavy graph is the identity embedding
        assert sigma1(surf, 1.0, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_unit_cylinder_orthonormal_jacobian(self):
        surf = cylinder_patch(radius=1.0)
        assert sigma1(surf, 0.7, 0.3) == pytest.approx(1.0, rel=1e-12)

    def test_svd_matches_first_fundamental_form(self):
        surf = torus_patch(major=2.0, minor=0.7)
        for u, v in [(0.1, 0.2), (0.9, 1.1), (2.0, 2.5)]:
            J = jacobian(surf, u, v)
            JtJ = J.T @ J
            eigs = np.linalg.eigvalsh(JtJ)
            assert sigma1(surf, u, v) == pytest.approx(math.sqrt(eigs[-1]), rel=1e-12)


class TestRadiusBound:
    def test_plane_clamped_to_cap(self):
        params = SizingParams(epsilon=0.01, r_min=0.05, r_max=0.5)
        assert allowable_edge_3d(plane(), 0.5, 0.5, params) == math.inf
        assert radius_bound(plane(), 0.5, 0.5, params) == pytest.approx(0.5)

    def test_sphere_edge_length(self):
        params = SizingParams(epsilon=0.01, r_min=1e-4, r_max=10.0)
        assert allowable_edge_3d(sphere_patch(radius=1.0), 0.3, 1.0, params) == \
            pytest.approx(G_OF_0_01, rel=1e-9)
        assert allowable_edge_3d(sphere_patch(radius=2.0), 0.3, 1.0, params) == \
            pytest.approx(2.0 * G_OF_0_01, rel=1e-9)

    def test_sphere_bound_composition(self):
        surf = sphere_patch(radius=1.0)
        params = SizingParams(epsilon=0.01, r_min=1e-4, r_max=10.0)
        u, v = 0.4, 1.2
        s1 = sigma1(surf, u, v)
        expected = min(params.r_max, G_OF_0_01 / (2.0 * s1))
        assert radius_bound(surf, u, v, params) == pytest.approx(expected, rel=1e-9)

    def test_uniform_mode(self):
        params = SizingParams(epsilon=0.01, r_min=0.3, r_max=0.3)
        assert radius_bound(plane(), 0.1, 0.1, params) == pytest.approx(0.3)
        assert radius_bound(sphere_patch(), 0.3, 1.0, params) == pytest.approx(0.3)

    def test_scale_covariance(self):
        # scaling the embedding by t scales the 3D edge bound by t
        params = SizingParams(epsilon=0.02, r_min=1e-6, r_max=1e6)
        for t in (2.0, 5.0):
            l1 = allowable_edge_3d(sphere_patch(radius=1.0), 0.5, 1.0, params)
            lt = allowable_edge_3d(sphere_patch(radius=t), 0.5, 1.0, params)
            assert lt == pytest.approx(t * l1, rel=1e-7)
            # in parameter units the sphere's sigma1 also scales by t, so the
            # unclamped bound is scale-free
            r1 = radius_bound(sphere_patch(radius=1.0), 0.5, 1.0, params)
            rt = radius_bound(sphere_patch(radius=t), 0.5, 1.0, params)
            assert rt == pytest.approx(r1, rel=1e-7)

    def test_continuity_on_wavy(self):
        surf = wavy_patch(amplitude=0.7, freq_u=1.0, freq_v=1.3)
        params = SizingParams(epsilon=0.01, r_min=0.01, r_max=1.0)
        us = np.linspace(0.5, 5.5, 60)
        vals = [radius_bound(surf, u, 2.0, params) for u in us]
        jumps = np.abs(np.diff(vals))
        assert jumps.max() < 0.1  # no jumps beyond smooth variation

    def test_invalid_params(self):
        with pytest.raises(SizingError):
            SizingParams(epsilon=0.9, r_min=0.1, r_max=1.0)
        with pytest.raises(SizingError):
            SizingParams(epsilon=0.01, r_min=1.0, r_max=0.1)


def test_make_surface_registry():
    surf = make_surface("cylinder", radius=2.0)
    assert surf.name == "cylinder"
    with pytest.raises(KeyError):
        make_surface("moebius")
