# Surfactant simulator - Surface calculus tests

import numpy as np
import pytest

from src.numerics.errors import SlopeTooLarge
from src.numerics.spectral import SurfaceField, integrate_surface, laplacian_horizontal, spectral_basis
from src.numerics.surface_ops import (
    area_gradient_residual,
    area_rate,
    build_geometry,
    div_gamma,
    grad_gamma,
    ibp_residual,
    ibp_vector_residual,
    laplace_gamma,
    normal_curvature_residual,
    projector_tangent,
    surface_mass,
    tangential_gradient_residual,
    transport_rhs,
)


def _field(grid, func):
    x1, x2 = spectral_basis(grid).physical_coordinates()
    return SurfaceField.from_values(grid, func(x1, x2))


@pytest.fixture
def wavy(grid32):
    """Band-limited surface of small slope."""
    return _field(grid32, lambda x, y: 0.05 * np.cos(x) + 0.03 * np.sin(x + y))


class TestBuildGeometry:
    """Normals, curvature and slope guards."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_flat_surface(self, grid16):
        geom = build_geometry(SurfaceField.zeros(grid16))
        assert geom.max_slope == 0.0
        assert geom.H.max_abs() == 0.0
        assert geom.area_element.mean == pytest.approx(1.0)
        assert geom.nu[2].mean == pytest.approx(1.0)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_unit_normal(self, wavy):
        geom = build_geometry(wavy)
        norms = np.sqrt(np.sum(geom.unit_normal_values() ** 2, axis=0))
        assert np.allclose(norms, 1.0, atol=1e-14)
        assert np.allclose(geom.cal_N_values() / geom.area_phys, np.stack(geom.nu_phys), atol=1e-14)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_mean_curvature_of_cosine(self, grid32):
        eps = 0.05
        geom = build_geometry(_field(grid32, lambda x, y: eps * np.cos(x)))
        x1, _ = spectral_basis(grid32).physical_coordinates()
        exact = -eps * np.cos(x1) / (1.0 + (eps * np.sin(x1)) ** 2) ** 1.5
        assert np.max(np.abs(geom.H.values - exact)) < 1e-9

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_hard_slope_limit(self, grid16):
        steep = _field(grid16, lambda x, y: 2.0 * np.cos(x))
        with pytest.raises(SlopeTooLarge) as excinfo:
            build_geometry(steep)
        assert excinfo.value.context['max_slope'] > 1.0
        assert build_geometry(steep, allow_steep=True).slope_flag

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_soft_slope_limit_only_flags(self, grid16):
        geom = build_geometry(_field(grid16, lambda x, y: 0.7 * np.cos(x)))
        assert 0.5 < geom.max_slope < 1.0
        assert geom.slope_flag


class TestTangentialCalculus:
    """Tangential operators and their integration-by-parts identities."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_flat_laplacian_matches_horizontal(self, grid16):
        geom = build_geometry(SurfaceField.zeros(grid16))
        f = _field(grid16, lambda x, y: np.cos(x) * np.sin(2 * y))
        assert (laplace_gamma(f, geom) - laplacian_horizontal(f)).max_abs() < 1e-12

    @pytest.mark.unit
    @pytest.mark.numerics
    @pytest.mark.parametrize("component", [1, 2, 3])
    def test_scalar_integration_by_parts(self, wavy, component):
        geom = build_geometry(wavy)
        f = _field(wavy.grid, lambda x, y: 1.0 + np.cos(x + y))
        g = _field(wavy.grid, lambda x, y: np.sin(y) + 0.5 * np.cos(x - y))
        assert abs(ibp_residual(f, g, geom, component)) < 1e-8

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_vector_integration_by_parts(self, wavy):
        geom = build_geometry(wavy)
        X = (_field(wavy.grid, lambda x, y: np.sin(x)),
             _field(wavy.grid, lambda x, y: np.cos(y)),
             _field(wavy.grid, lambda x, y: 1.0 + np.cos(x + y)))
        assert abs(ibp_vector_residual(X, geom)) < 1e-8

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_component_index_is_checked(self, wavy):
        geom = build_geometry(wavy)
        with pytest.raises(ValueError):
            ibp_residual(wavy, wavy, geom, 4)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_area_gradient_identity(self, wavy):
        assert area_gradient_residual(build_geometry(wavy)) < 1e-8

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_constants_have_no_tangential_variation(self, wavy):
        """grad_Gamma of a constant and div_Gamma of a constant field are zero."""
        geom = build_geometry(wavy)
        one = SurfaceField.constant(wavy.grid, 1.0)
        assert all(g.max_abs() < 1e-14 for g in grad_gamma(one, geom))
        assert div_gamma((one, one, one), geom).max_abs() < 1e-14

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_tangential_gradient_is_normal_free(self, wavy):
        geom = build_geometry(wavy)
        f = _field(wavy.grid, lambda x, y: np.sin(x) * np.cos(y) + 0.5 * np.cos(2 * x))
        assert tangential_gradient_residual(f, geom) < 1e-10
        assert tangential_gradient_residual(wavy, geom) < 1e-10

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_normal_divergence_is_minus_curvature(self, wavy):
        assert normal_curvature_residual(build_geometry(wavy)) < 1e-10

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_curvature_identity_on_flat_surface(self, grid16):
        assert normal_curvature_residual(build_geometry(SurfaceField.zeros(grid16))) < 1e-15

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_projector_removes_normal(self, wavy):
        geom = build_geometry(wavy)
        projected = projector_tangent(geom.cal_N, geom)
        assert all(p.max_abs() < 1e-13 for p in projected)


class TestTransportAndMass:
    """Area rate, surfactant mass and the transport integrand."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_area_rate_matches_finite_difference(self, wavy):
        geom = build_geometry(wavy)
        eta_t = _field(wavy.grid, lambda x, y: 0.2 * np.sin(x) + 0.1 * np.cos(y))
        h = 1e-5
        plus = build_geometry(wavy + eta_t * h).area_element
        minus = build_geometry(wavy - eta_t * h).area_element
        fd = (plus - minus) / (2.0 * h)
        assert (area_rate(eta_t, geom) - fd).max_abs() < 1e-7

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_surface_mass_of_flat_surface(self, grid16):
        geom = build_geometry(SurfaceField.zeros(grid16))
        c = _field(grid16, lambda x, y: 1.0 + 0.2 * np.cos(x))
        assert surface_mass(c, geom) == pytest.approx(integrate_surface(c))
        assert surface_mass(c, geom) == pytest.approx(grid16.area)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_transport_of_quadratic_at_rest(self, grid16):
        geom = build_geometry(SurfaceField.zeros(grid16))
        c = _field(grid16, lambda x, y: 1.0 + 0.1 * np.cos(x))
        zero = SurfaceField.zeros(grid16)
        gamma = 0.5
        value = transport_rhs(lambda x: 0.5 * x * x, lambda x: x, lambda x: np.ones_like(x),
                              c, (zero, zero, zero), geom, gamma)
        assert value == pytest.approx(-gamma * 0.01 * grid16.area / 2.0, rel=1e-10)
