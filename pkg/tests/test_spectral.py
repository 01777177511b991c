# Surfactant simulator - Spectral layer tests

import numpy as np
import pytest

from src.numerics.errors import GridMismatch
from src.numerics.spectral import (
    BulkField,
    GridSpec,
    SurfaceField,
    chebyshev_coefficients,
    clenshaw_curtis_weights,
    deriv_horizontal,
    deriv_vertical,
    get_fft_workers,
    homogeneous_norm_surface,
    inner_bulk,
    integrate_bulk,
    integrate_surface,
    laplacian_horizontal,
    pointwise,
    product,
    set_fft_workers,
    sobolev_norm_bulk,
    sobolev_norm_surface,
    spectral_basis,
)


def _surface(grid, func):
    x1, x2 = spectral_basis(grid).physical_coordinates()
    return SurfaceField.from_values(grid, func(x1, x2))


class TestGridSpec:
    """Grid construction and validation."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_rejects_odd_counts(self):
        with pytest.raises(ValueError, match="even integer"):
            GridSpec(L1=1.0, L2=1.0, N1=9, N2=8, Nz=8, b=1.0)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_rejects_nonpositive_depth_and_unknown_rule(self):
        with pytest.raises(ValueError):
            GridSpec(L1=1.0, L2=1.0, N1=8, N2=8, Nz=8, b=0.0)
        with pytest.raises(ValueError):
            GridSpec(L1=1.0, L2=1.0, N1=8, N2=8, Nz=8, b=1.0, dealias_rule='none')

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_to_dict_rebuilds_grid(self, grid16):
        assert GridSpec(**grid16.to_dict()) == grid16

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_vertical_nodes_run_from_surface_to_bottom(self, grid16):
        z = spectral_basis(grid16).z
        assert z[0] == pytest.approx(0.0, abs=1e-15)
        assert z[-1] == pytest.approx(-grid16.b)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_two_thirds_mask(self, small_grid):
        basis = spectral_basis(small_grid)
        # |m| < 8/3 retained
        assert basis.mask[2, 0]
        assert not basis.mask[3, 0]

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_three_halves_padding_shape(self):
        grid = GridSpec(L1=1.0, L2=1.0, N1=8, N2=8, Nz=8, b=1.0, dealias_rule='three_halves')
        assert spectral_basis(grid).phys_shape == (12, 12)


class TestFields:
    """Field arithmetic, derivatives and quadratures."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_horizontal_derivative_of_sine(self, grid16):
        f = _surface(grid16, lambda x, y: np.sin(x) * np.cos(2 * y))
        exact = _surface(grid16, lambda x, y: np.cos(x) * np.cos(2 * y))
        assert (deriv_horizontal(f, 1) - exact).max_abs() < 1e-12

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_derivative_order_is_bounded(self, grid16):
        f = SurfaceField.zeros(grid16)
        with pytest.raises(ValueError):
            deriv_horizontal(f, 1, order=5)
        with pytest.raises(ValueError):
            deriv_horizontal(f, 3)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_laplacian_eigenfunction(self, grid16):
        f = _surface(grid16, lambda x, y: np.cos(x + 2 * y))
        assert (laplacian_horizontal(f) + f * 5.0).max_abs() < 1e-12

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_vertical_derivative_of_cubic_is_exact(self, grid16):
        f = BulkField.from_function_of_depth(grid16, lambda z: z ** 3)
        exact = BulkField.from_function_of_depth(grid16, lambda z: 3 * z ** 2)
        assert (deriv_vertical(f) - exact).max_abs() < 1e-10
        exact2 = BulkField.from_function_of_depth(grid16, lambda z: 6 * z)
        assert (deriv_vertical(f, 2) - exact2).max_abs() < 1e-8

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_vertical_derivative_needs_bulk_field(self, grid16):
        with pytest.raises(GridMismatch):
            deriv_vertical(SurfaceField.zeros(grid16))

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_integrals(self, grid16):
        one = BulkField.constant(grid16, 1.0)
        assert integrate_bulk(one) == pytest.approx(grid16.volume, rel=1e-13)
        wave = _surface(grid16, lambda x, y: 2.0 + np.cos(x))
        assert integrate_surface(wave) == pytest.approx(2.0 * grid16.area, rel=1e-13)
        quadratic = BulkField.from_function_of_depth(grid16, lambda z: z ** 2)
        assert integrate_bulk(quadratic) == pytest.approx(grid16.area / 3.0, rel=1e-12)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_inner_bulk_matches_integral_of_square(self, grid16):
        f = BulkField.from_function_of_depth(grid16, lambda z: 1.0 + z)
        assert inner_bulk(f, f) == pytest.approx(grid16.area / 3.0, rel=1e-12)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_dealiased_product(self, grid16):
        c = _surface(grid16, lambda x, y: np.cos(x))
        exact = _surface(grid16, lambda x, y: 0.5 + 0.5 * np.cos(2 * x))
        assert (product(c, c) - exact).max_abs() < 1e-13

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_pointwise_returns_tuple(self, grid16):
        c = _surface(grid16, lambda x, y: np.cos(x))
        doubled, squared = pointwise(lambda v: (2 * v, v * v), c)
        assert (doubled - c * 2.0).max_abs() < 1e-13
        assert squared.mean == pytest.approx(0.5)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_mixing_grids_is_an_error(self, small_grid, grid16):
        with pytest.raises(GridMismatch):
            SurfaceField.zeros(small_grid) + SurfaceField.zeros(grid16)
        with pytest.raises(GridMismatch):
            SurfaceField(small_grid, np.zeros((4, 4)))

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_traces(self, grid16):
        f = BulkField.from_function_of_depth(grid16, lambda z: 1.0 + z)
        assert f.trace_top().mean == pytest.approx(1.0)
        assert f.trace_bottom().mean == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_masked_drops_unretained_modes(self, small_grid):
        f = _surface(small_grid, lambda x, y: np.cos(3 * x) + np.cos(x))
        assert (f.masked() - _surface(small_grid, lambda x, y: np.cos(x))).max_abs() < 1e-13


class TestNorms:
    """Fourier-multiplier and integer-order norms."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_surface_norm_of_single_mode(self, grid16):
        f = _surface(grid16, lambda x, y: np.cos(x))
        area = grid16.area
        assert sobolev_norm_surface(f, 0) == pytest.approx(np.sqrt(area / 2.0), rel=1e-12)
        assert sobolev_norm_surface(f, 1.5) == pytest.approx(np.sqrt(area / 2.0 * 2.0 ** 1.5), rel=1e-12)
        assert sobolev_norm_surface(f, -0.5) == pytest.approx(np.sqrt(area / 2.0 * 2.0 ** -0.5), rel=1e-12)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_homogeneous_norm_ignores_mean(self, grid16):
        assert homogeneous_norm_surface(SurfaceField.constant(grid16, 3.0), 0.5) == 0.0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_bulk_norm_of_constant(self, grid16):
        one = BulkField.constant(grid16, 1.0)
        for k in range(4):
            assert sobolev_norm_bulk(one, k) == pytest.approx(np.sqrt(grid16.volume), rel=1e-12)
        with pytest.raises(ValueError):
            sobolev_norm_bulk(one, 4)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_bulk_norm_adds_vertical_derivative(self, grid16):
        f = BulkField.from_function_of_depth(grid16, lambda z: z)
        # int z^2 + int 1 over the strip of depth 1
        expected = np.sqrt(grid16.area * (1.0 / 3.0 + 1.0))
        assert sobolev_norm_bulk(f, 1) == pytest.approx(expected, rel=1e-12)


class TestChebyshev:
    """Chebyshev helpers."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_weights_integrate_constants(self):
        assert np.sum(clenshaw_curtis_weights(10)) == pytest.approx(2.0)
        assert np.sum(clenshaw_curtis_weights(11)) == pytest.approx(2.0)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_coefficients_of_t2(self):
        x = np.cos(np.pi * np.arange(9) / 8)
        coeffs = chebyshev_coefficients(2 * x ** 2 - 1)
        expected = np.zeros(9)
        expected[2] = 1.0
        assert np.allclose(coeffs, expected, atol=1e-13)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_worker_count_is_clamped(self):
        previous = get_fft_workers()
        try:
            set_fft_workers(0)
            assert get_fft_workers() == 1
            set_fft_workers(3)
            assert get_fft_workers() == 3
        finally:
            set_fft_workers(previous)
