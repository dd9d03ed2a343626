import math

import numpy as np
import pytest

from rvelab.expansion import (
    contrast,
    first_order_apparent,
    materials_for_contrast,
    random_error_first_order,
    verify_expansion_order,
)
from rvelab.raster import voxelize
from rvelab.sampling import ProtocolSpec, draw_periodized
from rvelab.solver import MaterialPair

# frozen from independent mpmath evaluation of the contrast formulas
RHO_PP_GLASS = 0.420204102887
ALPHA0_PP_GLASS = 0.489897948557


class TestContrast:
    def test_equal_conductivities(self):
        c = contrast(MaterialPair(0.7, 0.7))
        assert c.rho == 0.0
        assert c.alpha0 == pytest.approx(0.7)

    def test_reference_materials(self):
        c = contrast(MaterialPair(1.2, 0.2))
        assert c.rho == pytest.approx(RHO_PP_GLASS, abs=1e-9)
        assert c.alpha0 == pytest.approx(ALPHA0_PP_GLASS, abs=1e-9)

    def test_swap_antisymmetry(self):
        c = contrast(MaterialPair(1.2, 0.2))
        cs = contrast(MaterialPair(0.2, 1.2))
        assert cs.rho == pytest.approx(-c.rho, abs=1e-15)
        assert cs.alpha0 == pytest.approx(c.alpha0, abs=1e-15)

    def test_inverse_map(self):
        m = materials_for_contrast(0.3, 0.5)
        c = contrast(m)
        assert c.rho == pytest.approx(0.3, abs=1e-14)
        assert c.alpha0 == pytest.approx(0.5, abs=1e-14)


class TestFirstOrder:
    def test_zero_contrast(self):
        assert first_order_apparent(MaterialPair(0.9, 0.9), 0.37) == pytest.approx(0.9)

    def test_half_fraction_cancels_rho(self):
        m = MaterialPair(1.2, 0.2)
        a0 = contrast(m).alpha0
        assert first_order_apparent(m, 0.5) == pytest.approx(a0, abs=1e-14)

    def test_zero_fraction(self):
        m = MaterialPair(1.2, 0.2)
        c = contrast(m)
        expected = c.alpha0 * (1.0 - 2.0 * c.rho)
        assert first_order_apparent(m, 0.0) == pytest.approx(expected, abs=1e-14)

    def test_affine_in_phi(self):
        m = MaterialPair(1.5, 0.3)
        a, b, c_ = (first_order_apparent(m, phi) for phi in (0.1, 0.2, 0.3))
        assert c_ - b == pytest.approx(b - a, abs=1e-14)


class TestRandomErrorBound:
    def test_zero_std(self):
        assert random_error_first_order(MaterialPair(1.2, 0.2), 0.0) == 0.0

    def test_zero_contrast(self):
        assert random_error_first_order(MaterialPair(0.5, 0.5), 0.1) == 0.0

    def test_reference_value(self):
        # frozen: 4 * alpha0 * 0.01 * rho for the default materials
        got = random_error_first_order(MaterialPair(1.2, 0.2), 0.01)
        assert got == pytest.approx(0.008234285119, abs=1e-9)


class TestExpansionOrder:
    @pytest.fixture(scope="class")
    def sphere_grid(self):
        spec = ProtocolSpec(protocol="periodized", shape="sphere", size=2, phi=0.30)
        return voxelize(draw_periodized(spec, seed=11), 32)

    def test_quadratic_deviation_ratios(self, sphere_grid):
        rows = verify_expansion_order(sphere_grid, rho0=0.2, halvings=3)
        assert len(rows) == 4
        for a, b in zip(rows, rows[1:]):
            ratio = b["deviation"] / a["deviation"]
            assert 0.15 <= ratio <= 0.40

    def test_small_rho_bounded_by_quadratic(self, sphere_grid):
        rows = verify_expansion_order(sphere_grid, rho0=0.1, halvings=2)
        # constant estimated from the two smallest contrasts
        c_est = rows[-1]["deviation"] / rows[-1]["rho"] ** 2
        for row in rows:
            assert row["deviation"] <= 1.6 * c_est * row["rho"] ** 2

    def test_zero_contrast_row(self, sphere_grid):
        rows = verify_expansion_order(sphere_grid, rho0=1e-8, halvings=0)
        assert rows[0]["deviation"] <= 1e-8
