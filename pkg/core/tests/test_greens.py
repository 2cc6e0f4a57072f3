import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from core.analysis import decay_fit
from core.greens import (
    DirichletKernel,
    ImageKernel,
    TableKernel,
    cached_whole_table,
    convolve,
    dirichlet_green,
    half_green,
    kernel_bound_report,
    quadrant_green,
    whole_green,
)
from core.lattice import DomainKind, LatticeField, TruncatedDomain
from core.utils.error_handler import CoverageError, InvalidProblemError

# value of the three-dimensional lattice Green function at the origin
PHI3_ORIGIN = 0.252731009858663


@override_settings(LANE_EMDEN_DIRECT_SOLVE_MAX_UNKNOWNS=10000)
class WholeGreenTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.table = whole_green(3, R=10, tol=1e-10)

    def test_origin_value_matches_lattice_constant(self):
        self.assertAlmostEqual(self.table.value_at((0, 0, 0)), PHI3_ORIGIN, delta=2e-3)

    def test_defining_equation_holds(self):
        self.assertLessEqual(self.table.residual, 1e-9)
        # -Delta Phi(0) = 1 pins the neighbour value
        self.assertAlmostEqual(self.table.value_at((1, 0, 0)), self.table.value_at((0, 0, 0)) - 1 / 6, places=8)

    def test_table_is_symmetric(self):
        for point in [(0, 1, 0), (0, 0, -1), (-1, 0, 0)]:
            self.assertAlmostEqual(self.table.value_at(point), self.table.value_at((1, 0, 0)), places=10)
        self.assertAlmostEqual(self.table.value_at((2, 1, 0)), self.table.value_at((0, -1, 2)), places=10)

    def test_extrapolation_record(self):
        (r1, v1), (r2, v2) = self.table.extrapolation_record
        self.assertEqual((r1, r2), (10.0, 20.0))
        # truncation lowers the pole value, less so on the larger ball
        self.assertLess(v1, v2)
        self.assertLess(v2, self.table.value_at((0, 0, 0)))

    def test_fitted_constant_near_newtonian(self):
        self.assertAlmostEqual(self.table.fitted_constant, 1 / (4 * math.pi), delta=0.02)

    def test_small_radius_rejected(self):
        with self.assertRaises(InvalidProblemError):
            whole_green(3, R=6)

    def test_value_outside_table(self):
        with self.assertRaises(CoverageError):
            self.table.value_at((11, 0, 0))

    def test_bound_report_is_two_sided(self):
        report = kernel_bound_report(self.table)
        self.assertGreater(report.minimum, 0)
        self.assertLess(report.spread, 1.5)
        self.assertGreater(report.count, 0)


class PlanarGreenTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.table = whole_green(2, R=20, tol=1e-10)

    def test_vanishes_at_pole_and_nonpositive(self):
        self.assertEqual(self.table.value_at((0, 0)), 0.0)
        interior = self.table.values.interior_values()
        self.assertTrue(np.all(interior <= 1e-12))
        self.assertAlmostEqual(self.table.value_at((1, 0)), -0.25, places=8)

    def test_logarithmic_slope(self):
        self.assertAlmostEqual(self.table.fitted_slope, -1 / (2 * math.pi), delta=0.01)

    def test_whole_bound_report_needs_three_dimensions(self):
        with self.assertRaises(InvalidProblemError):
            kernel_bound_report(self.table)


class DirichletGreenTests(SimpleTestCase):

    def test_half_kernel_vanishes_on_boundary(self):
        table = dirichlet_green(DomainKind.HALF, 3, (1, 0, 0), 8)
        self.assertLessEqual(table.residual, 1e-9)
        self.assertTrue(np.all(table.values.boundary_values() == 0))
        self.assertTrue(np.all(table.values.interior_values() > 0))

    def test_quadrant_kernel_vanishes_on_boundary(self):
        table = dirichlet_green(DomainKind.QUADRANT, 3, (1, 1, 0), 8)
        self.assertTrue(np.all(table.values.boundary_values() == 0))
        self.assertEqual(table.value_at((0, 3, 1)), 0.0)
        self.assertEqual(table.value_at((3, 0, 1)), 0.0)

    def test_pole_must_be_interior(self):
        with self.assertRaises(InvalidProblemError):
            dirichlet_green(DomainKind.HALF, 3, (0, 1, 0), 8)

    def test_half_bound_report(self):
        table = dirichlet_green(DomainKind.HALF, 3, (1, 0, 0), 16)
        report = kernel_bound_report(table)
        self.assertGreater(report.minimum, 0)
        self.assertEqual(report.profile, 'x1 (1+|x-y|)^(-d)')


class ImageKernelTests(SimpleTestCase):

    def setUp(self):
        self.base = DirichletKernel(TruncatedDomain(DomainKind.WHOLE, 3, 8))

    def assert_agrees_with_direct_solve(self, kind, pole):
        direct = dirichlet_green(kind, 3, pole, 8)
        images = ImageKernel(kind, self.base)
        domain = direct.domain
        column = images.column(pole, domain)
        gap = np.max(np.abs(column.values - direct.values.values))
        self.assertLessEqual(gap, 1e-6)

    def test_half_images_match_direct_solve(self):
        self.assert_agrees_with_direct_solve(DomainKind.HALF, (2, 1, 0))

    def test_quadrant_images_match_direct_solve(self):
        self.assert_agrees_with_direct_solve(DomainKind.QUADRANT, (2, 1, 0))

    def test_wall_values_are_zero(self):
        self.assertEqual(half_green(3, (0, 2, 1), (2, 1, 0), self.base), 0.0)
        self.assertEqual(quadrant_green(3, (2, 0, 1), (2, 1, 0), self.base), 0.0)
        self.assertEqual(quadrant_green(3, (2, 3, 1), (0, 1, 0), self.base), 0.0)
        self.assertGreater(half_green(3, (1, 0, 0), (2, 1, 0), self.base), 0.0)

    def test_points_outside_closed_domain_rejected(self):
        with self.assertRaises(InvalidProblemError):
            half_green(3, (-1, 0, 0), (1, 0, 0), self.base)

    def test_pair_is_symmetric(self):
        kernel = ImageKernel(DomainKind.QUADRANT, self.base)
        self.assertAlmostEqual(kernel.pair((1, 2, 0), (3, 1, 1)), kernel.pair((3, 1, 1), (1, 2, 0)), places=10)

    def random_pairs(self, kind, count=100):
        rng = np.random.default_rng(20240617)
        axes = list(kind.dirichlet_axes)
        for _ in range(count):
            x, y = rng.integers(-4, 5, size=(2, 3))
            x[axes], y[axes] = np.abs(x[axes]), np.abs(y[axes])
            yield tuple(int(c) for c in x), tuple(int(c) for c in y)

    def test_half_green_symmetric_on_random_pairs(self):
        for x, y in self.random_pairs(DomainKind.HALF):
            with self.subTest(x=x, y=y):
                self.assertAlmostEqual(half_green(3, x, y, self.base), half_green(3, y, x, self.base), places=10)

    def test_quadrant_green_symmetric_on_random_pairs(self):
        for x, y in self.random_pairs(DomainKind.QUADRANT):
            with self.subTest(x=x, y=y):
                self.assertAlmostEqual(quadrant_green(3, x, y, self.base), quadrant_green(3, y, x, self.base),
                                       places=10)

    def test_convolve_matches_column_for_point_source(self):
        domain = TruncatedDomain(DomainKind.HALF, 3, 8)
        kernel = ImageKernel(DomainKind.HALF, self.base)
        result = convolve(kernel, LatticeField.delta(domain, (2, 0, 1)))
        column = kernel.column((2, 0, 1), domain)
        self.assertLess(np.max(np.abs(result.values - column.values)), 1e-8)

    def test_whole_kind_rejected(self):
        with self.assertRaises(InvalidProblemError):
            ImageKernel(DomainKind.WHOLE, self.base)


@override_settings(LANE_EMDEN_DIRECT_SOLVE_MAX_UNKNOWNS=10000)
class TableKernelTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.kernel = TableKernel(whole_green(3, R=10))

    def test_convolution_of_point_source_is_translate(self):
        domain = TruncatedDomain(DomainKind.WHOLE, 3, 4)
        result = self.kernel.convolve(LatticeField.delta(domain, (1, 0, 0)))
        for x in [(0, 0, 0), (1, 0, 0), (2, 2, 0), (-1, 1, 1)]:
            expected = self.kernel.table.value_at(np.subtract(x, (1, 0, 0)))
            self.assertAlmostEqual(result.at(x), expected, places=10)

    def test_convolution_is_linear_superposition(self):
        domain = TruncatedDomain(DomainKind.WHOLE, 3, 4)
        source = LatticeField.delta(domain, (1, 0, 0)) * 2.0 + LatticeField.delta(domain, (0, -1, 1))
        result = self.kernel.convolve(source)
        x = (1, 1, 1)
        expected = 2 * self.kernel.pair(x, (1, 0, 0)) + self.kernel.pair(x, (0, -1, 1))
        self.assertAlmostEqual(result.at(x), expected, places=10)

    def test_uncovered_source_raises(self):
        domain = TruncatedDomain(DomainKind.WHOLE, 3, 8)
        with self.assertRaises(CoverageError):
            self.kernel.convolve(LatticeField.delta(domain, (5, 0, 0)))

    def test_uncovered_pair_raises(self):
        with self.assertRaises(CoverageError):
            self.kernel.pair((20, 0, 0), (0, 0, 0))


class KernelCacheTests(SimpleTestCase):

    def test_table_is_written_then_reloaded(self):
        with tempfile.TemporaryDirectory() as tmp, override_settings(LANE_EMDEN_CACHE_DIR=Path(tmp)):
            first = cached_whole_table(2, 10, tol=1e-10)
            written = sorted(p.name for p in Path(tmp).iterdir())
            self.assertEqual(written, ['whole_d2_R10_tol1e-10.csv', 'whole_d2_R10_tol1e-10.json'])

            second = cached_whole_table(2, 10, tol=1e-10)
            self.assertTrue(np.array_equal(first.values.values, second.values.values))
            self.assertEqual(first.fitted_slope, second.fitted_slope)
            self.assertEqual(second.extrapolation_record, first.extrapolation_record)


@tag('slow')
class AcceptanceRadiusGreenTests(SimpleTestCase):
    """Tables at the radii used for reported results; run with --tag slow"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.whole3 = whole_green(3, R=40)

    def test_whole_tables_satisfy_defining_equation(self):
        self.assertLessEqual(self.whole3.residual, 1e-9)
        self.assertLessEqual(whole_green(2, R=40).residual, 1e-9)

    def test_whole_table_decays_like_inverse_distance(self):
        fit = decay_fit(self.whole3.values, 15, 30)
        self.assertAlmostEqual(fit.exponent, -1.0, delta=0.05)

    def test_dirichlet_tables_satisfy_defining_equation(self):
        for kind, pole in [(DomainKind.HALF, (1, 0)), (DomainKind.HALF, (1, 0, 0)),
                           (DomainKind.QUADRANT, (1, 1)), (DomainKind.QUADRANT, (1, 1, 0))]:
            with self.subTest(kind=kind, d=len(pole)):
                table = dirichlet_green(kind, len(pole), pole, 40)
                self.assertLessEqual(table.residual, 1e-9)
                self.assertTrue(np.all(table.values.boundary_values() == 0))

    def assert_images_match_direct_solve(self, kind, pole):
        d = len(pole)
        base = DirichletKernel(TruncatedDomain(DomainKind.WHOLE, d, 40), tol=1e-12)
        direct = dirichlet_green(kind, d, pole, 40, tol=1e-12)
        domain = direct.domain
        column = ImageKernel(kind, base).column(pole, domain).values
        expected = direct.values.values
        r = np.sqrt(np.sum(domain.coordinates().astype(np.float64) ** 2, axis=-1))
        near = (r <= 10) & domain.interior_mask
        gap = np.abs(column[near] - expected[near]) / np.abs(expected[near])
        self.assertLessEqual(float(np.max(gap)), 1e-6)

    def test_half_images_match_direct_solve(self):
        self.assert_images_match_direct_solve(DomainKind.HALF, (3, -2))
        self.assert_images_match_direct_solve(DomainKind.HALF, (3, -2, 1))

    def test_quadrant_images_match_direct_solve(self):
        self.assert_images_match_direct_solve(DomainKind.QUADRANT, (2, 3))
        self.assert_images_match_direct_solve(DomainKind.QUADRANT, (2, 3, -1))

    def test_half_kernel_decays_like_inverse_square(self):
        table = dirichlet_green(DomainKind.HALF, 3, (1, 0, 0), 60)
        fit = decay_fit(table.values, 6, 16, ray=(1, 1, 1))
        self.assertAlmostEqual(fit.exponent, -2.0, delta=0.1)

    def test_quadrant_kernel_decays_like_inverse_cube(self):
        # the diagonal (1, 1, 1) carries a 1/r correction from the pole offset
        table = dirichlet_green(DomainKind.QUADRANT, 3, (1, 1, 1), 60)
        fit = decay_fit(table.values, 8, 20, ray=(1, 1, 0))
        self.assertAlmostEqual(fit.exponent, -3.0, delta=0.15)
