import numpy as np
from django.test import SimpleTestCase, tag

from core.greens import DirichletKernel
from core.lattice import DomainKind, LatticeField, TruncatedDomain, laplacian_apply
from core.operators import CompactSupport, PowerLaw, ProblemSpec, quadratic_form
from core.solvers import (
    amplitude_trend,
    build_supersolution,
    eigen_solve,
    form_peak,
    ground_state_solve,
    monotone_solve,
    nonexistence_scan,
    solve_poisson,
    supersolution_exponent,
)
from core.utils.error_handler import DegenerateInputError, InvalidProblemError, RegimeError


class PoissonTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(3)

    def test_matches_kernel_convolution(self):
        domain = TruncatedDomain(DomainKind.HALF, 2, 10)
        f = LatticeField.from_function(domain, lambda pts: self.rng.random(len(pts)))
        result = solve_poisson(DomainKind.HALF, f)
        direct = DirichletKernel(domain).convolve(f)
        self.assertLess((result.u - direct).sup(), 1e-9 * direct.sup())
        self.assertEqual(result.extras['method'], 'direct')

    def test_nonnegative_source_gives_nonnegative_solution(self):
        domain = TruncatedDomain(DomainKind.QUADRANT, 3, 6)
        f = LatticeField.from_function(domain, lambda pts: self.rng.random(len(pts)))
        u = solve_poisson(DomainKind.QUADRANT, f).u
        self.assertTrue(np.all(u.interior_values() > 0))
        self.assertTrue(np.all(u.boundary_values() == 0))

    def test_source_outside_truncation_rejected(self):
        domain = TruncatedDomain(DomainKind.WHOLE, 3, 8)
        f = LatticeField.delta(domain, (6, 0, 0))
        with self.assertRaises(InvalidProblemError):
            solve_poisson(DomainKind.WHOLE, f, R=4)


class SupersolutionTests(SimpleTestCase):

    def test_exponent_examples(self):
        self.assertAlmostEqual(supersolution_exponent(DomainKind.WHOLE, 3, 3.0, 1.5), -0.5)
        self.assertAlmostEqual(supersolution_exponent(DomainKind.HALF, 2, 2.0, 1.5), -0.5)
        self.assertAlmostEqual(supersolution_exponent(DomainKind.QUADRANT, 2, 1.0, 1.5), -1.0)

    def test_supersolution_inequality_holds(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 1.5)
        upper = build_supersolution(spec, 6)
        domain = upper.field.domain
        inside = domain.interior_mask
        lhs = spec.weight(domain).values[inside] * upper.field.values[inside] ** (spec.p - 1)
        rhs = -laplacian_apply(upper.field).values[inside]
        self.assertTrue(np.all(lhs <= rhs * (1 + 1e-8)))
        self.assertGreater(upper.t1, 0)

    def test_regime_hypotheses(self):
        with self.assertRaises(RegimeError) as ctx:
            build_supersolution(ProblemSpec(3, DomainKind.WHOLE, PowerLaw(2.0), 1.5), 6)
        self.assertEqual(ctx.exception.hypothesis, 'alpha > 2')
        with self.assertRaises(RegimeError):
            build_supersolution(ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 2.5), 6)


class MonotoneSolveTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 1.5)
        cls.result = monotone_solve(cls.spec, 6, tol=1e-8)

    def test_converges_monotonically(self):
        self.assertTrue(self.result.monotone)
        sups = [step['sup'] for step in self.result.history]
        self.assertEqual(sups, sorted(sups))
        self.assertLessEqual(self.result.iterations, 200)

    def test_fixed_point_residual(self):
        self.assertLessEqual(self.result.residual, 2e-8)

    def test_sandwiched_below_supersolution(self):
        u = self.result.u
        self.assertTrue(np.all(u.interior_values() > 0))
        self.assertTrue(self.result.extras['below_supersolution'])

    def test_decay_bracket(self):
        self.assertEqual(self.result.extras['decay_bracket'], [-1.0, -0.5])
        self.assertEqual(self.result.extras['seed_point'], [0, 0, 0])

    def test_seed_independence(self):
        other = monotone_solve(self.spec, 6, tol=1e-8, seed_point=(2, 1, 0))
        self.assertLessEqual((other.u - self.result.u).sup(), 1e-6 * self.result.u.sup())

    def test_half_space_solution_vanishes_on_wall(self):
        spec = ProblemSpec(2, DomainKind.HALF, PowerLaw(2.0), 1.5)
        result = monotone_solve(spec, 8, tol=1e-8)
        self.assertEqual(result.u.at((0, 3)), 0.0)
        self.assertTrue(np.all(result.u.interior_values() > 0))


class EigenSolveTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 2.0)
        cls.kernel = DirichletKernel(cls.spec.domain(6))
        cls.result = eigen_solve(cls.spec, 6, tol=1e-8)

    def test_rayleigh_history_nondecreasing(self):
        history = self.result.rayleigh_history
        for before, after in zip(history, history[1:]):
            self.assertGreaterEqual(after, before * (1 - 1e-12))

    def test_eigenpair(self):
        self.assertGreater(self.result.lambda1, 0)
        self.assertLessEqual(self.result.residual, 1e-8)
        self.assertTrue(np.all(self.result.v1.interior_values() > 0))

    def test_dominates_random_fields(self):
        rng = np.random.default_rng(0)
        domain = self.kernel.domain
        for _ in range(10):
            v = LatticeField.from_function(domain, lambda pts: rng.standard_normal(len(pts)))
            v = v * (1.0 / np.sqrt(v.dot(v)))
            self.assertLessEqual(quadratic_form(v, v, self.spec, self.kernel), self.result.lambda1 * (1 + 1e-8))

    def test_regime_rejected_for_flat_weight(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(0.0), 2.0)
        with self.assertRaises(RegimeError) as ctx:
            eigen_solve(spec, 6)
        self.assertEqual(ctx.exception.hypothesis, '2*_{beta,alpha} < 2')

    def test_needs_p_two(self):
        with self.assertRaises(InvalidProblemError):
            eigen_solve(ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 3.0), 6)


class GroundStateTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.spec = ProblemSpec(3, DomainKind.WHOLE, CompactSupport(radius=2), 7.0)
        cls.kernel = DirichletKernel(cls.spec.domain(8))
        cls.result = ground_state_solve(cls.spec, 8, tol=1e-9)

    def test_dual_equation_residual(self):
        self.assertLessEqual(self.result.residual, 1e-6)
        self.assertFalse(self.result.extras['exploratory'])

    def test_level_positive_and_u_positive(self):
        self.assertGreater(self.result.extras['level'], 0)
        self.assertTrue(np.all(self.result.u.interior_values() > 0))
        self.assertTrue(np.all(self.result.dual.values >= 0))

    def test_rescale_is_stationary_on_the_ray(self):
        dual = self.result.dual
        A = float(np.sum(np.abs(dual.values) ** self.spec.p_prime))
        B = quadratic_form(dual, dual, self.spec, self.kernel)
        self.assertAlmostEqual(A, B, delta=1e-9 * A)

    def test_weighted_norm_identity(self):
        extras = self.result.extras
        self.assertAlmostEqual(extras['weighted_norm'], extras['dual_norm'], delta=1e-5 * extras['dual_norm'])

    def test_recovered_u_solves_integral_equation(self):
        self.assertLessEqual(self.result.extras['u_residual'], 1e-6)

    def test_rayleigh_values_increase(self):
        values = [step['rayleigh'] for step in self.result.history]
        for before, after in zip(values, values[1:]):
            self.assertGreaterEqual(after, before * (1 - 1e-10))

    def test_half_space_ground_state(self):
        spec = ProblemSpec(2, DomainKind.HALF, PowerLaw(0.0), 5.0)
        result = ground_state_solve(spec, 8, tol=1e-9)
        self.assertLessEqual(result.residual, 1e-6)
        self.assertGreater(result.extras['level'], 0)
        self.assertEqual(result.u.at((0, 2)), 0.0)

    def test_flat_weight_half_plane_at_radius_thirty(self):
        spec = ProblemSpec(2, DomainKind.HALF, PowerLaw(0.0), 5.0)
        result = ground_state_solve(spec, 30, tol=1e-9)
        self.assertLessEqual(result.residual, 1e-6)
        self.assertGreater(result.extras['level'], 0)
        self.assertTrue(np.all(result.u.interior_values() > 0))
        self.assertEqual(result.extras['peak'][1], 0)
        last = result.history[-1]
        self.assertGreater(last['concentration'], 1e-6)
        self.assertLessEqual(abs(last['centre'][1]), 2)
        self.assertGreater(last['centre'][0], 5)

    def test_sublinear_p_rejected(self):
        with self.assertRaises(InvalidProblemError):
            ground_state_solve(ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 1.5), 6)

    def test_weight_vanishing_on_truncation(self):
        kernel_spec = ProblemSpec(3, DomainKind.HALF, CompactSupport(radius=0.5), 7.0)
        with self.assertRaises(DegenerateInputError):
            ground_state_solve(kernel_spec, 4)


class FormPeakTests(SimpleTestCase):

    def test_flat_weight_peak_sits_on_the_symmetry_axis(self):
        spec = ProblemSpec(2, DomainKind.HALF, PowerLaw(0.0), 5.0)
        domain = spec.domain(30)
        kernel = DirichletKernel(domain)
        peak = form_peak(spec, domain, kernel)
        self.assertEqual(peak[1], 0)
        self.assertTrue(5 <= peak[0] <= 25, msg=f"peak {peak}")
        corner = (1, -29)
        self.assertTrue(domain.is_interior(corner))
        self.assertGreater(kernel.pair(peak, peak), kernel.pair(corner, corner))

    def test_compact_weight_peak_at_origin(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, CompactSupport(radius=2), 7.0)
        domain = spec.domain(8)
        self.assertEqual(form_peak(spec, domain, DirichletKernel(domain)), (0, 0, 0))

    def test_vanishing_weight_rejected(self):
        spec = ProblemSpec(3, DomainKind.HALF, CompactSupport(radius=0.5), 7.0)
        domain = spec.domain(4)
        with self.assertRaises(DegenerateInputError):
            form_peak(spec, domain, DirichletKernel(domain))


@tag('slow')
class AcceptanceRadiusTests(SimpleTestCase):
    """Solver runs at the full acceptance radii; exclude with --exclude-tag slow"""

    def test_sublinear_solution_at_radius_forty(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 1.5)
        result = monotone_solve(spec, 40, tol=1e-10)
        self.assertTrue(result.monotone)
        self.assertLessEqual(result.iterations, 200)
        sups = [step['sup'] for step in result.history]
        self.assertEqual(sups, sorted(sups))
        self.assertTrue(np.all(result.u.interior_values() > 0))
        self.assertTrue(result.extras['below_supersolution'])
        self.assertIsNotNone(result.decay_fit)
        self.assertTrue(-1.1 <= result.decay_fit.exponent <= -0.4, msg=f"exponent {result.decay_fit.exponent}")

        other = monotone_solve(spec, 40, tol=1e-10, seed_point=(2, 1, 0))
        self.assertLessEqual((other.u - result.u).sup(), 1e-7 * max(1.0, result.u.sup()))

    def test_compact_weight_ground_state_at_radius_thirty(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, CompactSupport(radius=5), 7.0)
        result = ground_state_solve(spec, 30, tol=1e-9)
        self.assertLessEqual(result.residual, 1e-6)
        self.assertFalse(result.extras['exploratory'])
        self.assertGreater(result.extras['level'], 0)
        self.assertTrue(np.all(result.u.interior_values() > 0))


class NonexistenceScanTests(SimpleTestCase):

    def test_amplitude_trend(self):
        self.assertEqual(amplitude_trend([(10, 3.0), (20, 2.0), (40, 1.0)]), 'vanishing trend')
        self.assertEqual(amplitude_trend([(20, 1.0), (40, 1.05)]), 'stable')
        self.assertEqual(amplitude_trend([(20, 1.0), (40, None)]), 'collapse')
        self.assertEqual(amplitude_trend([(20, 1.0)]), 'inconclusive')

    def test_certificate_fires_below_serrin(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(0.0), 3.0)
        report = nonexistence_scan(spec, [4, 5], tol=1e-6)
        self.assertEqual(report.certificate['verdict'], 'consistent with nonexistence')
        self.assertEqual(report.classification['verdict'], 'Nonexistent')
        self.assertTrue(report.heuristic)
        self.assertEqual(len(report.amplitudes), 2)

    def test_schedule_must_increase(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(0.0), 3.0)
        with self.assertRaises(InvalidProblemError):
            nonexistence_scan(spec, [8, 4])
