import math
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from core.greens import DirichletKernel
from core.lattice import DomainKind, LatticeField, TruncatedDomain
from core.operators import (
    CompactSupport,
    PowerLaw,
    ProblemSpec,
    TablePotential,
    apply_K,
    energy,
    energy_gradient,
    form_constant_estimate,
    quadratic_form,
    rayleigh_ratio,
    sample_potential,
)
from core.utils.error_handler import InvalidProblemError


def random_field(domain, rng, positive=False):
    draw = (lambda pts: rng.random(len(pts)) + 0.1) if positive else (lambda pts: rng.standard_normal(len(pts)))
    return LatticeField.from_function(domain, draw)


class PotentialTests(SimpleTestCase):

    def test_power_law_sample(self):
        domain = TruncatedDomain(DomainKind.WHOLE, 3, 5)
        Q = sample_potential(PowerLaw(2.0), domain)
        self.assertAlmostEqual(Q.at((3, 0, 0)), 1 / 16)
        self.assertAlmostEqual(Q.at((0, 0, 0)), 1.0)
        self.assertEqual(Q.at((6, 0, 0)), 0.0)

    def test_reflected_sample_is_even_and_zero_on_wall(self):
        domain = TruncatedDomain(DomainKind.HALF, 2, 5)
        Q = sample_potential(PowerLaw(2.0, c=3.0), domain, reflect=True)
        self.assertIs(Q.domain.kind, DomainKind.WHOLE)
        self.assertAlmostEqual(Q.at((-3, 0)), Q.at((3, 0)))
        self.assertAlmostEqual(Q.at((3, 0)), 3 / 16)
        self.assertEqual(Q.at((0, 2)), 0.0)

    def test_compact_support(self):
        Q = CompactSupport(radius=2)
        self.assertEqual(list(Q.evaluate([(1, 1), (2, 0), (2, 1)])), [1.0, 1.0, 0.0])
        self.assertTrue(math.isinf(Q.decay_exponent))
        self.assertTrue(Q.vanishing_weight)

    def test_invalid_weights_rejected(self):
        with self.assertRaises(InvalidProblemError):
            PowerLaw(1.0, c=0.0)
        with self.assertRaises(InvalidProblemError):
            PowerLaw(math.inf)
        domain = TruncatedDomain(DomainKind.WHOLE, 2, 3)
        with self.assertRaises(InvalidProblemError):
            TablePotential(LatticeField.zeros(domain))

    def test_unbounded_power_law(self):
        self.assertFalse(PowerLaw(-0.5).bounded)
        self.assertTrue(PowerLaw(0.0).bounded)


class ProblemSpecTests(SimpleTestCase):

    def test_exponents_and_beta(self):
        spec = ProblemSpec(3, DomainKind.QUADRANT, PowerLaw(1.0), 3.0)
        self.assertEqual(spec.beta, Fraction(0))
        self.assertAlmostEqual(spec.p_prime, 1.5)
        self.assertAlmostEqual(spec.q, 2.0)
        self.assertEqual(spec.alpha, 1.0)

    def test_whole_plane_rejected(self):
        with self.assertRaises(InvalidProblemError):
            ProblemSpec(2, DomainKind.WHOLE, PowerLaw(1.0), 3.0)

    def test_p_must_exceed_one(self):
        with self.assertRaises(InvalidProblemError):
            ProblemSpec(3, DomainKind.HALF, PowerLaw(1.0), 1.0)

    def test_root_weight_is_cached(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(2.0), 4.0)
        domain = spec.domain(4)
        self.assertIs(spec.root_weight(domain), spec.root_weight(domain))
        self.assertAlmostEqual(spec.root_weight(domain).at((1, 0, 0)), 0.25 ** 0.25)


class KernelFormTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)
        self.spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 3.0)
        self.domain = self.spec.domain(6)
        self.kernel = DirichletKernel(self.domain)

    def test_form_is_symmetric(self):
        for _ in range(100):
            u = random_field(self.domain, self.rng)
            v = random_field(self.domain, self.rng)
            forward = quadratic_form(u, v, self.spec, self.kernel)
            backward = quadratic_form(v, u, self.spec, self.kernel)
            self.assertAlmostEqual(forward, backward, delta=1e-10 * max(1.0, abs(forward)))

    def test_form_is_nonnegative(self):
        for _ in range(100):
            v = random_field(self.domain, self.rng)
            self.assertGreaterEqual(quadratic_form(v, v, self.spec, self.kernel), -1e-12)

    def test_positive_input_gives_positive_output(self):
        v = random_field(self.domain, self.rng, positive=True)
        Kv = apply_K(v, self.spec, self.kernel)
        self.assertTrue(np.all(Kv.interior_values() > 0))

    def test_compact_weight_localizes_output(self):
        spec = ProblemSpec(3, DomainKind.HALF, CompactSupport(radius=2.5), 3.0)
        domain = spec.domain(6)
        v = random_field(domain, self.rng, positive=True)
        Kv = apply_K(v, spec, DirichletKernel(domain))
        self.assertEqual(Kv.at((4, 0, 0)), 0.0)
        self.assertGreater(Kv.at((1, 0, 0)), 0.0)

    def test_rayleigh_ratio_of_zero_rejected(self):
        with self.assertRaises(InvalidProblemError):
            rayleigh_ratio(LatticeField.zeros(self.domain), self.spec, self.kernel)


class EnergyTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(5)
        self.spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 3.0)
        self.domain = self.spec.domain(5)
        self.kernel = DirichletKernel(self.domain)

    def test_energy_along_a_ray(self):
        v = random_field(self.domain, self.rng)
        pp = self.spec.p_prime
        A = float(np.sum(np.abs(v.values) ** pp))
        B = quadratic_form(v, v, self.spec, self.kernel)
        t = 2.0
        expected = t ** pp * A / pp - t ** 2 * B / 2
        self.assertAlmostEqual(energy(v * t, self.spec, self.kernel), expected, delta=1e-9 * abs(expected))

    def test_energy_and_gradient_vanish_at_zero(self):
        zero = LatticeField.zeros(self.domain)
        self.assertEqual(energy(zero, self.spec, self.kernel), 0.0)
        self.assertEqual(energy_gradient(zero, self.spec, self.kernel).sup(), 0.0)

    def test_gradient_matches_central_difference(self):
        v = random_field(self.domain, self.rng, positive=True)
        w = random_field(self.domain, self.rng)
        h = 1e-6
        numeric = (energy(v + w * h, self.spec, self.kernel) - energy(v - w * h, self.spec, self.kernel)) / (2 * h)
        analytic = energy_gradient(v, self.spec, self.kernel).dot(w)
        self.assertAlmostEqual(numeric, analytic, delta=1e-5 * max(1.0, abs(analytic)))

    def test_gradient_matches_central_difference_supercritical(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(0.0), 7.0)
        domain = spec.domain(8)
        kernel = DirichletKernel(domain)
        h = 1e-6
        for _ in range(20):
            v = random_field(domain, self.rng, positive=True)
            w = random_field(domain, self.rng)
            numeric = (energy(v + w * h, spec, kernel) - energy(v - w * h, spec, kernel)) / (2 * h)
            analytic = energy_gradient(v, spec, kernel).dot(w)
            self.assertAlmostEqual(numeric, analytic, delta=1e-5 * max(1.0, abs(analytic)))

    def test_energy_needs_superlinear_p(self):
        spec = ProblemSpec(3, DomainKind.WHOLE, PowerLaw(3.0), 2.0)
        with self.assertRaises(InvalidProblemError):
            energy(LatticeField.zeros(self.domain), spec, self.kernel)

    def test_form_constant_sphere(self):
        estimate = form_constant_estimate(self.spec, self.kernel, self.domain, samples=5)
        pp = self.spec.p_prime
        self.assertGreater(estimate.c_star, 0)
        # on the sphere of radius rho the quadratic part is at most half the convex part
        self.assertAlmostEqual(estimate.c_star * estimate.rho ** 2, estimate.rho ** pp / pp,
                               delta=1e-9 * estimate.rho ** pp)
        self.assertAlmostEqual(estimate.energy_floor, estimate.rho ** pp / (2 * pp))
        self.assertEqual(estimate.samples, 5)
