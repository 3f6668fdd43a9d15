import math
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase
from scipy import stats

from core.exception import DomainError
from limitlaw.models import EllipticLaw, LimitLaw
from limitlaw.services import (
    density, elliptic_density, elliptic_sample, evaluate_grid, fuss_catalan_moment,
    limit_potential, quadrature_disc_mass, quadrature_potential, radial_cdf, sample,
    support_edge, to_unit_disc,
)


def five_point_laplacian(function, z, h):
    return (
        function(z + h) + function(z - h) + function(z + 1j * h) + function(z - 1j * h) - 4 * function(z)
    ) / h ** 2


class DensityTests(SimpleTestCase):

    def test_uniform_disc_constant(self):
        self.assertAlmostEqual(density(LimitLaw(1), 0.3, 0.4), 1 / math.pi)

    def test_square_law_at_half(self):
        self.assertAlmostEqual(density(LimitLaw(2), 0.5, 0.0), 1 / math.pi)

    def test_zero_outside_disc(self):
        self.assertEqual(density(LimitLaw(2), 2.0, 0.0), 0.0)

    def test_origin_is_infinite_for_powers(self):
        self.assertEqual(density(LimitLaw(3), 0.0, 0.0), math.inf)
        self.assertAlmostEqual(density(LimitLaw(1), 0.0, 0.0), 1 / math.pi)

    def test_total_mass_by_quadrature(self):
        for m in (1, 2, 3, 4):
            self.assertAlmostEqual(quadrature_disc_mass(LimitLaw(m), 1.0), 1.0, delta=1e-6)

    def test_invalid_power(self):
        with self.assertRaises(DomainError):
            LimitLaw(0)


class RadialCdfTests(SimpleTestCase):

    def test_total_mass(self):
        for m in (1, 2, 5):
            self.assertEqual(radial_cdf(LimitLaw(m), 1.0), 1.0)
            self.assertEqual(radial_cdf(LimitLaw(m), 3.0), 1.0)

    def test_quarter_radius_square_law(self):
        law = LimitLaw(2)
        self.assertAlmostEqual(radial_cdf(law, 0.25), 0.25)
        self.assertAlmostEqual(quadrature_disc_mass(law, 0.25), 0.25, delta=1e-8)

    def test_uniform_disc_area_ratio(self):
        self.assertAlmostEqual(radial_cdf(LimitLaw(1), 0.5), 0.25)

    def test_closed_form_matches_quadrature(self):
        for m in (2, 3):
            law = LimitLaw(m)
            for r in np.linspace(0.02, 1.0, 50):
                self.assertAlmostEqual(radial_cdf(law, r), quadrature_disc_mass(law, r), delta=1e-6)

    def test_negative_radius(self):
        with self.assertRaises(DomainError):
            radial_cdf(LimitLaw(2), -0.1)


class SampleTests(SimpleTestCase):
    N = 100_000

    def test_uniform_disc_mean_modulus(self):
        values = sample(LimitLaw(1), np.random.default_rng(1), self.N)
        self.assertAlmostEqual(float(np.mean(np.abs(values))), 2 / 3, delta=0.01)

    def test_radii_follow_radial_cdf(self):
        law = LimitLaw(2)
        radii = np.abs(sample(law, np.random.default_rng(2), self.N))
        statistic = stats.kstest(radii, lambda r: radial_cdf(law, r)).statistic
        self.assertLessEqual(statistic, 1.63 / math.sqrt(self.N))

    def test_samples_inside_disc(self):
        values = sample(LimitLaw(4), np.random.default_rng(5), 10_000)
        self.assertTrue(np.all(np.abs(values) <= 1.0))

    def test_scalar_sample(self):
        self.assertIsInstance(sample(LimitLaw(2), np.random.default_rng(0)), complex)


class PotentialTests(SimpleTestCase):

    def test_uniform_disc_at_origin(self):
        self.assertAlmostEqual(limit_potential(LimitLaw(1), 0), 0.5)
        self.assertAlmostEqual(quadrature_potential(LimitLaw(1), 0), 0.5, delta=1e-9)

    def test_continuous_on_unit_circle(self):
        for m in (1, 2, 3):
            law = LimitLaw(m)
            self.assertAlmostEqual(limit_potential(law, 1.0), 0.0)
            self.assertAlmostEqual(limit_potential(law, 1.0 + 1e-12), 0.0, delta=1e-10)
            self.assertAlmostEqual(limit_potential(law, np.exp(0.7j)), 0.0)

    def test_exterior_newton_potential(self):
        for m in (1, 2, 3):
            self.assertAlmostEqual(limit_potential(LimitLaw(m), math.e), -1.0)
            self.assertAlmostEqual(quadrature_potential(LimitLaw(m), 1j * math.e), -1.0)

    def test_closed_form_matches_quadrature(self):
        for m in (1, 2, 3, 4):
            law = LimitLaw(m)
            for z in (0.0, 0.1 + 0.05j, -0.4j, 0.7 + 0.2j, 0.99, 1.3 - 0.4j):
                self.assertAlmostEqual(limit_potential(law, z), quadrature_potential(law, z), delta=1e-8)

    def test_harmonic_outside_disc(self):
        law = LimitLaw(2)
        potential = lambda z: limit_potential(law, z)
        self.assertLessEqual(abs(five_point_laplacian(potential, 1.5 + 0j, 1e-3)), 1e-4)

    def test_laplacian_recovers_density(self):
        h = 1e-3
        for m in (2, 3):
            law = LimitLaw(m)
            potential = lambda z: limit_potential(law, z)
            for radius in (0.3, 0.5, 0.7, 0.9):
                for angle in (0.0, 1.0, 2.5):
                    z = radius * np.exp(1j * angle)
                    recovered = -five_point_laplacian(potential, z, h) / (2 * math.pi)
                    expected = density(law, z.real, z.imag)
                    self.assertAlmostEqual(recovered / expected, 1.0, delta=0.01)


class FussCatalanTests(SimpleTestCase):

    def test_catalan_numbers(self):
        self.assertEqual([fuss_catalan_moment(1, p) for p in (1, 2, 3)], [1, 2, 5])

    def test_two_fold_product(self):
        self.assertEqual([fuss_catalan_moment(2, p) for p in (1, 2, 3)], [1, 3, 12])

    def test_zeroth_moment(self):
        for m in (1, 2, 7):
            self.assertEqual(fuss_catalan_moment(m, 0), 1)

    def test_exact_big_integers(self):
        moment = fuss_catalan_moment(3, 60)
        self.assertIsInstance(moment, Fraction)
        self.assertEqual(moment.denominator, 1)

    def test_negative_order(self):
        with self.assertRaises(DomainError):
            fuss_catalan_moment(2, -1)

    def test_support_edge(self):
        self.assertAlmostEqual(support_edge(2), 3 * math.sqrt(3) / 2)
        self.assertAlmostEqual(support_edge(1), 2.0)


class EllipticLawTests(SimpleTestCase):

    def test_density_inside_and_outside(self):
        law = EllipticLaw(0.5)
        self.assertAlmostEqual(elliptic_density(law, 1.4, 0.0), 1 / (math.pi * 0.75))
        self.assertEqual(elliptic_density(law, 0.0, 0.6), 0.0)

    def test_samples_map_to_uniform_disc(self):
        law = EllipticLaw(-0.3)
        values = elliptic_sample(law, np.random.default_rng(3), 50_000)
        radii = np.abs(to_unit_disc(law, values))
        self.assertTrue(np.all(radii <= 1.0 + 1e-12))
        statistic = stats.kstest(radii, lambda r: radial_cdf(LimitLaw(1), r)).statistic
        self.assertLessEqual(statistic, 1.95 / math.sqrt(radii.size))

    def test_degenerate_correlation(self):
        with self.assertRaises(DomainError):
            EllipticLaw(1.0)


class GridTests(SimpleTestCase):

    def test_grid_rows(self):
        rows = evaluate_grid(LimitLaw(2), 'potential', [-2.0, 0.0, 2.0], [0.0, 0.5])
        self.assertEqual(len(rows), 6)
        x, y, value = rows[0]
        self.assertEqual((x, y), (-2.0, 0.0))
        self.assertAlmostEqual(value, -math.log(2.0))

    def test_unknown_quantity(self):
        with self.assertRaises(DomainError):
            evaluate_grid(LimitLaw(2), 'moments', [0.0], [0.0])
