import math
import unittest

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate

from sperimeter.exception import BoundaryPointError, CalibrationMissingError, DomainError, MeshRangeError
from sperimeter.extension import (ExtensionField, RadialProfile, blowup_profiles, calibrate_bound_constant,
                                  calibrate_c_tilde, dirichlet_halfball, extend_field, graded_levels,
                                  load_bound_constant, load_c_tilde, monotonicity_report, phi_profile, poisson_kernel,
                                  poisson_kernel_normalization, poisson_tail_mass)
from sperimeter.lattice import BinaryField, FarField, build_grid
from sperimeter.storage import InMemoryStorageProvider


class LabPoissonKernelTestCase(unittest.TestCase):

    def test_poisson_normalization_closed_form_success(self):
        for n in (1, 2, 3):
            for s in (0.25, 0.5, 0.75):
                expected = math.gamma((n + s) / 2) / (math.pi ** (n / 2) * math.gamma(s / 2))
                self.assertAlmostEqual(expected, poisson_kernel_normalization(n, s), delta=1e-6 * expected)

    def test_poisson_normalization_bad_order_raise_error(self):
        with self.assertRaises(DomainError):
            poisson_kernel_normalization(2, 1.0)

    def test_poisson_tail_mass_success(self):
        self.assertAlmostEqual(1.0, poisson_tail_mass(0.0, 1.0, 2, 0.5))
        tails = [poisson_tail_mass(r, 1.0, 2, 0.5) for r in (0.5, 1.0, 4.0, 64.0)]
        self.assertTrue(all(a > b for a, b in zip(tails, tails[1:])))
        self.assertLess(tails[-1], 0.2)

    def test_graded_levels_success(self):
        levels = graded_levels(1.0, 2.0)
        self.assertEqual(0.25, levels[0])
        self.assertGreaterEqual(levels[-1], 2.0)
        self.assertLess(levels[-2], 2.0)
        self.assertTrue(np.allclose(levels[1:] / levels[:-1], 1.3))

    def test_graded_levels_invalid_raise_error(self):
        with self.assertRaises(DomainError):
            graded_levels(1.0, 2.0, ratio=1.0)
        with self.assertRaises(DomainError):
            graded_levels(1.0, 2.0, first=0.1)


class LabExtensionTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = build_grid(2, 1.0, (16, 16), [(2, 14), (2, 14)], 0.5)
        self.half_space = BinaryField.from_far_field(self.grid, FarField.half_space(0.0))
        self.levels = [0.25, 0.5, 1.0, 2.0]

    def test_extension_constant_field_is_one_success(self):
        full = BinaryField.from_far_field(self.grid, FarField.inside())
        ext = extend_field(full, self.levels)
        self.assertEqual((16, 16, 4), ext.values.shape)
        self.assertTrue(np.allclose(ext.values, 1.0, atol=1e-9))
        self.assertLess(dirichlet_halfball(ext, [0.0, 0.0], 2.0), 1e-12)

    def test_extension_half_space_odd_success(self):
        ext = extend_field(self.half_space, self.levels)
        self.assertTrue(np.all(np.abs(ext.values) <= 1.0))
        self.assertTrue(np.allclose(ext.values[:, 7, :], -ext.values[:, 8, :], atol=1e-8))
        self.assertGreater(ext.values[8, 2, 0], 0.7)
        self.assertLess(ext.values[8, 13, 0], -0.7)
        # the trace sharpens as z decreases
        self.assertTrue(np.all(np.diff(ext.values[8, 5, :]) < 0))

    def test_extension_workers_same_values_success(self):
        from sperimeter.worker import Workers
        serial = extend_field(self.half_space, self.levels)
        with Workers(2) as workers:
            parallel = extend_field(self.half_space, self.levels, workers=workers)
        self.assertTrue(np.array_equal(serial.values, parallel.values))

    def test_extension_invalid_levels_raise_error(self):
        with self.assertRaises(MeshRangeError):
            extend_field(self.half_space, [1.0, 0.5])
        with self.assertRaises(MeshRangeError):
            extend_field(self.half_space, [0.1, 0.5])
        with self.assertRaises(DomainError):
            extend_field(self.half_space, self.levels, kernel_truncation=1.0)

    def test_dirichlet_halfball_grows_with_radius_success(self):
        ext = extend_field(self.half_space, self.levels)
        energies = [dirichlet_halfball(ext, [0.5, 0.0], r) for r in (1.0, 1.5, 2.0)]
        self.assertGreater(energies[0], 0.0)
        self.assertTrue(energies[0] < energies[1] < energies[2])

    def test_dirichlet_halfball_too_large_raise_error(self):
        ext = extend_field(self.half_space, self.levels)
        self.assertEqual(2.0, ext.max_radius([0.5, 0.0]))
        with self.assertRaises(MeshRangeError) as context:
            dirichlet_halfball(ext, [0.5, 0.0], 3.0)
        self.assertIn("largest admissible radius is 2.0", str(context.exception))

    def test_extension_single_flipped_cell_matches_quadrature_success(self):
        full = BinaryField.from_far_field(self.grid, FarField.inside())
        levels = [0.5, 1.0, 2.0]
        ext = extend_field(full.flipped((8, 8)), levels)
        c_p = poisson_kernel_normalization(2, 0.5)
        for k, z in enumerate(levels):
            mass, _ = integrate.dblquad(lambda y, x: float(poisson_kernel(np.array([x, y]), z, 2, 0.5, c_p)),
                                        -0.5, 0.5, -0.5, 0.5, epsabs=1e-11, epsrel=1e-10)
            self.assertAlmostEqual(1 - 2 * mass, ext.values[8, 8, k], delta=1e-4)
        self.assertLess(ext.values[8, 8, 0], ext.values[8, 8, 2])

    def test_extension_bounded_and_sign_of_pure_cells_success(self):
        disk = BinaryField.from_predicate(self.grid, lambda c: np.sum(c ** 2, axis=-1) < 25.0, FarField.outside())
        ext = extend_field(disk, self.levels)
        self.assertTrue(np.all(np.abs(ext.values) <= 1.0))
        windows = sliding_window_view(disk.padded_phase(2), (5, 5))
        pure = np.all(windows, axis=(-2, -1)) | ~np.any(windows, axis=(-2, -1))
        self.assertTrue(pure.any() and (~pure).any())
        self.assertTrue(np.array_equal(np.sign(ext.values[..., 0])[pure], disk.u[pure]))

    def test_extension_energy_reflection_invariant_success(self):
        phase = np.zeros(self.grid.shape, dtype=bool)
        phase[4:12, 5:11] = True
        phase[12, 6] = True
        blob = BinaryField(self.grid, phase, FarField.outside())
        mirrored = BinaryField(self.grid, np.flip(phase, 0), FarField.outside())
        energy = dirichlet_halfball(extend_field(blob, self.levels), [0.5, 3.0], 2.0)
        reflected = dirichlet_halfball(extend_field(mirrored, self.levels), [-0.5, 3.0], 2.0)
        self.assertGreater(energy, 0.0)
        self.assertAlmostEqual(energy, reflected, delta=1e-9 * energy)
        opposite = dirichlet_halfball(extend_field(self.half_space.complement(), self.levels), [0.5, 0.0], 2.0)
        half = dirichlet_halfball(extend_field(self.half_space, self.levels), [0.5, 0.0], 2.0)
        self.assertAlmostEqual(half, opposite, delta=1e-9 * half)

    def test_dirichlet_halfball_refinement_trend_success(self):
        energies = []
        for h in (1.0, 0.5, 0.25):
            extent = int(round(10 / h))
            grid = build_grid(2, h, (extent, extent), [(2, extent - 2)] * 2, 0.5)
            field = BinaryField.from_far_field(grid, FarField.half_space(0.0))
            energies.append(dirichlet_halfball(extend_field(field, graded_levels(h, 4.0)), [0.0, 0.0], 4.0))
        changes = np.diff(energies)
        self.assertTrue(np.all(changes > 0))
        self.assertLess(changes[1], changes[0])

    def test_extension_save_load_success(self):
        storage = InMemoryStorageProvider().get_storage()
        ext = extend_field(self.half_space, self.levels)
        ext.save(storage, "extension")
        loaded = ExtensionField.load(storage, "extension", self.grid)
        self.assertTrue(np.array_equal(ext.values, loaded.values))
        self.assertEqual(ext.levels.tolist(), loaded.levels.tolist())
        other = build_grid(2, 0.5, (16, 16), [(2, 14), (2, 14)], 0.5)
        with self.assertRaises(MeshRangeError):
            ExtensionField.load(storage, "extension", other)


class LabProfileTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = build_grid(2, 1.0, (24, 24), [(4, 20), (4, 20)], 0.5)
        self.half_space = BinaryField.from_far_field(self.grid, FarField.half_space(0.0))
        self.center = [0.5, 0.0]

    def test_profile_half_space_nearly_constant_success(self):
        profile = phi_profile(self.half_space, self.center, [3.0, 4.0, 5.0, 6.0])
        self.assertTrue(np.all(profile.xi > 0))
        self.assertTrue(np.array_equal(profile.xi, profile.phi))
        spread = (profile.xi.max() - profile.xi.min()) / profile.xi.mean()
        self.assertLess(spread, 0.3)

    def test_profile_blowup_of_half_space_success(self):
        profiles = blowup_profiles(self.half_space, self.center, [1.0, 2.0], [2.0, 3.0])
        self.assertEqual([1.0, 2.0], sorted(profiles))
        self.assertTrue(np.allclose(profiles[1.0].xi, profiles[2.0].xi))

    def test_profile_off_boundary_raise_error(self):
        with self.assertRaises(BoundaryPointError):
            phi_profile(self.half_space, [0.5, 5.5], [1.0, 2.0])

    def test_profile_missing_calibration_raise_error(self):
        with self.assertRaises(CalibrationMissingError):
            phi_profile(self.half_space, self.center, [1.0, 2.0], lam=1.0)
        with self.assertRaises(CalibrationMissingError):
            phi_profile(self.half_space, self.center, [1.0, 2.0], lam=1.0,
                        storage=InMemoryStorageProvider().get_storage())

    def test_profile_invalid_radii_raise_error(self):
        for radii in ([], [2.0, 1.0], [0.0, 1.0]):
            with self.assertRaises(DomainError):
                phi_profile(self.half_space, self.center, radii)
        with self.assertRaises(DomainError):
            phi_profile(self.half_space, self.center, [1.0, 2.0], lam=-1.0)

    def test_profile_lambda_term_success(self):
        profile = RadialProfile(2, 0.5, [1.0, 4.0], [1.0, 1.0], lam=1.0, c_tilde=0.5)
        self.assertEqual(4.0, profile.lambda_hat)
        self.assertAlmostEqual(12 * math.pi, profile.coefficient)
        self.assertTrue(np.allclose([1 + 12 * math.pi, 1 + 24 * math.pi], profile.phi))
        self.assertTrue(np.allclose([4.0, 1.0, 1 + 24 * math.pi], profile.rows()[1]))

    def test_monotonicity_report_success(self):
        profile = RadialProfile(2, 0.5, [1.0, 2.0, 3.0], [1.0, 0.9, 1.2])
        strict = monotonicity_report(profile, 0.05)
        self.assertFalse(strict.passed)
        self.assertAlmostEqual(0.1, strict.worst_drop)
        self.assertEqual(0, strict.worst_index)
        loose = monotonicity_report(profile, 0.2)
        self.assertTrue(loose.passed)
        bounded = monotonicity_report(profile, 0.2, bound_constant=0.1)
        self.assertFalse(bounded.bounded)
        self.assertAlmostEqual(1.2 - 0.1 * (1 + math.sqrt(3)), bounded.bound_excess)

    def test_monotonicity_increasing_profile_success(self):
        report = monotonicity_report(RadialProfile(2, 0.5, [1.0, 2.0, 3.0], [1.0, 1.1, 1.2]), 0.0)
        self.assertTrue(report.monotone)
        self.assertEqual(0.0, report.worst_drop)
        self.assertIsNone(report.worst_index)

    def test_monotonicity_short_profile_raise_error(self):
        with self.assertRaises(DomainError):
            monotonicity_report(RadialProfile(2, 0.5, [1.0, 2.0], [1.0, 1.0]), 0.1)

    def test_profile_scale_covariant_success(self):
        phase = np.zeros((16, 16), dtype=bool)
        phase[4:12, 5:11] = True
        phase[12, 6] = True
        profiles = []
        for h in (1.0, 2.0):
            grid = build_grid(2, h, (16, 16), [(2, 14), (2, 14)], 0.5)
            field = BinaryField(grid, phase, FarField.outside())
            profiles.append(phi_profile(field, [0.5 * h, 3.0 * h], [2.0 * h, 3.0 * h, 4.0 * h]))
        self.assertTrue(np.allclose(profiles[0].xi, profiles[1].xi, rtol=1e-9, atol=0.0))

    def test_calibrate_bound_constant_half_space_bounded_success(self):
        storage = InMemoryStorageProvider().get_storage()
        constant = calibrate_bound_constant(2, 0.5, 1.0, storage)
        self.assertGreater(constant, 0.0)
        self.assertEqual(constant, load_bound_constant(storage, 2, 0.5, 1.0))
        self.assertIsNone(load_bound_constant(storage, 2, 0.5, 0.5))
        self.assertIsNone(load_bound_constant(None, 2, 0.5, 1.0))
        profile = phi_profile(self.half_space, self.center, [3.0, 4.0, 5.0, 6.0])
        spread = float(profile.xi.max() - profile.xi.min())
        report = monotonicity_report(profile, spread, storage=storage)
        self.assertAlmostEqual(constant * (1 + math.sqrt(6.0)), report.bound)
        self.assertTrue(report.bounded)
        self.assertTrue(report.passed)

    def test_monotonicity_checkerboard_unbounded_raise_error(self):
        storage = InMemoryStorageProvider().get_storage()
        grid = build_grid(2, 1.0, (40, 40), [(4, 36), (4, 36)], 0.5)
        half = BinaryField.from_far_field(grid, FarField.half_space(0.0))
        rows, cols = np.indices(grid.shape)
        phase = half.phase.copy()
        phase[6:34, 6:34] = ((rows + cols) % 2 == 0)[6:34, 6:34]
        checkerboard = BinaryField(grid, phase, FarField.half_space(0.0))
        radii = [6.0, 8.0, 10.0, 12.0]
        rough = monotonicity_report(phi_profile(checkerboard, [0.5, 0.0], radii), 1e6, storage=storage)
        self.assertTrue(rough.monotone)
        self.assertFalse(rough.bounded)
        self.assertFalse(rough.passed)
        self.assertGreater(rough.bound_excess, 0.0)
        smooth = monotonicity_report(phi_profile(half, [0.5, 0.0], radii), 1e6, storage=storage)
        self.assertTrue(smooth.bounded)
        self.assertEqual(rough.bound, smooth.bound)

    def test_calibrate_c_tilde_stored_success(self):
        storage = InMemoryStorageProvider().get_storage()
        c_tilde = calibrate_c_tilde(2, 0.5, 1.0, storage)
        self.assertGreater(c_tilde, 0.0)
        self.assertEqual(c_tilde, load_c_tilde(storage, 2, 0.5))
        self.assertIsNone(load_c_tilde(storage, 3, 0.5))
        self.assertIsNone(load_c_tilde(None, 2, 0.5))
        profile = phi_profile(self.half_space, self.center, [1.0, 2.0], lam=1.0, storage=storage)
        self.assertEqual(c_tilde, profile.c_tilde)


if __name__ == '__main__':
    unittest.main()
