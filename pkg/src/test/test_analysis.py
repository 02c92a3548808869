import unittest

import numpy as np

from sperimeter.analysis import (ContinuityReport, ContinuumInstance, clean_ball_check, density_profile,
                                 density_sweep, direction_dictionary, flatness, hausdorff_boundary_distance,
                                 perimeter_continuity_check)
from sperimeter.exception import BoundaryPointError, DomainError, HausdorffUndefinedError, InvalidFieldError
from sperimeter.lattice import BinaryField, FarField, build_grid


class LabDensityTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = build_grid(2, 1.0, (24, 24), [(4, 20), (4, 20)], 0.5)
        self.half_space = BinaryField.from_far_field(self.grid, FarField.half_space(0.0))

    def test_density_profile_half_space_success(self):
        profile = density_profile(self.half_space, [0.5, 0.0], [1.0, 2.0, 3.0])
        self.assertEqual([2, 12, 26], profile.ball_counts.tolist())
        self.assertTrue(np.array_equal([0.5, 0.5, 0.5], profile.ratios))
        self.assertFalse(profile.flagged())
        self.assertEqual([0.5, 0.0, 1.0, 1, 2, 0.5], profile.rows()[0])

    def test_density_profile_isolated_cell_flagged_success(self):
        phase = np.zeros(self.grid.shape, dtype=bool)
        phase[12, 12] = True
        dot = BinaryField(self.grid, phase, FarField.outside())
        profile = density_profile(dot, [0.5, 0.5], [1.0, 2.0])
        self.assertEqual([1, 1], profile.inside_counts.tolist())
        self.assertEqual([1, 9], profile.ball_counts.tolist())
        self.assertTrue(profile.flagged())
        self.assertFalse(profile.flagged(floor=0.0))

    def test_density_profile_complement_sums_to_one_success(self):
        bump = self.half_space.phase.copy()
        bump[10:14, 12] = True
        field = BinaryField(self.grid, bump, FarField.half_space(0.0))
        for point in ([0.5, 0.0], [-2.0, 1.5]):
            radii = [1.0, 2.5, 4.0]
            inside = density_profile(field, point, radii)
            outside = density_profile(field.complement(), point, radii)
            self.assertTrue(np.allclose(1.0, inside.ratios + outside.ratios))
            self.assertEqual(inside.ball_counts.tolist(), outside.ball_counts.tolist())

    def test_density_profile_off_boundary_raise_error(self):
        with self.assertRaises(BoundaryPointError):
            density_profile(self.half_space, [0.5, 5.5], [1.0, 2.0])

    def test_density_sweep_half_space_success(self):
        sweep = density_sweep(self.half_space, [2.0, 3.0])
        self.assertAlmostEqual(1 / 3, sweep.inside_min)
        self.assertAlmostEqual(1 / 3, sweep.outside_min)
        self.assertEqual((4, 12), sweep.inside_at)
        self.assertEqual((4, 11), sweep.outside_at)
        self.assertTrue(sweep.passed())
        self.assertFalse(sweep.passed(floor=0.5))

    def test_clean_ball_half_space_success(self):
        report = clean_ball_check(self.half_space, [0.5, 0.0], 4.0)
        self.assertEqual(0.5, report.inside_c)
        self.assertEqual(0.5, report.outside_c)
        self.assertTrue(np.allclose([-0.5, -1.5], report.inside_center))
        self.assertTrue(np.allclose([-0.5, 1.5], report.outside_center))
        self.assertTrue(report.passed)

    def test_clean_ball_one_sided_success(self):
        report = clean_ball_check(self.half_space, [0.5, -4.0], 2.0)
        self.assertEqual(1.0, report.inside_c)
        self.assertEqual(0.0, report.outside_c)
        self.assertIsNone(report.outside_center)
        self.assertFalse(report.passed)
        self.assertIsNone(report.to_dict()["outside_center"])

    def test_clean_ball_checkerboard_raise_error(self):
        rows, cols = np.indices(self.grid.shape)
        phase = self.half_space.phase.copy()
        phase[1:-1, 1:-1] = ((rows + cols) % 2 == 0)[1:-1, 1:-1]
        checkerboard = BinaryField(self.grid, phase, FarField.half_space(0.0))
        report = clean_ball_check(checkerboard, [0.5, 0.0], 5.0)
        self.assertAlmostEqual(0.2, report.c)
        self.assertAlmostEqual(0.4, report.threshold)
        self.assertFalse(report.passed)
        self.assertFalse(report.to_dict()["passed"])

    def test_clean_ball_threshold_success(self):
        report = clean_ball_check(self.half_space, [0.5, 0.0], 6.0)
        self.assertAlmostEqual(1 / 3, report.threshold)
        self.assertAlmostEqual(0.5, report.c)
        self.assertTrue(report.passed)
        self.assertEqual(0.1, clean_ball_check(self.half_space, [0.5, 0.0], 6.0, floor=0.1).floor)

    def test_clean_ball_outside_omega_raise_error(self):
        with self.assertRaises(DomainError):
            clean_ball_check(self.half_space, [0.5, 0.0], 10.0)


class LabFlatnessTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = build_grid(2, 1.0, (24, 24), [(4, 20), (4, 20)], 0.5)
        self.half_space = BinaryField.from_far_field(self.grid, FarField.half_space(0.0))

    def test_direction_dictionary_success(self):
        for n, count in ((1, 2), (2, 64), (3, 266)):
            directions = direction_dictionary(n)
            self.assertEqual((count, n), directions.shape)
            self.assertTrue(np.allclose(1.0, np.linalg.norm(directions, axis=1)))
        with self.assertRaises(DomainError):
            direction_dictionary(4)

    def test_flatness_half_space_success(self):
        report = flatness(self.half_space, [0.5, 0.0], 3.0)
        self.assertAlmostEqual(0.5, report.half_width)
        self.assertAlmostEqual(1.0, abs(report.direction[1]))
        self.assertAlmostEqual(0.5 / 3.0, report.flatness)
        self.assertEqual(10, report.cells)

    def test_flatness_disk_matches_chord_depth_success(self):
        R, h = 10.0, 0.0625
        grid = build_grid(2, h, (384, 384), [(8, 376), (8, 376)], 0.5)
        disk = BinaryField.from_predicate(grid, lambda c: np.sum(c ** 2, axis=-1) < R * R, FarField.outside())
        for r in (5.0, 6.0):
            expected = r / (2 * R)
            report = flatness(disk, [0.0, R], r)
            self.assertAlmostEqual(expected, report.flatness, delta=0.1 * expected)
            self.assertAlmostEqual(1.0, abs(report.direction[1]), delta=0.05)

    def test_flatness_translation_and_reflection_invariant_success(self):
        grid = build_grid(2, 0.25, (80, 80), [(4, 76), (4, 76)], 0.5)

        def blob(center, sign=1.0):
            def predicate(c):
                x, y = sign * (c[..., 0] - center[0]), c[..., 1] - center[1]
                return (x * x + y * y < 25.0) | ((x > 2.0) & (x < 4.0) & (y > 4.0) & (y < 5.5))
            return BinaryField.from_predicate(grid, predicate, FarField.outside())

        reference = flatness(blob((0.0, 0.0)), [0.0, 5.0], 3.0)
        shifted = flatness(blob((1.0, 0.5)), [1.0, 5.5], 3.0)
        mirrored = flatness(blob((0.0, 0.0), sign=-1.0), [0.0, 5.0], 3.0)
        self.assertEqual(reference.cells, shifted.cells)
        self.assertEqual(reference.cells, mirrored.cells)
        self.assertAlmostEqual(reference.flatness, shifted.flatness, places=12)
        self.assertAlmostEqual(reference.flatness, mirrored.flatness, places=12)

    def test_flatness_custom_directions_success(self):
        report = flatness(self.half_space, [0.5, 0.0], 3.0, directions=np.array([[1.0, 0.0]]))
        self.assertEqual(2.0, report.half_width)

    def test_flatness_no_boundary_raise_error(self):
        with self.assertRaises(DomainError):
            flatness(self.half_space, [0.5, 6.0], 2.0)

    def test_hausdorff_shifted_half_space_success(self):
        shifted = BinaryField.from_far_field(self.grid, FarField.half_space(2.0))
        self.assertEqual(2.0, hausdorff_boundary_distance(self.half_space, shifted))
        self.assertEqual(0.0, hausdorff_boundary_distance(self.half_space, self.half_space))

    def test_hausdorff_metric_axioms_success(self):
        bump = self.half_space.phase.copy()
        bump[9:13, 12:15] = True
        fields = [self.half_space, BinaryField.from_far_field(self.grid, FarField.half_space(1.0)),
                  BinaryField(self.grid, bump, FarField.half_space(0.0))]
        for a in fields:
            self.assertEqual(0.0, hausdorff_boundary_distance(a, a))
            for b in fields:
                d_ab = hausdorff_boundary_distance(a, b)
                self.assertEqual(d_ab, hausdorff_boundary_distance(b, a))
                for c in fields:
                    self.assertLessEqual(hausdorff_boundary_distance(a, c),
                                         d_ab + hausdorff_boundary_distance(b, c) + 1e-12)
        self.assertGreater(hausdorff_boundary_distance(fields[0], fields[2]), 0.0)

    def test_hausdorff_empty_window_raise_error(self):
        window = np.zeros(self.grid.shape, dtype=bool)
        window[:, 20:] = True
        with self.assertRaises(HausdorffUndefinedError) as context:
            hausdorff_boundary_distance(self.half_space, self.half_space, window)
        self.assertIn("undefined Hausdorff distance", str(context.exception))

    def test_hausdorff_different_grids_raise_error(self):
        other = build_grid(2, 0.5, (24, 24), [(4, 20), (4, 20)], 0.5)
        with self.assertRaises(InvalidFieldError):
            hausdorff_boundary_distance(self.half_space, BinaryField.from_far_field(other, FarField.half_space(0.0)))


class LabContinuityTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.instance = ContinuumInstance(2, 0.5, (8.0, 8.0), ((-2.0, 2.0), (-2.0, 2.0)),
                                          FarField.half_space(0.0).to_dict(), 4.0)

    def test_continuum_rasterize_success(self):
        field, H, kernel = self.instance.rasterize(1.0)
        self.assertEqual((8, 8), field.grid.extents)
        self.assertEqual(16, field.grid.omega_size)
        self.assertEqual(4.0, kernel.r_cut)
        fine, _, _ = self.instance.rasterize(0.5)
        self.assertEqual((16, 16), fine.grid.extents)
        self.assertEqual(64, fine.grid.omega_size)

    def test_continuity_check_success(self):
        report = perimeter_continuity_check(self.instance, [1.0, 0.5])
        self.assertEqual(2, len(report.perimeters))
        self.assertTrue(all(p > 0 for p in report.perimeters))
        self.assertTrue(report.passed)

    def test_continuity_report_success(self):
        shrinking = ContinuityReport([1.0, 0.5, 0.25, 0.125], [1.0, 1.5, 1.6, 1.62], 0.05)
        self.assertTrue(shrinking.passed)
        growing = ContinuityReport([1.0, 0.5, 0.25], [1.0, 1.1, 1.5], 0.05)
        self.assertFalse(growing.passed)
        self.assertTrue(ContinuityReport([1.0, 0.5, 0.25], [1.0, 1.1, 1.5], 0.3).passed)
        self.assertEqual(3, len(shrinking.to_dict()["changes"]))


if __name__ == '__main__':
    unittest.main()
