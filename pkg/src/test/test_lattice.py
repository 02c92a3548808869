import math
import unittest

import numpy as np

from sperimeter import constants, utils
from sperimeter.constants import FarFieldKind
from sperimeter.exception import InvalidFieldError, InvalidGridError, InvalidKernelError
from sperimeter.lattice import (BinaryField, FarField, GridDomain, boundary_cells, boundary_mask, build_grid,
                                build_kernel, dilate_field, on_boundary, point_cells, rotate_field, unit_weight)
from sperimeter.worker import Workers


def exact_unit_weight_1d(o, s):
    return (2 * o ** (1 - s) - (o - 1) ** (1 - s) - (o + 1) ** (1 - s)) / (s * (1 - s))


class LabGridTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = build_grid(2, 1.0, (8, 8), [(2, 6), (2, 6)], 0.5)

    def test_grid_centers_symmetric_about_origin_success(self):
        centers = self.grid.axis_centers(0)
        self.assertEqual(-3.5, centers[0])
        self.assertEqual(3.5, centers[-1])
        self.assertEqual((8, 8, 2), self.grid.centers().shape)
        self.assertEqual((10, 10, 2), self.grid.centers(1).shape)

    def test_grid_cell_of_and_cell_center_success(self):
        self.assertEqual((4, 4), self.grid.cell_of([0.0, 0.0]))
        self.assertEqual((3, 4), self.grid.cell_of([-0.2, 0.3]))
        self.assertTrue(np.array_equal([0.5, -0.5], self.grid.cell_center((4, 3))))

    def test_grid_omega_box_and_center_success(self):
        self.assertEqual(16, self.grid.omega_size)
        self.assertTrue(self.grid.in_omega((2, 5)))
        self.assertFalse(self.grid.in_omega((1, 5)))
        self.assertFalse(self.grid.in_omega((9, 5)))
        self.assertTrue(np.allclose([0.0, 0.0], self.grid.omega_center()))
        self.assertEqual((2, 2), self.grid.omega_cells()[0])

    def test_grid_omega_from_callable_success(self):
        grid = build_grid(2, 0.5, (10, 10), lambda c: np.sum(c ** 2, axis=-1) < 1.0, 0.3)
        self.assertTrue(grid.in_omega(grid.cell_of([0.1, 0.1])))
        self.assertFalse(grid.in_omega(grid.cell_of([1.2, 0.1])))

    def test_grid_invalid_parameters_raise_error(self):
        with self.assertRaises(InvalidGridError):
            build_grid(4, 1.0, (5, 5, 5, 5), [(1, 4)] * 4, 0.5)
        with self.assertRaises(InvalidGridError):
            build_grid(2, 1.0, (5, 5), [(1, 4), (1, 4)], 1.0)
        with self.assertRaises(InvalidGridError):
            build_grid(2, 0.0, (5, 5), [(1, 4), (1, 4)], 0.5)
        with self.assertRaises(InvalidGridError):
            build_grid(2, 1.0, (5, 2), [(1, 4), (1, 4)], 0.5)
        with self.assertRaises(InvalidGridError):
            build_grid(2, 1.0, (5, 5), [(0, 4), (1, 4)], 0.5)
        with self.assertRaises(InvalidGridError):
            build_grid(2, 1.0, (5, 5), [(2, 2), (1, 4)], 0.5)
        with self.assertRaises(InvalidGridError):
            build_grid(2, 1.0, (5, 5), np.zeros((4, 4), dtype=bool), 0.5)

    def test_grid_to_dict_from_dict_equal_success(self):
        clone = GridDomain.from_dict(self.grid.to_dict())
        self.assertEqual(self.grid, clone)
        self.assertEqual(self.grid.digest(), clone.digest())
        other = build_grid(2, 1.0, (8, 8), [(2, 6), (2, 5)], 0.5)
        self.assertNotEqual(self.grid, other)

    def test_grid_from_dict_missing_field_raise_error(self):
        payload = self.grid.to_dict()
        del payload["s"]
        with self.assertRaises(InvalidGridError):
            GridDomain.from_dict(payload)

    def test_grid_ball_mask_open_ball_success(self):
        mask = self.grid.ball_mask([0.5, 0.5], 1.0)
        self.assertEqual(1, int(mask.sum()))
        mask = self.grid.ball_mask([0.5, 0.5], 1.0 + 1e-9)
        self.assertEqual(5, int(mask.sum()))


class LabFieldTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.grid = build_grid(2, 1.0, (8, 8), [(2, 6), (2, 6)], 0.5)
        self.field = BinaryField.from_far_field(self.grid, FarField.half_space(0.0))

    def test_field_half_space_phase_success(self):
        self.assertTrue(self.field.phase[:, :4].all())
        self.assertFalse(self.field.phase[:, 4:].any())
        self.assertEqual(np.int8, self.field.u.dtype)
        self.assertEqual(1, self.field.u[0, 0])
        self.assertEqual(-1, self.field.u[0, 7])

    def test_field_outer_ring_disagrees_raise_error(self):
        phase = self.field.phase.copy()
        phase[0, 7] = True
        with self.assertRaises(InvalidFieldError):
            BinaryField(self.grid, phase, FarField.half_space(0.0))
        with self.assertRaises(InvalidFieldError):
            BinaryField(self.grid, np.zeros((7, 8), dtype=bool), FarField.outside())

    def test_field_flip_inside_omega_success(self):
        flipped = self.field.flipped((3, 4))
        self.assertTrue(flipped.phase[3, 4])
        self.assertFalse(self.field.phase[3, 4])
        self.assertNotEqual(self.field, flipped)
        self.assertEqual(self.field, flipped.flipped((3, 4)))

    def test_field_flip_outer_ring_raise_error(self):
        with self.assertRaises(InvalidFieldError):
            self.field.flipped((0, 0))

    def test_field_with_interior_keeps_exterior_success(self):
        field = self.field.with_interior(np.ones(self.grid.shape, dtype=bool))
        self.assertTrue(field.phase[self.grid.omega_mask].all())
        self.assertFalse(field.phase[0, 7])

    def test_field_complement_inverts_far_field_success(self):
        complement = self.field.complement()
        self.assertTrue(np.array_equal(~self.field.phase, complement.phase))
        self.assertTrue(complement.far_field.inverted)
        self.assertEqual(self.field, complement.complement())

    def test_field_padded_phase_uses_far_field_success(self):
        padded = self.field.padded_phase(2)
        self.assertEqual((12, 12), padded.shape)
        self.assertTrue(padded[0, 0])
        self.assertFalse(padded[0, 11])
        self.assertTrue(np.array_equal(self.field.phase, padded[2:-2, 2:-2]))

    def test_field_to_dict_from_dict_equal_success(self):
        clone = BinaryField.from_dict(self.grid, self.field.to_dict())
        self.assertEqual(self.field, clone)
        self.assertEqual(self.field.digest(), clone.digest())

    def test_field_boundary_mask_two_rows_success(self):
        mask = boundary_mask(self.field)
        self.assertTrue(mask[:, 3].all() and mask[:, 4].all())
        self.assertEqual(16, int(mask.sum()))
        self.assertEqual((0, 3), boundary_cells(self.field)[0])

    def test_field_point_cells_face_and_corner_success(self):
        self.assertEqual([(4, 3)], point_cells(self.grid, [0.5, -0.5]))
        self.assertEqual([(3, 4), (4, 4)], point_cells(self.grid, [0.0, 0.5]))
        self.assertEqual(4, len(point_cells(self.grid, [0.0, 0.0])))
        with self.assertRaises(InvalidFieldError):
            point_cells(self.grid, [10.0, 0.0])

    def test_field_on_boundary_success(self):
        self.assertTrue(on_boundary(self.field, [0.0, 0.0]))
        self.assertTrue(on_boundary(self.field, [0.5, -0.5]))
        self.assertFalse(on_boundary(self.field, [0.5, 2.5]))

    def test_field_dilate_identity_and_half_space_success(self):
        self.assertIs(self.field, dilate_field(self.field, 1.0))
        lifted = BinaryField.from_far_field(self.grid, FarField.half_space(1.0))
        dilated = dilate_field(lifted, 2.0, [0.0, 0.0])
        self.assertEqual(2.0, dilated.far_field.level)
        self.assertTrue(dilated.phase[:, :5].all())
        self.assertFalse(dilated.phase[:, 6:].any())
        with self.assertRaises(InvalidFieldError):
            dilate_field(self.field, 0.0)

    def test_field_rotate_constant_far_field_success(self):
        grid = build_grid(2, 1.0, (6, 8), [(1, 5), (1, 7)], 0.5)
        phase = np.zeros(grid.shape, dtype=bool)
        phase[2, 3] = True
        rotated = rotate_field(BinaryField(grid, phase, FarField.outside()))
        self.assertEqual((8, 6), rotated.grid.shape)
        self.assertEqual(1, int(rotated.phase.sum()))
        with self.assertRaises(InvalidFieldError):
            rotate_field(self.field)


class LabFarFieldTestCase(unittest.TestCase):

    def test_far_field_half_space_tail_split_success(self):
        for n in (1, 2, 3):
            far = FarField.half_space(0.0)
            point = np.zeros((1, n))
            tau = utils.unit_sphere_area(n) * 2.0 ** (-0.4) / 0.4 * 0.5 ** n
            below = far.tail_mass(point, n, 0.4, 0.5, 2.0)
            above = far.complement().tail_mass(point, n, 0.4, 0.5, 2.0)
            self.assertAlmostEqual(tau / 2, float(below[0]), places=10, msg=f"n={n}")
            self.assertAlmostEqual(tau, float(below[0] + above[0]), places=12)

    def test_far_field_constant_tail_success(self):
        points = np.zeros((3, 2))
        tau = 2 * math.pi * 4.0 ** -0.5 / 0.5
        self.assertTrue(np.allclose(tau, FarField.inside().tail_mass(points, 2, 0.5, 1.0, 4.0)))
        self.assertTrue(np.allclose(0.0, FarField.outside().tail_mass(points, 2, 0.5, 1.0, 4.0)))

    def test_far_field_subgraph_phase_and_clamp_success(self):
        grid = build_grid(2, 1.0, (8, 8), [(2, 6), (2, 6)], 0.5)
        far = FarField.subgraph(grid, lambda mesh: 0.25 * mesh[..., 0])
        phase = far.phase_at(np.array([[2.0, 0.4], [2.0, 0.6], [100.0, 0.8]]))
        self.assertEqual([True, False, True], phase.tolist())
        self.assertEqual(FarFieldKind.SUBGRAPH, FarField.from_dict(far.to_dict()).kind)
        self.assertEqual(far, FarField.from_dict(far.to_dict()))

    def test_far_field_subgraph_without_samples_raise_error(self):
        with self.assertRaises(InvalidFieldError):
            FarField(FarFieldKind.SUBGRAPH)
        with self.assertRaises(InvalidFieldError):
            FarField.from_dict({"kind": "sideways"})

    def test_far_field_inverted_constant_normalized_success(self):
        self.assertEqual(FarField.inside(), FarField(FarFieldKind.OUTSIDE, inverted=True))
        self.assertEqual(FarField.outside(), FarField.inside().complement())


class LabKernelTestCase(unittest.TestCase):

    def test_kernel_separated_weights_match_closed_form_success(self):
        for s in (0.25, 0.5, 0.75):
            for o in (2, 3):
                self.assertAlmostEqual(1.0, unit_weight((o,), 1, s, 1e-10) / exact_unit_weight_1d(o, s), places=6,
                                       msg=f"s={s} o={o}")

    def test_kernel_touching_weight_matches_closed_form_success(self):
        for s in (0.25, 0.5, 0.75):
            self.assertAlmostEqual(1.0, unit_weight((1,), 1, s, 1e-10) / exact_unit_weight_1d(1, s), places=6)

    def test_kernel_table_offsets_and_symmetry_success(self):
        grid = build_grid(2, 0.5, (12, 12), [(2, 10), (2, 10)], 0.5)
        kernel = build_kernel(grid, 2.0)
        self.assertEqual(4, kernel.radius_cells)
        self.assertEqual(48, len(kernel.offsets))
        self.assertEqual((9, 9), kernel.stencil.shape)
        self.assertEqual(0.0, kernel.stencil[4, 4])
        for o in kernel.offsets:
            self.assertEqual(kernel.weight(o), kernel.weight(-o))
            self.assertEqual(kernel.weight(o), kernel.weight(o[::-1]))
        self.assertEqual(0.0, kernel.weight((4, 4)))
        self.assertGreater(kernel.weight((1, 0)), kernel.weight((1, 1)))
        self.assertGreater(kernel.weight((1, 1)), kernel.weight((2, 0)))

    def test_kernel_scaling_with_cell_size_success(self):
        coarse = build_kernel(build_grid(1, 1.0, (12,), [(2, 10)], 0.5), 4.0)
        fine = build_kernel(build_grid(1, 0.5, (12,), [(2, 10)], 0.5), 2.0)
        self.assertAlmostEqual(0.5 ** 0.5, fine.weight((2,)) / coarse.weight((2,)), places=12)

    def test_kernel_tail_per_cell_success(self):
        grid = build_grid(2, 0.5, (12, 12), [(2, 10), (2, 10)], 0.5)
        kernel = build_kernel(grid, 2.0)
        self.assertAlmostEqual(2 * math.pi * 2.0 ** -0.5 / 0.5 * 0.25, kernel.tail_per_cell, places=12)

    def test_kernel_workers_do_not_change_weights_success(self):
        grid = build_grid(2, 1.0, (10, 10), [(2, 8), (2, 8)], 0.3)
        with Workers(3) as workers:
            parallel = build_kernel(grid, 5.0, workers=workers)
        self.assertEqual(build_kernel(grid, 5.0).digest(), parallel.digest())

    def test_kernel_small_cutoff_raise_error(self):
        grid = build_grid(2, 1.0, (10, 10), [(2, 8), (2, 8)], 0.3)
        with self.assertRaises(InvalidKernelError):
            build_kernel(grid, 3.0)
        with self.assertRaises(InvalidKernelError):
            build_kernel(grid, 4.0, near_tol=0.0)

    def test_kernel_default_cutoff_success(self):
        grid = build_grid(1, 0.25, (40,), [(4, 36)], 0.5)
        self.assertEqual(constants.DEFAULT_R_CUT_CELLS * 0.25, build_kernel(grid).r_cut)

    def test_kernel_check_grid_raise_error(self):
        grid = build_grid(1, 1.0, (12,), [(2, 10)], 0.5)
        other = build_grid(1, 1.0, (12,), [(3, 10)], 0.5)
        kernel = build_kernel(grid, 4.0)
        kernel.check_grid(build_grid(1, 1.0, (12,), [(2, 10)], 0.5))
        with self.assertRaises(InvalidKernelError):
            kernel.check_grid(other)


if __name__ == '__main__':
    unittest.main()
