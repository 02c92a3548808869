"""Analysis module: measured counterparts of the regularity statements for almost minimal sets.

Classes:
    DensityProfile: |E∩B_r| / |B_r| by cell counting at one point
    DensitySweep: Smallest density ratio over boundary points, for E and E^c
    CleanBallReport: Largest phase-pure balls inside B_r on both sides
    FlatnessReport: Narrowest slab containing ∂E ∩ B_r over a direction dictionary
    ContinuumInstance: Resolution-free problem description, rasterized per cell size
    ContinuityReport: Per_s of minimizers along a refinement sequence

Methods:
    density_profile(field, point, radii), density_sweep(field, radii)
    clean_ball_check(field, point, r)
    flatness(field, point, r, directions), direction_dictionary(n)
    hausdorff_boundary_distance(field_a, field_b, window)
    perimeter_continuity_check(instance, resolutions)
"""

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from sperimeter import constants, utils
from sperimeter.energy import CurvatureDatum
from sperimeter.exception import BoundaryPointError, DomainError, HausdorffUndefinedError, InvalidFieldError
from sperimeter.lattice import (BinaryField, FarField, GridDomain, KernelTable, boundary_mask, build_grid,
                                build_kernel, on_boundary)
from sperimeter.minimize import mincut_minimize
from sperimeter.worker import Workers

logger = logging.getLogger(constants.LOGGER_NAME)


def _ball_offsets(h: float, r: float, n: int) -> np.ndarray:
    """Footprint of the lattice ball {o : |o| h < r} as a boolean array of side 2m+1."""
    m = int(math.ceil(r / h))
    axes = np.arange(-m, m + 1) * h
    d2 = sum(g ** 2 for g in np.meshgrid(*([axes] * n), indexing="ij"))
    return d2 < r * r


class DensityProfile:
    """Density ratios at one point.

    Properties:
        inside_counts, ball_counts: E cells and all cells with center in B_r(point).
        ratios: inside_counts / ball_counts, in [0, 1].
    """

    def __init__(self, point: Sequence[float], radii: Sequence[float], inside_counts: Sequence[int],
                 ball_counts: Sequence[int]):
        self.point = np.asarray(point, dtype=float)
        self.radii = np.asarray(radii, dtype=float)
        self.inside_counts = np.asarray(inside_counts, dtype=np.int64)
        self.ball_counts = np.asarray(ball_counts, dtype=np.int64)
        self.ratios = self.inside_counts / self.ball_counts

    def flagged(self, floor: float = constants.DENSITY_FLOOR) -> bool:
        return bool(np.any(self.ratios < floor) or np.any(self.ratios > 1 - floor))

    def rows(self) -> List[List[Any]]:
        return [[*map(float, self.point), float(r), int(k), int(b), float(q)]
                for r, k, b, q in zip(self.radii, self.inside_counts, self.ball_counts, self.ratios)]

    def to_dict(self) -> Dict[str, Any]:
        return {"point": self.point.tolist(), "radii": self.radii.tolist(), "ratios": self.ratios.tolist(),
                "inside_counts": self.inside_counts.tolist(), "ball_counts": self.ball_counts.tolist()}


def density_profile(field: BinaryField, point: Sequence[float], radii: Sequence[float]) -> DensityProfile:
    """Cell counts of E inside the lattice balls B_r(point); cells beyond the grid come from the far field."""
    grid = field.grid
    point = np.asarray(point, dtype=float)
    if not on_boundary(field, point):
        raise BoundaryPointError(f"Density point {point.tolist()} is not on ∂E")
    margin = int(math.ceil(max(radii) / grid.h)) + 1
    centers = grid.centers(margin)
    phase = field.padded_phase(margin)
    d2 = np.sum((centers - point) ** 2, axis=-1)
    inside, total = [], []
    for r in radii:
        ball = d2 < r * r
        inside.append(int(np.count_nonzero(ball & phase)))
        total.append(int(np.count_nonzero(ball)))
    return DensityProfile(point, radii, inside, total)


class DensitySweep:
    """Smallest density ratio of E and of E^c over boundary cells of Ω and the given radii."""

    def __init__(self, radii: Sequence[float], inside_min: float, outside_min: float,
                 inside_at: Optional[Tuple[int, ...]], outside_at: Optional[Tuple[int, ...]]):
        self.radii = list(radii)
        self.inside_min = inside_min
        self.outside_min = outside_min
        self.inside_at = inside_at
        self.outside_at = outside_at

    @property
    def c0(self) -> float:
        return min(self.inside_min, self.outside_min)

    def passed(self, floor: float = constants.DENSITY_FLOOR) -> bool:
        return self.c0 >= floor

    def to_dict(self) -> Dict[str, Any]:
        return {"radii": self.radii, "c0": self.c0, "inside_min": self.inside_min, "outside_min": self.outside_min,
                "inside_at": None if self.inside_at is None else list(self.inside_at),
                "outside_at": None if self.outside_at is None else list(self.outside_at)}


def density_sweep(field: BinaryField, radii: Sequence[float]) -> DensitySweep:
    grid = field.grid
    cells = boundary_mask(field) & grid.omega_mask
    margin = int(math.ceil(max(radii) / grid.h)) + 1
    phase = field.padded_phase(margin).astype(float)
    inner = tuple(slice(margin, -margin) for _ in range(grid.n))
    best = {True: (1.0, None), False: (1.0, None)}
    for r in radii:
        footprint = _ball_offsets(grid.h, r, grid.n).astype(float)
        total = footprint.sum()
        inside = ndimage.correlate(phase, footprint, mode="constant", cval=0.0)[inner]
        for side, counts in ((True, inside), (False, total - inside)):
            ratios = np.where(cells, counts / total, np.inf)
            at = np.unravel_index(int(np.argmin(ratios)), ratios.shape)
            if ratios[at] < best[side][0]:
                best[side] = (float(ratios[at]), tuple(int(i) for i in at))
    return DensitySweep(radii, best[True][0], best[False][0], best[True][1], best[False][1])


class CleanBallReport:
    """Balls B_{c_side r}(y_side) inside B_r(point), pure on each side; c = min of both sides.

    A pass needs c >= max(floor, 2h/r): a clean ball must be wider than one cell on either side.
    """

    def __init__(self, point: np.ndarray, r: float, inside: Tuple[float, Optional[np.ndarray]],
                 outside: Tuple[float, Optional[np.ndarray]], floor: float, h: float):
        self.point = point
        self.r = r
        self.inside_c, self.inside_center = inside
        self.outside_c, self.outside_center = outside
        self.floor = floor
        self.h = h

    @property
    def c(self) -> float:
        return min(self.inside_c, self.outside_c)

    @property
    def threshold(self) -> float:
        return max(self.floor, 2 * self.h / self.r)

    @property
    def passed(self) -> bool:
        return self.c >= self.threshold

    def to_dict(self) -> Dict[str, Any]:
        center = lambda y: None if y is None else y.tolist()
        return {"point": self.point.tolist(), "r": self.r, "c": self.c, "passed": self.passed, "floor": self.floor,
                "threshold": self.threshold,
                "inside_c": self.inside_c, "inside_center": center(self.inside_center),
                "outside_c": self.outside_c, "outside_center": center(self.outside_center)}


def clean_ball_check(field: BinaryField, point: Sequence[float], r: float,
                     floor: float = constants.CLEAN_BALL_FLOOR) -> CleanBallReport:
    """Largest c with pure balls B_{cr}(y1) ⊂ E ∩ B_r and B_{cr}(y2) ⊂ E^c ∩ B_r, y1, y2 cell centers."""
    grid = field.grid
    point = np.asarray(point, dtype=float)
    region = grid.ball_mask(point, r)
    if np.any(region & ~grid.omega_mask):
        raise DomainError(f"B_r exceeds Ω: r={r} at {point.tolist()}")
    margin = int(math.ceil(r / grid.h)) + 1
    phase = field.padded_phase(margin)
    inner = tuple(slice(margin, -margin) for _ in range(grid.n))
    reach = r - np.sqrt(np.sum((grid.centers() - point) ** 2, axis=-1))
    sides = []
    for pure in (phase, ~phase):
        clearance = ndimage.distance_transform_edt(pure, sampling=grid.h)[inner]
        radius = np.where(region & pure[inner], np.minimum(clearance, reach), -np.inf)
        at = np.unravel_index(int(np.argmax(radius)), radius.shape)
        if radius[at] <= 0:
            sides.append((0.0, None))
        else:
            sides.append((float(radius[at]) / r, grid.cell_center(at)))
    return CleanBallReport(point, r, sides[0], sides[1], floor, grid.h)


def direction_dictionary(n: int) -> np.ndarray:
    """Unit directions: ±e_1 for n=1, 64 on the circle for n=2, 266 Fibonacci points on the sphere for n=3."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        angles = 2 * np.pi * np.arange(constants.CIRCLE_DIRECTIONS) / constants.CIRCLE_DIRECTIONS
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if n == 3:
        count = constants.SPHERE_DIRECTIONS
        k = np.arange(count) + 0.5
        polar = np.arccos(1 - 2 * k / count)
        azimuth = np.pi * (1 + 5 ** 0.5) * k
        return np.stack([np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)], axis=1)
    raise DomainError(f"Dimension must be 1, 2 or 3, got {n}")


class FlatnessReport:
    """Slab {|(x - point)·ν| <= half_width} containing the boundary cell centers in B_r(point)."""

    def __init__(self, point: np.ndarray, r: float, direction: np.ndarray, half_width: float, cells: int):
        self.point = point
        self.r = r
        self.direction = direction
        self.half_width = half_width
        self.cells = cells

    @property
    def flatness(self) -> float:
        return self.half_width / self.r

    def to_dict(self) -> Dict[str, Any]:
        return {"point": self.point.tolist(), "r": self.r, "direction": self.direction.tolist(),
                "half_width": self.half_width, "flatness": self.flatness, "cells": self.cells}


def flatness(field: BinaryField, point: Sequence[float], r: float,
             directions: Optional[np.ndarray] = None) -> FlatnessReport:
    grid = field.grid
    point = np.asarray(point, dtype=float)
    directions = direction_dictionary(grid.n) if directions is None else np.asarray(directions, dtype=float)
    cells = boundary_mask(field) & grid.ball_mask(point, r)
    if not cells.any():
        raise DomainError(f"No boundary cell within r={r} of {point.tolist()}")
    offsets = grid.centers()[cells] - point
    widths = np.max(np.abs(offsets @ directions.T), axis=0)
    best = int(np.argmin(widths))
    return FlatnessReport(point, r, directions[best], float(widths[best]), int(cells.sum()))


def hausdorff_boundary_distance(field_a: BinaryField, field_b: BinaryField,
                                window: Optional[np.ndarray] = None) -> float:
    """Symmetric Hausdorff distance between the boundary cell centers of two fields inside a window."""
    if field_a.grid != field_b.grid:
        raise InvalidFieldError("Hausdorff distance needs fields on the same grid")
    grid = field_a.grid
    window = np.ones(grid.shape, dtype=bool) if window is None else np.asarray(window, dtype=bool)
    centers = grid.centers()
    points_a = centers[boundary_mask(field_a) & window]
    points_b = centers[boundary_mask(field_b) & window]
    if not len(points_a) or not len(points_b):
        raise HausdorffUndefinedError("undefined Hausdorff distance: a boundary is empty in the window")
    forward, _ = cKDTree(points_b).query(points_a)
    backward, _ = cKDTree(points_a).query(points_b)
    return float(max(forward.max(), backward.max()))


class ContinuumInstance:
    """A Massari problem independent of the cell size.

    Args:
        n (int), s (float): Dimension and order.
        lengths (sequence of float): Physical side lengths of the grid, centered on the origin.
        omega_box (sequence of (float, float)): Ω as an open box of physical coordinates.
        far_field (dict): FarField.to_dict() payload of a constant or half-space far field.
        r_cut (float): Physical kernel cutoff.
        datum (callable, optional): Points -> phase on the collar; default to the far field.
        H (float or callable, optional): Prescribed curvature.
    """

    def __init__(self, n: int, s: float, lengths: Sequence[float], omega_box: Sequence[Tuple[float, float]],
                 far_field: Dict[str, Any], r_cut: float,
                 datum: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 H: Union[float, Callable[[np.ndarray], np.ndarray]] = 0.0):
        self.n = n
        self.s = s
        self.lengths = tuple(float(x) for x in lengths)
        self.omega_box = tuple((float(a), float(b)) for a, b in omega_box)
        self.far_field = FarField.from_dict(far_field)
        self.r_cut = float(r_cut)
        self.datum = datum
        self.H = H

    def rasterize(self, h: float) -> Tuple[BinaryField, CurvatureDatum, KernelTable]:
        extents = [int(round(length / h)) for length in self.lengths]

        def omega(points):
            inside = np.ones(points.shape[:-1], dtype=bool)
            for a, (lo, hi) in enumerate(self.omega_box):
                inside &= (points[..., a] > lo) & (points[..., a] < hi)
            return inside

        grid = build_grid(self.n, h, extents, omega, self.s)
        centers = grid.centers()
        phase = self.far_field.phase_at(centers) if self.datum is None else self.datum(centers)
        field = BinaryField(grid, phase, self.far_field)
        H = self.H(centers) if callable(self.H) else self.H
        return field, CurvatureDatum(grid, H), build_kernel(grid, self.r_cut)


class ContinuityReport:
    """Per_s of the minimizers of one continuum instance along a refinement sequence."""

    def __init__(self, resolutions: Sequence[float], perimeters: Sequence[float], tolerance: float):
        self.resolutions = list(resolutions)
        self.perimeters = list(perimeters)
        self.tolerance = tolerance

    @property
    def changes(self) -> List[float]:
        return [abs(b - a) for a, b in zip(self.perimeters, self.perimeters[1:])]

    @property
    def relative_changes(self) -> List[float]:
        return [c / max(abs(p), 1e-300) for c, p in zip(self.changes, self.perimeters[1:])]

    @property
    def passed(self) -> bool:
        changes = self.changes
        shrinking = all(b <= a for a, b in zip(changes, changes[1:]))
        return shrinking or all(c <= self.tolerance for c in self.relative_changes)

    def to_dict(self) -> Dict[str, Any]:
        return {"resolutions": self.resolutions, "perimeters": self.perimeters, "changes": self.changes,
                "relative_changes": self.relative_changes, "tolerance": self.tolerance, "passed": self.passed}


def perimeter_continuity_check(instance: ContinuumInstance, resolutions: Sequence[float],
                               tolerance: float = constants.CONTINUITY_TOLERANCE,
                               workers: Optional[Workers] = None) -> ContinuityReport:
    """Solve instance at each cell size and record Per_s of the canonical minimizers."""

    def solve(h):
        field, H, kernel = instance.rasterize(h)
        _, report = mincut_minimize(field.grid, kernel, field, H)
        return report.per_s

    perimeters = workers.map(solve, resolutions) if workers is not None else [solve(h) for h in resolutions]
    report = ContinuityReport(resolutions, perimeters, tolerance)
    logger.info(f"Perimeter sequence {utils.canonical_json(report.perimeters)}")
    return report
