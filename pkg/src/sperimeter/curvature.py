"""Curvature module: principal-value non-local mean curvature and Euler-Lagrange checks.

H_s[E](x) = p.v. ∫ (χ_E - χ_{E^c})(y) |x-y|^{-n-s} dy is realized by excluding the lattice
ball {j : |x_j - x| < δ} for a decreasing sequence of δ and extrapolating δ -> 0. The cells
whose closure contains x contribute their averaged cell-to-cell weights, so both cell
centers and interface points between two cells can be evaluated.

Classes:
    PVConfig: Exclusion radii and extrapolation order
    CurvatureSample: Raw δ-values, extrapolated value and residual at one point
    TangentBallReport: A phase-pure lattice ball touching a boundary cell
    ELPointReport, ELReport: Euler-Lagrange inequality outcome per interface point

Methods:
    mean_curvature_pv(field, point, kernel, pv_config): Curvature at a boundary point
    find_tangent_ball(field, cell, side, r_max): Largest pure ball touching a cell
    el_inequality_check(field, kernel, lam, pv_config): One-sided inequalities at interface points
    interface_points(field): Face midpoints between opposite-phase neighbours in Ω
    calibrate_el_constant(n, s, h): Resolution constant C of the tolerance C h^{1-s}
"""

import csv
import io
import itertools
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from sperimeter import constants, utils
from sperimeter.constants import Side
from sperimeter.exception import BoundaryPointError, DomainError
from sperimeter.lattice import (BinaryField, FarField, KernelTable, boundary_mask, build_grid, build_kernel,
                                on_boundary, point_cells)
from sperimeter.worker import Workers

logger = logging.getLogger(constants.LOGGER_NAME)

ROUND_OFF = 1e-12


class PVConfig:
    """Principal-value regularization.

    Args:
        deltas (sequence of float): Exclusion radii, strictly decreasing lengths.
        order (int): 0 takes the value at the smallest δ, 1 fits a + b δ^{1-s} and returns a.
    """

    def __init__(self, deltas: Sequence[float], order: int = 1):
        deltas = tuple(float(d) for d in deltas)
        if not deltas or any(d <= 0 for d in deltas):
            raise DomainError("Exclusion radii must be positive")
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise DomainError(f"Exclusion radii must be strictly decreasing, got {deltas}")
        if order not in (0, 1):
            raise DomainError(f"Extrapolation order must be 0 or 1, got {order}")
        if order == 1 and len(deltas) < 2:
            raise DomainError("A linear fit needs at least two exclusion radii")
        self.deltas = deltas
        self.order = order

    @classmethod
    def for_grid(cls, h: float, order: int = 1,
                 cells: Sequence[float] = constants.DEFAULT_DELTA_CELLS) -> "PVConfig":
        return cls([c * h for c in cells], order)

    def check(self, h: float):
        floor = constants.MIN_EXCLUSION_CELLS * h
        if self.deltas[-1] < floor * (1 - 1e-12):
            raise DomainError(f"Exclusion radii must be at least {floor}, got {self.deltas[-1]}")

    def to_dict(self) -> Dict[str, Any]:
        return {"deltas": list(self.deltas), "order": self.order}


class CurvatureSample:
    """Curvature at one point.

    Properties:
        values: Truncated integrals, one per δ in PVConfig order.
        value: Extrapolated H_s.
        residual: Largest deviation of the raw values from the fit (order 1) or the last change
            of the raw values (order 0).
    """

    def __init__(self, point: Sequence[float], cells: List[Tuple[int, ...]], deltas: Sequence[float],
                 values: Sequence[float], value: float, residual: float):
        self.point = np.asarray(point, dtype=float)
        self.cells = cells
        self.deltas = tuple(deltas)
        self.values = tuple(values)
        self.value = value
        self.residual = residual

    def to_dict(self) -> Dict[str, Any]:
        return {"point": self.point.tolist(), "cells": [list(c) for c in self.cells], "deltas": list(self.deltas),
                "values": list(self.values), "value": self.value, "residual": self.residual}


def _extrapolate(deltas: Sequence[float], values: Sequence[float], s: float, order: int) -> Tuple[float, float]:
    if order == 0:
        change = abs(values[-1] - values[-2]) if len(values) > 1 else 0.0
        return values[-1], change
    x = np.array([d ** (1 - s) for d in deltas])
    v = np.array(values)
    x_mean = utils.ordered_sum(x) / len(x)
    v_mean = utils.ordered_sum(v) / len(v)
    slope = utils.ordered_sum((x - x_mean) * (v - v_mean)) / utils.ordered_sum((x - x_mean) ** 2)
    intercept = v_mean - slope * x_mean
    residual = float(np.max(np.abs(v - (intercept + slope * x))))
    return intercept, residual


def mean_curvature_pv(field: BinaryField, point: Sequence[float], kernel: KernelTable,
                      pv_config: Optional[PVConfig] = None) -> CurvatureSample:
    """Evaluate H_s[E] at a point of the discrete boundary.

    Args:
        field (BinaryField): The set E.
        point (sequence of float): A boundary cell center or a point on a face between
            opposite-phase cells.
        kernel (KernelTable): Weights; exclusion radii must stay below its cutoff.
        pv_config (PVConfig, optional): Default to PVConfig.for_grid(h).

    Returns:
        A CurvatureSample.
    """
    grid = field.grid
    kernel.check_grid(grid)
    pv_config = PVConfig.for_grid(grid.h) if pv_config is None else pv_config
    pv_config.check(grid.h)
    if pv_config.deltas[0] >= kernel.r_cut:
        raise DomainError(f"Exclusion radius {pv_config.deltas[0]} must stay below R_cut={kernel.r_cut}")
    point = np.asarray(point, dtype=float)
    cells = point_cells(grid, point)
    if not on_boundary(field, point):
        raise BoundaryPointError(f"p.v. curvature defined on ∂E, {point.tolist()} is not a boundary point")
    m = kernel.radius_cells
    u = field.padded_phase(m).astype(float) * 2 - 1
    centers = grid.centers(m)
    scale = grid.cell_volume * len(cells)
    products, distances, tails = [], [], []
    for c in cells:
        window = tuple(slice(c[a], c[a] + 2 * m + 1) for a in range(grid.n))
        products.append((u[window] * kernel.stencil / scale).ravel())
        distances.append(np.sqrt(np.sum((centers[window] - point) ** 2, axis=-1)).ravel())
        x_c = grid.cell_center(c)[None, :]
        tail = float(kernel.tail_inside(field.far_field, x_c)[0]) - float(kernel.tail_outside(field.far_field, x_c)[0])
        tails.append(tail / scale)
    product, distance = np.concatenate(products), np.concatenate(distances)
    values = [utils.ordered_sum(np.concatenate([product[distance >= delta], tails])) for delta in pv_config.deltas]
    value, residual = _extrapolate(pv_config.deltas, values, grid.s, pv_config.order)
    logger.debug(f"Curvature at {point.tolist()}: {value!r} (residual {residual:.3e})")
    return CurvatureSample(point, cells, pv_config.deltas, values, value, residual)


class TangentBallReport:
    """Phase-pure lattice ball B_radius(center) on one side of the boundary, touching a cell."""

    def __init__(self, cell: Tuple[int, ...], side: Side, radius: float, center: np.ndarray):
        self.cell = cell
        self.side = side
        self.radius = radius
        self.center = center

    def to_dict(self) -> Dict[str, Any]:
        return {"cell": list(self.cell), "side": self.side.value, "radius": self.radius,
                "center": self.center.tolist()}


def find_tangent_ball(field: BinaryField, cell: Sequence[int], side: Side,
                      r_max: Optional[float] = None) -> Optional[TangentBallReport]:
    """Largest lattice ball of radius <= r_max, pure on the requested side, that contains a
    same-side cell of the cell's 3^n-neighbourhood.

    A ball B_r(y) centred at a cell center is pure when r does not exceed the distance from y
    to the nearest opposite-phase cell center. Returns None for non-boundary cells and when no
    ball of radius >= 2h qualifies. Ties go to the lexicographically smallest center.
    """
    grid = field.grid
    side = Side(side)
    cell = tuple(int(c) for c in cell)
    r_max = constants.DEFAULT_DELTA_CELLS[0] * grid.h if r_max is None else float(r_max)
    if not grid.contains(cell) or not boundary_mask(field)[cell]:
        return None
    margin = int(math.ceil(r_max / grid.h)) + 2
    phase = field.padded_phase(margin)
    pure = phase if side == Side.INTERIOR else ~phase
    clearance = ndimage.distance_transform_edt(pure, sampling=grid.h)
    local = tuple(c + margin for c in cell)
    box = tuple(slice(c - margin + 1, c + margin) for c in local)
    radius = np.minimum(clearance[box], r_max)
    centers = grid.centers(margin)
    ball_centers = centers[box]
    touching = np.zeros(radius.shape, dtype=bool)
    for step in itertools.product((-1, 0, 1), repeat=grid.n):
        q = tuple(c + d for c, d in zip(local, step))
        if not pure[q]:
            continue
        distance = np.sqrt(np.sum((ball_centers - centers[q]) ** 2, axis=-1))
        touching |= distance < radius
    if not touching.any():
        return None
    best = float(radius[touching].max())
    if best < constants.MIN_EXCLUSION_CELLS * grid.h * (1 - 1e-12):
        return None
    at = np.argwhere(touching & (radius == best))[0]
    return TangentBallReport(cell, side, best, ball_centers[tuple(at)])


def interface_points(field: BinaryField) -> List[Tuple[np.ndarray, Tuple[int, ...], Tuple[int, ...]]]:
    """(midpoint, inside cell, outside cell) for every face between opposite phases within Ω."""
    grid = field.grid
    points = []
    for cell in grid.omega_cells():
        for axis in range(grid.n):
            other = tuple(c + (1 if a == axis else 0) for a, c in enumerate(cell))
            if not grid.in_omega(other) or field.phase[cell] == field.phase[other]:
                continue
            inside, outside = (cell, other) if field.phase[cell] else (other, cell)
            points.append(((grid.cell_center(cell) + grid.cell_center(other)) / 2, inside, outside))
    return points


class ELPointReport:
    """Outcome of the Euler-Lagrange inequalities at one interface point."""

    def __init__(self, sample: CurvatureSample, interior: Optional[TangentBallReport],
                 exterior: Optional[TangentBallReport], lam: float, tol: float):
        self.sample = sample
        self.interior = interior
        self.exterior = exterior
        self.tol = tol
        slack = ROUND_OFF * (1 + abs(sample.value))
        # excess > 0 means violated
        self.interior_excess = None if interior is None else sample.value - lam - tol
        self.exterior_excess = None if exterior is None else -lam - tol - sample.value
        self.violated = any(e is not None and e > slack for e in (self.interior_excess, self.exterior_excess))

    @property
    def checked(self) -> bool:
        return self.interior is not None or self.exterior is not None

    def csv_row(self) -> List[Any]:
        ball = self.interior or self.exterior
        return ([";".join(",".join(str(i) for i in c) for c in self.sample.cells)]
                + [repr(float(x)) for x in self.sample.point]
                + [";".join(repr(v) for v in self.sample.values), repr(self.sample.value),
                   "" if ball is None else ("both" if self.interior and self.exterior else ball.side.value),
                   "" if ball is None else repr(ball.radius)])

    def to_dict(self) -> Dict[str, Any]:
        return {**self.sample.to_dict(), "tol": self.tol, "violated": self.violated,
                "interior_ball": None if self.interior is None else self.interior.to_dict(),
                "exterior_ball": None if self.exterior is None else self.exterior.to_dict(),
                "interior_excess": self.interior_excess, "exterior_excess": self.exterior_excess}


class ELReport:
    """Euler-Lagrange check over all interface points.

    Properties:
        points: ELPointReport per interface point, in lexicographic order of the inside cell.
        violations: Points where a one-sided inequality fails.
        passed: True when there are no violations.
    """

    def __init__(self, lam: float, constant: float, points: List[ELPointReport]):
        self.lam = lam
        self.constant = constant
        self.points = points

    @property
    def violations(self) -> List[ELPointReport]:
        return [p for p in self.points if p.violated]

    @property
    def checked(self) -> int:
        return sum(1 for p in self.points if p.checked)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        n = len(self.points[0].sample.point) if self.points else constants.MAX_DIMENSION
        header = ["cells", *(f"x{a}" for a in range(n)), "deltas", "h_s", "ball_side", "ball_radius"]
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for p in self.points:
            writer.writerow(p.csv_row())
        return out.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        return {"lambda": self.lam, "constant": self.constant, "passed": self.passed, "points": len(self.points),
                "checked": self.checked, "violations": [p.to_dict() for p in self.violations]}


def el_inequality_check(field: BinaryField, kernel: KernelTable, lam: float, pv_config: Optional[PVConfig] = None,
                        constant: float = constants.EL_TOLERANCE_CONSTANT, r_max: Optional[float] = None,
                        workers: Optional[Workers] = None) -> ELReport:
    """Check H_s <= Λ + tol where an interior tangent ball exists and H_s >= -Λ - tol where an
    exterior one exists, tol = δ-residual + C h^{1-s}.

    Args:
        field (BinaryField): The set E.
        kernel (KernelTable): Weights.
        lam (float): Λ >= 0.
        pv_config (PVConfig, optional): Principal-value regularization.
        constant (float, optional): C of the resolution term.
        r_max (float, optional): Largest tangent ball radius searched.
        workers (Workers, optional): Pool for the per-point evaluations.

    Returns:
        An ELReport; failed inequalities are reported, never raised.
    """
    if lam < 0:
        raise DomainError(f"Λ must be non-negative, got {lam}")
    grid = field.grid
    resolution = constant * grid.h ** (1 - grid.s)

    def evaluate(entry):
        point, inside, outside = entry
        sample = mean_curvature_pv(field, point, kernel, pv_config)
        interior = find_tangent_ball(field, inside, Side.INTERIOR, r_max)
        exterior = find_tangent_ball(field, outside, Side.EXTERIOR, r_max)
        return ELPointReport(sample, interior, exterior, lam, sample.residual + resolution)

    entries = interface_points(field)
    points = workers.map(evaluate, entries) if workers is not None else [evaluate(e) for e in entries]
    report = ELReport(lam, constant, points)
    if not report.passed:
        logger.info(f"EL check: {len(report.violations)} of {report.checked} checked points violate Λ={lam}")
    return report


def tilted_half_space(n: int, s: float, h: float, slope: float = constants.EL_CALIBRATION_SLOPE,
                      cells: int = 24, r_cut: Optional[float] = None) -> Tuple[BinaryField, KernelTable]:
    """The set {x_n < slope * x_1} on a cube of cells with a four-cell collar around Ω."""
    if n < 2:
        raise DomainError("A tilted half-space needs n >= 2")
    grid = build_grid(n, h, (cells,) * n, [(4, cells - 4)] * n, s)
    far = FarField.subgraph(grid, lambda x: slope * x[..., 0])
    field = BinaryField.from_far_field(grid, far)
    return field, build_kernel(grid, r_cut)


def calibrate_el_constant(n: int, s: float, h: float, pv_config: Optional[PVConfig] = None,
                          slope: float = constants.EL_CALIBRATION_SLOPE) -> float:
    """Smallest C with |H_s| <= C h^{1-s} at every interface point of a tilted half-space."""
    field, kernel = tilted_half_space(n, s, h, slope)
    worst = 0.0
    for point, _, _ in interface_points(field):
        worst = max(worst, abs(mean_curvature_pv(field, point, kernel, pv_config).value))
    constant = worst / h ** (1 - s)
    logger.info(f"EL constant calibrated: C={constant!r} (n={n}, s={s}, h={h}, slope={slope})")
    return constant
