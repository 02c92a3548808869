"""Lattice module: grid geometry, phase fields and singular-kernel weight tables.

Classes:
    GridDomain: Immutable n-dimensional cell grid with the working region Ω
    FarField: Analytic description of the set beyond the grid
    BinaryField: Phase configuration on a grid plus its far field
    KernelTable: Cell-pair weights of the kernel |x-y|^{-n-s} within a cutoff

Methods:
    build_grid(n, h, extents, omega_spec, s): Validate and build a GridDomain
    build_kernel(grid, r_cut, near_tol, workers): Tabulate cell-pair weights
    boundary_mask(field), boundary_cells(field): Cells whose 3^n-neighborhood has both phases
    dilate_field(field, lam, center): Resample the dilation of a field on the same grid
    rotate_field(field, quarter_turns, axes): Lattice rotation of a field and its grid
    point_cells(grid, point), on_boundary(field, point): Cells around a point and the boundary test
"""

import itertools
import logging
import math
from functools import lru_cache
from threading import RLock
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, ndimage
from scipy.interpolate import RegularGridInterpolator

from sperimeter import constants, utils
from sperimeter.constants import FarFieldKind
from sperimeter.exception import InvalidFieldError, InvalidGridError, InvalidKernelError
from sperimeter.worker import Workers

logger = logging.getLogger(constants.LOGGER_NAME)

OmegaSpec = Union[np.ndarray, Sequence[Tuple[int, int]], Callable[[np.ndarray], np.ndarray]]


class GridDomain:
    """Axis-aligned lattice of cubic cells of side h, centered on the origin.

    Cell k along an axis with extent e has center (k + 0.5 - e/2) * h. Instances are immutable;
    build them with build_grid so that the Ω preconditions are checked.

    Args:
        n (int): Dimension, 1 to 3.
        h (float): Cell size.
        extents (tuple of int): Cell count per axis.
        omega_mask (numpy.ndarray): Boolean mask of the working region Ω.
        s (float): Fractional order in (0, 1).
    """

    def __init__(self, n: int, h: float, extents: Sequence[int], omega_mask: np.ndarray, s: float):
        self._n = int(n)
        self._h = float(h)
        self._extents = tuple(int(e) for e in extents)
        self._s = float(s)
        mask = np.array(omega_mask, dtype=bool)
        mask.setflags(write=False)
        self._omega = mask
        self._digest = None

    @property
    def n(self) -> int:
        return self._n

    @property
    def h(self) -> float:
        return self._h

    @property
    def s(self) -> float:
        return self._s

    @property
    def extents(self) -> Tuple[int, ...]:
        return self._extents

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._extents

    @property
    def omega_mask(self) -> np.ndarray:
        return self._omega

    @property
    def cell_volume(self) -> float:
        return self._h ** self._n

    @property
    def omega_size(self) -> int:
        return int(self._omega.sum())

    def axis_centers(self, axis: int, margin: int = 0) -> np.ndarray:
        k = np.arange(-margin, self._extents[axis] + margin, dtype=float)
        return (k + 0.5 - self._extents[axis] / 2) * self._h

    def centers(self, margin: int = 0) -> np.ndarray:
        """Cell centers as an array of shape extents (+ 2*margin per axis) + (n,)."""
        axes = [self.axis_centers(a, margin) for a in range(self._n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_center(self, index: Sequence[int]) -> np.ndarray:
        return np.array([(index[a] + 0.5 - self._extents[a] / 2) * self._h for a in range(self._n)])

    def cell_of(self, point: Sequence[float]) -> Tuple[int, ...]:
        """Index of the cell containing point; may fall outside the grid."""
        return tuple(int(math.floor(point[a] / self._h + self._extents[a] / 2)) for a in range(self._n))

    def contains(self, index: Sequence[int]) -> bool:
        return len(index) == self._n and all(0 <= index[a] < self._extents[a] for a in range(self._n))

    def in_omega(self, index: Sequence[int]) -> bool:
        return self.contains(index) and bool(self._omega[tuple(index)])

    def omega_cells(self) -> List[Tuple[int, ...]]:
        return utils.lexicographic_cells(self._omega)

    def omega_center(self) -> np.ndarray:
        idx = np.argwhere(self._omega)
        lo = self.cell_center(idx.min(axis=0))
        hi = self.cell_center(idx.max(axis=0))
        return (lo + hi) / 2

    def ball_mask(self, center: Sequence[float], r: float) -> np.ndarray:
        """Cells whose center lies in the open ball B_r(center)."""
        d2 = np.sum((self.centers() - np.asarray(center, dtype=float)) ** 2, axis=-1)
        return d2 < r * r

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self._n,
            "h": self._h,
            "extents": list(self._extents),
            "s": self._s,
            "omega": utils.rle_encode(self._omega),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "GridDomain":
        try:
            return build_grid(payload["n"], payload["h"], payload["extents"],
                              utils.rle_decode(payload["omega"]), payload["s"])
        except KeyError as e:
            raise InvalidGridError(f"Grid header missing field {e}") from e

    def digest(self) -> str:
        if self._digest is None:
            self._digest = utils.dict_digest(self.to_dict())
        return self._digest

    def __eq__(self, other):
        return isinstance(other, GridDomain) and self.digest() == other.digest()

    def __hash__(self):
        return hash(self.digest())


def build_grid(n: int, h: float, extents: Sequence[int], omega_spec: OmegaSpec, s: float) -> GridDomain:
    """Validate grid parameters and Ω and return a GridDomain.

    Args:
        n (int): Dimension, 1 to 3.
        h (float): Cell size, positive.
        extents (sequence of int): Cells per axis, at least 3 each.
        omega_spec: A boolean mask of shape extents, a sequence of n half-open index ranges
            (lo, hi), or a callable mapping cell centers (shape extents + (n,)) to booleans.
        s (float): Fractional order, 0 < s < 1.

    Returns:
        A validated GridDomain.
    """
    if n not in range(1, constants.MAX_DIMENSION + 1):
        raise InvalidGridError(f"Dimension must be 1, 2 or 3, got {n}")
    if not 0 < s < 1:
        raise InvalidGridError(f"s out of range: {s} is not in (0, 1)")
    if not h > 0:
        raise InvalidGridError(f"Cell size must be positive, got {h}")
    extents = tuple(int(e) for e in extents)
    if len(extents) != n or any(e < 3 for e in extents):
        raise InvalidGridError(f"Extents {extents} must list {n} axes of at least 3 cells")
    scratch = GridDomain(n, h, extents, np.zeros(extents, dtype=bool), s)
    omega = _resolve_omega(scratch, omega_spec)
    if not omega.any():
        raise InvalidGridError("Ω must be nonempty")
    for axis in range(n):
        if omega.take(0, axis=axis).any() or omega.take(-1, axis=axis).any():
            raise InvalidGridError("Ω must be strictly interior")
    return GridDomain(n, h, extents, omega, s)


def _resolve_omega(grid: GridDomain, omega_spec: OmegaSpec) -> np.ndarray:
    if callable(omega_spec):
        omega = np.asarray(omega_spec(grid.centers()), dtype=bool)
    elif isinstance(omega_spec, np.ndarray) and omega_spec.dtype == bool:
        omega = omega_spec
    else:
        ranges = [tuple(int(v) for v in r) for r in omega_spec]
        if len(ranges) != grid.n or any(len(r) != 2 for r in ranges):
            raise InvalidGridError("Ω box must give one (lo, hi) index range per axis")
        omega = np.zeros(grid.extents, dtype=bool)
        omega[tuple(slice(max(lo, 0), min(hi, e)) for (lo, hi), e in zip(ranges, grid.extents))] = True
    if omega.shape != grid.extents:
        raise InvalidGridError(f"Ω mask shape {omega.shape} differs from extents {grid.extents}")
    return np.array(omega, dtype=bool)


@lru_cache(maxsize=None)
def _cap_integral(n: int, s: float, t: float) -> float:
    """∫_0^1 v^{s-1} f_n(v t) dv, f_n(t) the fraction of the unit sphere with y_n < t."""
    b = 1.0 if abs(t) <= 1 else 1.0 / abs(t)
    outer = (1 - b ** s) / s if t > 1 else 0.0
    if n == 1:
        return 0.5 * b ** s / s + outer
    if n == 3:
        return b ** s / (2 * s) + t * b ** (s + 1) / (2 * (s + 1)) + outer
    inner, _ = integrate.quad(lambda v: 1 - math.acos(max(-1.0, min(1.0, v * t))) / math.pi,
                              0.0, b, weight="alg", wvar=(s - 1, 0), epsabs=1e-13, epsrel=1e-12)
    return inner + outer


class FarField:
    """The part of E lying beyond the grid, described analytically.

    Kinds: OUTSIDE (nothing), INSIDE (everything), HALF_SPACE {x_n < level} and SUBGRAPH
    {x_n < psi(x')} with psi sampled on the x' cell centers and clamped beyond them. The inverted
    flag turns half-spaces and subgraphs into their complements.
    """

    def __init__(self, kind: FarFieldKind, level: float = 0.0, psi: Optional[np.ndarray] = None,
                 psi_axes: Optional[Sequence[np.ndarray]] = None, inverted: bool = False):
        if kind in (FarFieldKind.OUTSIDE, FarFieldKind.INSIDE) and inverted:
            kind = FarFieldKind.INSIDE if kind == FarFieldKind.OUTSIDE else FarFieldKind.OUTSIDE
            inverted = False
        self.kind = kind
        self.level = float(level)
        self.inverted = bool(inverted)
        self.psi = None
        self.psi_axes = None
        self._interpolators = None
        self._lock = RLock()
        if kind == FarFieldKind.SUBGRAPH:
            if psi is None or psi_axes is None:
                raise InvalidFieldError("Subgraph far field needs psi samples and their axes")
            self.psi_axes = tuple(np.array(a, dtype=float) for a in psi_axes)
            self.psi = np.array(psi, dtype=float).reshape(tuple(len(a) for a in self.psi_axes))
            if any(len(a) < 2 for a in self.psi_axes) or not np.all(np.isfinite(self.psi)):
                raise InvalidFieldError("psi needs at least two finite samples per axis")

    @classmethod
    def outside(cls) -> "FarField":
        return cls(FarFieldKind.OUTSIDE)

    @classmethod
    def inside(cls) -> "FarField":
        return cls(FarFieldKind.INSIDE)

    @classmethod
    def half_space(cls, level: float = 0.0) -> "FarField":
        return cls(FarFieldKind.HALF_SPACE, level=level)

    @classmethod
    def subgraph(cls, grid: GridDomain, psi: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]) -> "FarField":
        if grid.n < 2:
            raise InvalidFieldError("Subgraph far fields need n >= 2")
        axes = [grid.axis_centers(a) for a in range(grid.n - 1)]
        if callable(psi):
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            psi = psi(mesh)
        return cls(FarFieldKind.SUBGRAPH, psi=psi, psi_axes=axes)

    def _psi_interpolators(self):
        with self._lock:
            if self._interpolators is None:
                grads = np.gradient(self.psi, *self.psi_axes)
                if len(self.psi_axes) == 1:
                    grads = [grads]
                make = lambda values: RegularGridInterpolator(self.psi_axes, values, method="linear")
                self._interpolators = (make(self.psi), [make(g) for g in grads])
            return self._interpolators

    def _clamped_prime(self, points: np.ndarray) -> np.ndarray:
        prime = np.array(points[..., :-1], dtype=float)
        for a, axis in enumerate(self.psi_axes):
            prime[..., a] = np.clip(prime[..., a], axis[0], axis[-1])
        return prime.reshape(-1, len(self.psi_axes))

    def psi_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        value, _ = self._psi_interpolators()
        return value(self._clamped_prime(points)).reshape(points.shape[:-1])

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from the (tangent) boundary hyperplane, positive below it."""
        points = np.asarray(points, dtype=float)
        if self.kind == FarFieldKind.HALF_SPACE:
            return self.level - points[..., -1]
        value, grads = self._psi_interpolators()
        prime = self._clamped_prime(points)
        slope2 = sum(g(prime) ** 2 for g in grads)
        d = (value(prime) - points[..., -1].ravel()) / np.sqrt(1 + slope2)
        return d.reshape(points.shape[:-1])

    def phase_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.kind == FarFieldKind.OUTSIDE:
            return np.zeros(points.shape[:-1], dtype=bool)
        if self.kind == FarFieldKind.INSIDE:
            return np.ones(points.shape[:-1], dtype=bool)
        if self.kind == FarFieldKind.HALF_SPACE:
            below = points[..., -1] < self.level
        else:
            below = points[..., -1] < self.psi_at(points)
        return ~below if self.inverted else below

    def complement(self) -> "FarField":
        if self.kind == FarFieldKind.OUTSIDE:
            return FarField.inside()
        if self.kind == FarFieldKind.INSIDE:
            return FarField.outside()
        return FarField(self.kind, self.level, self.psi, self.psi_axes, not self.inverted)

    def dilate(self, lam: float, center: Sequence[float]) -> "FarField":
        """The far field of p + lam (E - p)."""
        if lam == 1 or self.kind in (FarFieldKind.OUTSIDE, FarFieldKind.INSIDE):
            return self
        p = np.asarray(center, dtype=float)
        if self.kind == FarFieldKind.HALF_SPACE:
            return FarField(self.kind, p[-1] + lam * (self.level - p[-1]), inverted=self.inverted)
        mesh = np.stack(np.meshgrid(*self.psi_axes, indexing="ij"), axis=-1)
        pre = p[:-1] + (mesh - p[:-1]) / lam
        pre = np.concatenate([pre, np.zeros(pre.shape[:-1] + (1,))], axis=-1)
        psi = p[-1] + lam * (self.psi_at(pre) - p[-1])
        return FarField(self.kind, psi=psi, psi_axes=self.psi_axes, inverted=self.inverted)

    def tail_mass(self, points: np.ndarray, n: int, s: float, h: float, r_cut: float) -> np.ndarray:
        """h^n ∫_{|y|>r_cut} χ_far(x+y) |y|^{-n-s} dy for every point x.

        Half-spaces are exact; subgraphs use the tangent half-space of psi above x'.
        """
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        tau = utils.unit_sphere_area(n) * r_cut ** (-s) / s * h ** n
        if self.kind == FarFieldKind.OUTSIDE:
            return np.zeros(shape)
        if self.kind == FarFieldKind.INSIDE:
            return np.full(shape, tau)
        t = self.signed_distance(points) / r_cut
        unique, inverse = np.unique(t, return_inverse=True)
        caps = np.array([_cap_integral(n, float(s), float(v)) for v in unique])
        below = (h ** n * utils.unit_sphere_area(n) * r_cut ** (-s) * caps)[inverse].reshape(shape)
        return tau - below if self.inverted else below

    def to_dict(self) -> Dict[str, Any]:
        payload = {"kind": self.kind.value, "level": self.level, "inverted": self.inverted}
        if self.kind == FarFieldKind.SUBGRAPH:
            payload["psi"] = self.psi.tolist()
            payload["psi_axes"] = [a.tolist() for a in self.psi_axes]
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "FarField":
        try:
            kind = FarFieldKind(payload["kind"])
        except (KeyError, ValueError) as e:
            raise InvalidFieldError(f"Unknown far field {payload!r}") from e
        return cls(kind, payload.get("level", 0.0), payload.get("psi"), payload.get("psi_axes"),
                   payload.get("inverted", False))

    def __eq__(self, other):
        return isinstance(other, FarField) and utils.dict_digest(self.to_dict()) == utils.dict_digest(other.to_dict())

    def __hash__(self):
        return hash(utils.dict_digest(self.to_dict()))


class BinaryField:
    """Phase configuration χ_E on every grid cell plus the far field beyond the grid.

    The outermost cell ring must agree with the far field; this is checked on construction.

    Args:
        grid (GridDomain): The grid.
        phase (numpy.ndarray): Boolean array of shape grid.shape, True inside E.
        far_field (FarField): E beyond the grid.

    Properties:
        u: χ_E - χ_{E^c} as an int8 array of ±1.
        interior: E ∩ Ω.
    """

    def __init__(self, grid: GridDomain, phase: np.ndarray, far_field: FarField, validate: bool = True):
        phase = np.array(phase, dtype=bool)
        if phase.shape != grid.shape:
            raise InvalidFieldError(f"Phase shape {phase.shape} differs from grid {grid.shape}")
        phase.setflags(write=False)
        self.grid = grid
        self.phase = phase
        self.far_field = far_field
        self._padded = {}
        if validate:
            self._check_far_ring()

    def _check_far_ring(self):
        ring = np.ones(self.grid.shape, dtype=bool)
        ring[tuple(slice(1, -1) for _ in range(self.grid.n))] = False
        expected = self.far_field.phase_at(self.grid.centers()[ring])
        bad = int(np.count_nonzero(expected != self.phase[ring]))
        if bad:
            raise InvalidFieldError(f"Far field inconsistent with the outer cell ring at {bad} cells")

    @classmethod
    def from_far_field(cls, grid: GridDomain, far_field: FarField) -> "BinaryField":
        return cls(grid, far_field.phase_at(grid.centers()), far_field)

    @classmethod
    def from_predicate(cls, grid: GridDomain, predicate: Callable[[np.ndarray], np.ndarray],
                       far_field: FarField) -> "BinaryField":
        return cls(grid, predicate(grid.centers()), far_field)

    @property
    def u(self) -> np.ndarray:
        return np.where(self.phase, 1, -1).astype(np.int8)

    @property
    def interior(self) -> np.ndarray:
        return self.phase & self.grid.omega_mask

    def with_phase(self, phase: np.ndarray) -> "BinaryField":
        return BinaryField(self.grid, phase, self.far_field)

    def with_interior(self, interior: np.ndarray) -> "BinaryField":
        """Replace the phase on Ω, keep the exterior datum."""
        omega = self.grid.omega_mask
        phase = np.where(omega, np.asarray(interior, dtype=bool), self.phase)
        return BinaryField(self.grid, phase, self.far_field, validate=False)

    def flipped(self, cell: Sequence[int]) -> "BinaryField":
        phase = self.phase.copy()
        phase[tuple(cell)] = not phase[tuple(cell)]
        return BinaryField(self.grid, phase, self.far_field, validate=not self.grid.in_omega(cell))

    def complement(self) -> "BinaryField":
        return BinaryField(self.grid, ~self.phase, self.far_field.complement(), validate=False)

    def padded_phase(self, margin: int) -> np.ndarray:
        """Phases on the grid enlarged by margin cells per side, filled from the far field."""
        if margin not in self._padded:
            if margin == 0:
                padded = self.phase.copy()
            else:
                padded = self.far_field.phase_at(self.grid.centers(margin))
                padded[tuple(slice(margin, -margin) for _ in range(self.grid.n))] = self.phase
            padded.setflags(write=False)
            self._padded[margin] = padded
        return self._padded[margin]

    def to_dict(self) -> Dict[str, Any]:
        return {"phase": utils.rle_encode(self.phase), "far_field": self.far_field.to_dict()}

    @classmethod
    def from_dict(cls, grid: GridDomain, payload: Dict[str, Any]) -> "BinaryField":
        return cls(grid, utils.rle_decode(payload["phase"]), FarField.from_dict(payload["far_field"]))

    def digest(self) -> str:
        return utils.dict_digest({"grid": self.grid.digest(), **self.to_dict()})

    def __eq__(self, other):
        return (isinstance(other, BinaryField) and self.grid == other.grid
                and np.array_equal(self.phase, other.phase) and self.far_field == other.far_field)

    def __hash__(self):
        return hash(self.digest())


def boundary_mask(field: BinaryField) -> np.ndarray:
    padded = field.padded_phase(1).astype(np.uint8)
    hi = ndimage.maximum_filter(padded, size=3, mode="nearest")
    lo = ndimage.minimum_filter(padded, size=3, mode="nearest")
    inner = tuple(slice(1, -1) for _ in range(field.grid.n))
    return (hi != lo)[inner]


def boundary_cells(field: BinaryField) -> List[Tuple[int, ...]]:
    """Cells whose 3^n-neighborhood holds both phases, in lexicographic order."""
    return utils.lexicographic_cells(boundary_mask(field))


def dilate_field(field: BinaryField, lam: float, center: Optional[Sequence[float]] = None) -> BinaryField:
    """Phase field of center + lam (E - center), resampled at pre-image cell centers.

    Args:
        field (BinaryField): The field to dilate.
        lam (float): Dilation factor, positive.
        center (sequence of float, optional): Dilation center. Default to the center of Ω.

    Returns:
        A BinaryField on the same grid with the analytically dilated far field.
    """
    if not lam > 0:
        raise InvalidFieldError(f"Dilation factor must be positive, got {lam}")
    if lam == 1:
        return field
    grid = field.grid
    center = grid.omega_center() if center is None else np.asarray(center, dtype=float)
    pre = center + (grid.centers() - center) / lam
    idx = np.floor(pre / grid.h + np.array(grid.extents) / 2).astype(int)
    on_grid = np.all((idx >= 0) & (idx < np.array(grid.extents)), axis=-1)
    phase = field.far_field.phase_at(pre)
    phase[on_grid] = field.phase[tuple(idx[on_grid].T)]
    return BinaryField(grid, phase, field.far_field.dilate(lam, center))


def rotate_points(points: np.ndarray, quarter_turns: int = 1, axes: Tuple[int, int] = (0, 1)) -> np.ndarray:
    """Image of points under the rotation rotate_field applies to the grid."""
    out = np.array(points, dtype=float)
    for _ in range(quarter_turns % 4):
        a, b = out[..., axes[0]].copy(), out[..., axes[1]].copy()
        out[..., axes[0]], out[..., axes[1]] = -b, a
    return out


def rotate_field(field: BinaryField, quarter_turns: int = 1,
                 axes: Tuple[int, int] = (0, 1)) -> BinaryField:
    if field.far_field.kind not in (FarFieldKind.OUTSIDE, FarFieldKind.INSIDE):
        raise InvalidFieldError("Only constant far fields are invariant under lattice rotations")
    grid = field.grid
    omega = np.rot90(grid.omega_mask, quarter_turns, axes)
    rotated = GridDomain(grid.n, grid.h, omega.shape, omega, grid.s)
    return BinaryField(rotated, np.rot90(field.phase, quarter_turns, axes), field.far_field)


def canonical_offset(offset: Sequence[int]) -> Tuple[int, ...]:
    return tuple(sorted(abs(int(o)) for o in offset))


@lru_cache(maxsize=None)
def _gauss_nodes(n: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(order)
    x, w = (x + 1) / 2, w / 2
    points = np.stack([g.ravel() for g in np.meshgrid(*([x] * n), indexing="ij")], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([w] * n), indexing="ij")], axis=1), axis=1)
    return points, weights


def _difference_integral(key: Tuple[int, ...], n: int, s: float, order: int) -> float:
    """∫_{[-1,1]^n} Π(1-|t_i|) |o+t|^{-n-s} dt, split at t_i = 0 into smooth orthant pieces."""
    tau, weights = _gauss_nodes(n, order)
    density = np.prod(1 - tau, axis=1) * weights
    o = np.array(key, dtype=float)
    total = []
    for signs in itertools.product((-1.0, 1.0), repeat=n):
        dist = np.sqrt(np.sum((o + tau * np.array(signs)) ** 2, axis=1))
        total.append(float(np.sum(density * dist ** (-n - s))))
    return utils.ordered_sum(total)


@lru_cache(maxsize=None)
def _separated_unit_weight(key: Tuple[int, ...], n: int, s: float, near_tol: float) -> float:
    """Unit-cell pair integral for offsets that do not touch the reference cell."""
    distance = math.sqrt(sum(k * k for k in key))
    if distance >= constants.MIDPOINT_OFFSET:
        return distance ** (-n - s)
    order, previous = 4, None
    while True:
        value = _difference_integral(key, n, s, order)
        if previous is not None and abs(value - previous) <= near_tol * abs(value):
            return value
        if order * 2 > constants.MAX_GAUSS_ORDER:
            logger.warning(f"Near weight {key} stopped at order {order} with change {abs(value - previous):.3e}")
            return value
        previous, order = value, order * 2


@lru_cache(maxsize=None)
def _touching_unit_weights(n: int, s: float, near_tol: float) -> Dict[Tuple[int, ...], float]:
    """Weights of offsets sharing a face, edge or corner with the reference cell.

    Splitting both unit cells into 2^n half cells and rescaling gives
    W(o) = 2^{s-n} Σ_{a,b ∈ {0,1}^n} W(2o + b - a); the touching unknowns form a small linear system.
    """
    keys = sorted(k for k in itertools.product((0, 1), repeat=n) if any(k) and list(k) == sorted(k))
    index = {k: i for i, k in enumerate(keys)}
    coupling = np.zeros((len(keys), len(keys)))
    rhs = np.zeros(len(keys))
    scale = 2.0 ** (s - n)
    for key in keys:
        separated = []
        for a in itertools.product((0, 1), repeat=n):
            for b in itertools.product((0, 1), repeat=n):
                image = canonical_offset([2 * key[i] + b[i] - a[i] for i in range(n)])
                if image in index:
                    coupling[index[key], index[image]] += 1
                else:
                    separated.append(_separated_unit_weight(image, n, s, near_tol))
        rhs[index[key]] = utils.ordered_sum(separated)
    solution = np.linalg.solve(np.eye(len(keys)) - scale * coupling, scale * rhs)
    return {k: float(solution[index[k]]) for k in keys}


def unit_weight(key: Tuple[int, ...], n: int, s: float, near_tol: float) -> float:
    """W(o) = ∫_{[0,1]^n} ∫_{o+[0,1]^n} |x-y|^{-n-s} dy dx for a canonical nonzero offset."""
    if max(key) == 1:
        return _touching_unit_weights(n, float(s), float(near_tol))[key]
    return _separated_unit_weight(key, n, float(s), float(near_tol))


class KernelTable:
    """Cell-pair weights w(o) = h^{n-s} W(o) for every nonzero offset with |o| h <= r_cut.

    Properties:
        offsets: (K, n) integer offsets in lexicographic order.
        weights: (K,) weights aligned with offsets.
        stencil: Dense weight array of side 2m+1, zero at the center and beyond r_cut.
        tail_per_cell: τ = |S^{n-1}| r_cut^{-s} / s * h^n.
    """

    def __init__(self, grid: GridDomain, r_cut: float, near_tol: float, unit_weights: Dict[Tuple[int, ...], float]):
        self.grid = grid
        self.r_cut = float(r_cut)
        self.near_tol = float(near_tol)
        self.radius_cells = int(math.floor(r_cut / grid.h + 1e-9))
        m, n = self.radius_cells, grid.n
        offsets = [o for o in itertools.product(range(-m, m + 1), repeat=n)
                   if any(o) and sum(x * x for x in o) <= (r_cut / grid.h) ** 2 + 1e-9]
        self.offsets = np.array(offsets, dtype=int).reshape(-1, n)
        scale = grid.h ** (n - grid.s)
        self.weights = np.array([scale * unit_weights[canonical_offset(o)] for o in offsets])
        self.offsets.setflags(write=False)
        self.weights.setflags(write=False)
        stencil = np.zeros((2 * m + 1,) * n)
        stencil[tuple((self.offsets + m).T)] = self.weights
        stencil.setflags(write=False)
        self.stencil = stencil
        self.tail_per_cell = utils.unit_sphere_area(n) * r_cut ** (-grid.s) / grid.s * grid.h ** n
        self._lookup = {tuple(int(x) for x in o): float(w) for o, w in zip(self.offsets, self.weights)}

    def weight(self, offset: Sequence[int]) -> float:
        return self._lookup.get(tuple(int(x) for x in offset), 0.0)

    def unit_weight(self, offset: Sequence[int]) -> float:
        return self.weight(offset) / self.grid.h ** (self.grid.n - self.grid.s)

    def tail_inside(self, far_field: FarField, points: np.ndarray) -> np.ndarray:
        g = self.grid
        return far_field.tail_mass(points, g.n, g.s, g.h, self.r_cut)

    def tail_outside(self, far_field: FarField, points: np.ndarray) -> np.ndarray:
        return self.tail_inside(far_field.complement(), points)

    def check_grid(self, grid: GridDomain):
        if grid is not self.grid and grid != self.grid:
            raise InvalidKernelError("Kernel was built on a different grid")

    def to_dict(self) -> Dict[str, Any]:
        return {"grid": self.grid.digest(), "r_cut": self.r_cut, "near_tol": self.near_tol,
                "offsets": len(self.offsets), "tail_per_cell": self.tail_per_cell}

    def digest(self) -> str:
        return utils.dict_digest({**self.to_dict(), "weights": utils.array_digest(self.weights)})


def build_kernel(grid: GridDomain, r_cut: Optional[float] = None, near_tol: float = constants.DEFAULT_NEAR_TOL,
                 workers: Optional[Workers] = None) -> KernelTable:
    """Tabulate cell-pair weights of |x-y|^{-n-s} within r_cut.

    Offsets at center distance >= 4 cells use the midpoint rule, closer separated offsets a
    Gauss-Legendre rule doubled in order until the relative change is below near_tol, and
    touching offsets the exact subdivision identity.

    Args:
        grid (GridDomain): The grid.
        r_cut (float, optional): Cutoff radius, at least 4h. Default to 8h.
        near_tol (float, optional): Relative tolerance of the near quadrature.
        workers (Workers, optional): Pool used to evaluate distinct offsets concurrently.

    Returns:
        A KernelTable.
    """
    r_cut = constants.DEFAULT_R_CUT_CELLS * grid.h if r_cut is None else float(r_cut)
    if r_cut < constants.MIDPOINT_OFFSET * grid.h * (1 - 1e-12):
        raise InvalidKernelError(f"R_cut must be at least 4h, got {r_cut} with h={grid.h}")
    if not near_tol > 0:
        raise InvalidKernelError(f"near_tol must be positive, got {near_tol}")
    m = int(math.floor(r_cut / grid.h + 1e-9))
    keys = sorted({canonical_offset(o) for o in itertools.product(range(m + 1), repeat=grid.n)
                   if any(o) and sum(x * x for x in o) <= (r_cut / grid.h) ** 2 + 1e-9})
    evaluate = lambda key: unit_weight(key, grid.n, grid.s, near_tol)
    values = workers.map(evaluate, keys) if workers is not None else [evaluate(k) for k in keys]
    kernel = KernelTable(grid, r_cut, near_tol, dict(zip(keys, values)))
    logger.info(f"Kernel built: {len(kernel.offsets)} offsets, r_cut={r_cut}, tail={kernel.tail_per_cell:.6e}")
    return kernel


def point_cells(grid: GridDomain, point: Sequence[float]) -> List[Tuple[int, ...]]:
    """Cells whose closure contains point: one for a cell interior, two across a face, and so on."""
    point = np.asarray(point, dtype=float)
    choices = []
    for a in range(grid.n):
        t = point[a] / grid.h + grid.extents[a] / 2
        k = round(t)
        choices.append((k - 1, k) if abs(t - k) < 1e-9 else (int(math.floor(t)),))
    cells = [tuple(c) for c in itertools.product(*choices)]
    if not all(grid.contains(c) for c in cells):
        raise InvalidFieldError(f"Point {point.tolist()} is not inside the grid")
    return cells


def on_boundary(field: BinaryField, point: Sequence[float]) -> bool:
    """A point is on the discrete boundary when the cells around it carry both phases, or when it
    is the center of a boundary cell."""
    cells = point_cells(field.grid, point)
    if len({bool(field.phase[c]) for c in cells}) > 1:
        return True
    return len(cells) == 1 and bool(boundary_mask(field)[cells[0]])
