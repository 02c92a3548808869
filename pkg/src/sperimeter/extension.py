"""Extension module: the Poisson extension ũ = u * P to the upper half-space, weighted Dirichlet
energies on half-balls, and the monotonicity profiles Ξ_E(r), Φ_E(r).

P(x, z) = C_P z^s / (|x|^2 + z^2)^{(n+s)/2}, with C_P fixed by ∫ P(x, z) dx = 1.

Classes:
    ExtensionField: ũ sampled at every grid cell and graded height level
    RadialProfile: Ξ and Φ over increasing radii
    MonotonicityReport: Worst drop of Φ and the boundedness check

Methods:
    poisson_kernel_normalization(n, s, quadrature_tol): C_P
    graded_levels(h, z_max, ratio): Height levels z_1 = h/4, z_{k+1} = ratio z_k
    extend_field(field, z_levels, kernel_truncation): Compute ũ
    dirichlet_halfball(ext, center, r): ∫_{B_r^+} z^{1-s} |∇ũ|^2
    phi_profile(field, center, radii, lam): Ξ and Φ profiles
    monotonicity_report(profile, tol, bound_constant): Φ_{k+1} >= Φ_k - tol and Φ_k <= C (1 + R^s)
    calibrate_c_tilde(n, s, h, storage): Energy-ratio constant of the extension lemma
    calibrate_bound_constant(n, s, h, storage): C of the boundedness check, from the half-space profile
    blowup_profiles(field, center, lambdas, radii): Ξ on dilations of a field
"""

import logging
import math
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, signal, special

from sperimeter import constants, utils
from sperimeter.constants import FarFieldKind
from sperimeter.energy import gagliardo_local
from sperimeter.exception import BoundaryPointError, CalibrationMissingError, DomainError, MeshRangeError
from sperimeter.lattice import (BinaryField, FarField, GridDomain, build_grid, build_kernel, dilate_field,
                                on_boundary, point_cells)
from sperimeter.storage import ArtifactStorage, calibration_key, read_calibration, update_calibration
from sperimeter.worker import Workers

logger = logging.getLogger(constants.LOGGER_NAME)

C_TILDE_SECTION = "c_tilde"
BOUND_SECTION = "bound_constant"
BOUND_RADIUS_CELLS = (3.0, 4.0, 5.0, 6.0)


def poisson_kernel_normalization(n: int, s: float, quadrature_tol: float = constants.DEFAULT_QUADRATURE_TOL) -> float:
    """C_P with ∫_{R^n} P(x, 1) dx = 1, by adaptive radial quadrature.

    P is homogeneous of degree -n in (x, z), so the constant holds for every z.
    """
    if not 0 < s < 1:
        raise DomainError(f"s out of range: {s} is not in (0, 1)")
    radial, _ = integrate.quad(lambda r: r ** (n - 1) * (1 + r * r) ** (-(n + s) / 2), 0, np.inf,
                               epsabs=quadrature_tol, epsrel=quadrature_tol, limit=200)
    return 1.0 / (utils.unit_sphere_area(n) * radial)


def poisson_kernel(x: np.ndarray, z: float, n: int, s: float, c_p: float) -> np.ndarray:
    r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
    return c_p * z ** s * (r2 + z * z) ** (-(n + s) / 2)


def poisson_tail_mass(radius: float, z: float, n: int, s: float) -> float:
    """∫_{|x| > radius} P(x, z) dx, a regularized incomplete beta function."""
    return float(1.0 - special.betainc(n / 2, s / 2, radius * radius / (radius * radius + z * z)))


def graded_levels(h: float, z_max: float, ratio: float = constants.LEVEL_RATIO,
                  first: Optional[float] = None) -> np.ndarray:
    """Geometric levels from z_1 = h/4 up to the first level >= z_max."""
    first = constants.FIRST_LEVEL_FRACTION * h if first is None else float(first)
    if not ratio > 1:
        raise DomainError(f"Level ratio must exceed 1, got {ratio}")
    if first < constants.FIRST_LEVEL_FRACTION * h * (1 - 1e-12):
        raise DomainError(f"First level {first} is below h/4")
    levels = [first]
    while levels[-1] < z_max:
        levels.append(levels[-1] * ratio)
    return np.array(levels)


@lru_cache(maxsize=None)
def _cell_rule(n: int, order: int, splits: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes on [-1/2, 1/2]^n, each axis split into equal parts; weights sum to 1."""
    x, w = leggauss(order)
    edges = np.linspace(-0.5, 0.5, splits + 1)
    nodes = np.concatenate([(a + b) / 2 + x * (b - a) / 2 for a, b in zip(edges[:-1], edges[1:])])
    weights = np.tile(w / 2 / splits, splits)
    grids = np.meshgrid(*([nodes] * n), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    products = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([weights] * n), indexing="ij")], axis=1), axis=1)
    return points, products


def _cell_masses(offsets: np.ndarray, rule, h: float, z: float, n: int, s: float, c_p: float) -> np.ndarray:
    points, weights = rule
    out = np.empty(len(offsets))
    for start in range(0, len(offsets), 2048):
        chunk = offsets[start:start + 2048]
        x = (chunk[:, None, :] + points[None, :, :]) * h
        out[start:start + 2048] = poisson_kernel(x, z, n, s, c_p) @ weights * h ** n
    return out


def _level_stencil(grid: GridDomain, z: float, radius: float, c_p: float) -> Tuple[np.ndarray, float]:
    """Cell masses of P(·, z) for offsets with |o| h <= radius, rescaled so stencil + tail = 1."""
    n, h, s = grid.n, grid.h, grid.s
    m = int(math.floor(radius / h + 1e-9))
    axes = np.arange(-m, m + 1)
    offsets = np.stack([g.ravel() for g in np.meshgrid(*([axes] * n), indexing="ij")], axis=1)
    offsets = offsets[np.sum(offsets ** 2, axis=1) <= (radius / h) ** 2 + 1e-9]
    near = np.max(np.abs(offsets), axis=1) <= constants.EXTENSION_NEAR_CELLS
    masses = np.empty(len(offsets))
    masses[near] = _cell_masses(offsets[near], _cell_rule(n, 8, 4), h, z, n, s, c_p)
    masses[~near] = _cell_masses(offsets[~near], _cell_rule(n, 4, 1), h, z, n, s, c_p)
    tail = poisson_tail_mass(radius, z, n, s)
    masses *= (1.0 - tail) / utils.ordered_sum(masses)
    stencil = np.zeros((2 * m + 1,) * n)
    stencil[tuple((offsets + m).T)] = masses
    return stencil, tail


def _sphere_fraction(n: int, t: float) -> float:
    """Fraction of the unit sphere S^{n-1} with y_n < t."""
    t = max(-1.0, min(1.0, t))
    if n == 1:
        return 0.0 if t <= -1 else (1.0 if t >= 1 else 0.5)
    if n == 2:
        return 1 - math.acos(t) / math.pi
    return (1 + t) / 2


def _far_tail(far: FarField, points: np.ndarray, radius: float, z: float, n: int, s: float, c_p: float,
              tail: float) -> np.ndarray:
    """∫_{|y| > radius} P(y, z) (χ_far - χ_far^c)(x + y) dy for every point x."""
    shape = points.shape[:-1]
    if far.kind == FarFieldKind.INSIDE:
        return np.full(shape, tail)
    if far.kind == FarFieldKind.OUTSIDE:
        return np.full(shape, -tail)
    d = far.signed_distance(points)
    unique, inverse = np.unique(d, return_inverse=True)
    area = utils.unit_sphere_area(n)

    def signed(dist):
        density = lambda r: c_p * area * z ** s * r ** (n - 1) * (r * r + z * z) ** (-(n + s) / 2)
        value, _ = integrate.quad(lambda r: density(r) * (2 * _sphere_fraction(n, dist / r) - 1), radius, np.inf,
                                  limit=200)
        return value

    values = np.array([signed(float(v)) for v in unique])[inverse].reshape(shape)
    return -values if far.inverted else values


class ExtensionField:
    """ũ(x, z) at every grid cell center and height level.

    Args:
        grid (GridDomain): The base grid.
        levels (numpy.ndarray): Strictly increasing heights, the first at least h/4.
        values (numpy.ndarray): Shape grid.shape + (len(levels),), entries in [-1, 1].
        truncation (float): Stencil radius used for the convolution.

    Properties:
        weights: z^{1-s} per level.
        level_widths: Height interval each level represents in the z-integration.
    """

    def __init__(self, grid: GridDomain, levels: np.ndarray, values: np.ndarray, truncation: float):
        levels = np.asarray(levels, dtype=float)
        if levels.ndim != 1 or not len(levels) or np.any(np.diff(levels) <= 0):
            raise MeshRangeError("Height levels must be strictly increasing")
        if values.shape != grid.shape + (len(levels),):
            raise MeshRangeError(f"Extension values of shape {values.shape} do not match the mesh")
        self.grid = grid
        self.levels = levels
        self.values = values
        self.truncation = float(truncation)
        self.weights = levels ** (1 - grid.s)

    @property
    def level_widths(self) -> np.ndarray:
        edges = np.concatenate([[0.0], (self.levels[1:] + self.levels[:-1]) / 2, [self.levels[-1]]])
        return np.diff(edges)

    def max_radius(self, center: Sequence[float]) -> float:
        center = np.asarray(center, dtype=float)
        reach = [min(center[a] - self.grid.axis_centers(a)[0], self.grid.axis_centers(a)[-1] - center[a])
                 for a in range(self.grid.n)]
        return float(min(min(reach), self.levels[-1]))

    def sidecar(self) -> Dict[str, Any]:
        return {"levels": self.levels.tolist(), "s": self.grid.s, "grid_hash": self.grid.digest(),
                "truncation": self.truncation, "shape": list(self.values.shape)}

    def save(self, storage: ArtifactStorage, name: str) -> Tuple[str, str]:
        return storage.write_npy(f"{name}.npy", self.values), storage.write_json(f"{name}.json", self.sidecar())

    @classmethod
    def load(cls, storage: ArtifactStorage, name: str, grid: GridDomain) -> "ExtensionField":
        sidecar = storage.read_json(f"{name}.json")
        if sidecar["grid_hash"] != grid.digest():
            raise MeshRangeError(f"Extension {name} was computed on another grid")
        return cls(grid, np.array(sidecar["levels"]), storage.read_npy(f"{name}.npy"), sidecar["truncation"])


def extend_field(field: BinaryField, z_levels: Optional[Sequence[float]] = None,
                 kernel_truncation: Optional[float] = None, quadrature_tol: float = constants.DEFAULT_QUADRATURE_TOL,
                 workers: Optional[Workers] = None) -> ExtensionField:
    """ũ(x, z) = Σ_y u(y) ∫_{cell y} P(x - y', z) dy' + far-field tail, clipped to [-1, 1].

    Args:
        field (BinaryField): The set E, u = χ_E - χ_{E^c}.
        z_levels (sequence of float, optional): Heights. Default to graded levels up to a quarter
            of the grid's smallest side.
        kernel_truncation (float, optional): Stencil radius; beyond it u is taken from the far field.
            Default to the grid diagonal, so the tail only sees the far field.
        quadrature_tol (float, optional): Tolerance of C_P.
        workers (Workers, optional): Pool used over levels.

    Returns:
        An ExtensionField.
    """
    grid = field.grid
    if z_levels is None:
        z_levels = graded_levels(grid.h, min(grid.extents) * grid.h / 4)
    levels = np.asarray(z_levels, dtype=float)
    if levels.ndim != 1 or not len(levels) or np.any(np.diff(levels) <= 0):
        raise MeshRangeError("Height levels must be strictly increasing")
    if levels[0] < constants.FIRST_LEVEL_FRACTION * grid.h * (1 - 1e-12):
        raise MeshRangeError(f"First level {levels[0]} is below h/4")
    diagonal = grid.h * math.sqrt(sum(e * e for e in grid.extents))
    radius = diagonal if kernel_truncation is None else float(kernel_truncation)
    if radius < 2 * grid.h:
        raise DomainError(f"Kernel truncation must be at least 2h, got {radius}")
    c_p = poisson_kernel_normalization(grid.n, grid.s, quadrature_tol)
    m = int(math.floor(radius / grid.h + 1e-9))
    u = field.padded_phase(m).astype(float) * 2 - 1
    centers = grid.centers()

    def level(z):
        stencil, tail = _level_stencil(grid, float(z), radius, c_p)
        inner = signal.fftconvolve(u, stencil, mode="valid")
        return inner + _far_tail(field.far_field, centers, radius, float(z), grid.n, grid.s, c_p, tail)

    planes = workers.map(level, levels) if workers is not None else [level(z) for z in levels]
    values = np.clip(np.stack(planes, axis=-1), -1.0, 1.0)
    logger.info(f"Extension computed: {len(levels)} levels, truncation {radius}")
    return ExtensionField(grid, levels, values, radius)


def dirichlet_halfball(ext: ExtensionField, center: Sequence[float], r: float) -> float:
    """∫_{B_r^+(center)} z^{1-s} |∇ũ|^2 with central differences in x, one-sided at the ends,
    and cell volume h^n times the level width per sample."""
    grid = ext.grid
    center = np.asarray(center, dtype=float)
    admissible = ext.max_radius(center)
    if r > admissible * (1 + 1e-12):
        raise MeshRangeError(f"Half-ball of radius {r} exceeds the extension mesh; largest admissible radius is "
                             f"{admissible}")
    grads = np.gradient(ext.values, *([grid.h] * grid.n), ext.levels, edge_order=1)
    energy = sum(g ** 2 for g in grads)
    d2 = np.sum((grid.centers() - center) ** 2, axis=-1)[..., None] + ext.levels ** 2
    weights = grid.cell_volume * ext.level_widths * ext.weights
    inside = d2 < r * r
    return utils.ordered_sum((energy * weights)[inside])


class RadialProfile:
    """Ξ_k = r_k^{s-n} D(r_k) and Φ_k = Ξ_k + ((n-s)/s) ω_n Λ̂ r_k^s.

    Args:
        n (int), s (float): Dimension and order.
        radii (sequence of float): Strictly increasing radii.
        xi (sequence of float): Ξ values.
        lam (float): Λ.
        c_tilde (float, optional): Calibrated constant; Λ̂ = 8 c̃ Λ.
        h (float, optional): Cell size of the field the profile was measured on.
    """

    def __init__(self, n: int, s: float, radii: Sequence[float], xi: Sequence[float], lam: float = 0.0,
                 c_tilde: Optional[float] = None, h: Optional[float] = None):
        self.n = n
        self.s = s
        self.h = h
        self.radii = np.asarray(radii, dtype=float)
        self.xi = np.asarray(xi, dtype=float)
        self.lam = lam
        self.c_tilde = c_tilde
        self.lambda_hat = 0.0 if lam == 0 else 8 * c_tilde * lam
        self.coefficient = (n - s) / s * utils.unit_ball_volume(n) * self.lambda_hat
        self.phi = self.xi + self.coefficient * self.radii ** s

    def rows(self) -> List[List[float]]:
        return [[float(r), float(x), float(p)] for r, x, p in zip(self.radii, self.xi, self.phi)]

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "s": self.s, "lambda": self.lam, "c_tilde": self.c_tilde,
                "lambda_hat": self.lambda_hat, "h": self.h, "radii": self.radii.tolist(), "xi": self.xi.tolist(),
                "phi": self.phi.tolist()}


def load_c_tilde(storage: Optional[ArtifactStorage], n: int, s: float) -> Optional[float]:
    if storage is None:
        return None
    entry = read_calibration(storage).get(C_TILDE_SECTION, {}).get(calibration_key(n, s))
    return None if entry is None else float(entry["c_tilde"])


def _check_radii(radii: Sequence[float]) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or not len(radii) or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise DomainError("Radii must be positive and strictly increasing")
    return radii


def phi_profile(field: BinaryField, center: Sequence[float], radii: Sequence[float], lam: float = 0.0,
                z_levels: Optional[Sequence[float]] = None, kernel_truncation: Optional[float] = None,
                c_tilde: Optional[float] = None, storage: Optional[ArtifactStorage] = None,
                ext: Optional[ExtensionField] = None, workers: Optional[Workers] = None) -> RadialProfile:
    """Ξ and Φ profiles of field around a boundary point.

    Args:
        field (BinaryField): The set E.
        center (sequence of float): A point of the discrete boundary.
        radii (sequence of float): Strictly increasing radii.
        lam (float, optional): Λ >= 0.
        z_levels (sequence of float, optional): Heights; default graded up to the largest radius.
        kernel_truncation (float, optional): Passed to extend_field.
        c_tilde (float, optional): Calibrated constant; read from the storage calibration file if omitted.
        storage (ArtifactStorage, optional): Holds the calibration file.
        ext (ExtensionField, optional): Precomputed extension of field.
        workers (Workers, optional): Pool used by extend_field.

    Returns:
        A RadialProfile.
    """
    grid = field.grid
    if lam < 0:
        raise DomainError(f"Λ must be non-negative, got {lam}")
    radii = _check_radii(radii)
    if not on_boundary(field, center):
        raise BoundaryPointError(f"Profile center {list(center)} is not on ∂E")
    if lam > 0 and c_tilde is None:
        c_tilde = load_c_tilde(storage, grid.n, grid.s)
        if c_tilde is None:
            raise CalibrationMissingError(f"No calibrated c̃ for n={grid.n}, s={grid.s}; run the calibration first")
    if ext is None:
        levels = graded_levels(grid.h, radii[-1]) if z_levels is None else z_levels
        ext = extend_field(field, levels, kernel_truncation, workers=workers)
    xi = [r ** (grid.s - grid.n) * dirichlet_halfball(ext, center, r) for r in radii]
    return RadialProfile(grid.n, grid.s, radii, xi, lam, c_tilde, grid.h)


class MonotonicityReport:
    """Outcome of Φ_{k+1} >= Φ_k - tol and, when requested, Φ_k <= C (1 + R^s)."""

    def __init__(self, tol: float, worst_drop: float, worst_index: Optional[int], bound: Optional[float],
                 bound_excess: float):
        self.tol = tol
        self.worst_drop = worst_drop
        self.worst_index = worst_index
        self.bound = bound
        self.bound_excess = bound_excess

    @property
    def monotone(self) -> bool:
        return self.worst_drop <= self.tol

    @property
    def bounded(self) -> bool:
        return self.bound is None or self.bound_excess <= 0

    @property
    def passed(self) -> bool:
        return self.monotone and self.bounded

    def to_dict(self) -> Dict[str, Any]:
        return {"tol": self.tol, "worst_drop": self.worst_drop, "worst_index": self.worst_index,
                "bound": self.bound, "bound_excess": self.bound_excess, "monotone": self.monotone,
                "bounded": self.bounded, "passed": self.passed}


def monotonicity_report(profile: RadialProfile, tol: float, bound_constant: Optional[float] = None,
                        outer_radius: Optional[float] = None,
                        storage: Optional[ArtifactStorage] = None) -> MonotonicityReport:
    """Check Φ_{k+1} >= Φ_k - tol and max Φ <= C (1 + R^s) plus the Λ̂ term at R, the outer radius.

    Without an explicit bound_constant, C comes from the calibration file for the profile's
    (n, s, h), calibrated on the half-space and stored when missing. Profiles with no cell size
    are checked for monotonicity only.
    """
    if len(profile.radii) < 3:
        raise DomainError("Monotonicity needs a profile with at least three radii")
    drops = profile.phi[:-1] - profile.phi[1:]
    index = int(np.argmax(drops))
    worst = max(0.0, float(drops[index]))
    if bound_constant is None and profile.h is not None:
        bound_constant = load_bound_constant(storage, profile.n, profile.s, profile.h)
        if bound_constant is None:
            bound_constant = calibrate_bound_constant(profile.n, profile.s, profile.h, storage)
    bound, excess = None, 0.0
    if bound_constant is not None:
        outer = profile.radii[-1] if outer_radius is None else outer_radius
        bound = bound_constant * (1 + outer ** profile.s) + profile.coefficient * outer ** profile.s
        excess = float(np.max(profile.phi) - bound * (1 + 1e-12))
    report = MonotonicityReport(tol, worst, index if worst > 0 else None, bound, excess)
    if not report.monotone:
        logger.warning(f"Monotonicity failed: worst drop {worst:.3e} at radius index {index}, tol {tol:.3e}")
    if not report.bounded:
        logger.warning(f"Boundedness failed: max Φ exceeds {bound:.6e} by {excess:.3e}")
    return report


def _calibration_pair(n: int, s: float, h: float, cells: int = 24) -> Tuple[BinaryField, BinaryField, np.ndarray]:
    """The half-space {x_n < 0}, the same set with the cell under the origin removed, and the
    interface point above that cell."""
    grid = build_grid(n, h, (cells,) * n, [(4, cells - 4)] * n, s)
    half = BinaryField.from_far_field(grid, FarField.half_space(0.0))
    point = np.array([h / 2] * (n - 1) + [0.0])
    below = [c for c in point_cells(grid, point) if half.phase[c]][0]
    return half, half.flipped(below), point


def calibrate_c_tilde(n: int, s: float, h: float, storage: Optional[ArtifactStorage] = None,
                      r_cells: float = 4.0, kernel_truncation: Optional[float] = None) -> float:
    """c̃ as the ratio of the extension energy change to the J_r change for one flipped cell.

    Args:
        n (int), s (float), h (float): Dimension, order and cell size.
        storage (ArtifactStorage, optional): Calibration file to update.
        r_cells (float, optional): Half-ball and J_r radius in cells.
        kernel_truncation (float, optional): Passed to extend_field.

    Returns:
        The calibrated c̃.
    """
    half, flipped, point = _calibration_pair(n, s, h)
    r = r_cells * h
    levels = graded_levels(h, r)
    kernel = build_kernel(half.grid)
    extension_change = (dirichlet_halfball(extend_field(flipped, levels, kernel_truncation), point, r)
                        - dirichlet_halfball(extend_field(half, levels, kernel_truncation), point, r))
    gagliardo_change = gagliardo_local(flipped, r, kernel, point) - gagliardo_local(half, r, kernel, point)
    c_tilde = extension_change / gagliardo_change
    if storage is not None:
        update_calibration(storage, C_TILDE_SECTION, calibration_key(n, s),
                           {"c_tilde": c_tilde, "h": h, "r": r})
    logger.info(f"c̃ calibrated: {c_tilde!r} (n={n}, s={s}, h={h})")
    return c_tilde


def load_bound_constant(storage: Optional[ArtifactStorage], n: int, s: float, h: float) -> Optional[float]:
    if storage is None:
        return None
    entry = read_calibration(storage).get(BOUND_SECTION, {}).get(calibration_key(n, s, h))
    return None if entry is None else float(entry["bound_constant"])


def calibrate_bound_constant(n: int, s: float, h: float, storage: Optional[ArtifactStorage] = None,
                             r_cells: Sequence[float] = BOUND_RADIUS_CELLS,
                             kernel_truncation: Optional[float] = None) -> float:
    """C = max_k Ξ_k / (1 + r_k^s) along the half-space profile at cell size h.

    Args:
        n (int), s (float), h (float): Dimension, order and cell size.
        storage (ArtifactStorage, optional): Calibration file to update.
        r_cells (sequence of float, optional): Profile radii in cells.
        kernel_truncation (float, optional): Passed to extend_field.

    Returns:
        The calibrated C.
    """
    half, _, point = _calibration_pair(n, s, h)
    radii = [float(c) * h for c in r_cells]
    profile = phi_profile(half, point, radii, kernel_truncation=kernel_truncation)
    constant = float(np.max(profile.xi / (1 + profile.radii ** s)))
    if storage is not None:
        update_calibration(storage, BOUND_SECTION, calibration_key(n, s, h),
                           {"bound_constant": constant, "radii": radii})
    logger.info(f"Φ bound constant calibrated: {constant!r} (n={n}, s={s}, h={h})")
    return constant


def blowup_profiles(field: BinaryField, center: Sequence[float], lambdas: Sequence[float], radii: Sequence[float],
                    z_levels: Optional[Sequence[float]] = None, kernel_truncation: Optional[float] = None,
                    workers: Optional[Workers] = None) -> Dict[float, RadialProfile]:
    """Ξ profiles of center + λ (E - center) for each λ; Ξ_{λE}(r) = Ξ_E(r/λ) for exact dilations."""
    radii = _check_radii(radii)
    center = np.asarray(center, dtype=float)
    profiles = {}
    for lam in lambdas:
        dilated = dilate_field(field, float(lam), center)
        profiles[float(lam)] = phi_profile(dilated, center, radii, 0.0, z_levels, kernel_truncation,
                                           workers=workers)
    return profiles
