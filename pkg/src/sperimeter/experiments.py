"""Experiments module: the sticking, perturbation and C⁰-not-C¹ constructions, run as jobs.

All constructions are planar: Ω = (-a, a) × (-M, M) inside a grid whose far field is the
half-plane {x_2 < 0}. Cell faces sit on multiples of h, so x = ±1 and x_2 = 0 are lattice lines.

Classes:
    ExperimentSpec: Serializable description of one experiment (TOML or JSON)
    StickinessMeasurement: Column heights of a subgraph minimizer and its jumps at ∂Ω'
    PerturbationReport: Minimizers and certificates with and without an external perturbation Σ
    C0NotC1Report: Continuity and slope mismatch at ±x0 for the counterexample instance
    ExperimentResult: Minimizer, energy and measurement of one experiment run

Methods:
    build_sticking_instance(delta, s, resolution): Half-plane datum plus bumps F±
    build_perturbation_sigma(grid, psi, C, xi, collar, translation): Cusp region G_{C,ξ}
    run_perturbation_invariance(spec, sigma): Compare the two solves
    build_c0_not_c1_instance(s, xi, resolution): Restricted domain with cusp perturbations
    measure_stickiness(minimizer): Traces and jumps of a subgraph at both ends of Ω'
    run_experiment(spec), run_experiments(specs, workers): Job runners
"""

import json
import logging
import math
import os
import tomllib
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from sperimeter import constants, utils
from sperimeter.analysis import hausdorff_boundary_distance
from sperimeter.constants import Family
from sperimeter.energy import CurvatureDatum, EnergyReport
from sperimeter.exception import (DomainError, ExperimentPreconditionError, HausdorffUndefinedError, InvalidConfigError,
                                  NonSubgraphError, PerturbationHypothesisError)
from sperimeter.lattice import BinaryField, FarField, GridDomain, KernelTable, build_grid, build_kernel
from sperimeter.minimize import LambdaCertificate, lambda_certificate, mincut_minimize
from sperimeter.worker import Workers

logger = logging.getLogger(constants.LOGGER_NAME)

KINDS = ("sticking", "c0_not_c1")
DEFAULT_ETA0 = 0.1
DEFAULT_XI = 0.25


class ExperimentSpec:
    """One experiment, fully determined by its fields.

    Args:
        name (str): Job name, also the artifact prefix.
        kind (str, optional): "sticking" or "c0_not_c1".
        s (float, optional): Fractional order.
        resolution (int, optional): Cells per unit length, h = 1 / resolution.
        delta (float, optional): Bump height δ; 0 gives the plain half-plane.
        distance (float, optional): Bumps F± = ±(distance, distance + 1) × (0, δ).
        height (float, optional): Vertical truncation M of the slab Ω.
        r_cut (float, optional): Kernel cutoff. Default to distance + 1 so the bumps reach Ω.
        beta_scale (bool, optional): Record the predicted sticking scale δ^β, β = (2 + η0) / (1 - 2s).
        eta0 (float, optional): η0 in the exponent above.
        H (float, optional): Constant prescribed curvature.
        sigma (dict, optional): Perturbation {"C", "xi", "collar", "translation"} attached on run.
        xi (float, optional): Cusp exponent excess of the counterexample.
        x0 (float, optional): Half width of the restricted domain of the counterexample.
        slope_threshold (float, optional): Slope that selects x0.

    Methods:
        from_dict(payload), from_file(path), to_dict(), digest()
        grid(), instance(), sticking_spec()
    """

    def __init__(self, name: str, kind: str = "sticking", s: float = 0.25, resolution: int = 8, delta: float = 0.0,
                 distance: float = constants.STICKING_BUMP_DISTANCE, height: float = constants.STICKING_HEIGHT,
                 r_cut: Optional[float] = None, beta_scale: bool = False, eta0: float = DEFAULT_ETA0,
                 H: float = 0.0, sigma: Optional[Dict[str, float]] = None, xi: float = DEFAULT_XI,
                 x0: Optional[float] = None, slope_threshold: float = constants.SLOPE_THRESHOLD):
        self.name = name
        self.kind = kind
        self.s = float(s)
        self.resolution = int(resolution)
        self.delta = float(delta)
        self.distance = float(distance)
        self.height = float(height)
        self.r_cut = self.distance + 1.0 if r_cut is None else float(r_cut)
        self.beta_scale = bool(beta_scale)
        self.eta0 = float(eta0)
        self.H = float(H)
        self.sigma = None if sigma is None else {k: float(v) for k, v in sigma.items()}
        self.xi = float(xi)
        self.x0 = None if x0 is None else float(x0)
        self.slope_threshold = float(slope_threshold)
        self._check()

    def _check(self):
        if self.kind not in KINDS:
            raise InvalidConfigError(f"Unknown experiment kind {self.kind!r}")
        if not 0 < self.s < 1:
            raise InvalidConfigError(f"s out of range: {self.s}")
        if self.resolution < 2:
            raise InvalidConfigError(f"Resolution must be at least 2 cells per unit, got {self.resolution}")
        if not 0 <= self.delta < self.height:
            raise InvalidConfigError(f"Bump height must lie in [0, M), got δ={self.delta} with M={self.height}")
        if self.distance < 1:
            raise InvalidConfigError(f"Bumps must stay outside Ω, got distance {self.distance}")
        if self.r_cut < constants.MIDPOINT_OFFSET * self.h:
            raise InvalidConfigError(f"R_cut must be at least 4h, got {self.r_cut}")
        if self.beta_scale and self.s >= 0.5:
            raise ExperimentPreconditionError(
                f"The δ^β sticking scale needs 1 - 2s > 0, i.e. s < 1/2; got s={self.s}")
        if self.sigma is not None and not {"C", "xi"} <= set(self.sigma):
            raise InvalidConfigError("sigma needs at least C and xi")
        if self.kind == "c0_not_c1" and (self.x0 is None or not 0 < self.x0 < 1):
            raise InvalidConfigError(f"The counterexample needs 0 < x0 < 1, got {self.x0}")

    @property
    def h(self) -> float:
        return 1.0 / self.resolution

    @property
    def half_width(self) -> float:
        return 1.0 if self.x0 is None else self.x0

    @property
    def beta(self) -> Optional[float]:
        return (2 + self.eta0) / (1 - 2 * self.s) if self.beta_scale else None

    def expected(self) -> Dict[str, Any]:
        payload = {"sticking_jump_positive": self.delta > 0}
        if self.beta_scale:
            payload.update({"beta": self.beta, "sticking_scale": self.delta ** self.beta})
        return payload

    def grid(self) -> GridDomain:
        res = self.resolution
        extents = (2 * (math.ceil((self.distance + 1) * res) + 2), 2 * (math.ceil(self.height * res) + 2))
        a, m = self.half_width, self.height
        omega = lambda x: (np.abs(x[..., 0]) < a) & (np.abs(x[..., 1]) < m)
        return build_grid(2, self.h, extents, omega, self.s)

    def sticking_spec(self) -> "ExperimentSpec":
        payload = self.to_dict()
        payload.update({"kind": "sticking", "x0": None, "sigma": None})
        return ExperimentSpec.from_dict(payload)

    def instance(self) -> Tuple[BinaryField, CurvatureDatum, KernelTable]:
        """Exterior datum, curvature and kernel of the experiment."""
        grid = self.grid()
        if self.kind == "sticking":
            phase = _bumped_half_plane(grid, self.delta, self.distance)
        else:
            phase = _counterexample_datum(self, grid)
        datum = BinaryField(grid, phase, FarField.half_space(0.0))
        return datum, CurvatureDatum(grid, self.H), build_kernel(grid, self.r_cut)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "s": self.s, "resolution": self.resolution,
                "delta": self.delta, "distance": self.distance, "height": self.height, "r_cut": self.r_cut,
                "beta_scale": self.beta_scale, "eta0": self.eta0, "H": self.H, "sigma": self.sigma,
                "xi": self.xi, "x0": self.x0, "slope_threshold": self.slope_threshold}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ExperimentSpec":
        try:
            return cls(**payload)
        except TypeError as e:
            raise InvalidConfigError(f"Invalid experiment spec: {e}") from e

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSpec":
        _, suffix = os.path.splitext(path)
        with open(path, "rb") as f:
            if suffix == ".toml":
                payload = tomllib.load(f)
            elif suffix == ".json":
                payload = json.load(f)
            else:
                raise InvalidConfigError(f"Experiment spec must be .toml or .json, got {path}")
        payload.setdefault("name", os.path.splitext(os.path.basename(path))[0])
        return cls.from_dict(payload)

    def digest(self) -> str:
        return utils.dict_digest(self.to_dict())


def _bumped_half_plane(grid: GridDomain, delta: float, distance: float) -> np.ndarray:
    x = grid.centers()
    bumps = (np.abs(x[..., 0]) > distance) & (np.abs(x[..., 0]) < distance + 1) & (x[..., 1] > 0) & (x[..., 1] < delta)
    return (x[..., 1] < 0) | bumps


def build_sticking_instance(delta: float, s: float, resolution: int,
                            distance: float = constants.STICKING_BUMP_DISTANCE,
                            height: float = constants.STICKING_HEIGHT, beta_scale: bool = False,
                            r_cut: Optional[float] = None, name: Optional[str] = None) -> ExperimentSpec:
    """Half-plane datum plus the bumps F± on the collar, Ω = (-1, 1) × (-M, M).

    Raises:
        ExperimentPreconditionError: beta_scale requested with s >= 1/2.
    """
    name = name or f"sticking-d{delta!r}-s{s!r}-r{resolution}"
    return ExperimentSpec(name, "sticking", s=s, resolution=resolution, delta=delta, distance=distance,
                          height=height, r_cut=r_cut, beta_scale=beta_scale)


def _psi_on_columns(grid: GridDomain, psi: Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]) -> np.ndarray:
    """ψ sampled on the x' cell centers, broadcast along the last axis."""
    prime = grid.centers()[..., :-1]
    if callable(psi):
        return np.asarray(psi(prime), dtype=float)
    values = np.asarray(psi, dtype=float)
    if values.ndim == 0:
        return np.full(prime.shape[:-1], float(values))
    return np.broadcast_to(values.reshape(values.shape + (1,)), grid.shape)


def cusp_height(radial: np.ndarray, C: float, xi: float, n: int, s: float) -> np.ndarray:
    """C (|x'| - 1)^{n+s-1+ξ} on the collar, zero elsewhere."""
    t = np.clip(np.asarray(radial, dtype=float) - 1, 0.0, None)
    return C * t ** (n + s - 1 + xi)


def sigma_inclusion_violations(grid: GridDomain, sigma: np.ndarray, psi, C: float, xi: float, collar: float,
                               translation: float = 0.0) -> List[Tuple[int, ...]]:
    """Σ cells whose center is not in τ_n G_{C,ξ}."""
    x = grid.centers()
    radial = np.sqrt(np.sum(x[..., :-1] ** 2, axis=-1))
    base = _psi_on_columns(grid, psi) + translation
    offset = x[..., -1] - base
    inside = (radial > 1) & (radial < 1 + collar) & (offset > 0) & (offset < cusp_height(radial, C, xi, grid.n, grid.s))
    return utils.lexicographic_cells(np.asarray(sigma, dtype=bool) & ~inside)


def build_perturbation_sigma(grid: GridDomain, psi, C: float, xi: float, collar: float, translation: float = 0.0,
                             datum: Optional[BinaryField] = None) -> np.ndarray:
    """Cells of τ_n G_{C,ξ}: ψ(x') < x_n - τ < ψ(x') + C (|x'| - 1)^{n+s-1+ξ}, 1 < |x'| < 1 + collar.

    Args:
        grid (GridDomain): The grid; Ω must avoid the collar.
        psi: ψ as a constant, samples on the x' cell centers, or a callable on x'.
        C (float), xi (float): Cusp constant and exponent excess, both positive.
        collar (float): Collar width δ.
        translation (float, optional): Vertical shift τ_n.
        datum (BinaryField, optional): E; Σ must avoid it.

    Returns:
        Boolean mask of Σ.
    """
    if not C > 0 or not xi > 0 or not collar > 0:
        raise PerturbationHypothesisError(f"Cusp parameters must be positive, got C={C}, ξ={xi}, δ={collar}")
    x = grid.centers()
    radial = np.sqrt(np.sum(x[..., :-1] ** 2, axis=-1))
    offset = x[..., -1] - translation - _psi_on_columns(grid, psi)
    sigma = (radial > 1) & (radial < 1 + collar) & (offset > 0) & (offset < cusp_height(radial, C, xi, grid.n, grid.s))
    if np.any(sigma & grid.omega_mask):
        raise PerturbationHypothesisError(f"Σ meets Ω at {int(np.count_nonzero(sigma & grid.omega_mask))} cells")
    if datum is not None and np.any(sigma & datum.phase):
        raise PerturbationHypothesisError(f"Σ meets E at {int(np.count_nonzero(sigma & datum.phase))} cells")
    bad = sigma_inclusion_violations(grid, sigma, psi, C, xi, collar, translation)
    if bad:
        raise PerturbationHypothesisError(f"Σ cell {bad[0]} leaves G_C,ξ")
    logger.debug(f"Σ rasterized: {int(sigma.sum())} cells")
    return sigma


class StickinessMeasurement:
    """Column heights of a planar subgraph around Ω' and the jumps at both of its ends.

    Properties:
        columns: x of the measured column centers, one exterior column on each side of Ω'.
        heights: Graph height per column.
        left_jump, right_jump: |interior trace - exterior value| at -a and a.
    """

    def __init__(self, h: float, columns: np.ndarray, heights: np.ndarray):
        self.h = h
        self.columns = columns
        self.heights = heights
        self.left_exterior, self.left_interior = float(heights[0]), float(heights[1])
        self.right_interior, self.right_exterior = float(heights[-2]), float(heights[-1])
        self.left_jump = abs(self.left_interior - self.left_exterior)
        self.right_jump = abs(self.right_interior - self.right_exterior)

    @property
    def jump(self) -> float:
        return max(self.left_jump, self.right_jump)

    @property
    def sticking(self) -> bool:
        """More than one cell of jump at either end."""
        return self.jump > self.h * (1 + 1e-9)

    @property
    def symmetric(self) -> bool:
        return self.left_jump == self.right_jump

    def slopes(self) -> np.ndarray:
        return np.diff(self.heights) / self.h

    def rows(self) -> List[List[float]]:
        return [[float(x), float(y)] for x, y in zip(self.columns, self.heights)]

    def to_dict(self) -> Dict[str, Any]:
        return {"h": self.h, "left_jump": self.left_jump, "right_jump": self.right_jump,
                "left_interior": self.left_interior, "left_exterior": self.left_exterior,
                "right_interior": self.right_interior, "right_exterior": self.right_exterior,
                "sticking": self.sticking, "symmetric": self.symmetric,
                "columns": self.columns.tolist(), "heights": self.heights.tolist()}


def measure_stickiness(minimizer: BinaryField) -> StickinessMeasurement:
    """Graph heights over Ω' plus one exterior column on each side, in the rows of Ω.

    Raises:
        NonSubgraphError: A column of the window is not a down-set.
    """
    grid = minimizer.grid
    if grid.n != 2:
        raise DomainError(f"Stickiness is measured on planar instances, got n={grid.n}")
    cols = np.flatnonzero(grid.omega_mask.any(axis=1))
    rows = np.flatnonzero(grid.omega_mask.any(axis=0))
    lo, hi = int(cols[0]) - 1, int(cols[-1]) + 1
    window = minimizer.phase[lo:hi + 1, rows[0]:rows[-1] + 1]
    descents = np.diff(window.astype(np.int8), axis=1) > 0
    if descents.any():
        column = lo + int(np.flatnonzero(descents.any(axis=1))[0])
        raise NonSubgraphError(f"Minimizer is not a subgraph in column {column}")
    bottom = grid.axis_centers(1)[rows[0]] - grid.h / 2
    heights = bottom + grid.h * window.sum(axis=1)
    return StickinessMeasurement(grid.h, grid.axis_centers(0)[lo:hi + 1], heights)


class ExperimentResult:

    def __init__(self, spec: ExperimentSpec, minimizer: BinaryField, energy: EnergyReport,
                 measurement: StickinessMeasurement, perturbation: Optional["PerturbationReport"] = None):
        self.spec = spec
        self.minimizer = minimizer
        self.energy = energy
        self.measurement = measurement
        self.perturbation = perturbation

    def to_dict(self) -> Dict[str, Any]:
        payload = {"spec": self.spec.to_dict(), "expected": self.spec.expected(), "energy": self.energy.to_dict(),
                   "stickiness": self.measurement.to_dict(), "minimizer": utils.rle_encode(self.minimizer.phase)}
        if self.perturbation is not None:
            payload["perturbation"] = self.perturbation.to_dict()
        return payload


def _solve(datum: BinaryField, H: CurvatureDatum, kernel: KernelTable,
           symmetric: bool = True) -> Tuple[BinaryField, EnergyReport]:
    return mincut_minimize(datum.grid, kernel, datum, H, symmetry_axis=0 if symmetric else None)


def sigma_constant(sigma: np.ndarray, kernel: KernelTable) -> float:
    """c̃_Σ = max over Ω cells i of L({i}, Σ) / h^n; flipping cell i moves the Σ interaction by at most that."""
    grid = kernel.grid
    sigma = np.asarray(sigma, dtype=bool)
    if not sigma.any():
        return 0.0
    sums = ndimage.correlate(sigma.astype(float), kernel.stencil, mode="constant", cval=0.0)
    return float(sums[grid.omega_mask].max()) / grid.cell_volume


def _try_measure(field: BinaryField) -> Optional[StickinessMeasurement]:
    try:
        return measure_stickiness(field)
    except NonSubgraphError as e:
        logger.warning(f"No stickiness measurement: {e}")
        return None


class PerturbationReport:
    """Solves with datum E∖Ω and (E∪Σ)∖Ω, and the certificates of E, E∪Σ and the perturbed minimizer.

    Properties:
        bound: Λ + 2 c̃_Σ, the certificate bound for E∪Σ.
        bound_holds: lambda_tilde <= bound up to round-off.
        identical: Both minimizers agree and Σ is empty.
    """

    def __init__(self, sigma: np.ndarray, base: BinaryField, perturbed: BinaryField,
                 base_certificate: LambdaCertificate, tilde_certificate: LambdaCertificate,
                 perturbed_certificate: LambdaCertificate, c_tilde: float,
                 base_measurement: Optional[StickinessMeasurement],
                 perturbed_measurement: Optional[StickinessMeasurement], distance: Optional[float]):
        self.sigma = sigma
        self.base = base
        self.perturbed = perturbed
        self.base_certificate = base_certificate
        self.tilde_certificate = tilde_certificate
        self.perturbed_certificate = perturbed_certificate
        self.c_tilde = c_tilde
        self.base_measurement = base_measurement
        self.perturbed_measurement = perturbed_measurement
        self.distance = distance

    @property
    def bound(self) -> float:
        return self.base_certificate.lambda_star + 2 * self.c_tilde

    @property
    def bound_holds(self) -> bool:
        return self.tilde_certificate.lambda_star <= self.bound + 1e-9 * (1 + self.bound)

    @property
    def identical(self) -> bool:
        return not self.sigma.any() and np.array_equal(self.base.interior, self.perturbed.interior)

    @property
    def classification_preserved(self) -> Optional[bool]:
        if self.base_measurement is None or self.perturbed_measurement is None:
            return None
        return self.base_measurement.sticking == self.perturbed_measurement.sticking

    def to_dict(self) -> Dict[str, Any]:
        measured = lambda m: None if m is None else m.to_dict()
        return {"sigma_cells": int(self.sigma.sum()), "sigma": utils.rle_encode(self.sigma),
                "lambda": self.base_certificate.to_dict(), "lambda_tilde": self.tilde_certificate.to_dict(),
                "lambda_perturbed": self.perturbed_certificate.to_dict(), "c_tilde": self.c_tilde,
                "bound": self.bound, "bound_holds": self.bound_holds, "identical": self.identical,
                "hausdorff": self.distance, "classification_preserved": self.classification_preserved,
                "base": measured(self.base_measurement), "perturbed": measured(self.perturbed_measurement)}


def spec_sigma(spec: ExperimentSpec, datum: BinaryField) -> np.ndarray:
    """Σ declared by spec.sigma over the flat graph ψ = 0, or an empty mask."""
    if spec.sigma is None:
        return np.zeros(datum.grid.shape, dtype=bool)
    p = spec.sigma
    return build_perturbation_sigma(datum.grid, 0.0, p["C"], p["xi"], p.get("collar", 0.5), p.get("translation", 0.0),
                                    datum=datum)


def run_perturbation_invariance(spec: ExperimentSpec, sigma: Optional[np.ndarray] = None,
                                k: int = constants.MAX_PATCH_SIZE,
                                workers: Optional[Workers] = None) -> PerturbationReport:
    """Solve spec with and without Σ and compare; sigma defaults to the one spec declares."""
    datum, H, kernel = spec.instance()
    grid = datum.grid
    sigma = spec_sigma(spec, datum) if sigma is None else np.asarray(sigma, dtype=bool)
    if np.any(sigma & grid.omega_mask) or np.any(sigma & datum.phase):
        raise PerturbationHypothesisError("Σ must avoid Ω and E")
    perturbed_datum = BinaryField(grid, datum.phase | sigma, datum.far_field)
    symmetric = np.array_equal(sigma, np.flip(sigma, axis=0))
    jobs = {"base": lambda: _solve(datum, H, kernel),
            "perturbed": lambda: _solve(perturbed_datum, H, kernel, symmetric)}
    solved = workers.run_jobs(jobs) if workers is not None else {name: job() for name, job in sorted(jobs.items())}
    base, _ = solved["base"]
    perturbed, _ = solved["perturbed"]
    with_sigma = BinaryField(grid, base.phase | sigma, datum.far_field, validate=False)
    certify = lambda field: lambda_certificate(field, kernel, Family.PATCHES, k)
    distance = 0.0
    if not np.array_equal(base.phase, perturbed.phase & ~sigma):
        try:
            distance = hausdorff_boundary_distance(base, perturbed.with_phase(perturbed.phase & ~sigma),
                                                   window=grid.omega_mask)
        except HausdorffUndefinedError as e:
            logger.warning(f"Perturbation run {spec.name}: {e}")
            distance = None
    report = PerturbationReport(sigma, base, perturbed, certify(base), certify(with_sigma), certify(perturbed),
                                sigma_constant(sigma, kernel), _try_measure(base), _try_measure(perturbed), distance)
    logger.info(f"Perturbation run {spec.name}: |Σ|={int(sigma.sum())}, "
                f"Λ̃={report.tilde_certificate.lambda_star!r}, bound={report.bound!r}")
    return report


def select_x0(measurement: StickinessMeasurement, threshold: float) -> Optional[float]:
    """Face between the first pair of interior columns, scanning outward from x = 0, whose slope reaches threshold."""
    interior = measurement.columns[1:-1]
    heights = measurement.heights[1:-1]
    slopes = np.abs(np.diff(heights)) / measurement.h
    for i in np.flatnonzero(interior[:-1] >= 0):
        if slopes[i] >= threshold:
            return float((interior[i] + interior[i + 1]) / 2)
    return None


def _sticking_minimizer(spec: ExperimentSpec) -> BinaryField:
    base = spec.sticking_spec()
    datum, H, kernel = base.instance()
    minimizer, _ = _solve(datum, H, kernel)
    return minimizer


def counterexample_sigma(spec: ExperimentSpec, minimizer: BinaryField) -> np.ndarray:
    """Cells above the computed graph and below y0 + (|x| - x0)^{1+s+ξ} for x0 < |x| < 1."""
    grid = minimizer.grid
    x = grid.centers()
    measurement = measure_stickiness(minimizer)
    y0 = float(np.interp(spec.x0, measurement.columns, measurement.heights))
    t = np.abs(x[..., 0]) - spec.x0
    collar = (t > 0) & (np.abs(x[..., 0]) < 1) & (np.abs(x[..., 1]) < spec.height)
    graph = y0 + np.clip(t, 0.0, None) ** (1 + spec.s + spec.xi)
    logger.debug(f"Counterexample graph anchored at ({spec.x0!r}, {y0!r})")
    return collar & ~minimizer.phase & (x[..., 1] < graph)


def _counterexample_datum(spec: ExperimentSpec, grid: GridDomain, with_sigma: bool = True) -> np.ndarray:
    minimizer = _sticking_minimizer(spec)
    phase = minimizer.phase
    if with_sigma:
        phase = phase | counterexample_sigma(spec, minimizer)
    return phase


def build_c0_not_c1_instance(s: float, xi: float, resolution: int, delta: float = 0.2,
                             distance: float = constants.STICKING_BUMP_DISTANCE,
                             height: float = constants.STICKING_HEIGHT, r_cut: Optional[float] = None,
                             slope_threshold: float = constants.SLOPE_THRESHOLD,
                             name: Optional[str] = None) -> Tuple[ExperimentSpec, Dict[str, Any]]:
    """Restrict Ω to (-x0, x0) × (-M, M) around a sticking minimizer and attach the cusps Σ±.

    Returns:
        The ExperimentSpec and the expected behavior at ±x0: trace jump below one cell, outer
        slope 0 (the cusp tip), inner slope away from it by at least slope_threshold.
    """
    if not 0 < s < 0.5:
        raise ExperimentPreconditionError(f"The counterexample needs s in (0, 1/2), got {s}")
    if not xi > 0:
        raise ExperimentPreconditionError(f"The counterexample needs ξ > 0, got {xi}")
    base = build_sticking_instance(delta, s, resolution, distance, height, r_cut=r_cut)
    measurement = measure_stickiness(_sticking_minimizer(base))
    x0 = select_x0(measurement, slope_threshold)
    if x0 is None:
        raise ExperimentPreconditionError(
            f"counterexample preconditions not met: no interior column pair has slope >= {slope_threshold}")
    spec = ExperimentSpec(name or f"c0-not-c1-s{s!r}-r{resolution}", "c0_not_c1", s=s, resolution=resolution,
                          delta=delta, distance=distance, height=height, r_cut=base.r_cut, xi=xi, x0=x0,
                          slope_threshold=slope_threshold)
    expected = {"x0": x0, "max_jump": spec.h, "outside_slope": 0.0, "slope_threshold": slope_threshold}
    return spec, expected


class C0NotC1Report:
    """Trace continuity and slope mismatch at ±x0, with the control run without Σ±."""

    def __init__(self, spec: ExperimentSpec, measurement: StickinessMeasurement, control: StickinessMeasurement):
        self.spec = spec
        self.measurement = measurement
        self.control = control
        slopes = measurement.slopes()
        self.inside_slope = float(slopes[-2])
        self.outside_slope = 0.0

    @property
    def continuous(self) -> bool:
        return self.measurement.jump < self.spec.h

    @property
    def slope_mismatch(self) -> float:
        return abs(self.inside_slope - self.outside_slope)

    @property
    def passed(self) -> bool:
        return self.continuous and self.slope_mismatch >= self.spec.slope_threshold

    def to_dict(self) -> Dict[str, Any]:
        return {"spec": self.spec.to_dict(), "continuous": self.continuous, "inside_slope": self.inside_slope,
                "outside_slope": self.outside_slope, "slope_mismatch": self.slope_mismatch, "passed": self.passed,
                "measurement": self.measurement.to_dict(), "control": self.control.to_dict()}


def run_c0_not_c1(spec: ExperimentSpec, workers: Optional[Workers] = None) -> C0NotC1Report:
    grid = spec.grid()
    minimizer = _sticking_minimizer(spec)
    H = CurvatureDatum(grid, spec.H)
    kernel = build_kernel(grid, spec.r_cut)

    def solve(with_sigma):
        phase = minimizer.phase | counterexample_sigma(spec, minimizer) if with_sigma else minimizer.phase
        field, _ = _solve(BinaryField(grid, phase, FarField.half_space(0.0)), H, kernel)
        return measure_stickiness(field)

    jobs = {"sigma": lambda: solve(True), "control": lambda: solve(False)}
    done = workers.run_jobs(jobs) if workers is not None else {name: job() for name, job in sorted(jobs.items())}
    return C0NotC1Report(spec, done["sigma"], done["control"])


def run_experiment(spec: ExperimentSpec, workers: Optional[Workers] = None) -> ExperimentResult:
    """Solve one experiment, measure its stickiness and, when Σ is declared, run the comparison."""
    datum, H, kernel = spec.instance()
    minimizer, energy = _solve(datum, H, kernel)
    perturbation = run_perturbation_invariance(spec, workers=workers) if spec.sigma is not None else None
    result = ExperimentResult(spec, minimizer, energy, measure_stickiness(minimizer), perturbation)
    logger.info(f"Experiment {spec.name} done: jump={result.measurement.jump!r}")
    return result


def run_experiments(specs: Sequence[ExperimentSpec], workers: Optional[Workers] = None) -> Dict[str, ExperimentResult]:
    """Run experiments as independent jobs keyed by name."""
    jobs = {spec.name: (lambda spec=spec: run_experiment(spec)) for spec in specs}
    if len(jobs) != len(specs):
        raise InvalidConfigError("Experiment names must be unique")
    if workers is None:
        return {name: jobs[name]() for name in sorted(jobs)}
    return workers.run_jobs(jobs)
