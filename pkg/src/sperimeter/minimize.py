"""Minimize module: exact minimization of the Massari energy with fixed exterior datum, the
brute-force oracle, and Λ-minimality certificates.

The energy of an Ω configuration x is
    Σ_i [x_i A_i^out + (1 - x_i) A_i^in + x_i H_i h^n] + Σ_{i<j in Ω} w_ij [x_i != x_j],
with A_i^out / A_i^in the interaction of cell i with the outside / inside exterior datum.
All pairwise coefficients are kernel weights, hence non-negative, and the s-t min-cut is exact.

Classes:
    CutProblem: Node capacities, pair capacities and the configuration-independent constant
    LambdaCertificate: Smallest Λ over a competitor family, with its witness
    SubSuperReport: Worst margins of the sub- and super-solution inequalities

Methods:
    mincut_minimize(grid, kernel, datum, H): Canonical (minimal) global minimizer via max-flow
    brute_force_minimize(grid, kernel, datum, H): Enumeration oracle for |Ω| <= 24
    lambda_certificate(field, kernel, family, k): Certificate over all competitors or patches
    subsupersolution_check(field, kernel, lam, family, k): One-sided inequalities over sets A
    connected_patches(mask, k): Face-connected subsets of a mask with at most k cells
"""

import logging
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import maxflow
import numpy as np

from sperimeter import constants, utils
from sperimeter.constants import Family
from sperimeter.energy import (CurvatureDatum, EnergyReport, as_curvature, flip_delta, interaction,
                               massari_energy, omega_pairs, unary_terms)
from sperimeter.exception import DomainError, InvalidFieldError, OracleBoundError
from sperimeter.lattice import BinaryField, GridDomain, KernelTable
from sperimeter.worker import Workers

logger = logging.getLogger(constants.LOGGER_NAME)

BLOCK_BITS = 16
ROUND_OFF = 1e-12


class CutProblem:
    """s-t cut whose value plus a recorded constant is the Massari energy of the cut's configuration.

    Nodes are the Ω cells in lexicographic order. Being inside costs inside_caps, being outside
    costs outside_caps, and every Ω pair pays its weight when cut.

    Args:
        datum (BinaryField): Exterior datum; phases on Ω are ignored.
        kernel (KernelTable): Weights on the datum's grid.
        H (CurvatureDatum): Prescribed curvature.
        symmetry_axis (int, optional): Mirror axis of a symmetric instance; unary costs are
            averaged with their mirror images so the minimal minimizer is exactly symmetric.
    """

    def __init__(self, datum: BinaryField, kernel: KernelTable, H: CurvatureDatum,
                 symmetry_axis: Optional[int] = None):
        grid = datum.grid
        kernel.check_grid(grid)
        self.datum = datum
        self.kernel = kernel
        self.cells = grid.omega_cells()
        toward_outside, toward_inside = unary_terms(datum, kernel)
        omega = grid.omega_mask
        cost_inside = toward_outside[omega] + H.values[omega] * grid.cell_volume
        cost_outside = toward_inside[omega]
        if symmetry_axis is not None:
            mirror = self.mirror_permutation(grid, symmetry_axis)
            cost_inside = (cost_inside + cost_inside[mirror]) / 2
            cost_outside = (cost_outside + cost_outside[mirror]) / 2
        self.cost_inside = cost_inside
        self.cost_outside = cost_outside
        shift = np.minimum(cost_inside, cost_outside)
        self.inside_caps = cost_inside - shift
        self.outside_caps = cost_outside - shift
        self.constant = utils.ordered_sum(shift)
        self.heads, self.tails, self.pair_weights = omega_pairs(grid, kernel)

    @staticmethod
    def mirror_permutation(grid: GridDomain, axis: int) -> np.ndarray:
        omega = grid.omega_mask
        if not np.array_equal(omega, np.flip(omega, axis=axis)):
            raise InvalidFieldError(f"Ω is not symmetric about axis {axis}")
        number = np.full(grid.shape, -1, dtype=np.int64)
        number[omega] = np.arange(grid.omega_size)
        return np.flip(number, axis=axis)[omega]

    @property
    def size(self) -> int:
        return len(self.cells)

    def energy(self, x: np.ndarray) -> float:
        """Cut value of configuration x plus the constant."""
        x = np.asarray(x, dtype=bool)
        cut = x[self.heads] != x[self.tails]
        return utils.ordered_sum(np.concatenate([
            [self.constant], self.inside_caps[x], self.outside_caps[~x], self.pair_weights[cut]]))

    def solve(self) -> Tuple[np.ndarray, float]:
        """Max-flow on the cut graph; inside is the sink segment.

        This is the usual inside-on-the-source-side graph with its terminals exchanged: source
        capacities carry the inside costs and sink capacities the outside costs, so the cut value
        and the minimizing configurations are the same. Nodes that can still reach the sink in the
        residual graph form the smallest inside set among all minimizers, the canonical answer.
        """
        graph = maxflow.Graph[float](self.size, len(self.heads))
        nodes = graph.add_nodes(self.size)
        graph.add_grid_tedges(np.asarray(nodes), self.inside_caps, self.outside_caps)
        for p, q, w in zip(self.heads, self.tails, self.pair_weights):
            graph.add_edge(nodes[p], nodes[q], w, w)
        flow = graph.maxflow()
        inside = np.asarray(graph.get_grid_segments(np.asarray(nodes)), dtype=bool)
        return inside, float(flow)

    def field_of(self, x: np.ndarray) -> BinaryField:
        grid = self.datum.grid
        interior = np.zeros(grid.shape, dtype=bool)
        interior[grid.omega_mask] = np.asarray(x, dtype=bool)
        return self.datum.with_interior(interior)


def _check_instance(grid: GridDomain, kernel: KernelTable, datum: BinaryField):
    if datum.grid != grid:
        raise InvalidFieldError("Exterior datum lives on a different grid")
    kernel.check_grid(grid)


def mincut_minimize(grid: GridDomain, kernel: KernelTable, datum: BinaryField,
                    H: Union[float, np.ndarray, CurvatureDatum] = 0.0,
                    symmetry_axis: Optional[int] = None) -> Tuple[BinaryField, EnergyReport]:
    """Global minimizer of the Massari energy over all Ω configurations.

    Args:
        grid (GridDomain): The grid.
        kernel (KernelTable): Weights on the grid.
        datum (BinaryField): Exterior datum (collar phases and far field).
        H: Prescribed curvature, scalar, array or CurvatureDatum.
        symmetry_axis (int, optional): Declared mirror symmetry of the instance.

    Returns:
        The canonical minimizer and its EnergyReport; metadata records the cut constant.
    """
    _check_instance(grid, kernel, datum)
    datum_h = as_curvature(grid, H)
    problem = CutProblem(datum, kernel, datum_h, symmetry_axis)
    inside, flow = problem.solve()
    field = problem.field_of(inside)
    report = massari_energy(field, datum_h, kernel)
    report.metadata.update({"solver": "maxflow", "cut_constant": problem.constant, "cut_value": flow,
                            "omega_cells": problem.size})
    logger.info(f"Min-cut solved: |Ω|={problem.size}, energy={report.massari!r}")
    return field, report


def _configuration_bits(start: int, stop: int, size: int) -> np.ndarray:
    k = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(size - 1, -1, -1, dtype=np.int64)
    return ((k[:, None] >> shifts[None, :]) & 1).astype(float)


class _QuadraticForm:
    """E(x) = c0 + b.x - 2 x^T W x over Ω configurations, W strictly upper triangular."""

    def __init__(self, problem: CutProblem):
        size = problem.size
        self.size = size
        upper = np.zeros((size, size))
        np.add.at(upper, (problem.heads, problem.tails), problem.pair_weights)
        degree = upper.sum(axis=0) + upper.sum(axis=1)
        self.upper = upper
        self.linear = problem.cost_inside - problem.cost_outside + degree
        self.offset = utils.ordered_sum(problem.cost_outside)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.offset + x @ self.linear - 2 * np.einsum("bi,bi->b", x @ self.upper, x)

    def block(self, start: int, stop: int) -> np.ndarray:
        return self.evaluate(_configuration_bits(start, stop, self.size))


def _blocks(size: int) -> List[Tuple[int, int]]:
    total = 1 << size
    step = 1 << min(size, BLOCK_BITS)
    return [(a, min(a + step, total)) for a in range(0, total, step)]


def brute_force_minimize(grid: GridDomain, kernel: KernelTable, datum: BinaryField,
                         H: Union[float, np.ndarray, CurvatureDatum] = 0.0,
                         workers: Optional[Workers] = None) -> Tuple[BinaryField, EnergyReport]:
    """Enumerate all 2^|Ω| configurations; ties go to the lexicographically smallest mask."""
    _check_instance(grid, kernel, datum)
    size = grid.omega_size
    if size > constants.ORACLE_MAX_CELLS:
        raise OracleBoundError(f"Brute force supports at most {constants.ORACLE_MAX_CELLS} Ω cells, got {size}")
    datum_h = as_curvature(grid, H)
    problem = CutProblem(datum, kernel, datum_h)
    form = _QuadraticForm(problem)
    blocks = _blocks(size)
    minima = _map(workers, lambda b: float(form.block(*b).min()), blocks)
    best = min(minima)
    tol = ROUND_OFF * (1 + abs(best) + utils.ordered_sum(np.abs(form.linear)))

    def near_best(b):
        values = form.block(*b)
        return [b[0] + int(k) for k in np.flatnonzero(values <= best + tol)]

    candidates = sorted(k for found in _map(workers, near_best, blocks) for k in found)
    scored = []
    for k in candidates:
        x = _configuration_bits(k, k + 1, size)[0].astype(bool)
        field = problem.field_of(x)
        scored.append((massari_energy(field, datum_h, kernel).massari, k, field))
    energy, k, field = min(scored, key=lambda item: (item[0], item[1]))
    report = massari_energy(field, datum_h, kernel)
    report.metadata.update({"solver": "enumeration", "configurations": 1 << size, "omega_cells": size})
    return field, report


def _map(workers: Optional[Workers], fn, items):
    return workers.map(fn, items) if workers is not None else [fn(item) for item in items]


class LambdaCertificate:
    """lambda_star = max over the family of (Per_s(E) - Per_s(F)) / |E∆F|, clamped at 0.

    Args:
        lambda_star (float): The certified constant.
        witness (BinaryField, optional): Competitor achieving it; None when lambda_star is 0.
        family (dict): {"kind": "full"} or {"kind": "patches", "k": k}.
        competitors (int): Number of competitors examined.
    """

    def __init__(self, lambda_star: float, witness: Optional[BinaryField], family: Dict[str, Any],
                 competitors: int):
        self.lambda_star = lambda_star
        self.witness = witness
        self.family = family
        self.competitors = competitors

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_star": self.lambda_star,
            "family": self.family,
            "competitors": self.competitors,
            "witness": None if self.witness is None else utils.rle_encode(self.witness.interior),
            "competitor_class": "cell-resolved competitors F with E∆F inside Ω",
        }


def lambda_certificate(field: BinaryField, kernel: KernelTable, family: Union[str, Family] = Family.FULL,
                       k: int = constants.MAX_PATCH_SIZE, workers: Optional[Workers] = None) -> LambdaCertificate:
    """Certify Λ-minimality of field over all Ω competitors or over connected patches.

    Args:
        field (BinaryField): The set E.
        kernel (KernelTable): Weights on the field's grid.
        family (str or Family): "full" (|Ω| <= 20) or "patches".
        k (int, optional): Largest patch size for the patch family, at most 4.
        workers (Workers, optional): Pool for the full enumeration.

    Returns:
        A LambdaCertificate.
    """
    family = Family(family)
    if family == Family.PATCHES:
        return _patch_certificate(field, kernel, k)
    grid = field.grid
    size = grid.omega_size
    if size > constants.FULL_FAMILY_MAX_CELLS:
        raise OracleBoundError(f"Full competitor family supports at most {constants.FULL_FAMILY_MAX_CELLS} Ω cells,"
                               f" got {size}")
    problem = CutProblem(field, kernel, CurvatureDatum(grid, 0.0))
    form = _QuadraticForm(problem)
    x = field.phase[grid.omega_mask].astype(float)
    own = float(form.evaluate(x[None, :])[0])
    floor = ROUND_OFF * (1 + abs(own) + utils.ordered_sum(np.abs(form.linear)))
    volume = grid.cell_volume

    def block_best(b):
        y = _configuration_bits(*b, size)
        gain = own - form.evaluate(y)
        moved = np.abs(y - x).sum(axis=1)
        ratio = np.where((moved > 0) & (gain > floor), gain / np.maximum(moved, 1) / volume, 0.0)
        at = int(np.argmax(ratio))
        return float(ratio[at]), b[0] + at

    results = _map(workers, block_best, _blocks(size))
    best, at = max(results, key=lambda item: (item[0], -item[1]))
    witness = None
    if best > 0:
        witness = problem.field_of(_configuration_bits(at, at + 1, size)[0].astype(bool))
    return LambdaCertificate(best, witness, {"kind": Family.FULL.value}, (1 << size) - 1)


def connected_patches(mask: np.ndarray, k: int) -> List[Tuple[Tuple[int, ...], ...]]:
    """Face-connected subsets of mask with 1..k cells, each as a sorted tuple, in sorted order."""
    if not 1 <= k <= constants.MAX_PATCH_SIZE:
        raise DomainError(f"Patch size must be between 1 and {constants.MAX_PATCH_SIZE}, got {k}")
    cells = set(utils.lexicographic_cells(mask))
    n = mask.ndim
    steps = [tuple(d if a == axis else 0 for a in range(n)) for axis in range(n) for d in (-1, 1)]
    found = {(cell,) for cell in cells}
    frontier = set(found)
    for _ in range(k - 1):
        grown = set()
        for patch in frontier:
            for cell in patch:
                for step in steps:
                    other = tuple(c + d for c, d in zip(cell, step))
                    if other in cells and other not in patch:
                        grown.add(tuple(sorted(patch + (other,))))
        found |= grown
        frontier = grown
    return sorted(found, key=lambda p: (len(p), p))


def _patch_gains(field: BinaryField, kernel: KernelTable, patches) -> Iterator[Tuple[float, Tuple]]:
    """Per_s(E) - Per_s(F) for F = E ∆ A, via single-cell gains and pair weights."""
    gains = {}
    for patch in patches:
        for cell in patch:
            if cell not in gains:
                gains[cell] = -flip_delta(field, cell, 0.0, kernel)
        pairs = [kernel.weight(np.subtract(b, a)) for i, a in enumerate(patch) for b in patch[i + 1:]]
        yield utils.ordered_sum([gains[c] for c in patch] + [2 * w for w in pairs]), patch


def _patch_certificate(field: BinaryField, kernel: KernelTable, k: int) -> LambdaCertificate:
    grid = field.grid
    best, witness, count = 0.0, None, 0
    for region in (~field.phase & grid.omega_mask, field.interior):
        for gain, patch in _patch_gains(field, kernel, connected_patches(region, k)):
            count += 1
            ratio = gain / (len(patch) * grid.cell_volume)
            if ratio > best:
                best, witness = ratio, _apply_patch(field, patch)
    return LambdaCertificate(best, witness, {"kind": Family.PATCHES.value, "k": k}, count)


def _apply_patch(field: BinaryField, patch: Sequence[Tuple[int, ...]]) -> BinaryField:
    phase = field.phase.copy()
    for cell in patch:
        phase[cell] = not phase[cell]
    return field.with_interior(phase)


class SubSuperReport:
    """Worst excesses of the super-solution inequality L(A,E) - L(A,E^c∖A) <= Λ|A| over A ⊂ E^c∩Ω
    and of the sub-solution inequality L(A,E∖A) - L(A,E^c) >= -Λ|A| over A ⊂ E∩Ω.

    An excess <= 0 means the inequality holds. required_* is the smallest Λ that satisfies it.
    """

    def __init__(self, lam: float, family: Dict[str, Any], super_terms: List[Dict[str, Any]],
                 sub_terms: List[Dict[str, Any]]):
        self.lam = lam
        self.family = family
        self.super_terms = super_terms
        self.sub_terms = sub_terms

    @staticmethod
    def _worst(terms, key):
        return max(terms, key=lambda t: t[key]) if terms else None

    @property
    def worst_super(self) -> Optional[Dict[str, Any]]:
        return self._worst(self.super_terms, "excess")

    @property
    def worst_sub(self) -> Optional[Dict[str, Any]]:
        return self._worst(self.sub_terms, "excess")

    @property
    def required_lambda(self) -> float:
        values = [t["required"] for t in self.super_terms + self.sub_terms]
        return max([0.0] + values)

    @property
    def passed(self) -> bool:
        return all(t["excess"] <= ROUND_OFF * (1 + abs(t["gain"])) for t in self.super_terms + self.sub_terms)

    def to_dict(self) -> Dict[str, Any]:
        return {"lambda": self.lam, "family": self.family, "passed": self.passed,
                "required_lambda": self.required_lambda,
                "worst_super": self.worst_super, "worst_sub": self.worst_sub,
                "super_sets": len(self.super_terms), "sub_sets": len(self.sub_terms)}


def _all_subsets(mask: np.ndarray) -> List[Tuple[Tuple[int, ...], ...]]:
    cells = utils.lexicographic_cells(mask)
    out = []
    for bits in range(1, 1 << len(cells)):
        out.append(tuple(c for i, c in enumerate(cells) if bits >> i & 1))
    return out


def subsupersolution_check(field: BinaryField, kernel: KernelTable, lam: float,
                           family: Union[str, Family] = Family.PATCHES,
                           k: int = constants.MAX_PATCH_SIZE) -> SubSuperReport:
    """Evaluate both one-sided inequalities by direct interaction sums for every A in the family.

    Args:
        field (BinaryField): The set E.
        kernel (KernelTable): Weights.
        lam (float): Λ >= 0.
        family: "patches" (connected, up to k cells) or "full" (every subset, |Ω| <= 20).
        k (int, optional): Largest patch size.

    Returns:
        A SubSuperReport with one term per set A.
    """
    if lam < 0:
        raise DomainError(f"Λ must be non-negative, got {lam}")
    family = Family(family)
    grid = field.grid
    outside_omega = ~field.phase & grid.omega_mask
    inside_omega = field.interior
    if family == Family.FULL:
        if grid.omega_size > constants.FULL_FAMILY_MAX_CELLS:
            raise OracleBoundError(f"Full family supports at most {constants.FULL_FAMILY_MAX_CELLS} Ω cells")
        super_sets, sub_sets = _all_subsets(outside_omega), _all_subsets(inside_omega)
        descriptor = {"kind": Family.FULL.value}
    else:
        super_sets, sub_sets = connected_patches(outside_omega, k), connected_patches(inside_omega, k)
        descriptor = {"kind": Family.PATCHES.value, "k": k}
    far_in, far_out = field.far_field, field.far_field.complement()
    volume = grid.cell_volume

    def term(cells, toward, away, toward_far, away_far):
        a = np.zeros(grid.shape, dtype=bool)
        a[tuple(np.array(cells).T)] = True
        pull = interaction(a, toward, kernel, b_far=toward_far)
        push = interaction(a, away & ~a, kernel, b_far=away_far)
        size = len(cells) * volume
        gain = pull - push
        return {"cells": [list(c) for c in cells], "gain": gain, "required": gain / size,
                "excess": gain - lam * size}

    super_terms = [term(c, field.phase, ~field.phase, far_in, far_out) for c in super_sets]
    sub_terms = [term(c, ~field.phase, field.phase, far_out, far_in) for c in sub_sets]
    return SubSuperReport(lam, descriptor, super_terms, sub_terms)
