"""Energy module: interaction L(A,B), fractional perimeter, localized Gagliardo functional and
the non-local Massari functional.

Every energy is a correctly rounded sum (math.fsum) of the multiset of per-offset pair terms
count * w(o) and per-cell tail terms. Swapping the roles of two sets, or of E and E^c,
produces the same multiset, so the symmetric identities hold bit for bit.

Classes:
    CurvatureDatum: Prescribed curvature H sampled per cell
    EnergyReport: Structured record of one energy evaluation

Methods:
    interaction(a_mask, b_mask, kernel, b_far): L(A, B)
    perimeter_s(field, kernel, region): Per_s(E, Ω) or Per_s(E, region)
    gagliardo_local(field, r, kernel, center): J_r(χ_E - χ_{E^c})
    massari_energy(field, H, kernel): Per_s + ∫_{E∩Ω} H
    flip_delta(field, cell, H, kernel): Change of the Massari energy when one Ω cell flips
    unary_terms(field, kernel): Interaction of every Ω cell with the exterior datum
"""

import json
import logging
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from sperimeter import constants, utils
from sperimeter.exception import DomainError, InteractionError, InvalidFieldError
from sperimeter.lattice import BinaryField, FarField, GridDomain, KernelTable

logger = logging.getLogger(constants.LOGGER_NAME)


class CurvatureDatum:
    """Prescribed curvature H, one finite value per Ω cell (units length^{-s}).

    Values outside Ω are stored but never used.
    """

    def __init__(self, grid: GridDomain, values: Union[float, np.ndarray]):
        values = np.broadcast_to(np.asarray(values, dtype=float), grid.shape).copy()
        if not np.all(np.isfinite(values[grid.omega_mask])):
            raise InvalidFieldError("H must be finite on every Ω cell")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def constant(cls, grid: GridDomain, value: float) -> "CurvatureDatum":
        return cls(grid, value)

    def value_at(self, cell: Sequence[int]) -> float:
        return float(self.values[tuple(cell)])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values[self.grid.omega_mask])))

    def to_dict(self) -> Dict[str, Any]:
        return {"values": self.values.tolist()}


def as_curvature(grid: GridDomain, H: Union[None, float, np.ndarray, CurvatureDatum]) -> CurvatureDatum:
    if isinstance(H, CurvatureDatum):
        return H
    return CurvatureDatum(grid, 0.0 if H is None else H)


class EnergyReport:
    """Per_s split into its two interaction terms, plus optional Massari and J_r values.

    Args:
        per_s (float): Correctly rounded sum of all perimeter terms.
        l_inside (float): L(E∩Ω, E^c).
        l_outside (float): L(E∖Ω, E^c∩Ω).
        massari (float, optional): Per_s + Σ_{E∩Ω} H_i h^n.
        j_r (float, optional): Localized Gagliardo functional.
        metadata (dict, optional): Grid hash, kernel hash, cutoff, tail mass and tail error bound.
    """

    FLAT_KEYS = ("per_s", "l_inside", "l_outside", "massari", "j_r")

    def __init__(self, per_s: float, l_inside: float, l_outside: float, massari: Optional[float] = None,
                 j_r: Optional[float] = None, metadata: Optional[Dict[str, Any]] = None):
        self.per_s = per_s
        self.l_inside = l_inside
        self.l_outside = l_outside
        self.massari = massari
        self.j_r = j_r
        self.metadata = metadata or {}

    @property
    def energy(self) -> float:
        return self.per_s if self.massari is None else self.massari

    def to_dict(self) -> Dict[str, Any]:
        payload = {key: getattr(self, key) for key in self.FLAT_KEYS}
        payload["metadata"] = dict(self.metadata)
        return payload

    def to_json(self) -> str:
        return utils.canonical_json(self.to_dict())

    def flat_table(self) -> str:
        rows = [f"{key}\t{'-' if getattr(self, key) is None else repr(getattr(self, key))}" for key in self.FLAT_KEYS]
        rows += [f"{key}\t{self.metadata[key]}" for key in sorted(self.metadata)]
        return "\n".join(rows) + "\n"

    def __repr__(self):
        return f"EnergyReport({json.dumps(self.to_dict(), sort_keys=True)})"


def _pad(mask: np.ndarray, margin: int) -> np.ndarray:
    return np.pad(np.asarray(mask, dtype=bool), margin, mode="constant", constant_values=False)


def _offset_counts(a_mask: np.ndarray, b_padded: np.ndarray, kernel: KernelTable) -> np.ndarray:
    """counts[k] = #{i ∈ A : i + offsets[k] ∈ B}, B given on the grid padded by radius_cells."""
    counts = np.zeros(len(kernel.offsets), dtype=np.int64)
    cells = np.argwhere(a_mask)
    if not len(cells):
        return counts
    lo, hi = cells.min(axis=0), cells.max(axis=0) + 1
    a_crop = a_mask[tuple(slice(l, u) for l, u in zip(lo, hi))]
    m = kernel.radius_cells
    for k, o in enumerate(kernel.offsets):
        window = tuple(slice(m + o[a] + lo[a], m + o[a] + hi[a]) for a in range(len(o)))
        counts[k] = np.count_nonzero(a_crop & b_padded[window])
    return counts


def _pair_terms(a_mask: np.ndarray, b_padded: np.ndarray, kernel: KernelTable) -> np.ndarray:
    return _offset_counts(a_mask, b_padded, kernel) * kernel.weights


def interaction(a_mask: np.ndarray, b_mask: np.ndarray, kernel: KernelTable,
                b_far: Optional[FarField] = None, a_far: Optional[FarField] = None) -> float:
    """L(A, B) = Σ_{i∈A} Σ_{j∈B} w(i - j) plus tails toward an analytic far part.

    Args:
        a_mask (numpy.ndarray): Grid mask of A.
        b_mask (numpy.ndarray): Grid mask of B.
        kernel (KernelTable): Weights on the same grid.
        b_far (FarField, optional): B also contains the cells of this far field beyond the grid.
        a_far (FarField, optional): Same for A; at most one side may have a far part.

    Returns:
        The interaction as a float.
    """
    a_mask = np.asarray(a_mask, dtype=bool)
    b_mask = np.asarray(b_mask, dtype=bool)
    if np.any(a_mask & b_mask):
        raise InteractionError("interaction requires disjoint sets")
    if a_far is not None and b_far is not None:
        raise InteractionError("interaction of two far parts is unbounded")
    if a_far is not None:
        return interaction(b_mask, a_mask, kernel, b_far=a_far)
    grid = kernel.grid
    m = kernel.radius_cells
    if b_far is None:
        b_padded = _pad(b_mask, m)
        tails = np.zeros(0)
    else:
        b_padded = b_far.phase_at(grid.centers(m))
        b_padded[tuple(slice(m, -m) for _ in range(grid.n))] = b_mask
        tails = kernel.tail_inside(b_far, grid.centers()[a_mask])
    return utils.ordered_sum(np.concatenate([_pair_terms(a_mask, b_padded, kernel), tails]))


def _perimeter_terms(field: BinaryField, kernel: KernelTable,
                     region: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Terms of L(E∩R, E^c) and of L(E∖R, E^c∩R), split by pair class."""
    grid = field.grid
    kernel.check_grid(grid)
    region = grid.omega_mask if region is None else np.asarray(region, dtype=bool)
    m = kernel.radius_cells
    inside = field.padded_phase(m)
    region_padded = _pad(region, m)
    e_in = field.phase & region
    c_in = ~field.phase & region
    centers = grid.centers()
    first = np.concatenate([
        _pair_terms(e_in, ~inside & region_padded, kernel),
        _pair_terms(e_in, ~inside & ~region_padded, kernel),
        kernel.tail_outside(field.far_field, centers[e_in]),
    ])
    second = np.concatenate([
        _pair_terms(c_in, inside & ~region_padded, kernel),
        kernel.tail_inside(field.far_field, centers[c_in]),
    ])
    return first, second


def _metadata(field: BinaryField, kernel: KernelTable, region: np.ndarray) -> Dict[str, Any]:
    return {
        "grid_hash": field.grid.digest(),
        "kernel_hash": kernel.digest(),
        "r_cut": kernel.r_cut,
        "tail_per_cell": kernel.tail_per_cell,
        "tail_error_bound": int(np.count_nonzero(region)) * kernel.tail_per_cell,
    }


def perimeter_s(field: BinaryField, kernel: KernelTable, region: Optional[np.ndarray] = None) -> EnergyReport:
    """Per_s(E, Ω) = L(E∩Ω, E^c) + L(E∖Ω, E^c∩Ω).

    Args:
        field (BinaryField): The phase field.
        kernel (KernelTable): Weights on the field's grid.
        region (numpy.ndarray, optional): Grid mask replacing Ω, e.g. a ball for Per_s(E, B_r).

    Returns:
        An EnergyReport with per_s and both interaction terms.
    """
    region = field.grid.omega_mask if region is None else np.asarray(region, dtype=bool)
    first, second = _perimeter_terms(field, kernel, region)
    per_s = utils.ordered_sum(np.concatenate([first, second]))
    return EnergyReport(per_s, utils.ordered_sum(first), utils.ordered_sum(second),
                        metadata=_metadata(field, kernel, region))


def gagliardo_local(field: BinaryField, r: float, kernel: KernelTable,
                    center: Optional[Sequence[float]] = None) -> float:
    """J_r(u) = ∫∫ χ_B(x)(χ_B(y) + 2χ_{B^c}(y)) |u(x) - u(y)|^2 |x-y|^{-n-s}, B = B_r(center) ⊆ Ω.

    Summed over ordered cell pairs; equals 8 Per_s(E, B_r) up to round-off.
    """
    grid = field.grid
    kernel.check_grid(grid)
    center = grid.omega_center() if center is None else np.asarray(center, dtype=float)
    ball = grid.ball_mask(center, r)
    if np.any(ball & ~grid.omega_mask):
        raise DomainError(f"B_r exceeds Ω: r={r} at center {center.tolist()}")
    m = kernel.radius_cells
    inside = field.padded_phase(m)
    ball_padded = _pad(ball, m)
    terms = []
    for x_phase, opposite in ((True, ~inside), (False, inside)):
        x_cells = ball & (field.phase == x_phase)
        near = _offset_counts(x_cells, opposite & ball_padded, kernel)
        far = _offset_counts(x_cells, opposite & ~ball_padded, kernel)
        terms.append(4.0 * kernel.weights * (near + 2 * far))
    centers = grid.centers()
    terms.append(8.0 * kernel.tail_outside(field.far_field, centers[ball & field.phase]))
    terms.append(8.0 * kernel.tail_inside(field.far_field, centers[ball & ~field.phase]))
    return utils.ordered_sum(np.concatenate(terms))


def massari_energy(field: BinaryField, H: Union[float, np.ndarray, CurvatureDatum],
                   kernel: KernelTable) -> EnergyReport:
    """Non-local Massari energy Per_s(E, Ω) + Σ_{i ∈ E∩Ω} H_i h^n."""
    grid = field.grid
    datum = as_curvature(grid, H)
    first, second = _perimeter_terms(field, kernel)
    volume = datum.values[field.interior] * grid.cell_volume
    per_s = utils.ordered_sum(np.concatenate([first, second]))
    massari = utils.ordered_sum(np.concatenate([first, second, volume]))
    return EnergyReport(per_s, utils.ordered_sum(first), utils.ordered_sum(second), massari=massari,
                        metadata=_metadata(field, kernel, grid.omega_mask))


def unary_terms(field: BinaryField, kernel: KernelTable) -> Tuple[np.ndarray, np.ndarray]:
    """Interaction of every cell with the exterior datum, split by exterior phase.

    Returns:
        (toward_outside, toward_inside): grid-shaped arrays holding, for each Ω cell,
        L({i}, E^c∖Ω) and L({i}, E∖Ω) including far tails. Entries off Ω are zero.
    """
    grid = field.grid
    kernel.check_grid(grid)
    m = kernel.radius_cells
    inside = field.padded_phase(m)
    exterior = ~_pad(grid.omega_mask, m)
    inner = tuple(slice(m, -m) for _ in range(grid.n))
    omega = grid.omega_mask
    result = []
    for phase_mask, tail in ((~inside & exterior, kernel.tail_outside), (inside & exterior, kernel.tail_inside)):
        sums = ndimage.correlate(phase_mask.astype(float), kernel.stencil, mode="constant", cval=0.0)[inner]
        values = np.zeros(grid.shape)
        values[omega] = sums[omega] + tail(field.far_field, grid.centers()[omega])
        result.append(values)
    return result[0], result[1]


def flip_delta(field: BinaryField, cell: Sequence[int], H: Union[float, np.ndarray, CurvatureDatum],
               kernel: KernelTable) -> float:
    """Massari energy of the field with cell flipped, minus that of the field.

    Only the kernel support around the cell is visited.
    """
    grid = field.grid
    cell = tuple(int(c) for c in cell)
    if not grid.in_omega(cell):
        raise DomainError(f"Cell {cell} is not in Ω")
    datum = as_curvature(grid, H)
    m = kernel.radius_cells
    window = field.padded_phase(m)[tuple(slice(c, c + 2 * m + 1) for c in cell)]
    is_inside = bool(field.phase[cell])
    same = window == is_inside
    center = grid.cell_center(cell)[None, :]
    tail_in = float(kernel.tail_inside(field.far_field, center)[0])
    tail_out = float(kernel.tail_outside(field.far_field, center)[0])
    volume = datum.value_at(cell) * grid.cell_volume
    if is_inside:
        terms = [tail_in, -tail_out, -volume]
    else:
        terms = [tail_out, -tail_in, volume]
    return utils.ordered_sum(np.concatenate([kernel.stencil[same], -kernel.stencil[~same], terms]))


def omega_pairs(grid: GridDomain, kernel: KernelTable) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairs (p, q, w) of Ω node numbers p < q (lexicographic cell order) within the cutoff.

    Returns:
        Three aligned arrays sorted by (p, q).
    """
    m = kernel.radius_cells
    number = np.full(grid.shape, -1, dtype=np.int64)
    number[grid.omega_mask] = np.arange(grid.omega_size)
    padded = np.pad(number, m, mode="constant", constant_values=-1)
    heads, tails, weights = [], [], []
    for o, w in zip(kernel.offsets, kernel.weights):
        window = tuple(slice(m + o[a], m + o[a] + grid.shape[a]) for a in range(grid.n))
        p, q = number, padded[window]
        keep = (p >= 0) & (q > p)
        heads.append(p[keep])
        tails.append(q[keep])
        weights.append(np.full(int(keep.sum()), w))
    heads, tails, weights = np.concatenate(heads), np.concatenate(tails), np.concatenate(weights)
    order = np.lexsort((tails, heads))
    return heads[order], tails[order], weights[order]
