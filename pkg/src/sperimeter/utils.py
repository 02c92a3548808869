import hashlib
import json
import logging
import math
from typing import Any, Dict, Iterable, Sequence

import numpy as np

from sperimeter import constants
from sperimeter.exception import InvalidInstanceError

logger = logging.getLogger(constants.LOGGER_NAME)


def unit_ball_volume(n: int) -> float:
    """Return ω_n, the Lebesgue measure of the n-dimensional unit ball."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def unit_sphere_area(n: int) -> float:
    """Return the surface measure of the unit sphere S^{n-1} in R^n."""
    return n * unit_ball_volume(n)


def ordered_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum; independent of how the terms were produced."""
    return math.fsum(float(v) for v in values)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=constants.JSON_INDENT, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def bytes_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def dict_digest(obj: Dict[str, Any]) -> str:
    return bytes_digest(canonical_json(obj).encode("utf8"))


def array_digest(array: np.ndarray) -> str:
    """Hash of dtype, shape and contents of an array."""
    array = np.ascontiguousarray(array)
    sha = hashlib.sha256()
    sha.update(str(array.dtype).encode("utf8"))
    sha.update(repr(array.shape).encode("utf8"))
    sha.update(array.tobytes())
    return sha.hexdigest()


def rle_encode(mask: np.ndarray) -> Dict[str, Any]:
    """Run-length encode a boolean array in row-major order.

    Args:
        mask (numpy.ndarray): Boolean array of any shape.

    Returns:
        A dict with "shape" and "runs", runs being [value, length] pairs.
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    runs = []
    if flat.size:
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        starts = np.concatenate(([0], change))
        ends = np.concatenate((change, [flat.size]))
        runs = [[int(flat[a]), int(b - a)] for a, b in zip(starts, ends)]
    return {"shape": [int(x) for x in np.shape(mask)], "runs": runs}


def rle_decode(payload: Dict[str, Any]) -> np.ndarray:
    try:
        shape = tuple(int(x) for x in payload["shape"])
        runs = payload["runs"]
    except (KeyError, TypeError) as e:
        raise InvalidInstanceError(f"Malformed run-length mask: {e}") from e
    values = [bool(v) for v, length in runs for _ in range(int(length))]
    if len(values) != int(np.prod(shape, dtype=np.int64)):
        raise InvalidInstanceError("Run-length mask does not match its shape")
    return np.array(values, dtype=bool).reshape(shape)


def lexicographic_cells(mask: np.ndarray) -> Sequence[tuple]:
    """Indices of the True entries of mask, in lexicographic order."""
    return [tuple(int(i) for i in idx) for idx in np.argwhere(mask)]
