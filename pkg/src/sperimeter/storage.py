"""Artifact storage: named byte blobs with recorded digests, the codecs written through it, and
the run manifest.

Classes:
    ArtifactStorage: Abstract store; JSON/CSV/PGM/NPY writers and the manifest are built on
        write_bytes/read_bytes
    StorageProvider: Factory of ArtifactStorage instances
    InMemoryArtifactStorage, FileArtifactStorage: Concrete stores
    CalibrationFileStorage: File store reading and writing the calibration file at a given path
    InMemoryStorageProvider, FileStorageProvider: Their providers

Methods:
    encode_instance(field, H, r_cut), decode_instance(payload): Instance JSON codec
    validate_payload(payload, schema_name): Check a payload against a bundled JSON schema
"""

import abc
import csv
import io
import json
import logging
import os
from importlib import resources
from threading import RLock
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from sperimeter import constants, utils
from sperimeter.energy import CurvatureDatum
from sperimeter.exception import InvalidInstanceError
from sperimeter.lattice import BinaryField, GridDomain

logger = logging.getLogger(constants.LOGGER_NAME)


class ArtifactStorage(abc.ABC):

    def __init__(self):
        self.lock = RLock()
        self.output_digests: Dict[str, str] = {}
        self.input_digests: Dict[str, str] = {}

    @abc.abstractmethod
    def _put(self, name: str, data: bytes) -> None:
        pass

    @abc.abstractmethod
    def _get(self, name: str) -> bytes:
        pass

    @abc.abstractmethod
    def exists(self, name: str) -> bool:
        pass

    def write_bytes(self, name: str, data: bytes) -> str:
        digest = utils.bytes_digest(data)
        with self.lock:
            self._put(name, data)
            self.output_digests[name] = digest
        logger.debug(f"Artifact written: {name} ({len(data)} bytes)")
        return digest

    def read_bytes(self, name: str) -> bytes:
        try:
            return self._get(name)
        except (KeyError, FileNotFoundError) as e:
            raise InvalidInstanceError(f"Artifact {name} not found") from e

    def record_input(self, name: str, data: bytes):
        with self.lock:
            self.input_digests[name] = utils.bytes_digest(data)

    def write_json(self, name: str, payload: Any) -> str:
        return self.write_bytes(name, (utils.canonical_json(payload) + "\n").encode("utf8"))

    def read_json(self, name: str) -> Any:
        try:
            return json.loads(self.read_bytes(name).decode("utf8"))
        except json.JSONDecodeError as e:
            raise InvalidInstanceError(f"Artifact {name} is not valid JSON: {e}") from e

    def write_text(self, name: str, text: str) -> str:
        return self.write_bytes(name, text.encode("utf8"))

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return self.write_text(name, out.getvalue())

    def write_pgm(self, name: str, mask: np.ndarray) -> str:
        """Plain (P2) PGM of a 2D phase mask, inside cells white."""
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise InvalidInstanceError(f"PGM output needs a 2D mask, got {mask.ndim} axes")
        rows = "\n".join(" ".join("1" if v else "0" for v in row) for row in mask)
        return self.write_text(name, f"P2\n{mask.shape[1]} {mask.shape[0]}\n1\n{rows}\n")

    def read_pgm(self, name: str) -> np.ndarray:
        """Phase mask of a plain (P2) PGM with maxval 1 and values 0/1; comments after '#' are skipped."""
        lines = [line.split("#", 1)[0] for line in self.read_bytes(name).decode("ascii", "replace").splitlines()]
        tokens = " ".join(lines).split()
        if len(tokens) < 4 or tokens[0] != "P2":
            raise InvalidInstanceError(f"{name} is not a plain P2 PGM")
        try:
            width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
            values = np.array([int(t) for t in tokens[4:]], dtype=int)
        except ValueError as e:
            raise InvalidInstanceError(f"{name} has a malformed PGM header or body: {e}") from e
        if width < 1 or height < 1 or maxval != 1:
            raise InvalidInstanceError(f"{name} needs positive dimensions and maxval 1, got {width}x{height}/{maxval}")
        if values.size != width * height:
            raise InvalidInstanceError(f"{name} holds {values.size} values, expected {width * height}")
        if np.any((values != 0) & (values != 1)):
            raise InvalidInstanceError(f"{name} has values other than 0 and 1")
        return values.reshape(height, width).astype(bool)

    def write_npy(self, name: str, array: np.ndarray) -> str:
        buffer = io.BytesIO()
        np.save(buffer, np.ascontiguousarray(array), allow_pickle=False)
        return self.write_bytes(name, buffer.getvalue())

    def read_npy(self, name: str) -> np.ndarray:
        return np.load(io.BytesIO(self.read_bytes(name)), allow_pickle=False)

    def manifest(self, config_digest: str) -> Dict[str, Any]:
        with self.lock:
            outputs = {k: v for k, v in self.output_digests.items() if k != constants.MANIFEST_FILE}
            return {
                "library": constants.LAB_LIBRARY,
                "version": constants.LAB_VERSION,
                "config_digest": config_digest,
                "inputs": dict(sorted(self.input_digests.items())),
                "outputs": dict(sorted(outputs.items())),
            }

    def write_manifest(self, config_digest: str) -> str:
        return self.write_json(constants.MANIFEST_FILE, self.manifest(config_digest))


class StorageProvider(abc.ABC):

    @abc.abstractmethod
    def get_storage(self) -> ArtifactStorage:
        pass


class InMemoryArtifactStorage(ArtifactStorage):

    def __init__(self):
        super().__init__()
        self.blobs: Dict[str, bytes] = {}

    def _put(self, name: str, data: bytes):
        self.blobs[name] = data

    def _get(self, name: str) -> bytes:
        return self.blobs[name]

    def exists(self, name: str) -> bool:
        return name in self.blobs


class FileArtifactStorage(ArtifactStorage):
    """Artifacts as files below a root directory."""

    def __init__(self, root: str):
        super().__init__()
        self.root = root

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def _put(self, name: str, data: bytes):
        path = self.path(name)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "wb") as f:
            f.write(data)

    def _get(self, name: str) -> bytes:
        with open(self.path(name), "rb") as f:
            return f.read()

    def exists(self, name: str) -> bool:
        return os.path.isfile(self.path(name))


class CalibrationFileStorage(FileArtifactStorage):
    """File storage whose calibration file lives at a configured path."""

    def __init__(self, calibration_path: str):
        super().__init__(os.path.dirname(calibration_path) or ".")
        self.calibration_path = calibration_path

    def path(self, name: str) -> str:
        return self.calibration_path if name == constants.CALIBRATION_FILE else super().path(name)


class InMemoryStorageProvider(StorageProvider):

    def get_storage(self) -> InMemoryArtifactStorage:
        return InMemoryArtifactStorage()


class FileStorageProvider(StorageProvider):

    def __init__(self, root: str):
        self.root = root

    def get_storage(self) -> FileArtifactStorage:
        return FileArtifactStorage(self.root)


def load_schema(schema_name: str) -> Dict[str, Any]:
    text = resources.files("sperimeter").joinpath("schemas", f"{schema_name}.json").read_text(encoding="utf8")
    return json.loads(text)


def validate_payload(payload: Dict[str, Any], schema_name: str):
    """Raise InvalidInstanceError unless payload matches schemas/<schema_name>.json."""
    try:
        jsonschema.validate(json.loads(utils.canonical_json(payload)), load_schema(schema_name))
    except jsonschema.ValidationError as e:
        raise InvalidInstanceError(f"{schema_name} payload invalid: {e.message}") from e


def encode_instance(field: BinaryField, H: CurvatureDatum, r_cut: Optional[float] = None) -> Dict[str, Any]:
    """Grid header, exterior datum mask with far field, and the H array of a problem instance."""
    payload = {"grid": field.grid.to_dict(), "datum": field.to_dict(), "H": H.values.tolist()}
    if r_cut is not None:
        payload["r_cut"] = r_cut
    return payload


def decode_instance(payload: Dict[str, Any]) -> Tuple[BinaryField, CurvatureDatum, Optional[float]]:
    validate_payload(payload, "instance")
    grid = GridDomain.from_dict(payload["grid"])
    field = BinaryField.from_dict(grid, payload["datum"])
    H = payload.get("H", 0.0)
    values = np.asarray(H, dtype=float)
    if values.ndim and values.shape != grid.shape:
        raise InvalidInstanceError(f"H array shape {values.shape} differs from grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidInstanceError("H samples must be finite")
    return field, CurvatureDatum(grid, values), payload.get("r_cut")


def read_calibration(storage: ArtifactStorage) -> Dict[str, Any]:
    if not storage.exists(constants.CALIBRATION_FILE):
        return {}
    return storage.read_json(constants.CALIBRATION_FILE)


def calibration_key(n: int, s: float, h: Optional[float] = None) -> str:
    key = f"n={n},s={s!r}"
    return key if h is None else f"{key},h={h!r}"


def update_calibration(storage: ArtifactStorage, section: str, key: str, entry: Dict[str, Any]) -> Dict[str, Any]:
    with storage.lock:
        payload = read_calibration(storage)
        payload.setdefault(section, {})[key] = entry
        storage.write_json(constants.CALIBRATION_FILE, payload)
    return payload
