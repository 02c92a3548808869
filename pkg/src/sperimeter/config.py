"""Laboratory config module.

Classes:
    RunConfig: Class that stores every parameter of a laboratory run
"""

import json
import logging
import os
import tomllib
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from sperimeter import constants, utils
from sperimeter.constants import Family
from sperimeter.curvature import PVConfig
from sperimeter.exception import InvalidConfigError
from sperimeter.storage import ArtifactStorage, InMemoryStorageProvider, StorageProvider

SUBCOMMANDS = ("perimeter", "curvature", "minimize", "certify", "extension", "monotonicity", "density",
               "flatness", "stickiness", "perturb", "oracle", "calibrate")

FIELDS = ("subcommand", "instance", "experiment", "out", "r_cut", "near_tol", "deltas", "pv_order", "levels",
          "kernel_truncation", "radii", "points", "lam", "H", "family", "patch_size", "tol", "bound_constant",
          "el_constant", "c_tilde", "calibration", "density_floor", "clean_ball_floor", "symmetry_axis", "n", "s", "h",
          "workers", "formats", "log_level")

FORMATS = ("json", "csv", "pgm")


class RunConfig:
    """Laboratory run configuration; a run is a pure function of its RunConfig and input files.

    Args:
        subcommand (str, optional): One of SUBCOMMANDS.
        instance (str, optional): Path of the instance JSON (grid header, datum, H).
        experiment (str, optional): Path of an experiment spec (TOML or JSON) for stickiness and perturb.
        out (str, optional): Output directory. Default to "run".
        r_cut (float, optional): Kernel cutoff. Default to the instance value, else 8h.
        near_tol (float, optional): Relative tolerance of the near kernel quadrature.
        deltas (list of float, optional): p.v. exclusion radii, strictly decreasing. Default to
            constants.DEFAULT_DELTA_CELLS cells.
        pv_order (int, optional): δ-extrapolation order, 0 or 1.
        levels (list of float, optional): Extension heights. Default to graded levels.
        kernel_truncation (float, optional): Extension stencil radius.
        radii (list of float, optional): Radii of profiles, density and flatness scans.
        points (list of list of float, optional): Evaluation points. Default to interface points.
        lam (float, optional): Λ for EL checks, sub/super-solutions and Φ. Default to 0.
        H (float, optional): Constant prescribed curvature overriding the instance.
        family (str, optional): Competitor family of certificates, "patches" or "full".
        patch_size (int, optional): Largest patch of the patch family.
        tol (float, optional): Monotonicity tolerance as a fraction of the profile range.
        bound_constant (float, optional): C in Φ <= C (1 + R^s). Default to the half-space calibration.
        el_constant (float, optional): C in the EL tolerance C h^{1-s}.
        c_tilde (float, optional): Calibrated c̃; read from the calibration file if omitted.
        calibration (str, optional): Path of the calibration file. Default to calibration.json in out.
        density_floor (float, optional): Smallest acceptable density ratio.
        clean_ball_floor (float, optional): Smallest acceptable clean-ball constant.
        symmetry_axis (int, optional): Declared mirror axis for minimize.
        n (int, optional), s (float, optional), h (float, optional): Calibration parameters when no instance is given.
        workers (int, optional): Worker threads. Never changes output bytes.
        formats (list of str, optional): Artifact formats among "json", "csv", "pgm".
        log_level (str, optional): Level name for the CLI. Default to "WARNING".
        logger (optional): Default to logging.getLogger(constants.LOGGER_NAME).
        storage_provider (sperimeter.storage.StorageProvider, optional): Default to InMemoryStorageProvider.

    Properties:
        pv_config: PVConfig built from deltas and pv_order, None when deltas are not set.
        z_levels: Extension heights as an array, None when levels are not set.

    Methods:
        get_storage(): Return an ArtifactStorage using the configured StorageProvider.
        is_valid(): Return True if every field is valid, logging the first invalid one otherwise.
        from_file(path), from_dict(payload), to_dict(), merged(overrides), digest()
    """

    def __init__(self, subcommand: Optional[str] = None,
                 instance: Optional[str] = None,
                 experiment: Optional[str] = None,
                 out: str = "run",
                 r_cut: Optional[float] = None,
                 near_tol: float = constants.DEFAULT_NEAR_TOL,
                 deltas: Optional[Sequence[float]] = None,
                 pv_order: int = 1,
                 levels: Optional[Sequence[float]] = None,
                 kernel_truncation: Optional[float] = None,
                 radii: Optional[Sequence[float]] = None,
                 points: Optional[Sequence[Sequence[float]]] = None,
                 lam: float = 0.0,
                 H: Optional[float] = None,
                 family: str = Family.PATCHES.value,
                 patch_size: int = constants.MAX_PATCH_SIZE,
                 tol: float = 0.05,
                 bound_constant: Optional[float] = None,
                 el_constant: float = constants.EL_TOLERANCE_CONSTANT,
                 c_tilde: Optional[float] = None,
                 calibration: Optional[str] = None,
                 density_floor: float = constants.DENSITY_FLOOR,
                 clean_ball_floor: float = constants.CLEAN_BALL_FLOOR,
                 symmetry_axis: Optional[int] = None,
                 n: Optional[int] = None,
                 s: Optional[float] = None,
                 h: Optional[float] = None,
                 workers: int = constants.DEFAULT_WORKERS,
                 formats: Sequence[str] = FORMATS,
                 log_level: str = "WARNING",
                 logger=logging.getLogger(constants.LOGGER_NAME),
                 storage_provider: Optional[StorageProvider] = None):
        self.subcommand = subcommand
        self.instance = instance
        self.experiment = experiment
        self.out = out
        self.r_cut = r_cut
        self.near_tol = near_tol
        self.deltas = None if deltas is None else [float(d) for d in deltas]
        self.pv_order = pv_order
        self.levels = None if levels is None else [float(z) for z in levels]
        self.kernel_truncation = kernel_truncation
        self.radii = None if radii is None else [float(r) for r in radii]
        self.points = None if points is None else [[float(x) for x in p] for p in points]
        self.lam = lam
        self.H = H
        self.family = family
        self.patch_size = patch_size
        self.tol = tol
        self.bound_constant = bound_constant
        self.el_constant = el_constant
        self.c_tilde = c_tilde
        self.calibration = calibration
        self.density_floor = density_floor
        self.clean_ball_floor = clean_ball_floor
        self.symmetry_axis = symmetry_axis
        self.n = n
        self.s = s
        self.h = h
        self.workers = workers
        self.formats = list(formats)
        self.log_level = log_level
        self.logger = logger
        self.storage_provider: StorageProvider = storage_provider or InMemoryStorageProvider()

    def get_storage(self) -> ArtifactStorage:
        """Use configured StorageProvider to create an ArtifactStorage instance then return.

        Returns:
            An ArtifactStorage instance
        """
        return self.storage_provider.get_storage()

    def _checks(self) -> List[tuple]:
        positive = lambda v: v is None or (isinstance(v, (int, float)) and v > 0)
        increasing = lambda v: v is None or (len(v) > 0 and all(x > 0 for x in v)
                                             and all(b > a for a, b in zip(v, v[1:])))
        return [
            ("subcommand", self.subcommand is None or self.subcommand in SUBCOMMANDS),
            ("r_cut", positive(self.r_cut)),
            ("near_tol", positive(self.near_tol)),
            ("deltas", self.deltas is None or self._pv_valid()),
            ("pv_order", self.pv_order in (0, 1)),
            ("levels", increasing(self.levels)),
            ("kernel_truncation", positive(self.kernel_truncation)),
            ("radii", increasing(self.radii)),
            ("lam", isinstance(self.lam, (int, float)) and self.lam >= 0),
            ("family", self.family in [f.value for f in Family]),
            ("patch_size", isinstance(self.patch_size, int) and 1 <= self.patch_size <= constants.MAX_PATCH_SIZE),
            ("tol", isinstance(self.tol, (int, float)) and self.tol >= 0),
            ("bound_constant", positive(self.bound_constant)),
            ("el_constant", isinstance(self.el_constant, (int, float)) and self.el_constant >= 0),
            ("c_tilde", positive(self.c_tilde)),
            ("calibration", self.calibration is None or (isinstance(self.calibration, str) and self.calibration != "")),
            ("density_floor", 0 <= self.density_floor < 0.5),
            ("clean_ball_floor", 0 <= self.clean_ball_floor < 1),
            ("n", self.n is None or self.n in range(1, constants.MAX_DIMENSION + 1)),
            ("s", self.s is None or 0 < self.s < 1),
            ("h", positive(self.h)),
            ("workers", isinstance(self.workers, int) and self.workers > 0),
            ("formats", all(f in FORMATS for f in self.formats) and "json" in self.formats),
            ("log_level", self.log_level.upper() in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")),
        ]

    def _pv_valid(self) -> bool:
        try:
            PVConfig(self.deltas, self.pv_order)
            return True
        except Exception:
            return False

    def is_valid(self) -> bool:
        """Config instance is valid when every field holds an admissible value.

        Returns:
            True if valid. False otherwise.
        """
        for name, ok in self._checks():
            if not ok:
                self.logger.error(f"Invalid config field {name}: {getattr(self, name)!r}")
                return False
        return True

    @property
    def pv_config(self) -> Optional[PVConfig]:
        if self.deltas is None:
            return None
        return PVConfig(self.deltas, self.pv_order)

    @property
    def z_levels(self) -> Optional[np.ndarray]:
        return None if self.levels is None else np.array(self.levels)

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in FIELDS}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any], **kwargs) -> "RunConfig":
        unknown = sorted(set(payload) - set(FIELDS))
        if unknown:
            raise InvalidConfigError(f"Unknown config fields: {', '.join(unknown)}")
        return cls(**payload, **kwargs)

    @classmethod
    def from_file(cls, path: str, **kwargs) -> "RunConfig":
        """Load a TOML or JSON config file, chosen by suffix."""
        _, suffix = os.path.splitext(path)
        try:
            with open(path, "rb") as f:
                if suffix == ".toml":
                    payload = tomllib.load(f)
                elif suffix == ".json":
                    payload = json.load(f)
                else:
                    raise InvalidConfigError(f"Config file must be .toml or .json, got {path}")
        except (OSError, ValueError) as e:
            raise InvalidConfigError(f"Cannot read config {path}: {e}") from e
        return cls.from_dict(payload, **kwargs)

    def merged(self, overrides: Dict[str, Any]) -> "RunConfig":
        """A copy with every non-None override applied."""
        payload = self.to_dict()
        payload.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(payload, logger=self.logger, storage_provider=self.storage_provider)

    def digest(self) -> str:
        """sha256 of the canonical JSON of the run parameters; paths are covered by the manifest input hashes."""
        payload = self.to_dict()
        for volatile in ("instance", "experiment", "calibration", "out", "log_level", "workers"):
            payload.pop(volatile)
        return utils.dict_digest(payload)
