"""Laboratory client module that provides the façade behind every subcommand

Classes:
    Outcome: Report of one subcommand run and whether its check passed
    Laboratory: The laboratory client class
"""

import json
import os
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from sperimeter import constants
from sperimeter.analysis import clean_ball_check, density_profile, density_sweep, flatness
from sperimeter.config import SUBCOMMANDS, RunConfig
from sperimeter.constants import Family
from sperimeter.curvature import (PVConfig, calibrate_el_constant, el_inequality_check, interface_points,
                                  mean_curvature_pv)
from sperimeter.energy import CurvatureDatum, massari_energy
from sperimeter.exception import DomainError, InvalidConfigError, InvalidInstanceError
from sperimeter.experiments import (ExperimentSpec, run_c0_not_c1, run_experiment,
                                   run_perturbation_invariance)
from sperimeter.extension import (calibrate_bound_constant, calibrate_c_tilde, extend_field, monotonicity_report,
                                  phi_profile)
from sperimeter.lattice import BinaryField, KernelTable, build_kernel
from sperimeter.minimize import (brute_force_minimize, lambda_certificate, mincut_minimize,
                                 subsupersolution_check)
from sperimeter.storage import (CalibrationFileStorage, calibration_key, decode_instance, encode_instance,
                                validate_payload)
from sperimeter.worker import Workers

DEFAULT_RADIUS_CELLS = (4, 6, 8, 12, 16)


class Outcome:
    """Report payload of one subcommand; passed is False when a check failed."""

    def __init__(self, name: str, payload: Dict[str, Any], passed: bool = True):
        self.name = name
        self.payload = payload
        self.passed = passed


class Laboratory:
    """Laboratory client holding a RunConfig, its artifact storage and a worker pool

    Args:
        configuration (sperimeter.config.RunConfig, optional): The configuration of the run. A new instance
            with default config value will be used by default.

    Attributes:
        configuration (sperimeter.config.RunConfig): the configuration of the client instance
        storage (sperimeter.storage.ArtifactStorage): where artifacts and the manifest go
        calibration_storage (sperimeter.storage.ArtifactStorage): holds the calibration file; the configured
            calibration path if any, else storage
        workers (sperimeter.worker.Workers): pool shared by every computation of the run

    Methods:
        run(subcommand): Validate the config, run one subcommand, write its report and the manifest
        perimeter(), curvature(), minimize(), certify(), extension(), monotonicity(), density(),
        flatness(), stickiness(), perturb(), oracle(), calibrate(): The subcommands
        shutdown(): Stop the worker pool
    """

    def __init__(self, configuration: Optional[RunConfig] = None):
        self.configuration: RunConfig = configuration or RunConfig()
        self.storage = self.configuration.get_storage()
        self.calibration_storage = self.storage
        if self.configuration.calibration is not None:
            self.calibration_storage = CalibrationFileStorage(self.configuration.calibration)
            if self.calibration_storage.exists(constants.CALIBRATION_FILE):
                self.storage.record_input(os.path.basename(self.configuration.calibration),
                                          self.calibration_storage.read_bytes(constants.CALIBRATION_FILE))
        self.workers = Workers(self.configuration.workers)
        self._instance = None

    @property
    def logger(self):
        return self.configuration.logger

    def run(self, subcommand: Optional[str] = None) -> Outcome:
        """Run one subcommand and write its JSON report and the manifest.

        Returns:
            The Outcome; its payload validates against schemas/<subcommand>.json.
        """
        name = subcommand or self.configuration.subcommand
        if name not in SUBCOMMANDS:
            raise InvalidConfigError(f"Unknown subcommand {name!r}")
        if not self.configuration.is_valid():
            raise InvalidConfigError("Invalid run configuration")
        outcome: Outcome = getattr(self, name)()
        validate_payload(outcome.payload, name)
        self.storage.write_json(f"{name}.json", outcome.payload)
        self.storage.write_manifest(self.configuration.digest())
        self.logger.info(f"Report written: {name}.json (passed={outcome.passed})")
        return outcome

    def shutdown(self):
        self.workers.stop()

    def _read_input(self, path: Optional[str], what: str) -> bytes:
        if path is None:
            raise InvalidConfigError(f"The {what} path is required for this subcommand")
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as e:
            raise InvalidInstanceError(f"Cannot read {what} {path}: {e}") from e
        self.storage.record_input(os.path.basename(path), data)
        return data

    def instance(self) -> Tuple[BinaryField, CurvatureDatum, KernelTable]:
        """The instance field, its curvature (overridden by config.H) and the kernel, loaded once."""
        if self._instance is None:
            data = self._read_input(self.configuration.instance, "instance")
            try:
                payload = json.loads(data.decode("utf8"))
            except ValueError as e:
                raise InvalidInstanceError(f"Instance is not valid JSON: {e}") from e
            field, H, r_cut = decode_instance(payload)
            if self.configuration.H is not None:
                H = CurvatureDatum(field.grid, self.configuration.H)
            r_cut = self.configuration.r_cut if self.configuration.r_cut is not None else r_cut
            kernel = build_kernel(field.grid, r_cut, self.configuration.near_tol, self.workers)
            self._instance = (field, H, kernel)
        return self._instance

    def experiment(self) -> ExperimentSpec:
        self._read_input(self.configuration.experiment, "experiment")
        return ExperimentSpec.from_file(self.configuration.experiment)

    def _pv_config(self, h: float) -> PVConfig:
        return self.configuration.pv_config or PVConfig.for_grid(h, self.configuration.pv_order)

    def _points(self, field: BinaryField) -> List[np.ndarray]:
        """Configured points, else the interface point closest to the center of Ω."""
        if self.configuration.points is not None:
            return [np.array(p) for p in self.configuration.points]
        candidates = [p for p, _, _ in interface_points(field)]
        if not candidates:
            raise DomainError("No interface point of E inside Ω")
        center = field.grid.omega_center()
        distances = [float(np.sum((p - center) ** 2)) for p in candidates]
        return [candidates[int(np.argmin(distances))]]

    def _radii(self, field: BinaryField, point: np.ndarray) -> List[float]:
        if self.configuration.radii is not None:
            return list(self.configuration.radii)
        grid = field.grid
        reach = min(min(point[a] - grid.axis_centers(a)[0], grid.axis_centers(a)[-1] - point[a])
                    for a in range(grid.n))
        return [c * grid.h for c in DEFAULT_RADIUS_CELLS if c * grid.h <= reach]

    def _write_csv(self, name: str, header: List[str], rows):
        if "csv" in self.configuration.formats:
            self.storage.write_csv(name, header, rows)

    def _write_pgm(self, name: str, field: BinaryField):
        if "pgm" in self.configuration.formats and field.grid.n == 2:
            self.storage.write_pgm(name, field.phase)

    def perimeter(self) -> Outcome:
        field, H, kernel = self.instance()
        report = massari_energy(field, H, kernel)
        return Outcome("perimeter", {"energy": report.to_dict(), "field": field.digest()})

    def curvature(self) -> Outcome:
        """Samples at the configured points, or the EL check over every interface point."""
        field, _, kernel = self.instance()
        pv_config = self._pv_config(field.grid.h)
        if self.configuration.points is not None:
            samples = self.workers.map(lambda p: mean_curvature_pv(field, p, kernel, pv_config), self._points(field))
            self._write_csv("curvature.csv", [f"x{a}" for a in range(field.grid.n)] + ["h_s", "residual"],
                            [[*map(float, c.point), c.value, c.residual] for c in samples])
            return Outcome("curvature", {"pv": pv_config.to_dict(), "samples": [c.to_dict() for c in samples]})
        report = el_inequality_check(field, kernel, self.configuration.lam, pv_config,
                                     self.configuration.el_constant, workers=self.workers)
        if "csv" in self.configuration.formats:
            self.storage.write_text("curvature.csv", report.to_csv())
        return Outcome("curvature", {"pv": pv_config.to_dict(), "el": report.to_dict()}, report.passed)

    def minimize(self) -> Outcome:
        field, H, kernel = self.instance()
        minimizer, report = mincut_minimize(field.grid, kernel, field, H, self.configuration.symmetry_axis)
        self.storage.write_json("minimizer.json", encode_instance(minimizer, H, kernel.r_cut))
        self._write_pgm("minimizer.pgm", minimizer)
        return Outcome("minimize", {"energy": report.to_dict(), "minimizer": minimizer.digest()})

    def certify(self) -> Outcome:
        """Λ certificate of the instance set and its sub/super-solution margins.

        With config.lam > 0 the set passes when its certificate is at most lam and the
        one-sided inequalities hold for lam; otherwise lam defaults to the certificate itself.
        """
        field, _, kernel = self.instance()
        config = self.configuration
        family = Family(config.family)
        certificate = lambda_certificate(field, kernel, family, config.patch_size, self.workers)
        lam = config.lam if config.lam > 0 else certificate.lambda_star
        margins = subsupersolution_check(field, kernel, lam, family, config.patch_size)
        passed = margins.passed and certificate.lambda_star <= lam * (1 + 1e-12) + 1e-12
        return Outcome("certify", {"certificate": certificate.to_dict(), "subsupersolution": margins.to_dict(),
                                   "lambda": lam, "passed": passed}, passed)

    def extension(self) -> Outcome:
        field, _, _ = self.instance()
        ext = extend_field(field, self.configuration.z_levels, self.configuration.kernel_truncation,
                           workers=self.workers)
        ext.save(self.storage, "extension")
        return Outcome("extension", {**ext.sidecar(), "min": float(ext.values.min()), "max": float(ext.values.max())})

    def monotonicity(self) -> Outcome:
        field, _, _ = self.instance()
        config = self.configuration
        point = self._points(field)[0]
        profile = phi_profile(field, point, self._radii(field, point), config.lam, config.z_levels,
                              config.kernel_truncation, config.c_tilde, self.calibration_storage,
                              workers=self.workers)
        spread = float(np.max(profile.phi) - np.min(profile.phi))
        report = monotonicity_report(profile, config.tol * spread, config.bound_constant,
                                     storage=self.calibration_storage)
        self._write_csv("phi.csv", ["r", "xi", "phi"], profile.rows())
        return Outcome("monotonicity", {"center": point.tolist(), "profile": profile.to_dict(),
                                        "report": report.to_dict()}, report.passed)

    def density(self) -> Outcome:
        field, _, _ = self.instance()
        radii = self.configuration.radii or [c * field.grid.h for c in DEFAULT_RADIUS_CELLS[:3]]
        sweep = density_sweep(field, radii)
        profiles = [density_profile(field, p, radii) for p in self._points(field)]
        rows = [row for profile in profiles for row in profile.rows()]
        self._write_csv("density.csv", [f"x{a}" for a in range(field.grid.n)] + ["r", "inside", "ball", "ratio"],
                        rows)
        passed = sweep.passed(self.configuration.density_floor)
        return Outcome("density", {"sweep": sweep.to_dict(), "profiles": [p.to_dict() for p in profiles],
                                   "passed": passed}, passed)

    def flatness(self) -> Outcome:
        field, _, _ = self.instance()
        entries, passed = [], True
        for point in self._points(field):
            for r in self._radii(field, point):
                flat = flatness(field, point, r)
                try:
                    clean = clean_ball_check(field, point, r, self.configuration.clean_ball_floor).to_dict()
                    passed = passed and clean["passed"]
                except DomainError as e:
                    self.logger.warning(f"Clean ball skipped at r={r}: {e}")
                    clean = None
                entries.append({"flatness": flat.to_dict(), "clean_ball": clean})
        return Outcome("flatness", {"entries": entries, "passed": passed}, passed)

    def stickiness(self) -> Outcome:
        """Sticking experiments report their jumps; c0_not_c1 experiments pass on the slope mismatch."""
        spec = self.experiment()
        if spec.kind == "c0_not_c1":
            report = run_c0_not_c1(spec, self.workers)
            self._write_csv("traces.csv", ["x", "height"], report.measurement.rows())
            return Outcome("stickiness", report.to_dict(), report.passed)
        result = run_experiment(spec, self.workers)
        self._write_csv("traces.csv", ["x", "height"], result.measurement.rows())
        self._write_pgm("minimizer.pgm", result.minimizer)
        return Outcome("stickiness", result.to_dict())

    def perturb(self) -> Outcome:
        spec = self.experiment()
        report = run_perturbation_invariance(spec, k=self.configuration.patch_size, workers=self.workers)
        self._write_pgm("base.pgm", report.base)
        self._write_pgm("perturbed.pgm", report.perturbed)
        return Outcome("perturb", {"spec": spec.to_dict(), "report": report.to_dict()}, report.bound_holds)

    def oracle(self) -> Outcome:
        """Brute force against min-cut; passes when both energies agree to ORACLE_TOLERANCE relative to their size.

        same_set records the strict check that both return the same canonical minimal set.
        """
        field, H, kernel = self.instance()
        brute, brute_report = brute_force_minimize(field.grid, kernel, field, H, self.workers)
        cut, cut_report = mincut_minimize(field.grid, kernel, field, H)
        gap = abs(brute_report.massari - cut_report.massari)
        equal = gap <= constants.ORACLE_TOLERANCE * (1 + abs(brute_report.massari))
        return Outcome("oracle", {"brute_force": brute_report.to_dict(), "mincut": cut_report.to_dict(),
                                  "gap": gap, "equal": equal, "same_set": brute == cut}, equal)

    def calibrate(self) -> Outcome:
        """EL constant, c̃ and the Φ bound constant for (n, s, h) of the instance, or of the config without one."""
        config = self.configuration
        if config.instance is not None:
            grid = self.instance()[0].grid
            n, s, h = grid.n, grid.s, grid.h
        elif None in (config.n, config.s, config.h):
            raise InvalidConfigError("calibrate needs an instance or n, s and h")
        else:
            n, s, h = config.n, config.s, config.h
        jobs: Dict[str, Callable[[], Any]] = {
            "c_tilde": lambda: calibrate_c_tilde(n, s, h, self.calibration_storage),
            "bound_constant": lambda: calibrate_bound_constant(n, s, h, self.calibration_storage),
        }
        if n >= 2:
            jobs["el_constant"] = lambda: calibrate_el_constant(n, s, h, config.pv_config)
        values = self.workers.run_jobs(jobs)
        return Outcome("calibrate", {"n": n, "s": s, "h": h, **values, "key": calibration_key(n, s)})
