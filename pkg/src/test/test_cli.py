import contextlib
import io
import json
import os
import tempfile
import unittest

from sperimeter import cli, utils
from sperimeter.constants import ExitCode
from sperimeter.energy import CurvatureDatum
from sperimeter.lattice import BinaryField, FarField, build_grid
from sperimeter.storage import encode_instance


class LabCliTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = self.tmp.name
        grid = build_grid(2, 1.0, (8, 8), [(2, 6), (2, 6)], 0.5)
        field = BinaryField.from_far_field(grid, FarField.half_space(0.0))
        self.instance = os.path.join(self.root, "instance.json")
        with open(self.instance, "w") as f:
            f.write(utils.canonical_json(encode_instance(field, CurvatureDatum(grid, 0.0))))
        self.out = os.path.join(self.root, "out")

    def main(self, *argv):
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr), contextlib.redirect_stdout(io.StringIO()):
            code = cli.main(list(argv))
        return code, stderr.getvalue()

    def test_cli_perimeter_success(self):
        code, _ = self.main("perimeter", "--instance", self.instance, "--out", self.out, "--workers", "1")
        self.assertEqual(ExitCode.SUCCESS.value, code)
        with open(os.path.join(self.out, "perimeter.json")) as f:
            self.assertGreater(json.load(f)["energy"]["per_s"], 0.0)
        self.assertTrue(os.path.isfile(os.path.join(self.out, "manifest.json")))

    def test_cli_usage_error_exit_code(self):
        for argv in ((), ("plot",), ("perimeter", "--workers", "many"), ("curvature", "--point", "a,b")):
            code, stderr = self.main(*argv)
            self.assertEqual(ExitCode.USAGE.value, code)
            self.assertIn("usage:", stderr)

    def test_cli_help_exit_code(self):
        code, _ = self.main("--help")
        self.assertEqual(ExitCode.SUCCESS.value, code)

    def test_cli_missing_instance_exit_code(self):
        code, stderr = self.main("perimeter", "--instance", os.path.join(self.root, "missing.json"), "--out", self.out)
        self.assertEqual(ExitCode.VALIDATION_ERROR.value, code)
        self.assertIn("error: Cannot read instance", stderr)

    def test_cli_invalid_value_exit_code(self):
        code, _ = self.main("perimeter", "--instance", self.instance, "--out", self.out, "--lam", "-1")
        self.assertEqual(ExitCode.VALIDATION_ERROR.value, code)

    def test_cli_failed_check_exit_code(self):
        code, stderr = self.main("density", "--instance", self.instance, "--out", self.out, "--radii", "2", "3")
        self.assertEqual(ExitCode.SUCCESS.value, code)
        config = os.path.join(self.root, "strict.toml")
        with open(config, "w") as f:
            f.write("density_floor = 0.45\n")
        code, stderr = self.main("density", "--instance", self.instance, "--out", self.out, "--config", config,
                                 "--radii", "2", "3")
        self.assertEqual(ExitCode.CHECK_FAILURE.value, code)
        self.assertIn("check failed", stderr)

    def test_cli_calibration_path_success(self):
        shared = os.path.join(self.root, "shared", "calibration.json")
        code, _ = self.main("calibrate", "--n", "2", "--s", "0.5", "--h", "1", "--out", self.out,
                            "--calibration", shared, "--workers", "1")
        self.assertEqual(ExitCode.SUCCESS.value, code)
        with open(shared) as f:
            self.assertIn("bound_constant", json.load(f))
        self.assertFalse(os.path.isfile(os.path.join(self.out, "calibration.json")))

    def test_cli_config_file_values_success(self):
        config = os.path.join(self.root, "run.json")
        with open(config, "w") as f:
            json.dump({"instance": self.instance, "out": self.out, "deltas": [4.0, 2.0]}, f)
        code, _ = self.main("curvature", "--config", config, "--point", "0.5,0")
        self.assertEqual(ExitCode.SUCCESS.value, code)
        with open(os.path.join(self.out, "curvature.json")) as f:
            payload = json.load(f)
        self.assertEqual([4.0, 2.0], payload["pv"]["deltas"])
        self.assertEqual([0.5, 0.0], payload["samples"][0]["point"])


if __name__ == '__main__':
    unittest.main()
