from enum import Enum

LAB_LIBRARY = "sperimeter-lab"
LAB_VERSION = "0.5.0"

LOGGER_NAME = "sperimeter"

MAX_DIMENSION = 3
MIDPOINT_OFFSET = 4.0
DEFAULT_NEAR_TOL = 1e-8
DEFAULT_R_CUT_CELLS = 8
MAX_GAUSS_ORDER = 96
DEFAULT_WORKERS = 4

ORACLE_MAX_CELLS = 24
ORACLE_TOLERANCE = 1e-12
FULL_FAMILY_MAX_CELLS = 20
MAX_PATCH_SIZE = 4

MIN_EXCLUSION_CELLS = 2.0
DEFAULT_DELTA_CELLS = (8.0, 6.0, 4.0, 3.0, 2.0)
EL_TOLERANCE_CONSTANT = 2.0
EL_CALIBRATION_SLOPE = 0.5

FIRST_LEVEL_FRACTION = 0.25
LEVEL_RATIO = 1.3
DEFAULT_QUADRATURE_TOL = 1e-10
EXTENSION_NEAR_CELLS = 2

DENSITY_FLOOR = 0.05
CLEAN_BALL_FLOOR = 0.1
CONTINUITY_TOLERANCE = 0.05

CIRCLE_DIRECTIONS = 64
SPHERE_DIRECTIONS = 266

STICKING_HEIGHT = 4.0
STICKING_BUMP_DISTANCE = 2.0
SLOPE_THRESHOLD = 2.0

CALIBRATION_FILE = "calibration.json"
MANIFEST_FILE = "manifest.json"
JSON_INDENT = 2


class Phase(Enum):
    OUTSIDE = 0
    INSIDE = 1


class FarFieldKind(Enum):
    OUTSIDE = "outside"
    INSIDE = "inside"
    HALF_SPACE = "half_space"
    SUBGRAPH = "subgraph"


class Side(Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"


class Family(Enum):
    FULL = "full"
    PATCHES = "patches"


class ExitCode(Enum):
    SUCCESS = 0
    VALIDATION_ERROR = 2
    CHECK_FAILURE = 3
    USAGE = 64
