class LabError(Exception):
    """Base class of every validation failure raised by the laboratory"""


class InvalidGridError(LabError):
    """Grid parameters or Ω violate the lattice preconditions"""


class InvalidFieldError(LabError):
    """Phase array or far field inconsistent with the grid"""


class InvalidKernelError(LabError):
    """Kernel parameters invalid or kernel built on another grid"""


class InteractionError(LabError):
    """Interaction sets overlap or carry two far parts"""


class DomainError(LabError):
    """Cell or region outside the admissible domain"""


class BoundaryPointError(LabError):
    """Evaluation point does not lie on the boundary"""


class OracleBoundError(LabError):
    """Enumeration requested beyond the supported number of cells"""


class MeshRangeError(LabError):
    """Half-ball or radius exceeds the extension mesh or grid"""


class CalibrationMissingError(LabError):
    """No calibrated constant available for the requested (n, s)"""


class HausdorffUndefinedError(LabError):
    """One side has an empty boundary in the window"""


class NonSubgraphError(LabError):
    """Minimizer is not a subgraph in the measurement window"""


class ExperimentPreconditionError(LabError):
    """Experiment construction preconditions not met"""


class PerturbationHypothesisError(LabError):
    """Perturbation set violates the invariance hypotheses"""


class InvalidConfigError(LabError):
    """Run configuration invalid"""


class InvalidInstanceError(LabError):
    """Instance or artifact file malformed"""
