"""Fractional perimeter laboratory on cell grids"""


from sperimeter.client import Laboratory, Outcome
from sperimeter.config import RunConfig
from sperimeter.constants import Family, FarFieldKind, Side
from sperimeter.energy import CurvatureDatum, EnergyReport, massari_energy, perimeter_s
from sperimeter.lattice import BinaryField, FarField, GridDomain, KernelTable, build_grid, build_kernel
from sperimeter.minimize import brute_force_minimize, lambda_certificate, mincut_minimize
