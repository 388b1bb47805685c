"""Patient-specific PK/PD model: Schnider rate constants from demographics,
the four-compartment system matrices, the BIS effect map, and the BIS-target
equilibrium.

Units: mass mg, time min, volume L, height cm, weight kg, age years.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDemographicsError, DomainError, ParameterRangeError
from .lti import LTISystem


@dataclass(frozen=True)
class PatientDemographics:
    sex: str
    age: float
    weight: float
    height: float

    def __post_init__(self):
        if self.sex not in ("male", "female"):
            raise DomainError(f"sex must be 'male' or 'female', got {self.sex!r}")
        if self.age <= 0 or self.weight <= 0 or self.height <= 0:
            raise DomainError("age, weight and height must be positive")


@dataclass(frozen=True)
class PKPDParameters:
    """Rate constants in 1/min plus the central volume v1 in L."""

    a10: float
    a12: float
    a13: float
    a21: float
    a31: float
    ae0: float
    v1: float

    def __post_init__(self):
        for name in ("a10", "a12", "a13", "a21", "a31", "ae0", "v1"):
            value = getattr(self, name)
            if not value > 0:
                raise ParameterRangeError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class BisParameters:
    bis0: float = 100.0
    ec50: float = 3.4
    gamma: float = 3.0

    def __post_init__(self):
        if self.bis0 <= 0 or self.ec50 <= 0 or self.gamma <= 0:
            raise DomainError("BIS parameters must be positive")


@dataclass(frozen=True)
class EquilibriumState:
    x_e: np.ndarray
    u_e: float


def lean_body_mass(sex: str, weight: float, height: float) -> float:
    """James-formula lean body mass; weight in kg, height in cm."""
    if weight <= 0 or height <= 0:
        raise DomainError("weight and height must be positive")
    r2 = (weight / height) ** 2
    if sex == "male":
        lbm = 1.1 * weight - 128.0 * r2
    elif sex == "female":
        lbm = 1.07 * weight - 148.0 * r2
    else:
        raise DomainError(f"sex must be 'male' or 'female', got {sex!r}")
    if lbm <= 0:
        raise DegenerateDemographicsError(
            f"lean body mass {lbm:.3g} kg is non-physical for w={weight}, h={height}")
    return lbm


def schnider_parameters(demo: PatientDemographics) -> PKPDParameters:
    """Schnider regression for the four-compartment propofol model."""
    lbm = lean_body_mass(demo.sex, demo.weight, demo.height)
    a10 = (0.443 + 0.0107 * (demo.weight - 77.0)
           - 0.0159 * (lbm - 59.0) + 0.0062 * (demo.height - 177.0))
    a12 = 0.302 - 0.0056 * (demo.age - 53.0)
    num = 1.29 - 0.024 * (demo.age - 53.0)
    den = 18.9 - 0.391 * (demo.age - 53.0)
    if num <= 0 or den <= 0:
        raise ParameterRangeError(f"a21 undefined for age {demo.age}")
    return PKPDParameters(a10=a10, a12=a12, a13=0.196, a21=num / den,
                          a31=0.0035, ae0=0.456, v1=4.27)


def assemble_system(p: PKPDParameters) -> LTISystem:
    """Four-compartment system: blood, muscle, fat, effect site."""
    A = np.array([
        [-(p.a10 + p.a12 + p.a13), p.a21, p.a31, 0.0],
        [p.a12, -p.a21, 0.0, 0.0],
        [p.a13, 0.0, -p.a31, 0.0],
        [p.ae0 / p.v1, 0.0, 0.0, -p.ae0],
    ])
    B = np.array([1.0, 0.0, 0.0, 0.0])
    return LTISystem.from_matrices(A, B)


def bis(x4: float, bp: BisParameters = BisParameters()) -> float:
    """Decreasing sigmoid from effect-site level to the BIS score."""
    if x4 < 0:
        raise DomainError("effect-site level must be nonnegative")
    xg = x4 ** bp.gamma
    return bp.bis0 * (1.0 - xg / (xg + bp.ec50 ** bp.gamma))


def bis_inverse(target_bis: float, bp: BisParameters = BisParameters()) -> float:
    """Effect-site level achieving a BIS score; inverse of bis()."""
    if not 0 < target_bis < bp.bis0:
        raise DomainError(f"BIS target must lie in (0, {bp.bis0})")
    return bp.ec50 * ((bp.bis0 - target_bis) / target_bis) ** (1.0 / bp.gamma)


def equilibrium(p: PKPDParameters, ec50: float = 3.4) -> EquilibriumState:
    """Steady state holding the effect site at the given level."""
    x_e = np.array([
        p.v1 * ec50,
        p.a12 * p.v1 * ec50 / p.a21,
        p.a13 * p.v1 * ec50 / p.a31,
        ec50,
    ])
    x_e.setflags(write=False)
    return EquilibriumState(x_e=x_e, u_e=p.a10 * p.v1 * ec50)
