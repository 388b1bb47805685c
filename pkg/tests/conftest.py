import numpy as np
import pytest

from anesopt.patient import (PatientDemographics, assemble_system, equilibrium,
                             schnider_parameters)
from anesopt.problem import build_problem
from anesopt.shooting import solve_shooting
from anesopt.strategies import solve_all_patterns, solve_time_optimal

U_MAX_REF = 106.0907

# Frozen full-precision values for the reference patient (male, 53 y, 77 kg,
# 177 cm), computed once from the closed-form formulas and pinned here so a
# regression in any layer shows up as a drift against these numbers.
FROZEN = {
    "lbm_male": 60.476054135146356,
    "lbm_female": 54.381062593762969,
    "a10": 0.41953073925117296,
    "a21": 0.068253968253968261,
    "a41": 0.10679156908665106,
    "x_e": np.array([14.518, 64.237085581395348, 813.008, 3.4]),
    "u_e": 6.0907472724485281,
    "eigs": np.array([-0.94185684843044948, -0.456,
                      -0.045066735384238048, -0.0023611236904530026]),
    "t_c": 0.5467168029720757,
    "t_f": 1.8397543999448038,
    "x_tf": np.array([14.518, 13.70034450313041, 9.4618450520724071, 3.4]),
    "bis_6_8": 11.111111111111105,
    "psi0": np.array([-0.0094258968976545683, 0.0022322957476672146,
                      0.00012676324384331929, -0.18890667803116998]),
}

# Four-decimal reference values reported for this patient model; acceptance
# tolerances are tied to the number of digits given.
EXPECTED_A = np.array([
    [-0.9175, 0.0683, 0.0035, 0.0],
    [0.3020, -0.0683, 0.0, 0.0],
    [0.1960, 0.0, -0.0035, 0.0],
    [0.1068, 0.0, 0.0, -0.4560],
])
EXPECTED_EIGS = np.array([-0.9419, -0.4560, -0.0451, -0.0024])
EXPECTED_X_E = np.array([14.518, 64.2371, 813.008, 3.4])
EXPECTED_U_E = 6.0907
EXPECTED_T_C = 0.5467
EXPECTED_T_F = 1.8397


@pytest.fixture(scope="session")
def ref_demo():
    return PatientDemographics(sex="male", age=53.0, weight=77.0, height=177.0)


@pytest.fixture(scope="session")
def ref_params(ref_demo):
    return schnider_parameters(ref_demo)


@pytest.fixture(scope="session")
def ref_sys(ref_params):
    return assemble_system(ref_params)


@pytest.fixture(scope="session")
def ref_eq(ref_params):
    return equilibrium(ref_params)


@pytest.fixture(scope="session")
def ref_problem(ref_params):
    return build_problem(ref_params, u_max=U_MAX_REF)


@pytest.fixture(scope="session")
def bolus_results(ref_problem):
    """StrategyResults for the four bolus-first patterns."""
    return solve_all_patterns(ref_problem)


@pytest.fixture(scope="session")
def all_results(ref_problem):
    """StrategyResults for the full eight-pattern enumeration."""
    return solve_all_patterns(ref_problem, bolus_filter=False)


@pytest.fixture(scope="session")
def optimal(ref_problem):
    return solve_time_optimal(ref_problem)


@pytest.fixture(scope="session")
def certificate(ref_problem):
    """The shooting certificate from the default seed grid (one solve per run)."""
    return solve_shooting(ref_problem)
