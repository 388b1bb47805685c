"""Shared problem statement: bang-bang control schedules and the minimum-time
reachability problem for the fast state pair (x1, x4).
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .lti import LTISystem, Trajectory, constant_input_propagator
from .patient import (BisParameters, EquilibriumState, PKPDParameters,
                      assemble_system, bis_inverse, equilibrium)

# compartments whose target values define induction completion
FAST_IDX = (0, 3)


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control: levels[i] on (breakpoints[i-1], breakpoints[i])."""

    levels: tuple
    breakpoints: tuple
    t_f: float

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(u) for u in self.levels))
        object.__setattr__(self, "breakpoints",
                           tuple(float(t) for t in self.breakpoints))
        if not self.t_f > 0:
            raise DomainError("t_f must be positive")
        if len(self.levels) != len(self.breakpoints) + 1:
            raise DomainError("need exactly one more level than breakpoints")
        knots = (0.0,) + self.breakpoints + (self.t_f,)
        if any(b >= a for a, b in zip(knots[1:], knots)):
            raise DomainError("breakpoints must be strictly increasing inside (0, t_f)")
        if any(a == b for a, b in zip(self.levels, self.levels[1:])):
            raise DomainError("adjacent levels must differ (null switch)")

    def u_at(self, t: float) -> float:
        """Right-continuous control value."""
        return self.levels[bisect.bisect_right(self.breakpoints, t)]

    def segments(self):
        """Yields (u, t_start, t_end) per constant piece."""
        knots = (0.0,) + self.breakpoints + (self.t_f,)
        for u, a, b in zip(self.levels, knots, knots[1:]):
            yield u, a, b

    def durations(self) -> np.ndarray:
        knots = np.concatenate([[0.0], self.breakpoints, [self.t_f]])
        return np.diff(knots)

    def as_dict(self) -> dict:
        return {"u_levels": list(self.levels),
                "breakpoints": list(self.breakpoints),
                "t_f": self.t_f}

    @classmethod
    def from_dict(cls, d: dict) -> "ControlSchedule":
        try:
            return cls(levels=tuple(d["u_levels"]),
                       breakpoints=tuple(d["breakpoints"]),
                       t_f=float(d["t_f"]))
        except DomainError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed schedule document: {exc}") from exc


@dataclass(frozen=True)
class TimeOptimalProblem:
    """Steer the fast state (x1, x4) from x0 to target_fast in minimum time
    with 0 <= u <= u_max."""

    sys: LTISystem
    target_fast: np.ndarray
    u_max: float
    x0: np.ndarray = None
    equilibrium: EquilibriumState | None = None

    def __post_init__(self):
        if not self.u_max > 0:
            raise DomainError("u_max must be positive")
        x0 = np.zeros(self.sys.n) if self.x0 is None else np.asarray(self.x0, float)
        target = np.asarray(self.target_fast, dtype=float)
        if target.shape != (2,):
            raise DomainError("target_fast must have two components (x1, x4)")
        if self.equilibrium is not None:
            ref = self.equilibrium.x_e[list(FAST_IDX)]
            if not np.allclose(target, ref, rtol=1e-9, atol=1e-9):
                raise DomainError("target_fast inconsistent with the equilibrium state")
        if np.allclose(target, x0[list(FAST_IDX)], rtol=0, atol=1e-12):
            raise DomainError("degenerate problem: target equals the initial fast state")
        x0.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "target_fast", target)

    @property
    def C(self) -> np.ndarray:
        """Selection matrix picking the fast components."""
        C = np.zeros((2, self.sys.n))
        C[0, FAST_IDX[0]] = 1.0
        C[1, FAST_IDX[1]] = 1.0
        return C

    def fast_residual(self, x) -> np.ndarray:
        return np.array([x[FAST_IDX[0]] - self.target_fast[0],
                         x[FAST_IDX[1]] - self.target_fast[1]])


def build_problem(params: PKPDParameters, u_max: float, bis_target: float = 50.0,
                  bis_params: BisParameters = BisParameters(),
                  x0=None) -> TimeOptimalProblem:
    """Assemble the system and the BIS-target equilibrium into a problem."""
    level = bis_inverse(bis_target, bis_params)
    eq = equilibrium(params, level)
    sys = assemble_system(params)
    return TimeOptimalProblem(sys=sys,
                              target_fast=eq.x_e[list(FAST_IDX)],
                              u_max=u_max, x0=x0, equilibrium=eq)


def sample_trajectory(sys: LTISystem, schedule: ControlSchedule, step: float,
                      x0=None) -> Trajectory:
    """Exact piecewise propagation sampled every `step` minutes.

    Sample times are i*step plus the exact final time; each value comes from
    closed-form propagation, never from an ODE solve.
    """
    if step <= 0:
        raise DomainError("step must be positive")
    x = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    n_whole = int(np.floor(schedule.t_f / step + 1e-9))
    times = [i * step for i in range(n_whole + 1)]
    if schedule.t_f - times[-1] > 1e-12:
        times.append(schedule.t_f)
    else:
        times[-1] = schedule.t_f
    props = {u: constant_input_propagator(sys, u) for u in set(schedule.levels)}
    # walk the merged grid of sample times and breakpoints carrying the state
    states = [x.copy()]
    controls = [schedule.u_at(0.0)]
    cursor = 0.0
    for t in times[1:]:
        for u, a, b in schedule.segments():
            if b <= cursor + 1e-15 or a >= t - 1e-15:
                continue
            lo, hi = max(a, cursor), min(b, t)
            if hi > lo:
                x = props[u](x, hi - lo)
        cursor = t
        states.append(x.copy())
        controls.append(schedule.u_at(t))
    return Trajectory(np.array(times), np.array(states), np.array(controls))
