"""Bang-bang strategy enumeration for the minimum-time induction problem.

Candidate controls alternate between 0 and u_max with at most n-1 switches.
The unknowns of each pattern are its segment durations; endpoints come from
closed-form propagation, so the root searches never touch an ODE solver.
A pattern is reported through its minimum-time representative: families of
roots (underdetermined patterns) are descended along the zero manifold, and
a representative whose segment collapses to length zero is rejected rather
than returned as a spurious distinct strategy.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError
from .lti import LTISystem, constant_input_propagator, kalman_rank
from .problem import ControlSchedule, TimeOptimalProblem

T_MAX_DEFAULT = 30.0
FEAS_TOL = 1e-9      # inf-norm residual bound for a feasible root
FLOOR_TOL = 1e-6     # best residual above this declares nonexistence
COLLAPSE_TOL = 1e-3  # segments shorter than this are vanishing
GRID_POINTS = 8      # multistart points per time dimension


@dataclass(frozen=True)
class Pattern:
    """Alternating on/off sequence, identified by its strategy number."""

    strategy: int
    starts_high: bool
    switches: int

    def levels(self, u_max: float) -> tuple:
        high = self.starts_high
        out = []
        for _ in range(self.switches + 1):
            out.append(float(u_max) if high else 0.0)
            high = not high
        return tuple(out)


def enumerate_patterns(start_level=None, max_switches: int = 3) -> list:
    """All alternating patterns with up to max_switches switches.

    start_level None returns every pattern; a positive value keeps only the
    bolus-first ones (odd strategy numbers), zero only the rest-first ones.
    """
    if max_switches < 0:
        raise DomainError("max_switches must be nonnegative")
    pats = []
    for k in range(max_switches + 1):
        pats.append(Pattern(strategy=2 * k + 1, starts_high=True, switches=k))
        pats.append(Pattern(strategy=2 * k + 2, starts_high=False, switches=k))
    if start_level is not None:
        want_high = bool(start_level)
        pats = [p for p in pats if p.starts_high == want_high]
    return sorted(pats, key=lambda p: p.strategy)


@dataclass(frozen=True)
class StrategyResult:
    strategy: int
    schedule: ControlSchedule | None
    residual: np.ndarray
    feasible: bool
    note: str = ""

    def __post_init__(self):
        r = np.asarray(self.residual, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "residual", r)
        if self.feasible:
            if self.schedule is None:
                raise DomainError("feasible result requires a schedule")
            if not np.linalg.norm(r, np.inf) < FEAS_TOL:
                raise DomainError("feasible result violates the residual bound")

    @property
    def t_f(self):
        return None if self.schedule is None else self.schedule.t_f


def schedule_endpoint(sys: LTISystem, schedule: ControlSchedule, x0=None) -> np.ndarray:
    """State at t_f under the schedule, by exact per-segment propagation."""
    x = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    props = {u: constant_input_propagator(sys, u) for u in set(schedule.levels)}
    for u, a, b in schedule.segments():
        x = props[u](x, b - a)
    return x


class _GapSolver:
    """Root finding over nonnegative segment durations for one problem."""

    def __init__(self, prob: TimeOptimalProblem, levels, t_max: float):
        self.prob = prob
        self.t_max = float(t_max)
        self.props = {u: constant_input_propagator(prob.sys, u) for u in set(levels)}

    def resid(self, levels, gaps) -> np.ndarray:
        x = self.prob.x0
        for u, d in zip(levels, gaps):
            if d > 0:
                x = self.props[u](x, d)
        return self.prob.fast_residual(x)

    def jac(self, levels, gaps) -> np.ndarray:
        J = np.zeros((2, len(gaps)))
        for j in range(len(gaps)):
            h = 1e-7 * max(abs(gaps[j]), 1e-2)
            gp, gm = gaps.copy(), gaps.copy()
            gp[j] += h
            gm[j] = max(gm[j] - h, 0.0)  # durations stay nonnegative
            J[:, j] = (self.resid(levels, gp) - self.resid(levels, gm)) / (gp[j] - gm[j])
        return J

    def _clip(self, gaps) -> np.ndarray:
        g = np.maximum(gaps, 0.0)
        total = g.sum()
        if total > self.t_max:
            g = g * (self.t_max / total)
        return g

    def starts(self, ndim: int) -> list:
        pts = [self.t_max * (i + 1) / GRID_POINTS for i in range(GRID_POINTS)]
        return self._simplex(pts, ndim)

    def newton_starts(self, ndim: int) -> list:
        # dyadic refinement of the horizon: Newton needs starts near the
        # sub-minute root scale, which a uniform horizon grid never reaches
        pts = sorted(self.t_max / 2 ** i for i in range(GRID_POINTS))
        return self._simplex(pts, ndim)

    @staticmethod
    def _simplex(pts, ndim: int) -> list:
        out = []
        for combo in itertools.combinations_with_replacement(pts, ndim):
            out.append(np.diff(np.concatenate([[0.0], combo])))
        return out

    def newton(self, levels, gaps0):
        """Damped Newton for the square one-switch case."""
        g = np.asarray(gaps0, dtype=float)
        r = self.resid(levels, g)
        for _ in range(100):
            if np.linalg.norm(r) < 1e-9:
                break
            try:
                step = np.linalg.solve(self.jac(levels, g), -r)
            except np.linalg.LinAlgError:
                break
            nr = np.linalg.norm(r)
            scale = 1.0
            while scale >= 1e-12:
                gn = self._clip(g + scale * step)
                rn = self.resid(levels, gn)
                if np.linalg.norm(rn) < nr:
                    break
                scale *= 0.5
            else:
                break  # bisection damping exhausted
            g, r = gn, rn
            if np.linalg.norm(scale * step) < 1e-12:
                break
        return g, r

    def lm_zero(self, levels, gaps0, maxit: int = 100):
        """Levenberg-Marquardt toward a residual zero, projected to the simplex."""
        g = np.asarray(gaps0, dtype=float)
        r = self.resid(levels, g)
        lam = 1e-3
        for _ in range(maxit):
            nr = np.linalg.norm(r)
            if nr < 1e-12:
                break
            J = self.jac(levels, g)
            improved = False
            for _ in range(30):
                try:
                    step = np.linalg.solve(J.T @ J + lam * np.eye(len(g)), -J.T @ r)
                except np.linalg.LinAlgError:
                    lam *= 10
                    continue
                gn = self._clip(g + step)
                rn = self.resid(levels, gn)
                if np.linalg.norm(rn) < nr:
                    g, r = gn, rn
                    lam = max(lam / 3, 1e-12)
                    improved = True
                    break
                lam *= 10
            if not improved:
                break
        return g, r

    def descend_time(self, levels, gaps, max_steps: int = 400):
        """Minimize total time along the zero manifold of an underdetermined
        pattern. Returns (gaps, "interior" | "boundary")."""
        g = gaps.copy()
        alpha = 0.05
        ones = np.ones(len(g))  # gradient of sum(gaps)
        for _ in range(max_steps):
            if g.min() < COLLAPSE_TOL:
                return g, "boundary"
            J = self.jac(levels, g)
            null = np.linalg.svd(J)[2][2:].T
            pg = null @ (null.T @ ones)
            if np.linalg.norm(pg) < 1e-9:
                return g, "interior"
            d = pg / np.linalg.norm(pg)
            total0 = g.sum()
            stepped = False
            while alpha > 1e-10:
                gc, rc = self.lm_zero(levels, np.maximum(g - alpha * d, 0.0), maxit=40)
                if np.linalg.norm(rc, np.inf) < FEAS_TOL and gc.sum() < total0 - 1e-14:
                    g = gc
                    alpha = min(alpha * 1.6, 1.0)
                    stepped = True
                    break
                alpha *= 0.5
            if not stepped:
                return g, "interior"
        return g, "interior"

    @staticmethod
    def collapse(levels, gaps):
        """Drop vanishing segments, merging neighbors left at the same level."""
        lv, gp = [], []
        for u, d in zip(levels, gaps):
            if d < COLLAPSE_TOL:
                continue
            if lv and lv[-1] == u:
                gp[-1] += d
            else:
                lv.append(u)
                gp.append(d)
        return lv, np.array(gp)


def _to_schedule(levels, gaps) -> ControlSchedule:
    cum = np.cumsum(gaps)
    return ControlSchedule(levels=tuple(levels),
                           breakpoints=tuple(cum[:-1]),
                           t_f=float(cum[-1]))


def solve_pattern(prob: TimeOptimalProblem, pattern: Pattern,
                  t_max: float = T_MAX_DEFAULT) -> StrategyResult:
    """Solve one pattern for its minimum-time representative.

    One-switch patterns are square systems handled by damped Newton; the
    others run multistart least squares over the ordered duration simplex.
    Families of roots are descended to their minimum total time, and a
    family whose minimum collapses a segment is reported infeasible.
    """
    levels = pattern.levels(prob.u_max)
    sol = _GapSolver(prob, levels, t_max)
    k = pattern.switches
    find = sol.newton if k == 1 else sol.lm_zero
    grid = sol.newton_starts(k + 1) if k == 1 else sol.starts(k + 1)
    best_nr = np.inf
    best_r = None
    zero = None
    for g0 in grid:
        g, r = find(levels, g0)
        nr = np.linalg.norm(r, np.inf)
        if nr < best_nr:
            best_nr, best_r = nr, r
        if nr < FEAS_TOL:
            zero = g
            break
    if zero is None:
        if best_nr > FLOOR_TOL:
            note = f"no root: best residual {best_nr:.3e} exceeds the {FLOOR_TOL:g} floor"
        else:
            note = f"no certified root: best residual {best_nr:.3e}"
        return StrategyResult(pattern.strategy, None, best_r, False, note)
    if k <= 1:
        if zero.min() < COLLAPSE_TOL:
            return StrategyResult(pattern.strategy, None, best_r, False,
                                  "root degenerate: a segment vanishes")
        return StrategyResult(pattern.strategy, _to_schedule(levels, zero),
                              sol.resid(levels, zero), True, "isolated root")
    g, kind = sol.descend_time(levels, zero)
    if kind == "interior":
        return StrategyResult(pattern.strategy, _to_schedule(levels, g),
                              sol.resid(levels, g), True,
                              "interior minimum of the solution family")
    lv2, gp2 = sol.collapse(levels, g)
    r_bound = sol.resid(levels, g)
    if len(lv2) > 0:
        g2, r2 = sol.lm_zero(lv2, gp2)
        if np.linalg.norm(r2, np.inf) < FEAS_TOL and g2.sum() <= g.sum() + 1e-9:
            note = (f"minimum-time representative collapses to a "
                    f"{len(lv2) - 1}-switch pattern (t_f = {g2.sum():.4f})")
            return StrategyResult(pattern.strategy, None, r_bound, False, note)
    return StrategyResult(pattern.strategy, None, r_bound, False,
                          "minimum-time search hit the vanishing-segment boundary")


def _validate(prob: TimeOptimalProblem) -> None:
    if kalman_rank(prob.sys) != prob.sys.n:
        raise DomainError("system is not controllable from the infusion input")
    if not prob.sys.real_spectrum:
        raise DomainError("bang-bang enumeration requires a real spectrum")


def solve_all_patterns(prob: TimeOptimalProblem, bolus_filter: bool = True,
                       t_max: float = T_MAX_DEFAULT) -> list:
    """StrategyResult for every candidate pattern, in strategy order."""
    _validate(prob)
    start = prob.u_max if bolus_filter else None
    pats = enumerate_patterns(start, prob.sys.n - 1)
    return [solve_pattern(prob, p, t_max) for p in pats]


def _select(results) -> StrategyResult:
    """Deterministic reduction: minimal t_f, ties to fewer switches."""
    feas = [r for r in results if r.feasible]
    if not feas:
        best = min((float(np.linalg.norm(r.residual, np.inf)) for r in results
                    if r.residual is not None and r.residual.size), default=np.inf)
        raise InfeasibleError(
            f"target unreachable under the control bound within the horizon "
            f"(best residual {best:.3e})")
    return min(feas, key=lambda r: (r.schedule.t_f, len(r.schedule.breakpoints),
                                    r.strategy))


def solve_time_optimal(prob: TimeOptimalProblem, bolus_filter: bool = True,
                       t_max: float = T_MAX_DEFAULT) -> StrategyResult:
    return _select(solve_all_patterns(prob, bolus_filter, t_max))
