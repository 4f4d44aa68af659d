"""Limited-memory BFGS minimizer with a strong Wolfe line search.

Works on any smooth objective supplied as a callback x -> (value, gradient).
Search directions come from the standard two-loop recursion over the m most
recent (s, y) pairs, seeded with the gamma = s.y / y.y scaling of the most
recent kept pair; pairs with non-positive curvature are skipped outright.
The line search brackets and zooms with safeguarded cubic interpolation
(the reference formulation of strong Wolfe search), starting every
quasi-Newton step at trial length 1.

Hitting the iteration cap is a legitimate terminal status, not an error:
the probe protocol caps at 100 iterations and reports results regardless.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np

from .errors import NumericalError

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]

_CURVATURE_SKIP = 1e-10


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 100
    memory: int = 10
    grad_tolerance: float = 1e-4
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_steps: int = 20

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class OptimizeOutcome:
    x_final: np.ndarray
    f_final: float
    grad_inf_norm: float
    iterations_used: int
    status: str  # converged | iteration_cap | line_search_failure


def _checked_eval(objective: Objective, x: np.ndarray) -> tuple[float, np.ndarray]:
    f, g = objective(x)
    f = float(f)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != x.shape:
        raise NumericalError(f"gradient shape {g.shape} != point shape {x.shape}")
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        err = NumericalError("objective returned non-finite value or gradient")
        err.iterate = x.copy()
        raise err
    return f, g


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic fitting (a, fa, da), (b, fb, db); None if the
    fit degenerates."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return None
    r = np.sqrt(disc)
    if a > b:
        r = -r
    denom = db - da + 2.0 * r
    if denom == 0.0:
        return None
    return b - (b - a) * (db + r - d1) / denom


class _LineSearchBudget(Exception):
    """Internal: evaluation budget exhausted before strong Wolfe held."""


class _Searcher:
    """Scalar strong Wolfe search along phi(t) = f(x + t*d)."""

    def __init__(self, objective, x, d, f0, g0, c1, c2, max_evals):
        self.objective = objective
        self.x = x
        self.d = d
        self.phi0 = f0
        self.dphi0 = float(g0 @ d)
        self.c1 = c1
        self.c2 = c2
        self.max_evals = max_evals
        self.evals = 0
        # best trial seen, for salvaging a failed search
        self.best = (0.0, f0, g0)

    def _phi(self, t: float):
        if self.evals >= self.max_evals:
            raise _LineSearchBudget
        self.evals += 1
        f, g = _checked_eval(self.objective, self.x + t * self.d)
        if f < self.best[1]:
            self.best = (t, f, g)
        return f, g, float(g @ self.d)

    def _wolfe(self, f, t, dphi) -> bool:
        return (
            f <= self.phi0 + self.c1 * t * self.dphi0
            and abs(dphi) <= -self.c2 * self.dphi0
        )

    def search(self):
        """Returns (t, f, g) satisfying strong Wolfe, or raises budget."""
        c1, c2 = self.c1, self.c2
        t_prev, f_prev, dphi_prev = 0.0, self.phi0, self.dphi0
        t = 1.0
        while True:
            f, g, dphi = self._phi(t)
            if f > self.phi0 + c1 * t * self.dphi0 or (t_prev > 0.0 and f >= f_prev):
                return self._zoom(t_prev, f_prev, dphi_prev, t, f, dphi)
            if abs(dphi) <= -c2 * self.dphi0:
                return t, f, g
            if dphi >= 0.0:
                return self._zoom(t, f, dphi, t_prev, f_prev, dphi_prev)
            t_prev, f_prev, dphi_prev = t, f, dphi
            t = 2.0 * t

    def _zoom(self, lo, f_lo, dphi_lo, hi, f_hi, dphi_hi):
        while True:
            width = abs(hi - lo)
            t = _cubic_min(lo, f_lo, dphi_lo, hi, f_hi, dphi_hi)
            # safeguard: fall back to bisection when the fit is degenerate
            # or lands within 10% of either end
            left, right = min(lo, hi), max(lo, hi)
            if t is None or not (left + 0.1 * width <= t <= right - 0.1 * width):
                t = 0.5 * (lo + hi)
            f, g, dphi = self._phi(t)
            if f > self.phi0 + self.c1 * t * self.dphi0 or f >= f_lo:
                hi, f_hi, dphi_hi = t, f, dphi
            else:
                if abs(dphi) <= -self.c2 * self.dphi0:
                    return t, f, g
                if dphi * (hi - lo) >= 0.0:
                    hi, f_hi, dphi_hi = lo, f_lo, dphi_lo
                lo, f_lo, dphi_lo = t, f, dphi


def minimize(
    objective: Objective,
    x0: np.ndarray,
    cfg: OptimizerConfig = OptimizerConfig(),
    trace: TextIO | None = None,
) -> OptimizeOutcome:
    """Minimize objective from x0; deterministic for identical inputs."""
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = _checked_eval(objective, x)
    history: list[tuple[np.ndarray, np.ndarray, float]] = []  # (s, y, 1/s.y)
    gamma = 1.0
    iters = 0

    while True:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= cfg.grad_tolerance:
            return OptimizeOutcome(x, f, gnorm, iters, "converged")
        if iters >= cfg.max_iterations:
            return OptimizeOutcome(x, f, gnorm, iters, "iteration_cap")

        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(history):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        q *= gamma
        for (s, y, rho), a in zip(history, reversed(alphas)):
            beta = rho * float(y @ q)
            q += (a - beta) * s
        d = -q

        if float(g @ d) >= 0.0:
            # stale curvature produced an ascent direction; restart
            history.clear()
            gamma = 1.0
            d = -g

        searcher = _Searcher(
            objective, x, d, f, g, cfg.wolfe_c1, cfg.wolfe_c2, cfg.max_line_search_steps
        )
        try:
            t, f_new, g_new = searcher.search()
        except _LineSearchBudget:
            bt, bf, bg = searcher.best
            if bf < f:
                x, f, g = x + bt * d, bf, bg
            gnorm = float(np.max(np.abs(g))) if g.size else 0.0
            status = "converged" if gnorm <= cfg.grad_tolerance else "line_search_failure"
            return OptimizeOutcome(x, f, gnorm, iters, status)

        x_new = x + t * d
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > _CURVATURE_SKIP * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            history.append((s, y, 1.0 / sy))
            if len(history) > cfg.memory:
                history.pop(0)
            gamma = sy / float(y @ y)

        x, f, g = x_new, f_new, g_new
        iters += 1
        if trace is not None:
            trace.write(
                f"iter {iters}: f={f:.12g} grad_inf={np.max(np.abs(g)):.3e} step={t:.3e}\n"
            )
