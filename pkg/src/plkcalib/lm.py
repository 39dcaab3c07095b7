"""Levenberg-Marquardt iteration over a manifold-valued state."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and damping schedule shared by every solver."""

    max_iterations: int = 100
    cost_tolerance: float = 1e-12
    step_tolerance: float = 1e-10
    initial_lambda: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    degeneracy_threshold: float = 1e-8

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        for name in ("cost_tolerance", "step_tolerance", "initial_lambda", "degeneracy_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.lambda_up > 1.0:
            raise ValueError("lambda_up must be > 1")
        if not 0.0 < self.lambda_down < 1.0:
            raise ValueError("lambda_down must lie in (0, 1)")


@dataclass
class LMOutcome:
    state: object
    cost: float
    initial_cost: float
    iterations: int
    converged: bool
    jacobian: np.ndarray
    residuals: np.ndarray
    cost_history: list = field(default_factory=list)


def levenberg_marquardt(evaluate, retract, x0, cfg: SolverConfig) -> LMOutcome:
    """Minimize ``sum(r**2)`` starting from ``x0``.

    ``evaluate(x)`` returns the residual vector and its Jacobian with respect
    to the local increment; ``retract(x, delta)`` applies an increment.  The
    cost sequence of accepted steps is non-increasing.  Each damped solve,
    accepted or not, counts as one iteration.
    """
    x = x0
    r, J = evaluate(x)
    cost = float(r @ r)
    history = [cost]
    initial_cost = cost
    lam = cfg.initial_lambda
    converged = False
    it = 0
    while it < cfg.max_iterations:
        it += 1
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1.0))
        try:
            delta = np.linalg.solve(A + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            lam *= cfg.lambda_up
            continue
        step = float(np.linalg.norm(delta))
        try:
            x_new = retract(x, delta)
            r_new, J_new = evaluate(x_new)
            cost_new = float(r_new @ r_new)
        except CalibrationError as exc:
            log.debug("rejecting step: %s", exc)
            cost_new = np.inf
        if cost_new <= cost:
            decrease = cost - cost_new
            x, r, J, cost = x_new, r_new, J_new, cost_new
            history.append(cost)
            lam = max(lam * cfg.lambda_down, 1e-15)
            if decrease <= cfg.cost_tolerance or step <= cfg.step_tolerance:
                converged = True
                break
        else:
            if step <= cfg.step_tolerance:
                converged = True
                break
            lam *= cfg.lambda_up
            if lam > 1e16:
                log.debug("damping exhausted at cost %.3e", cost)
                break
    return LMOutcome(x, cost, initial_cost, it, converged, J, r, history)


def singular_value_ratio(J) -> float:
    """``sigma_min / sigma_max`` over the columns of ``J``.

    Returns 0 when ``J`` has fewer rows than columns or is all zero.
    """
    J = np.atleast_2d(J)
    s = np.linalg.svd(J, compute_uv=False)
    if s.size < J.shape[1] or s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])
