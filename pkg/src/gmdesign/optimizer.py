"""Projected stochastic ascent of the design objective, plus a deterministic
LMMSE-based designer used as a baseline.

The stochastic loop follows the classic recipe: draw an input pair, step
along the closed-form stochastic gradient, project back onto the feasible
set, stop when consecutive iterates are closer than a tolerance or an
iteration cap is hit.  Step sizes follow eps_r = eps0 / (1 + r / tau),
which is positive, vanishing and non-summable by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .constraints import Constraint
from .gradients import sample_gradients
from .mixture import RandomStream
from .model import LinearGMModel

__all__ = [
    "StepSchedule",
    "StoppingRule",
    "OptimizerTrace",
    "robbins_monro",
    "lmmse_design",
    "save_matrix",
    "load_matrix",
    "save_trace_csv",
]


@dataclass(frozen=True)
class StepSchedule:
    """eps_r = eps0 / (1 + r / tau); positive, nonincreasing, non-summable."""

    eps0: float
    tau: float

    def __post_init__(self):
        if self.eps0 <= 0 or self.tau <= 0:
            raise ValueError("eps0 and tau must be positive")

    def __call__(self, r: int) -> float:
        return self.eps0 / (1.0 + r / self.tau)


@dataclass(frozen=True)
class StoppingRule:
    """Stop when ||H_{r+1} - H_r||_F stays below the tolerance, or at the cap.

    The tolerance is evaluated every ``check_every`` iterations and is met
    only when every step since the previous check stayed below it; with
    single-sample stochastic updates an isolated small step says nothing,
    so a full window must be quiet.  The iteration cap is enforced
    unconditionally.
    """

    tolerance: float
    max_iterations: int
    check_every: int = 25

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.check_every < 1:
            raise ValueError("check_every must be at least 1")


@dataclass
class OptimizerTrace:
    """Per-iteration record of a projected stochastic ascent run."""

    iterates: list[NDArray] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    gradient_norms: list[float] = field(default_factory=list)
    candidate_residuals: list[float] = field(default_factory=list)
    stop_reason: str = "max-iterations"
    n_iterations: int = 0

    @property
    def final(self) -> NDArray:
        return self.iterates[-1]


def robbins_monro(
    build_model,
    constraint: Constraint,
    initial: NDArray,
    schedule: StepSchedule,
    stopping: StoppingRule,
    stream: RandomStream,
    batch_size: int = 1,
) -> OptimizerTrace:
    """Projected stochastic ascent over the feasible design parameters.

    Parameters
    ----------
    build_model : callable
        Maps a design parameter matrix to a :class:`LinearGMModel`; it must
        apply the constraint's parameter-to-transfer map itself (see
        ``Constraint.to_transfer``).
    initial : array_like
        Feasible starting parameter (residual <= 1e-10 required).
    batch_size : int
        Input pairs averaged per update.  One is the classic choice; larger
        batches trade iterations for per-step variance.

    Returns
    -------
    OptimizerTrace
        Iterate 0 is the (projected) initial parameter; entry r of the step
        and gradient lists describes the update from iterate r to r+1.
        Deterministic given (stream, configuration).
    """
    param = np.array(initial, dtype=float)
    if constraint.residual(param) > 1e-10:
        raise ValueError("initial design parameter is not feasible")
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")

    trace = OptimizerTrace()
    trace.iterates.append(param.copy())
    gen = stream.generator()
    window_max = 0.0

    for r in range(stopping.max_iterations):
        model: LinearGMModel = build_model(param)
        x, _ = model.signal.sample(gen, batch_size)
        noise, _ = model.noise.sample(gen, batch_size)
        grad_h = sample_gradients(model, x, noise).mean(axis=0)
        if not np.all(np.isfinite(grad_h)):
            raise ValueError("non-finite stochastic gradient; check the model scales")
        grad = constraint.gradient_to_param(grad_h, param)
        eps = schedule(r)
        candidate = param + eps * grad
        trace.candidate_residuals.append(constraint.residual(candidate))
        new_param = constraint.project(candidate)

        trace.step_sizes.append(eps)
        trace.gradient_norms.append(float(np.linalg.norm(grad)))
        trace.iterates.append(new_param.copy())
        trace.n_iterations = r + 1

        window_max = max(window_max, float(np.linalg.norm(new_param - param)))
        param = new_param
        if (r + 1) % stopping.check_every == 0:
            if window_max < stopping.tolerance:
                trace.stop_reason = "tolerance"
                return trace
            window_max = 0.0

    trace.stop_reason = "max-iterations"
    return trace


def lmmse_design(
    constraint: Constraint,
    signal_moments: tuple[NDArray, NDArray],
    noise_moments: tuple[NDArray, NDArray],
    initial: NDArray,
    max_iterations: int = 500,
    tolerance: float = 1e-10,
    restarts: int = 20,
    seed: int = 20210409,
) -> NDArray:
    """Deterministic projected-gradient minimizer of the LMMSE error.

    Minimizes tr(C_x - C_x H^T (H C_x H^T + C_n)^{-1} H C_x) over the
    constraint, with H derived from the design parameter.  Gradients are
    central finite differences of the closed-form objective; steps use
    backtracking, so the objective never increases along accepted steps.
    The search restarts from ``restarts`` fixed pseudo-random feasible
    points (plus ``initial``) and returns the best design found.
    """
    _, x_cov = signal_moments
    _, n_cov = noise_moments

    def objective(param: NDArray) -> float:
        h = constraint.to_transfer(param)
        hc = h @ x_cov
        cyy = hc @ h.T + n_cov
        try:
            sol = np.linalg.solve(0.5 * (cyy + cyy.T), hc)
        except np.linalg.LinAlgError:
            return float(np.trace(x_cov))
        return float(np.trace(x_cov) - np.trace(hc.T @ sol))

    initial = np.asarray(initial, dtype=float)
    gen = RandomStream(seed).generator()
    starts = [constraint.project(initial)]
    for _ in range(restarts):
        starts.append(constraint.project(gen.standard_normal(initial.shape)))

    best_param, best_value = None, np.inf
    for start in starts:
        param, value, _ = _projected_descent(
            objective, constraint, start, max_iterations, tolerance
        )
        if value < best_value:
            best_param, best_value = param, value
    return best_param


def _projected_descent(objective, constraint, start, max_iterations, tolerance):
    """Backtracking projected descent; accepted objective values never increase."""
    param = np.array(start, dtype=float)
    value = objective(param)
    accepted = [value]
    step = 1.0
    for _ in range(max_iterations):
        grad = _fd_gradient(objective, param)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            break
        improved = False
        trial_step = step
        for _ in range(40):
            candidate = constraint.project(param - trial_step * grad)
            cand_value = objective(candidate)
            if cand_value < value - 1e-14:
                moved = float(np.linalg.norm(candidate - param))
                param, value = candidate, cand_value
                accepted.append(value)
                step = trial_step * 2.0
                improved = True
                break
            trial_step *= 0.5
        if not improved:
            break
        if moved < tolerance:
            break
    return param, value, accepted


def _fd_gradient(objective, param, step=1e-7):
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        h = step * (1.0 + abs(param[ij]))
        probe = param.copy()
        probe[ij] = param[ij] + h
        f_plus = objective(probe)
        probe[ij] = param[ij] - h
        f_minus = objective(probe)
        grad[ij] = (f_plus - f_minus) / (2.0 * h)
    return grad


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------


def save_matrix(path, matrix: NDArray) -> None:
    """Write a matrix as plain text, one row per line, 17 significant digits."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="ascii") as fh:
        for row in matrix:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_matrix(path) -> NDArray:
    """Read a matrix written by :func:`save_matrix`."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split()])
    return np.asarray(rows, dtype=float)


def save_trace_csv(path, trace: OptimizerTrace) -> None:
    """Write per-iteration diagnostics as CSV."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["iteration", "step", "grad_norm", "constraint_residual"])
        for r in range(trace.n_iterations):
            writer.writerow(
                [
                    str(r),
                    format(trace.step_sizes[r], ".17g"),
                    format(trace.gradient_norms[r], ".17g"),
                    format(trace.candidate_residuals[r], ".17g"),
                ]
            )
