"""Discrete optimal transport between point clouds with squared Euclidean cost.

:func:`sinkhorn` solves the entropy-regularized problem in the log domain and
:func:`barycentric_map` turns its coupling into one target per source point.
:func:`exact_assignment` is a brute-force solver for tiny balanced problems,
kept deliberately naive so it can serve as an oracle for the other two.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from . import kernels
from .domain import FloatArray, as_positions

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000
EXACT_MAX_N = 8
DEAD_ROW = 1e-300
SCALING_FACTOR = 0.5
STAGE_TOL = 1e-4


class NonConvergenceWarning(RuntimeWarning):
    """Sinkhorn hit its iteration budget with marginal error above ``tol``."""


class SizeLimitError(ValueError):
    pass


def cost_matrix(source: ArrayLike, target: ArrayLike) -> FloatArray:
    """``C[i, j] = |source_i - target_j|^2``."""
    x = np.ascontiguousarray(as_positions(source))
    y = np.ascontiguousarray(as_positions(target))
    if len(x) == 0 or len(y) == 0:
        raise ValueError("cost_matrix needs nonempty point clouds")
    return kernels.sq_euclidean(x, y)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    coupling: FloatArray
    source_marginal: FloatArray
    target_marginal: FloatArray
    epsilon: float
    f: FloatArray
    g: FloatArray
    iterations_used: int
    marginal_residual: float
    converged: bool
    residual_history: FloatArray

    @property
    def shape(self) -> tuple[int, int]:
        return self.coupling.shape


def uniform_marginal(n: int) -> FloatArray:
    return np.full(n, 1.0 / n)


def _marginal_error(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(max(np.max(np.abs(P.sum(axis=1) - a)), np.max(np.abs(P.sum(axis=0) - b))))


def _annealing_schedule(C: np.ndarray, epsilon: float) -> list[float]:
    eps = [float(epsilon)]
    top = float(C.max())
    while eps[-1] < top:
        eps.append(eps[-1] / SCALING_FACTOR)
    return eps[::-1]


def sinkhorn(
    a: ArrayLike,
    b: ArrayLike,
    C: ArrayLike,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    eps_scaling: bool = True,
) -> TransportPlan:
    """Entropic OT coupling between marginals ``a`` and ``b`` under cost ``C``.

    The plan is ``P[i, j] = a_i b_j exp((f_i + g_j - C[i, j]) / epsilon)``;
    the potentials are updated alternately by exact log-sum-exp minimization,
    so no kernel matrix ``exp(-C / epsilon)`` is ever formed and small
    ``epsilon`` does not underflow. Iteration stops once the worst row or
    column sum misses its marginal by at most ``tol``.

    With ``eps_scaling`` the potentials are warm-started by solving a short
    sequence of problems at geometrically decreasing regularization, from the
    largest cost entry down to ``epsilon``. Intermediate stages stop at a
    looser tolerance. The fixed point is unchanged; only the iteration count
    drops (sharply so for small balanced problems). ``max_iter`` bounds the
    total number of sweeps over all stages and ``residual_history`` covers
    the final stage only.

    If the budget runs out first, a :class:`NonConvergenceWarning` is issued
    and the unconverged plan is returned with ``converged=False``.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape != (a.size, b.size):
        raise ValueError(f"cost shape {C.shape} does not match marginals ({a.size}, {b.size})")
    if not (np.all(a > 0) and np.all(b > 0)):
        raise ValueError("marginals must be strictly positive")
    if abs(a.sum() - 1.0) > 1e-9 or abs(b.sum() - 1.0) > 1e-9:
        raise ValueError("marginals must each sum to 1")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    log_a = np.log(a)
    log_b = np.log(b)
    f = np.zeros(a.size)
    g = np.zeros(b.size)
    schedule = _annealing_schedule(C, epsilon) if eps_scaling else [float(epsilon)]
    budget = int(max_iter)
    iters = 0
    for stage_eps in schedule[:-1]:
        history = np.full(budget + 1, np.nan)
        iters += kernels.sinkhorn_log(C, log_a, log_b, stage_eps, max(tol, STAGE_TOL), budget - iters, f, g, history)
        if iters >= budget:
            break
    history = np.full(budget - iters + 1, np.nan)
    last = kernels.sinkhorn_log(C, log_a, log_b, float(epsilon), float(tol), budget - iters, f, g, history)
    iters += last

    with np.errstate(under="ignore"):
        P = np.exp(log_a[:, None] + log_b[None, :] + (f[:, None] + g[None, :] - C) / epsilon)
    residual = _marginal_error(P, a, b)
    converged = residual <= tol
    if not converged:
        warnings.warn(
            f"Sinkhorn stopped after {iters} iterations with marginal error {residual:.3e} > tol {tol:.1e}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    history = history[: last + 1]
    for arr in (P, a, b, f, g, history):
        arr.setflags(write=False)
    return TransportPlan(
        coupling=P,
        source_marginal=a,
        target_marginal=b,
        epsilon=float(epsilon),
        f=f,
        g=g,
        iterations_used=int(iters),
        marginal_residual=residual,
        converged=converged,
        residual_history=history,
    )


@dataclass(frozen=True, eq=False)
class AssignmentTargets:
    """One assigned position per resource particle, aligned with particle indices."""

    targets: FloatArray

    def __post_init__(self) -> None:
        t = np.array(as_positions(self.targets), copy=True)
        t.setflags(write=False)
        object.__setattr__(self, "targets", t)

    def __len__(self) -> int:
        return self.targets.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.targets if dtype is None else self.targets.astype(dtype)


def barycentric_map(plan: TransportPlan, target: ArrayLike) -> AssignmentTargets:
    """Conditional mean of the target cloud under each row of the plan.

    Results are clamped to the bounding box of ``target``; in exact
    arithmetic they already lie there, the clamp only removes rounding.
    """
    y = as_positions(target)
    P = plan.coupling
    if P.shape[1] != y.shape[0]:
        raise ValueError(f"plan has {P.shape[1]} columns but target has {y.shape[0]} points")
    mass = P.sum(axis=1)
    if np.any(mass < DEAD_ROW):
        raise ValueError("transport plan has a row with no mass; barycentric target undefined")
    out = (P @ y) / mass[:, None]
    return AssignmentTargets(np.clip(out, y.min(axis=0), y.max(axis=0)))


def plan_cost(plan: TransportPlan, C: ArrayLike) -> float:
    """``sum(P * C)``. An upward-biased estimate of W2^2 for ``epsilon > 0``."""
    C = np.asarray(C, dtype=np.float64)
    if C.shape != plan.shape:
        raise ValueError(f"cost shape {C.shape} does not match plan shape {plan.shape}")
    return float(np.sum(plan.coupling * C))


def exact_assignment(source: ArrayLike, target: ArrayLike) -> tuple[tuple[int, ...], float]:
    """Optimal matching of two equal-size uniform clouds by enumerating all permutations.

    Returns ``(sigma, cost)`` where ``source[i]`` is matched to
    ``target[sigma[i]]`` and ``cost`` is the mean squared distance. Ties go
    to the lexicographically smallest permutation.
    """
    x = as_positions(source)
    y = as_positions(target)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError(f"clouds must have equal size, got {n} and {y.shape[0]}")
    if n < 1:
        raise ValueError("clouds must be nonempty")
    if n > EXACT_MAX_N:
        raise SizeLimitError(f"exhaustive assignment is limited to N <= {EXACT_MAX_N}, got {n}")
    C = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=-1)
    rows = range(n)
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(n)):
        total = sum(C[i, perm[i]] for i in rows)
        if total < best_cost:
            best, best_cost = perm, total
    return best, float(best_cost) / n
