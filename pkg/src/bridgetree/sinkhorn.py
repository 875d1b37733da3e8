"""Bimarginal entropic optimal transport (Schrödinger bridge) solver.

Solves  min_{M in Pi(mu1, mu2)}  <C + eta log M, M>,  equivalently the KL
projection  min eta * D_KL(M || K)  with Gibbs kernel K = exp(-C / eta).
The optimizer factors as M = K ⊙ (u1 ⊗ u2); we iterate the classical
alternating scalings in the log domain (log-sum-exp reductions), which is
algebraically identical to the multiplicative recursion but immune to the
underflow that raw exp(-C/eta) suffers for small eta.

The optimal value reported for an edge is

    sb_value = D_KL(M_opt || K) = sum_ij M_ij log(M_ij / K_ij),

which may be negative since K is unnormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .measures import DiscreteMeasure

COST_BUILD_KINDS = ("sqeuclidean", "euclidean", "matrix")


@dataclass(frozen=True, eq=False)
class PairwiseCost:
    """Nonnegative ground-cost matrix between two supports."""

    matrix: np.ndarray  # (n1, n2)
    kind: str = "matrix"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValidationError(f"cost matrix must be 2-d, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("cost matrix contains non-finite entries")
        if np.any(m < 0):
            i, j = np.argwhere(m < 0)[0]
            raise ValidationError(f"negative cost at ({i}, {j}): {m[i, j]}")
        m = np.ascontiguousarray(m)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Gibbs kernel K = exp(-C / eta), kept in log form.

    log_matrix = -C/eta is exact for any scale; the linear `matrix` view may
    underflow to 0 for entries with C/eta beyond ~745, so all KL arithmetic
    in this package consumes log_matrix.
    """

    log_matrix: np.ndarray
    eta: float

    @property
    def matrix(self) -> np.ndarray:
        return np.exp(self.log_matrix)

    @property
    def shape(self) -> tuple[int, int]:
        return self.log_matrix.shape


def build_cost(
    m1: DiscreteMeasure,
    m2: DiscreteMeasure,
    kind: str = "sqeuclidean",
    matrix=None,
) -> PairwiseCost:
    """Ground cost between two supports.

    kind "sqeuclidean" or "euclidean" computes c(x, y) from the support
    points; kind "matrix" wraps a caller-supplied (n1, n2) matrix.
    """
    if kind not in COST_BUILD_KINDS:
        raise ValidationError(f"unknown cost kind {kind!r}; expected one of {COST_BUILD_KINDS}")
    if kind == "matrix":
        if matrix is None:
            raise ValidationError("cost kind 'matrix' requires an explicit matrix")
        m = np.asarray(matrix, dtype=float)
        if m.shape != (m1.n, m2.n):
            raise ValidationError(
                f"cost matrix shape {m.shape} does not match supports ({m1.n}, {m2.n})"
            )
        return PairwiseCost(m, "matrix")
    if m1.dim != m2.dim:
        raise ValidationError(f"support dimensions differ: {m1.dim} vs {m2.dim}")
    diff = m1.support[:, None, :] - m2.support[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if kind == "euclidean":
        return PairwiseCost(np.sqrt(sq), kind)
    return PairwiseCost(sq, kind)


def gibbs_kernel(cost: PairwiseCost, eta: float) -> KernelMatrix:
    """K = exp(-C/eta) elementwise, stored as log K = -C/eta."""
    if not np.isfinite(eta) or eta <= 0:
        raise ValidationError(f"eta must be a positive finite real, got {eta}")
    return KernelMatrix(-cost.matrix / eta, float(eta))


def total_variation(p, q) -> float:
    """TV distance between two nonnegative vectors: half the L1 deviation."""
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass(frozen=True, eq=False)
class BimarginalCoupling:
    """Converged (or best-effort) transport plan with its dual scalings.

    plan = K ⊙ (u1 ⊗ u2) re-expanded to the full support sizes; log_u1 and
    log_u2 carry -inf at pruned zero-weight entries.  residual is the max
    over both marginals of the TV deviation after the last sweep;
    transport_cost = <C, plan> is kept as a diagnostic (two runs of
    different tolerance can be compared through it).
    """

    plan: np.ndarray
    log_u1: np.ndarray
    log_u2: np.ndarray
    iterations: int
    residual: float
    converged: bool
    transport_cost: float
    residual_history: tuple[float, ...] | None = None


def sinkhorn_solve(
    m1: DiscreteMeasure,
    m2: DiscreteMeasure,
    cost: PairwiseCost,
    eta: float,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    record_history: bool = False,
) -> BimarginalCoupling:
    """Alternating KL projections onto the two marginal constraints.

    One sweep updates u1 then u2 (cyclic order).  Stops when the larger of
    the two marginal TV residuals drops to tol; on max_iter the last iterate
    is returned with converged=False and the caller decides.
    """
    if cost.shape != (m1.n, m2.n):
        raise ValidationError(
            f"cost shape {cost.shape} does not match marginal sizes ({m1.n}, {m2.n})"
        )
    if not np.isfinite(eta) or eta <= 0:
        raise ValidationError(f"eta must be a positive finite real, got {eta}")
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")

    keep1 = m1.weights > 0
    keep2 = m2.weights > 0
    mu = m1.weights[keep1]
    nu = m2.weights[keep2]
    log_k = -cost.matrix[np.ix_(keep1, keep2)] / eta
    log_mu = np.log(mu)
    log_nu = np.log(nu)

    f = np.zeros(mu.size)
    g = np.zeros(nu.size)
    history: list[float] = []
    iterations = 0
    residual = np.inf
    converged = False
    # After the g half of a sweep the column marginal equals nu by
    # construction, so the sweep's residual is the row deviation.  That row
    # deviation is exp(f) * exp(lse_rows), the very log-sum-exp the next f
    # update needs, so each sweep costs two reductions, not four.
    while iterations < max_iter:
        lse_rows = logsumexp(log_k + g[None, :], axis=1)
        if iterations > 0:
            residual = total_variation(np.exp(f + lse_rows), mu)
            if record_history:
                history.append(residual)
            if residual <= tol:
                converged = True
                break
        f = log_mu - lse_rows
        g = log_nu - logsumexp(log_k + f[:, None], axis=0)
        iterations += 1
    if not converged:
        residual = total_variation(np.exp(f + logsumexp(log_k + g[None, :], axis=1)), mu)
        if record_history:
            history.append(residual)
        converged = residual <= tol

    plan_small = np.exp(f[:, None] + log_k + g[None, :])
    plan = np.zeros((m1.n, m2.n))
    plan[np.ix_(keep1, keep2)] = plan_small
    log_u1 = np.full(m1.n, -np.inf)
    log_u1[keep1] = f
    log_u2 = np.full(m2.n, -np.inf)
    log_u2[keep2] = g
    return BimarginalCoupling(
        plan=plan,
        log_u1=log_u1,
        log_u2=log_u2,
        iterations=iterations,
        residual=float(residual),
        converged=converged,
        transport_cost=float((cost.matrix * plan).sum()),
        residual_history=tuple(history) if record_history else None,
    )


def sb_value(coupling: BimarginalCoupling, kernel: KernelMatrix) -> float:
    """Optimal value D_KL(plan || K) = sum plan * log(plan / K).

    Entries with zero plan mass contribute nothing (0 log 0 = 0).
    """
    plan = coupling.plan
    if plan.shape != kernel.shape:
        raise ValidationError(f"plan shape {plan.shape} != kernel shape {kernel.shape}")
    mask = plan > 0
    p = plan[mask]
    return float((p * (np.log(p) - kernel.log_matrix[mask])).sum())


def kl_divergence(p, q) -> float:
    """D_KL(P || Q) = sum P log(P/Q) over arrays of equal shape.

    Requires Q > 0 wherever P > 0; a violation means the divergence is
    infinite and raises ValidationError rather than returning a sentinel.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"shape mismatch: {p.shape} vs {q.shape}")
    if np.any(p < 0):
        raise ValidationError("P must be nonnegative")
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise ValidationError("KL divergence is infinite: P carries mass where Q vanishes")
    pm = p[mask]
    return float((pm * np.log(pm / q[mask])).sum())
