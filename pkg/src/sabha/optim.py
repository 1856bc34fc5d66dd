"""Constrained maximum-likelihood weights via linearised ADMM.

The problem solved is

    minimise    -sum_i [ h_i log(q_i (1 - tau)) + (1 - h_i) log(1 - q_i (1 - tau)) ]
    subject to  eps <= q <= 1,  M q in S,  sum_i h_i / (q_i (1 - tau)) <= n

with ``h_i = 1{P_i > tau}``.  ``(M, S)`` comes from a :class:`Constraint`:
identity with the monotone cone (ordered weights), identity with the
group-constant subspace (grouped weights), or the graph incidence matrix
with an l1 ball (total-variation weights).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from . import _kernels as K
from .errors import ConvergenceError, InvalidInputError
from .structures import Graph, Grouping

log = logging.getLogger(__name__)

NORM_SAFETY = 1.01
SNAP_TO_ONE = 1e-6
POWER_ITERATIONS = 200
_EMPTY_INT = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True)
class AdmmConfig:
    """Solver settings.

    ``eta`` must dominate ``||M||^2``; leave it as ``None`` to have
    :func:`admm_solve` estimate the norm with :func:`operator_norm_sq`.
    """

    step_alpha: float = 1.0
    step_beta: float = 1.0
    eta: Optional[float] = None
    max_iter: int = 5000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7

    def __post_init__(self):
        if not (self.step_alpha > 0 and self.step_beta > 0):
            raise InvalidInputError("ADMM penalties must be positive")
        if self.eta is not None and not self.eta > 0:
            raise InvalidInputError("eta must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")
        if not (self.tol_primal > 0 and self.tol_dual > 0):
            raise InvalidInputError("tolerances must be positive")


@dataclass
class AdmmState:
    q: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    iter: int
    primal_residual: float
    dual_residual: float
    converged: bool
    eta: float
    objective_trace: np.ndarray = field(repr=False)
    repair_shift: float = 0.0


@dataclass(frozen=True)
class Constraint:
    """The ``(M, S)`` pair of the structure constraint ``M q in S``."""

    kind: int
    grouping: Optional[Grouping] = None
    graph: Optional[Graph] = None
    radius: float = 0.0

    @classmethod
    def box(cls):
        return cls(K.KIND_BOX)

    @classmethod
    def isotonic(cls):
        return cls(K.KIND_ISOTONIC)

    @classmethod
    def groups(cls, grouping):
        return cls(K.KIND_GROUP, grouping=grouping)

    @classmethod
    def tv_l1(cls, graph, m):
        if m < 0:
            raise InvalidInputError(f"TV budget must be nonnegative, got {m}")
        return cls(K.KIND_L1, graph=graph, radius=float(m))

    def rows(self, n):
        return self.graph.n_edges if self.kind == K.KIND_L1 else n

    def operator(self, n):
        """``M`` as a scipy ``LinearOperator``."""
        if self.kind == K.KIND_L1:
            src, dst = self.graph.src, self.graph.dst
            return LinearOperator(
                (self.graph.n_edges, n),
                matvec=lambda q: K.apply_m(K.KIND_L1, np.ravel(q).astype(float), src, dst),
                rmatvec=lambda u: K.apply_mt(K.KIND_L1, np.ravel(u).astype(float), src, dst, n),
                dtype=float,
            )
        return aslinearoperator(np.eye(n))

    def project(self, z):
        return K.proj_m(self.kind, np.asarray(z, dtype=float), *self._kernel_args()[2:])

    def violation(self, q):
        """``||M q - Proj_S(M q)||_inf``."""
        mq = K.apply_m(self.kind, np.asarray(q, dtype=float), *self._kernel_args()[:2])
        return K.maxabs(mq - self.project(mq))

    def _kernel_args(self):
        src = self.graph.src if self.graph is not None else _EMPTY_INT
        dst = self.graph.dst if self.graph is not None else _EMPTY_INT
        if self.grouping is not None:
            labels, n_groups = self.grouping.codes, self.grouping.n_groups
        else:
            labels, n_groups = _EMPTY_INT, 1
        return src, dst, labels, n_groups, float(self.radius)

    def polish(self, q, epsilon):
        """Snap a near-feasible ``q`` exactly into ``{eps <= q <= 1, Mq in S}``."""
        q = np.asarray(q, dtype=float)
        if self.kind in (K.KIND_ISOTONIC, K.KIND_GROUP):
            q = self.project(q)
        q = np.clip(q, epsilon, 1.0)
        # Optima often sit exactly at q_i = 1; land there so the censoring
        # constraint is not left short by solver tolerance.  Snapping a top
        # level set keeps both monotone and group-constant vectors in class.
        q[q >= 1.0 - SNAP_TO_ONE] = 1.0
        if self.kind == K.KIND_L1:
            tv = self.graph.total_variation(q)
            if tv > self.radius:
                # shrinking toward max(q) scales every edge difference alike and
                # only raises coordinates, so the censoring sum cannot grow
                top = q.max()
                q = top - (self.radius / tv) * (top - q)
        return q


def operator_norm_sq(M, n):
    """Upper estimate of ``||M||^2``: power iteration on ``M^T M``, times 1.01."""
    op = aslinearoperator(M)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(POWER_ITERATIONS):
        w = op.rmatvec(op.matvec(v))
        est = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return NORM_SAFETY * est


def q_update(w, indicators, tau, epsilon, scale):
    """Per-coordinate minimiser of ``negloglik(q) + scale/2 ||q - w||^2`` over ``[eps, 1]``."""
    if not scale > 0:
        raise InvalidInputError("scale must be positive")
    return K.q_update(np.asarray(w, dtype=float), np.asarray(indicators, dtype=float),
                      float(tau), float(epsilon), float(scale))


def proj_isotonic(z):
    """Nondecreasing least-squares fit (pool adjacent violators)."""
    return K.pava(np.ascontiguousarray(z, dtype=float))


def proj_group_mean(z, grouping):
    z = np.asarray(z, dtype=float)
    return K.group_mean(z, grouping.codes, grouping.n_groups)


def proj_l1_ball(z, m):
    if m < 0:
        raise InvalidInputError(f"radius must be nonnegative, got {m}")
    return K.proj_l1(np.asarray(z, dtype=float), float(m))


def solve_cubic_branch(x, lam):
    """The root ``t > max(x, 0)`` of ``t**3 - t**2 x = lam``."""
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    return float(K.cubic_branch(np.array([float(x)]), np.array([float(lam)]))[0])


def proj_feasible_G(z, indicators, tau, n=None):
    """Projection onto ``{y >= 0 : sum(h_i / (y_i (1 - tau))) <= n}``."""
    z = np.asarray(z, dtype=float)
    n = z.size if n is None else n
    y, _ = K.proj_feasible(z, np.asarray(indicators, dtype=float), n * (1.0 - tau), 0.0)
    return y


def objective(q, indicators, tau):
    """Negative censored log-likelihood (the quantity ADMM minimises)."""
    return float(K.neg_loglik(np.asarray(q, dtype=float), np.asarray(indicators, dtype=float), tau))


def repair_feasibility(q, indicators, tau):
    """Move ``q`` toward ``1_n`` just enough to satisfy the censoring constraint.

    Returns ``(q_repaired, t)`` with ``q_repaired = (1 - t) q + t``.  The
    convex combination keeps ``q`` inside every structured class (each
    contains ``1_n``).  ``t = 0`` when ``q`` already satisfies it to within
    ``1e-9 n``.
    """
    q = np.asarray(q, dtype=float)
    h = np.asarray(indicators, dtype=float) > 0.5
    n = q.size
    target = n * (1.0 - tau)

    def excess(t):
        return np.sum(1.0 / (q[h] + t * (1.0 - q[h]))) - target

    if not h.any() or excess(0.0) <= 1e-9 * n * (1.0 - tau):
        return q, 0.0
    if excess(1.0) > 0:
        raise InvalidInputError("constraint infeasible even at q = 1")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    return q + hi * (1.0 - q), hi


def admm_solve(indicators, tau, epsilon, constraint, cfg=None, q0=None):
    """Fit the constrained likelihood; returns ``(q, AdmmState)``.

    ``q`` is exactly feasible: inside the box, inside the structure class
    (snapped by :meth:`Constraint.polish`), and satisfying the censoring
    constraint (via :func:`repair_feasibility`).

    Raises :class:`ConvergenceError` when ``max_iter`` is hit with residuals
    above tolerance; the partial state is attached to the exception.
    """
    cfg = AdmmConfig() if cfg is None else cfg
    h = np.ascontiguousarray(indicators, dtype=float)
    n = h.size
    target = n * (1.0 - tau)
    if h.sum() > target:
        raise InvalidInputError("infeasible problem: more exceedances than n (1 - tau)")
    if not 0.0 < epsilon <= 1.0:
        raise InvalidInputError(f"epsilon must lie in (0, 1], got {epsilon}")

    norm_sq = operator_norm_sq(constraint.operator(n), n) if constraint.kind == K.KIND_L1 else NORM_SAFETY
    if cfg.eta is None:
        eta = norm_sq
    else:
        if cfg.eta < norm_sq / NORM_SAFETY:
            raise InvalidInputError(f"eta={cfg.eta} is below ||M||^2 ~ {norm_sq / NORM_SAFETY:.6g}")
        eta = float(cfg.eta)

    if q0 is None:
        q0 = np.full(n, min(1.0, max(epsilon, h.sum() / target)))
    src, dst, labels, n_groups, radius = constraint._kernel_args()
    q, x, y, u, v, it, rp, rd, trace = K.admm_kernel(
        h, float(tau), float(epsilon), constraint.kind, src, dst, labels, n_groups, radius,
        float(cfg.step_alpha), float(cfg.step_beta), float(eta), int(cfg.max_iter),
        float(cfg.tol_primal), float(cfg.tol_dual), np.asarray(q0, dtype=float),
    )
    converged = rp <= cfg.tol_primal and rd <= cfg.tol_dual
    state = AdmmState(q, x, y, u, v, int(it), float(rp), float(rd), converged, eta, trace)
    if not converged:
        raise ConvergenceError(
            f"ADMM stopped after {it} iterations with primal residual {rp:.3g} "
            f"and dual residual {rd:.3g}", state)
    log.debug("ADMM converged in %d iterations (rp=%.2e, rd=%.2e)", it, rp, rd)
    q = constraint.polish(q, epsilon)
    q, shift = repair_feasibility(q, h, tau)
    state.q = q
    state.repair_shift = shift
    return q, state
