"""Weight estimators for each structure class.

Every estimator returns a :class:`WeightVector` that passes
:func:`verify_weight_constraint` against the p-values it was fit on.  All of
them read the data only through the indicators ``1{P_i > tau}``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .errors import InvalidInputError
from .optim import AdmmConfig, Constraint, admm_solve, objective
from .procedures import WeightVector, as_pvalues, verify_weight_constraint
from .structures import Graph, Grouping, StructureSpec, Variant

CLOSED_FORM_TOL = 1e-12


def _indicators(p, tau):
    if not 0.0 < tau < 1.0:
        raise InvalidInputError(f"tau must lie in (0, 1), got {tau}")
    return (as_pvalues(p) > tau).astype(float)


def _check_eps(epsilon):
    if not 0.0 < epsilon <= 1.0:
        raise InvalidInputError(f"epsilon must lie in (0, 1], got {epsilon}")


def _needs_fallback(h, tau):
    return h.sum() > h.size * (1.0 - tau)


def _finish(p, q, tau, method, **diag):
    q = np.asarray(q, dtype=float)
    ok = verify_weight_constraint(p, q, tau)
    if not ok:
        raise AssertionError(f"{method} produced weights violating the censoring constraint")
    return WeightVector(q, True, method, diag)


def _fallback(p, tau, method, **diag):
    return _finish(p, np.ones(np.size(p)), tau, method, fallback=True, **diag)


def constant_weights(p, tau, epsilon):
    """Storey's estimate truncated to ``[eps, 1]``, broadcast to every index."""
    _check_eps(epsilon)
    h = _indicators(p, tau)
    if _needs_fallback(h, tau):
        return _fallback(p, tau, "constant")
    pi0 = h.sum() / (h.size * (1.0 - tau))
    return _finish(p, np.full(h.size, min(1.0, max(epsilon, pi0))), tau, "constant", fallback=False)


def ordered_step_weights(p, tau, epsilon):
    """``(eps, ..., eps, 1, ..., 1)`` with as many leading ``eps`` as the constraint allows.

    Examples
    --------
    >>> ordered_step_weights([0.1, 0.1, 0.9, 0.9], 0.5, 0.5).q
    array([0.5, 0.5, 1. , 1. ])
    """
    _check_eps(epsilon)
    h = _indicators(p, tau)
    n = h.size
    if _needs_fallback(h, tau):
        return _fallback(p, tau, "ordered-step", K=0)
    head = np.concatenate([[0.0], np.cumsum(h)])
    cost = (head / epsilon + (head[-1] - head)) / (1.0 - tau)
    feasible = np.flatnonzero(cost <= n)
    K = int(feasible[-1]) if feasible.size else 0
    q = np.ones(n)
    q[:K] = epsilon
    return _finish(p, q, tau, "ordered-step", K=K, fallback=False)


def _admm_weights(p, tau, epsilon, constraint, admm_cfg, method, q0=None):
    h = _indicators(p, tau)
    if _needs_fallback(h, tau):
        return _fallback(p, tau, method)
    q, state = admm_solve(h, tau, epsilon, constraint, admm_cfg, q0=q0)
    return _finish(p, q, tau, method, fallback=False, iterations=state.iter,
                   primal_residual=state.primal_residual, dual_residual=state.dual_residual,
                   repair_shift=state.repair_shift, objective=objective(q, h, tau))


def ordered_mle_weights(p, tau, epsilon, admm_cfg=None):
    """Censored-likelihood fit over nondecreasing ``q`` in ``[eps, 1]``."""
    _check_eps(epsilon)
    return _admm_weights(p, tau, epsilon, Constraint.isotonic(), admm_cfg, "ordered-mle")


def grouped_closed_form(p, tau, grouping):
    """Per-group Storey estimates ``#{P_i > tau, i in G_k} / (n_k (1 - tau))``, one per group."""
    h = _indicators(p, tau)
    if grouping.n != h.size:
        raise InvalidInputError(f"grouping covers {grouping.n} indices, expected {h.size}")
    counts = np.bincount(grouping.codes, h, grouping.n_groups)
    return counts / (grouping.sizes * (1.0 - tau))


def grouped_weights(p, tau, epsilon, grouping, admm_cfg=None, method="grouped"):
    """Group-wise constant weights.

    When every group's Storey estimate already lies in ``[eps, 1]`` it is the
    constrained optimum and is used directly; otherwise the groups are fit
    jointly by ADMM.
    """
    _check_eps(epsilon)
    h = _indicators(p, tau)
    if grouping.n != h.size:
        raise InvalidInputError(f"grouping covers {grouping.n} indices, expected {h.size}")
    if _needs_fallback(h, tau):
        return _fallback(p, tau, method)
    qt = grouped_closed_form(p, tau, grouping)
    if np.all((qt >= epsilon - CLOSED_FORM_TOL) & (qt <= 1.0 + CLOSED_FORM_TOL)):
        qt = np.clip(qt, epsilon, 1.0)
        return _finish(p, qt[grouping.codes], tau, method, closed_form=True,
                       group_values=qt, fallback=False)
    out = _admm_weights(p, tau, epsilon, Constraint.groups(grouping), admm_cfg, method)
    diag = dict(out.diagnostics, closed_form=False)
    diag["group_values"] = np.bincount(grouping.codes, out.q, grouping.n_groups) / grouping.sizes
    return WeightVector(out.q, True, method, diag)


def tv_l1_weights(p, tau, epsilon, graph, m, admm_cfg=None):
    """Censored-likelihood fit over ``q`` in ``[eps, 1]`` with graph total variation at most ``m``."""
    _check_eps(epsilon)
    if m is None or not np.isfinite(m) or m < 0:
        raise InvalidInputError(f"TV budget m must be a nonnegative number, got {m}")
    if graph.n_nodes != np.size(p):
        raise InvalidInputError(f"graph has {graph.n_nodes} nodes, expected {np.size(p)}")
    return _admm_weights(p, tau, epsilon, Constraint.tv_l1(graph, m), admm_cfg, "tv-l1")


def sign_grouping(x, cdf=None):
    """Split two-sided tests by the sign of their statistic.

    Parameters
    ----------
    x : array_like
        Test statistics with a continuous null distribution symmetric about 0.
    cdf : callable, optional
        Null CDF ``F_0``.  Defaults to the standard normal.

    Returns
    -------
    grouping : Grouping
        Label ``1`` for ``x >= 0`` (zero goes to the positive group), ``-1`` otherwise.
    p : ndarray
        ``2 (1 - F_0(|x|))``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0 or not np.all(np.isfinite(x)):
        raise InvalidInputError("statistics must be a non-empty finite 1-d sequence")
    a = np.abs(x)
    if cdf is None:
        p = 2.0 * ndtr(-a)
    else:
        p = 2.0 * (1.0 - np.asarray(cdf(a), dtype=float))
    p = np.clip(p, 0.0, 1.0)
    labels = np.where(x >= 0, 1, -1).astype(np.int64)
    return Grouping(labels), p


def estimate_weights(p, tau, spec, admm_cfg=None):
    """Fit weights for the structure described by ``spec``.

    Returns ``1_n`` whenever more than ``n (1 - tau)`` p-values exceed ``tau``.
    """
    p = as_pvalues(p)
    if not isinstance(spec, StructureSpec):
        raise InvalidInputError("spec must be a StructureSpec")
    spec.check_size(p.size)
    v = spec.variant
    h = _indicators(p, tau)
    if _needs_fallback(h, tau):
        return _fallback(p, tau, v.value)
    if v is Variant.CONSTANT:
        return constant_weights(p, tau, spec.epsilon)
    if v is Variant.ORDERED_STEP:
        return ordered_step_weights(p, tau, spec.epsilon)
    if v is Variant.ORDERED_MLE:
        return ordered_mle_weights(p, tau, spec.epsilon, admm_cfg)
    if v in (Variant.GROUPED, Variant.SIGN_SPLIT):
        return grouped_weights(p, tau, spec.epsilon, spec.grouping, admm_cfg, method=v.value)
    if v is Variant.TV_L1:
        return tv_l1_weights(p, tau, spec.epsilon, spec.graph, spec.m, admm_cfg)
    raise InvalidInputError(f"no estimator fits the {v.value} class")


__all__ = [
    "AdmmConfig", "Graph", "Grouping", "constant_weights", "estimate_weights",
    "grouped_closed_form", "grouped_weights", "ordered_mle_weights",
    "ordered_step_weights", "sign_grouping", "tv_l1_weights",
]
