"""BH, Storey-BH and SABHA rejection rules.

All three share one step-up scan.  For hypothesis ``i`` with ``P_i <= tau``
the smallest integer ``k`` at which ``P_i`` clears its threshold
``alpha / q_i * k / n`` is computed up front; ``k_hat`` is then the largest
``k`` for which at least ``k`` of those entry points are ``<= k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

DEFAULT_PI0_FLOOR = 0.1


def as_pvalues(p):
    """Validate and return ``p`` as a 1-d float array."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise InvalidInputError("p-values must be a 1-d sequence")
    if p.size == 0:
        raise InvalidInputError("p-value vector is empty")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("p-values must be finite")
    if np.any((p < 0) | (p > 1)):
        bad = int(np.flatnonzero((p < 0) | (p > 1))[0])
        raise InvalidInputError(f"p-value at index {bad} is outside [0, 1]: {p[bad]!r}")
    return p


@dataclass(frozen=True)
class MethodConfig:
    alpha: float = 0.1
    tau: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 < self.tau < 1.0:
            raise InvalidInputError(f"tau must lie in (0, 1), got {self.tau}")


@dataclass(frozen=True)
class WeightVector:
    """Null-probability weights together with how they were produced.

    ``constraint_satisfied`` records whether the censoring constraint
    ``sum(1{P_i > tau} / (q_i (1 - tau))) <= n`` (or ``q = 1``) was checked
    against the p-values the weights were fit on.
    """

    q: np.ndarray
    constraint_satisfied: bool = False
    method: str = "user"
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or q.size == 0:
            raise InvalidInputError("weight vector must be 1-d and non-empty")
        if not np.all(np.isfinite(q)) or np.any((q <= 0) | (q > 1)):
            raise InvalidInputError("weights must lie in (0, 1]")
        object.__setattr__(self, "q", q)

    def __len__(self):
        return self.q.size

    @classmethod
    def ones(cls, n, constraint_satisfied=True, method="ones"):
        return cls(np.ones(n), constraint_satisfied, method)


@dataclass(frozen=True)
class RejectionResult:
    """Outcome of a step-up procedure.

    ``rejected`` holds 0-based indices in increasing order; ``thresholds`` is
    the per-index cut-off at ``k_hat`` (``min(alpha / q_i * k_hat / n, tau)``).
    """

    k_hat: int
    rejected: np.ndarray
    thresholds: np.ndarray
    method_name: str

    @property
    def n(self):
        return self.thresholds.size

    def mask(self):
        out = np.zeros(self.n, dtype=bool)
        out[self.rejected] = True
        return out


def _thresholds(alpha, q, k, n, tau):
    t = alpha / q * k / n
    return t if tau is None else np.minimum(t, tau)


def _step_up(p, alpha, q, tau, name):
    n = p.size
    eligible = np.ones(n, dtype=bool) if tau is None else p <= tau
    idx = np.flatnonzero(eligible)
    if idx.size:
        pe, qe = p[idx], q[idx]
        # Smallest integer k with pe <= alpha / qe * k / n, evaluated with the
        # very expression used for the final rejection so float ties agree.
        start = np.ceil(n * qe * pe / alpha)
        start = np.clip(start, 1, n + 1)
        lower = np.maximum(start - 1, 1)
        start = np.where((lower < start) & (pe <= alpha / qe * lower / n), lower, start)
        start = np.where((start <= n) & ~(pe <= alpha / qe * start / n), start + 1, start)
        counts = np.bincount(np.minimum(start, n + 1).astype(np.int64), minlength=n + 2)
        reach = np.cumsum(counts)[1 : n + 1]
        ok = np.flatnonzero(reach >= np.arange(1, n + 1))
        k_hat = int(ok[-1]) + 1 if ok.size else 0
    else:
        k_hat = 0
    thresholds = _thresholds(alpha, q, k_hat, n, tau)
    rejected = np.flatnonzero(p <= thresholds) if k_hat else np.array([], dtype=np.int64)
    return RejectionResult(k_hat, rejected, thresholds, name)


def bh(p, alpha):
    """Benjamini-Hochberg step-up at level ``alpha``."""
    p = as_pvalues(p)
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    return _step_up(p, float(alpha), np.ones(p.size), None, "bh")


def storey_pi0(p, tau):
    """Storey's null-proportion estimate ``min(1, #{P_i > tau} / (n (1 - tau)))``."""
    p = as_pvalues(p)
    if not 0.0 < tau < 1.0:
        raise InvalidInputError(f"tau must lie in (0, 1), got {tau}")
    return min(1.0, np.count_nonzero(p > tau) / (p.size * (1.0 - tau)))


def storey_bh(p, cfg, pi0_floor=DEFAULT_PI0_FLOOR):
    """Storey-BH: SABHA with constant weights ``max(pi0_floor, pi0_hat)``.

    Rejections are capped at ``cfg.tau``.
    """
    p = as_pvalues(p)
    if not 0.0 < pi0_floor <= 1.0:
        raise InvalidInputError(f"pi0_floor must lie in (0, 1], got {pi0_floor}")
    pi0 = max(pi0_floor, storey_pi0(p, cfg.tau))
    res = sabha(p, cfg, np.full(p.size, pi0))
    return RejectionResult(res.k_hat, res.rejected, res.thresholds, "storey-bh")


def sabha(p, cfg, q, method_name="sabha"):
    """Structure-adaptive BH with weights ``q`` (array or :class:`WeightVector`)."""
    p = as_pvalues(p)
    q = q.q if isinstance(q, WeightVector) else np.asarray(q, dtype=float)
    if q.shape != p.shape:
        raise InvalidInputError(f"weights have length {q.size}, p-values {p.size}")
    if not np.all(np.isfinite(q)) or np.any((q <= 0) | (q > 1)):
        raise InvalidInputError("weights must lie in (0, 1]")
    return _step_up(p, cfg.alpha, q, cfg.tau, method_name)


def constraint_sum(p, q, tau):
    """``sum(1{P_i > tau} / (q_i (1 - tau)))``."""
    above = np.asarray(p) > tau
    return float(np.sum(1.0 / np.asarray(q, dtype=float)[above]) / (1.0 - tau))


def verify_weight_constraint(p, q, tau):
    """True iff ``q`` is all ones or the censoring constraint holds (tolerance ``1e-9 n``)."""
    p = np.asarray(p, dtype=float)
    q = q.q if isinstance(q, WeightVector) else np.asarray(q, dtype=float)
    if q.shape != p.shape:
        raise InvalidInputError(f"weights have length {q.size}, p-values {p.size}")
    if np.all(q == 1.0):
        return True
    n = p.size
    return constraint_sum(p, q, tau) <= n + 1e-9 * n
