"""Elementary p-value utilities."""

import math

import numpy as np
from scipy.special import ndtr, stdtr

from .errors import DegenerateInputError, InvalidInputError


def two_sided_z(z):
    """``2 (1 - Phi(|z|))``, computed as ``2 Phi(-|z|)`` to keep the tail accurate."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("z must be finite")
    out = 2.0 * ndtr(-np.abs(z))
    return float(out) if out.ndim == 0 else out


def one_sided_z(z):
    """Right-tailed ``1 - Phi(z)``."""
    z = np.asarray(z, dtype=float)
    out = ndtr(-z)
    return float(out) if out.ndim == 0 else out


def paired_t_test(a, b):
    """Two-sided paired t-test of ``a - b``.

    Returns
    -------
    t : float
        ``mean(d) / (sd(d) / sqrt(n))`` with the sample (n - 1) standard deviation.
    p : float
        Two-sided p-value on ``n - 1`` degrees of freedom.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError("paired samples must be 1-d and of equal length")
    n = a.size
    if n < 2:
        raise InvalidInputError("paired t-test needs at least 2 pairs")
    d = a - b
    sd = d.std(ddof=1)
    if not sd > 0:
        raise DegenerateInputError("differences have zero variance; t statistic undefined")
    t = d.mean() / (sd / math.sqrt(n))
    return float(t), float(2.0 * stdtr(n - 1, -abs(t)))


def paired_t_rows(A, B):
    """Row-wise :func:`paired_t_test` over two ``(k, n)`` arrays; returns ``(t, p)`` arrays."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[1] < 2:
        raise InvalidInputError("expected two equal-shape (k, n) arrays with n >= 2")
    D = A - B
    n = D.shape[1]
    sd = D.std(axis=1, ddof=1)
    if np.any(~(sd > 0)):
        bad = int(np.flatnonzero(~(sd > 0))[0])
        raise DegenerateInputError(f"row {bad} has zero-variance differences")
    t = D.mean(axis=1) / (sd / math.sqrt(n))
    return t, 2.0 * stdtr(n - 1, -np.abs(t))
