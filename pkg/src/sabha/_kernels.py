"""Numeric kernels behind the weight solvers.

Everything here is written in the subset of numpy that numba compiles, so the
same source serves both backends (see ``_accel``).  Arrays are float64 unless
noted; index arrays are int64.  Nothing in this module validates input.
"""

import numpy as np

from ._accel import jit

# Constraint kinds understood by ``admm_kernel``.
KIND_BOX = 0  # M = I, no structure beyond the box
KIND_ISOTONIC = 1  # M = I, nondecreasing
KIND_GROUP = 2  # M = I, constant within groups
KIND_L1 = 3  # M = incidence matrix, ||Mq||_1 <= radius


@jit
def maxabs(a):
    if a.size == 0:
        return 0.0
    return np.max(np.abs(a))


@jit
def pava(z):
    """Isotonic (nondecreasing) least-squares fit of ``z``, unit weights."""
    n = z.shape[0]
    vals = np.empty(n)
    wts = np.empty(n)
    nb = 0
    for i in range(n):
        vals[nb] = z[i]
        wts[nb] = 1.0
        nb += 1
        while nb > 1 and vals[nb - 2] > vals[nb - 1]:
            w = wts[nb - 2] + wts[nb - 1]
            vals[nb - 2] = (wts[nb - 2] * vals[nb - 2] + wts[nb - 1] * vals[nb - 1]) / w
            wts[nb - 2] = w
            nb -= 1
    out = np.empty(n)
    pos = 0
    for b in range(nb):
        cnt = int(wts[b])
        for j in range(cnt):
            out[pos + j] = vals[b]
        pos += cnt
    return out


@jit
def group_mean(z, labels, n_groups):
    sums = np.bincount(labels, z, n_groups)
    counts = np.bincount(labels, np.ones(z.shape[0]), n_groups)
    means = sums / np.maximum(counts, 1.0)
    return means[labels]


@jit
def proj_l1(z, radius):
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (sort-based, exact)."""
    a = np.abs(z)
    if a.sum() <= radius:
        return z.copy()
    if radius <= 0.0:
        return np.zeros_like(z)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.shape[0] + 1)
    active = np.nonzero(u - (css - radius) / j > 0.0)[0]
    # the first entry always qualifies in exact arithmetic; rounding can lose it for tiny radii
    rho = active[-1] if active.shape[0] > 0 else 0
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(z) * np.maximum(a - theta, 0.0)


@jit
def cubic_branch(x, lam):
    """Elementwise root ``t > max(x, 0)`` of ``t**3 - x * t**2 = lam`` (lam > 0).

    Cardano for the one-real-root case, the trigonometric form for three real
    roots, then safeguarded Newton on ``g(t) = t**2 * (t - x) - lam``.  ``g``
    is increasing and convex to the right of ``max(x, 0)``, so after at most
    one overshoot Newton descends monotonically onto the root.
    """
    x3 = x * x * x / 27.0
    disc = lam * (lam / 4.0 + x3)
    one_root = disc >= 0.0
    a = x3 + lam / 2.0
    c = np.cbrt(a + np.sqrt(np.maximum(disc, 0.0)))
    c = np.where(c > 0.0, c, 1.0)
    r = np.where(one_root, 1.0, -x / 3.0)
    arg = np.minimum(1.0, np.maximum(-1.0, a / (r * r * r)))
    s = np.where(one_root, c + x * x / (9.0 * c), 2.0 * r * np.cos(np.arccos(arg) / 3.0))
    lo = np.maximum(x, 0.0)
    t = s + x / 3.0
    t = np.where(t > lo, t, lo + np.maximum(lo, 1.0) * 1e-15 + np.cbrt(lam) * 1e-8)
    for _ in range(60):
        g = t * t * (t - x) - lam
        dg = t * (3.0 * t - 2.0 * x)
        nt = t - g / dg
        nt = np.where(nt > lo, nt, 0.5 * (t + lo))
        done = np.all(np.abs(nt - t) <= 1e-16 * np.abs(nt))
        t = nt
        if done:
            break
    return t


@jit
def proj_feasible(z, ind, target, lam0):
    """Projection onto ``{y >= 0 : sum(ind / y) <= target}``.

    Returns ``(y, lam)`` where ``lam`` is the multiplier of the active
    constraint (0 when ``z`` is already feasible); pass it back as ``lam0``
    to warm-start the next call.  The returned ``y`` is always feasible.
    """
    y = np.maximum(z, 0.0)
    idx = np.nonzero(ind > 0.5)[0]
    k = idx.shape[0]
    if k == 0:
        return y, 0.0
    zi = z[idx]
    total = 0.0
    feasible = True
    for j in range(k):
        if zi[j] <= 0.0:
            feasible = False
            break
        total += 1.0 / zi[j]
    if feasible and total <= target:
        return y, 0.0

    lam_vec = np.empty(k)
    lo = 0.0
    hi = np.inf
    lam = lam0 if lam0 > 0.0 else 1.0
    tol = 1e-12 * target
    t = zi.copy()
    for _ in range(200):
        lam_vec[:] = lam
        t = cubic_branch(zi, lam_vec)
        h = np.sum(1.0 / t) - target
        if h > 0.0:
            lo = lam
        else:
            hi = lam
        if abs(h) <= tol:
            break
        dh = -np.sum(1.0 / (t * t * t * (3.0 * t - 2.0 * zi)))
        step_ok = dh < 0.0
        nl = lam - h / dh if step_ok else lam
        if not (nl > lo and nl < hi) or not step_ok:
            if np.isinf(hi):
                nl = 2.0 * lam
            else:
                nl = 0.5 * (lo + hi)
        if np.isfinite(hi) and hi - lo <= 1e-15 * hi:
            break
        lam = nl
    # Converged from the infeasible side: step right until feasible.
    nudge = 1e-13
    h = np.sum(1.0 / t) - target
    while h > 0.0:
        lam = min(lam * (1.0 + nudge) + 1e-300, hi)
        nudge *= 4.0
        lam_vec[:] = lam
        t = cubic_branch(zi, lam_vec)
        h = np.sum(1.0 / t) - target
    y[idx] = t
    return y, lam


@jit
def q_update(w, ind, tau, eps, scale):
    """Closed-form minimiser of the per-coordinate q-subproblem, clipped to [eps, 1]."""
    c = 1.0 / (1.0 - tau)
    r = 4.0 / scale
    root = np.sqrt(w * w + r)
    # (w + root) / 2 rewritten to avoid cancellation when w < 0
    above = np.where(w >= 0.0, 0.5 * (w + root), 0.5 * r / (root - np.minimum(w, 0.0)))
    below = 0.5 * ((w + c) - np.sqrt((w - c) * (w - c) + r))
    q = np.where(ind > 0.5, above, below)
    return np.minimum(1.0, np.maximum(eps, q))


@jit
def neg_loglik(q, ind, tau):
    one_m = 1.0 - tau
    return -np.sum(ind * np.log(q * one_m) + (1.0 - ind) * np.log(1.0 - q * one_m))


@jit
def apply_m(kind, q, src, dst):
    if kind == KIND_L1:
        return q[src] - q[dst]
    return q.copy()


@jit
def apply_mt(kind, u, src, dst, n):
    if kind == KIND_L1:
        return np.bincount(src, u, n) - np.bincount(dst, u, n)
    return u.copy()


@jit
def proj_m(kind, z, labels, n_groups, radius):
    if kind == KIND_ISOTONIC:
        return pava(z)
    if kind == KIND_GROUP:
        return group_mean(z, labels, n_groups)
    if kind == KIND_L1:
        return proj_l1(z, radius)
    return z.copy()


@jit
def admm_kernel(ind, tau, eps, kind, src, dst, labels, n_groups, radius,
                step_alpha, step_beta, eta, max_iter, tol_primal, tol_dual, q0):
    """Linearised ADMM for the censored-likelihood weight problem.

    Returns ``(q, x, y, u, v, iters, r_primal, r_dual, objective_trace)``.
    """
    n = ind.shape[0]
    target = n * (1.0 - tau)
    scale = step_alpha * eta + step_beta

    q = q0.copy()
    mq = apply_m(kind, q, src, dst)
    x = proj_m(kind, mq, labels, n_groups, radius)
    y, lam = proj_feasible(q, ind, target, 0.0)
    u = np.zeros(mq.shape[0])
    v = np.zeros(n)
    trace = np.empty(max_iter)
    r_primal = np.inf
    r_dual = np.inf
    it = 0
    while it < max_iter:
        g = apply_mt(kind, u + step_alpha * (mq - x), src, dst, n) \
            + (v - step_beta * y - step_alpha * eta * q)
        qn = q_update(-g / scale, ind, tau, eps, scale)
        mqn = apply_m(kind, qn, src, dst)
        xn = proj_m(kind, mqn + u / step_alpha, labels, n_groups, radius)
        yn, lam = proj_feasible(qn + v / step_beta, ind, target, lam)
        u = u + step_alpha * (mqn - xn)
        v = v + step_beta * (qn - yn)

        r_primal = max(maxabs(mqn - xn), maxabs(qn - yn))
        dres = step_alpha * apply_mt(kind, xn - x, src, dst, n) \
            + step_beta * (yn - y) \
            + step_alpha * (eta * (qn - q) - apply_mt(kind, mqn - mq, src, dst, n))
        r_dual = maxabs(dres)
        trace[it] = neg_loglik(qn, ind, tau)

        q = qn
        mq = mqn
        x = xn
        y = yn
        it += 1
        if r_primal <= tol_primal and r_dual <= tol_dual:
            break
    return q, x, y, u, v, it, r_primal, r_dual, trace[:it]
