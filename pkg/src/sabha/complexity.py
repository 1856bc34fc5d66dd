"""Rademacher complexity of inverse weight classes and FDR bound calculators.

For a weight class ``Q`` the relevant set is ``Q_inv = {1/q : q in Q}`` and

    Rad(A) = (1/n) E[ sup_{x in A} |<x, xi>| ],   xi_i iid uniform on {-1, +1}.

:func:`rad_mc` estimates this by Monte Carlo with an exact per-draw supremum
for the ordered and grouped classes.  For total-variation classes the per-draw
value is an upper bound obtained by enlarging ``Q_inv`` to a set controlled by
an l2 radius and a graph-TV radius.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .structures import Graph, StructureSpec, Variant

CHUNK = 4096
MAX_DENSE_NODES = 5000


def _chunk_sizes(samples):
    full, rest = divmod(samples, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _chunked_mc(draw_values, samples, seed, workers=1):
    """Run ``draw_values(rng, size) -> ndarray`` over fixed chunks.

    Each chunk gets its own child of ``SeedSequence(seed)`` and results are
    concatenated in chunk order, so the output does not depend on ``workers``.
    """
    if samples < 2:
        raise InvalidInputError("need at least 2 samples for a standard error")
    sizes = _chunk_sizes(samples)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(i):
        return draw_values(np.random.default_rng(children[i]), sizes[i])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    vals = np.concatenate(parts)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)), vals


def _signs(rng, size, n):
    return rng.integers(0, 2, size=(size, n), dtype=np.int8) * 2 - 1


def _ordered_sup(xi, epsilon, one_sided):
    # extreme points of Q_inv: (1/eps, ..., 1/eps, 1, ..., 1) with k leading 1/eps
    S = np.cumsum(xi, axis=1, dtype=np.float64)
    total = S[:, -1:]
    vals = np.concatenate([total, (1.0 / epsilon - 1.0) * S + total], axis=1)
    if one_sided:
        return np.maximum(vals.max(axis=1), 0.0)
    return np.abs(vals).max(axis=1)


def _grouped_sup(xi, epsilon, codes, n_groups, one_sided):
    T = np.zeros((xi.shape[0], n_groups))
    for k in range(n_groups):
        T[:, k] = xi[:, codes == k].sum(axis=1)
    hi = np.maximum(T, T / epsilon).sum(axis=1)
    if one_sided:
        return np.maximum(hi, 0.0)
    lo = np.minimum(T, T / epsilon).sum(axis=1)
    return np.maximum(hi, -lo)


def _tv_radii(spec, n):
    eps = spec.epsilon
    t_l2 = math.sqrt(n) / eps
    t_tv = spec.m / eps if spec.variant is Variant.TV_SPARSE else spec.m / eps**2
    return t_l2, t_tv


def rad_mc(spec, n, samples, seed, *, one_sided=False, workers=1):
    """Monte Carlo estimate of ``Rad(Q_inv)``.

    Parameters
    ----------
    spec : StructureSpec
        Ordered (either variant), grouped, constant, sign-split or TV class.
    n : int
    samples : int
        Number of Rademacher draws.
    seed : int
    one_sided : bool
        Use ``max(0, sup <x, xi>)`` in place of ``sup |<x, xi>|``.
    workers : int
        Thread fan-out; the estimate is identical for any value.

    Returns
    -------
    estimate, stderr : float
        For TV classes both describe an upper-bounding quantity.
    """
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    spec.check_size(n)
    fam = spec.variant.family
    eps = spec.epsilon
    if fam == "ordered":
        def draw(rng, size):
            return _ordered_sup(_signs(rng, size, n), eps, one_sided) / n
    elif fam == "grouped":
        if spec.variant is Variant.CONSTANT:
            codes, d = np.zeros(n, dtype=np.int64), 1
        else:
            codes, d = spec.grouping.codes, spec.grouping.n_groups

        def draw(rng, size):
            return _grouped_sup(_signs(rng, size, n), eps, codes, d, one_sided) / n
    elif fam == "tv":
        pinv = _incidence_pinv(spec.graph)
        t_l2, t_tv = _tv_radii(spec, n)

        def draw(rng, size):
            xi = _signs(rng, size, n).astype(np.float64)
            perp = np.abs(xi.sum(axis=1)) / math.sqrt(n)
            edge = np.abs(xi @ pinv).max(axis=1) if pinv.shape[1] else 0.0
            return (t_l2 * perp + t_tv * edge) / n
    else:
        raise InvalidInputError(f"unsupported structure {spec.variant.value}")
    est, se, _ = _chunked_mc(draw, samples, seed, workers)
    return est, se


def rad_mc_points(points, samples, seed, *, workers=1):
    """``Rad(A)`` for an explicit finite set ``A`` (rows of ``points``)."""
    return cube_complexity_mc(points, ProductDistribution.rademacher(np.shape(points)[1]),
                              samples, seed, workers=workers)


def rad_bound(spec, n, rho_g=None):
    """Analytic upper bound on ``Rad(Q_inv)`` for the class in ``spec``."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    eps = spec.epsilon
    fam = spec.variant.family
    if fam == "ordered":
        return 1.0 / (eps * math.sqrt(n))
    if spec.variant is Variant.CONSTANT:
        return math.sqrt(n) / (2.0 * eps * n)
    if fam == "grouped":
        spec.check_size(n)
        return float(np.sqrt(spec.grouping.sizes).sum()) / (2.0 * eps * n)
    if rho_g is None:
        raise InvalidInputError("TV bounds need rho_g (see incidence_rho)")
    power = 1 if spec.variant is Variant.TV_SPARSE else 2
    return 1.0 / (eps * math.sqrt(n)) + 2.0 * rho_g * spec.m * math.sqrt(math.log(n)) / (eps**power * n)


def _incidence_pinv(graph):
    if not isinstance(graph, Graph):
        raise InvalidInputError("expected a Graph")
    if graph.n_nodes > MAX_DENSE_NODES:
        raise InvalidInputError(f"graph has {graph.n_nodes} nodes; dense pseudoinverse limited to {MAX_DENSE_NODES}")
    return np.linalg.pinv(graph.incidence())


def incidence_rho(graph):
    """Largest column 2-norm of the pseudoinverse of the incidence matrix."""
    pinv = _incidence_pinv(graph)
    if pinv.shape[1] == 0:
        return 0.0
    return float(np.sqrt((pinv**2).sum(axis=0)).max())


def fdr_bound_independent(alpha, tau, rad):
    """``alpha * (1 + rad / (1 - tau))`` for independent nulls."""
    _check_level(alpha, tau)
    if rad < 0:
        raise InvalidInputError("rad must be nonnegative")
    return alpha * (1.0 + rad / (1.0 - tau))


@dataclass(frozen=True)
class DependentBoundParams:
    kappa: float
    c: float
    epsilon: float
    prob_small_khat: float = 0.0

    def __post_init__(self):
        if not self.kappa >= 1.0:
            raise InvalidInputError(f"kappa must be >= 1, got {self.kappa}")
        if not 0.0 < self.c <= 1.0:
            raise InvalidInputError(f"c must lie in (0, 1], got {self.c}")
        if not 0.0 < self.epsilon <= 1.0:
            raise InvalidInputError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0.0 <= self.prob_small_khat <= 1.0:
            raise InvalidInputError("prob_small_khat must lie in [0, 1]")


def fdr_bound_dependent(alpha, tau, rad, params, n):
    """FDR bound for p-values from a Gaussian copula with condition number ``kappa``.

    Values ``>= 1`` are vacuous; see :func:`is_vacuous`.
    """
    _check_level(alpha, tau)
    if rad < 0:
        raise InvalidInputError("rad must be nonnegative")
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    k, c, eps = params.kappa, params.c, params.epsilon
    complexity = math.sqrt(rad * math.sqrt(math.log(math.e * n * n)))
    lead = 4.0 / (math.sqrt(eps) * (1.0 - tau)) + 4.0 * k**0.25 / math.sqrt(alpha * c)
    tail = math.sqrt(math.log(n) / n) * math.sqrt(k) / (alpha * c * math.sqrt(2.0))
    return alpha * (1.0 + complexity * lead + tail) + params.prob_small_khat


def is_vacuous(bound):
    return bound >= 1.0


def _check_level(alpha, tau):
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0.0 < tau < 1.0:
        raise InvalidInputError(f"tau must lie in (0, 1), got {tau}")


class ProductDistribution:
    """Independent mean-zero coordinates supported in ``[-1, 1]``.

    Each coordinate is either ``"uniform"`` (on ``[-1, 1]``) or a discrete law
    given as ``(values, probs)``.
    """

    def __init__(self, coords: Sequence):
        if len(coords) == 0:
            raise InvalidInputError("need at least one coordinate")
        self.coords = []
        for c in coords:
            if isinstance(c, str):
                if c != "uniform":
                    raise InvalidInputError(f"unknown coordinate law {c!r}")
                self.coords.append(c)
                continue
            vals, probs = (np.asarray(a, dtype=float) for a in c)
            if vals.shape != probs.shape or vals.ndim != 1 or vals.size == 0:
                raise InvalidInputError("discrete law needs matching values and probs")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise InvalidInputError("probabilities must be nonnegative and sum to 1")
            if np.any(np.abs(vals) > 1.0):
                raise InvalidInputError("support must lie in [-1, 1]")
            if abs(vals @ probs) > 1e-12:
                raise InvalidInputError(f"coordinate law has mean {vals @ probs:.3g}, expected 0")
            if np.all(vals[probs > 0] == 0.0):
                raise InvalidInputError("point mass at 0 is not allowed")
            self.coords.append((vals, probs))

    @property
    def n(self):
        return len(self.coords)

    @classmethod
    def rademacher(cls, n):
        return cls([([-1.0, 1.0], [0.5, 0.5])] * n)

    @classmethod
    def uniform(cls, n):
        return cls(["uniform"] * n)

    @classmethod
    def discrete(cls, values, probs, n):
        return cls([(values, probs)] * n)

    def sample(self, rng, size):
        out = np.empty((size, self.n))
        for j, c in enumerate(self.coords):
            if isinstance(c, str):
                out[:, j] = rng.uniform(-1.0, 1.0, size)
            else:
                out[:, j] = rng.choice(c[0], size=size, p=c[1])
        return out


def cube_complexity_mc(point_set, dist, samples, seed, *, workers=1):
    """``(1/n) E[max_{x in A} |<x, Y>|]`` with ``Y ~ dist``; returns ``(estimate, stderr)``."""
    A = np.atleast_2d(np.asarray(point_set, dtype=float))
    if A.size == 0:
        raise InvalidInputError("point set is empty")
    if not isinstance(dist, ProductDistribution):
        raise InvalidInputError("dist must be a ProductDistribution")
    n = A.shape[1]
    if dist.n != n:
        raise InvalidInputError(f"distribution has {dist.n} coordinates, points have {n}")

    def draw(rng, size):
        return np.abs(dist.sample(rng, size) @ A.T).max(axis=1) / n

    est, se, _ = _chunked_mc(draw, samples, seed, workers)
    return est, se


@dataclass
class ComplexityReport:
    rad_estimate: float
    rad_stderr: float
    analytic_bound: float
    n: int
    spec: StructureSpec = field(repr=False)
    samples: int
    seed: int
    rho_g: Optional[float] = None
    estimate_kind: str = "exact-sup"

    def to_dict(self):
        s = self.spec
        return {
            "rad_estimate": _finite_or_none(self.rad_estimate),
            "rad_stderr": _finite_or_none(self.rad_stderr),
            "analytic_bound": self.analytic_bound,
            "estimate_kind": self.estimate_kind,
            "n": self.n,
            "samples": self.samples,
            "seed": self.seed,
            "rho_g": self.rho_g,
            "spec": {
                "variant": s.variant.value,
                "epsilon": s.epsilon,
                "m": s.m,
                "n_groups": None if s.grouping is None else int(s.grouping.n_groups),
                "n_edges": None if s.graph is None else int(s.graph.n_edges),
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


def complexity_report(spec, n, samples=0, seed=0, workers=1):
    """Bound (and, if ``samples > 0``, a Monte Carlo estimate) for one class."""
    rho = incidence_rho(spec.graph) if spec.variant.family == "tv" else None
    bound = rad_bound(spec, n, rho)
    est = se = float("nan")
    if samples:
        est, se = rad_mc(spec, n, samples, seed, workers=workers)
    kind = "upper-bound" if spec.variant.family == "tv" else "exact-sup"
    return ComplexityReport(est, se, bound, n, spec, samples, seed, rho, kind)
