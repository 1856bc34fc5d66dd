"""Scenario generators, trial runner and FDP/power summaries."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import toeplitz

from .errors import ConvergenceError, InvalidInputError
from .optim import AdmmConfig
from .procedures import MethodConfig, bh, sabha, storey_bh
from .stats import one_sided_z, two_sided_z
from .structures import Graph
from .weights import tv_l1_weights

log = logging.getLogger(__name__)

GRID_SIDE = 15
REGION_RADIUS_SQ = 36
Q_INSIDE, Q_OUTSIDE = 0.1, 0.9
DEFAULT_METHODS = ("bh", "storey-bh", "oracle", "sabha-m10", "sabha-m15", "sabha-m20")
DEFAULT_MU_SIGS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5)


def grid_region(side=GRID_SIDE, radius_sq=REGION_RADIUS_SQ):
    """Row-major indices within ``radius_sq`` of the top-right or bottom-left corner."""
    r, c = np.divmod(np.arange(side * side), side)
    last = side - 1
    near_tr = r**2 + (last - c) ** 2 <= radius_sq
    near_bl = (last - r) ** 2 + c**2 <= radius_sq
    return np.flatnonzero(near_tr | near_bl)


@dataclass(frozen=True)
class GridScenario:
    """One realisation of the spatial grid experiment."""

    mu_sig: float
    seed: int
    trial: int
    q_true: np.ndarray
    is_signal: np.ndarray
    z: np.ndarray
    p: np.ndarray

    @property
    def n(self):
        return self.p.size

    @property
    def null_set(self):
        return np.flatnonzero(~self.is_signal)


def grid_q_true(side=GRID_SIDE):
    q = np.full(side * side, Q_OUTSIDE)
    region = grid_region(side)
    if side == GRID_SIDE and region.size != 70:
        raise AssertionError(f"grid region has {region.size} points, expected 70")
    q[region] = Q_INSIDE
    return q


def _trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def make_grid_scenario(mu_sig, seed, trial=0, side=GRID_SIDE):
    """Draw signals ``I_i ~ Bernoulli(1 - q_i)`` and ``Z_i ~ N(mu_sig I_i, 1)``.

    The random stream depends only on ``(seed, trial)``, so the same trial at
    different ``mu_sig`` reuses the signal pattern and noise.
    """
    if not mu_sig >= 0:
        raise InvalidInputError(f"mu_sig must be nonnegative, got {mu_sig}")
    q = grid_q_true(side)
    rng = _trial_rng(seed, trial)
    is_signal = rng.random(q.size) < 1.0 - q
    z = mu_sig * is_signal + rng.standard_normal(q.size)
    return GridScenario(float(mu_sig), int(seed), int(trial), q, is_signal, z, two_sided_z(z))


def ar1_covariance(n, ar1_rho):
    if not abs(ar1_rho) < 1:
        raise InvalidInputError(f"AR(1) correlation must satisfy |rho| < 1, got {ar1_rho}")
    return toeplitz(ar1_rho ** np.arange(n))


def condition_number(sigma):
    w = np.linalg.eigvalsh(sigma)
    if w[0] <= 0:
        raise InvalidInputError("covariance is not positive definite")
    return float(w[-1] / w[0])


def make_dependent_scenario(n, ar1_rho, mu, seed):
    """``Z ~ N(mu, Sigma)`` with ``Sigma_ij = rho^|i-j|``; returns ``(z, 1 - Phi(z))``."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    sigma = ar1_covariance(n, ar1_rho)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n,))
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError("covariance is not positive definite") from exc
    rng = np.random.default_rng(seed)
    z = mu + L @ rng.standard_normal(n)
    return z, one_sided_z(z)


def fdp_of(result, null_set):
    rej = np.asarray(result.rejected)
    false = np.intersect1d(rej, np.asarray(null_set)).size
    return false / max(1, rej.size)


def power_of(result, null_set, n):
    rej = np.asarray(result.rejected)
    signals = np.setdiff1d(np.arange(n), np.asarray(null_set))
    return np.intersect1d(rej, signals).size / max(1, signals.size)


@dataclass(frozen=True)
class TrialResult:
    method_name: str
    mu_sig: float
    trial: int
    fdp: float
    power: float
    k_hat: int
    failed: bool = False


_SABHA_RE = re.compile(r"^sabha-m(\d+(?:\.\d+)?)$")


def check_method(name):
    if name in ("bh", "storey-bh", "oracle") or _SABHA_RE.match(name):
        return name
    raise InvalidInputError(f"unknown method {name!r}; expected bh, storey-bh, oracle or sabha-m<budget>")


def apply_method(name, scen, cfg, epsilon=0.1, admm_cfg=None, graph=None):
    """Run one named method on one scenario; returns a :class:`RejectionResult`."""
    if name == "bh":
        return bh(scen.p, cfg.alpha)
    if name == "storey-bh":
        return storey_bh(scen.p, cfg)
    if name == "oracle":
        return sabha(scen.p, cfg, scen.q_true, "oracle")
    m = _SABHA_RE.match(name)
    if m is None:
        raise InvalidInputError(f"unknown method {name!r}")
    side = int(round(math.sqrt(scen.n)))
    graph = Graph.grid(side) if graph is None else graph
    w = tv_l1_weights(scen.p, cfg.tau, epsilon, graph, float(m.group(1)), admm_cfg)
    return sabha(scen.p, cfg, w, name)


def _run_trial(args):
    trial, mu_sigs, methods, seed, alpha, tau, epsilon = args
    cfg = MethodConfig(alpha, tau)
    graph = Graph.grid(GRID_SIDE)
    out = []
    for mu in mu_sigs:
        scen = make_grid_scenario(mu, seed, trial)
        for name in methods:
            try:
                res = apply_method(name, scen, cfg, epsilon, graph=graph)
            except ConvergenceError as exc:
                log.warning("trial %d, mu_sig=%g, %s: %s", trial, mu, name, exc)
                out.append(TrialResult(name, float(mu), trial, math.nan, math.nan, -1, True))
                continue
            out.append(TrialResult(name, float(mu), trial, fdp_of(res, scen.null_set),
                                   power_of(res, scen.null_set, scen.n), res.k_hat))
    return out


@dataclass
class SummaryRow:
    method: str
    mu_sig: float
    mean_fdp: float
    mean_power: float
    stderr_fdp: float
    stderr_power: float
    trials: int
    failures: int


COLUMNS = ("method", "mu_sig", "mean_fdp", "mean_power", "stderr_fdp", "stderr_power", "trials", "failures")


class SummaryTable:
    """Per-(method, mu_sig) means and standard errors of FDP and power."""

    def __init__(self, rows: Sequence[SummaryRow], results: Optional[Sequence[TrialResult]] = None):
        self.rows = list(rows)
        self.results = list(results or [])

    @classmethod
    def from_results(cls, results, methods, mu_sigs):
        rows = []
        for name in methods:
            for mu in mu_sigs:
                cell = [r for r in results if r.method_name == name and r.mu_sig == float(mu)]
                ok = [r for r in cell if not r.failed]
                fdp = np.array([r.fdp for r in ok])
                pw = np.array([r.power for r in ok])
                k = len(ok)

                def se(a):
                    return float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0

                rows.append(SummaryRow(
                    name, float(mu),
                    float(fdp.mean()) if k else math.nan,
                    float(pw.mean()) if k else math.nan,
                    se(fdp), se(pw), k, len(cell) - k))
        return cls(rows, results)

    def cell(self, method, mu_sig):
        for r in self.rows:
            if r.method == method and r.mu_sig == float(mu_sig):
                return r
        raise KeyError((method, mu_sig))

    def methods(self):
        return list(dict.fromkeys(r.method for r in self.rows))

    def mu_sigs(self):
        return sorted({r.mu_sig for r in self.rows})

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r.method, repr(r.mu_sig), repr(r.mean_fdp), repr(r.mean_power),
                        repr(r.stderr_fdp), repr(r.stderr_power), r.trials, r.failures])
        return buf.getvalue()

    def to_json(self):
        rows = [{c: getattr(r, c) for c in COLUMNS} for r in self.rows]
        for row in rows:
            for k, v in row.items():
                if isinstance(v, float) and not math.isfinite(v):
                    row[k] = None
        return json.dumps({"columns": list(COLUMNS), "rows": rows}, indent=2)


def run_trials(mu_sigs=DEFAULT_MU_SIGS, methods=DEFAULT_METHODS, n_trials=50, alpha=0.1,
               seed=0, tau=0.5, epsilon=0.1, workers=1):
    """Run the grid experiment and summarise it.

    Trials are the unit of parallel work; the table is identical for any
    ``workers`` because every trial's random stream is fixed by ``(seed, trial)``
    and results are sorted before aggregation.
    """
    if n_trials < 1:
        raise InvalidInputError("n_trials must be at least 1")
    methods = [check_method(m) for m in methods]
    mu_sigs = [float(m) for m in mu_sigs]
    if not mu_sigs:
        raise InvalidInputError("need at least one mu_sig")
    MethodConfig(alpha, tau)
    jobs = [(t, mu_sigs, methods, seed, alpha, tau, epsilon) for t in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_trial, jobs))
    else:
        parts = [_run_trial(j) for j in jobs]
    results = [r for part in parts for r in part]
    results.sort(key=lambda r: (r.trial, r.mu_sig, r.method_name))
    return SummaryTable.from_results(results, methods, mu_sigs)
