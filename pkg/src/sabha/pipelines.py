"""End-to-end analyses for user-supplied data sets.

Neither data set ships with the package.  Point the functions at
preprocessed files (see the README for the expected layout).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io as sio
from .procedures import MethodConfig, bh, sabha, storey_bh
from .stats import paired_t_rows
from .weights import grouped_weights, ordered_mle_weights, ordered_step_weights

FMRI_ALPHA, FMRI_TAU, FMRI_EPS = 0.2, 0.5, 0.1


def voxel_pvalues(phase_a, phase_b):
    """Paired t-test p-values per voxel from ``(voxels, trials)`` phase averages."""
    _, p = paired_t_rows(phase_a, phase_b)
    return p


def grouped_discoveries(p, grouping, alpha=FMRI_ALPHA, tau=FMRI_TAU, epsilon=FMRI_EPS):
    """Discovery counts for BH, Storey-BH and grouped SABHA."""
    cfg = MethodConfig(alpha, tau)
    w = grouped_weights(p, tau, epsilon, grouping)
    return {
        "bh": bh(p, alpha).k_hat,
        "storey-bh": storey_bh(p, cfg).k_hat,
        "sabha": sabha(p, cfg, w).k_hat,
    }


def fmri_from_dir(directory):
    """Read ``pvalues.csv`` and ``groups.csv`` from ``directory`` and count discoveries."""
    d = Path(directory)
    p = sio.read_pvalues(d / "pvalues.csv")
    grouping = sio.read_grouping(d / "groups.csv", p.size)
    return grouped_discoveries(p, grouping)


def ordered_discoveries(p, alpha=0.1, tau=0.5, epsilon=0.1, admm_cfg=None):
    """Discovery counts for p-values listed in prior order (most promising first)."""
    p = np.asarray(p, dtype=float)
    cfg = MethodConfig(alpha, tau)
    return {
        "bh": bh(p, alpha).k_hat,
        "storey-bh": storey_bh(p, cfg).k_hat,
        "sabha-step": sabha(p, cfg, ordered_step_weights(p, tau, epsilon)).k_hat,
        "sabha-mle": sabha(p, cfg, ordered_mle_weights(p, tau, epsilon, admm_cfg)).k_hat,
    }
