import numpy as np

from sabha import Grouping
from sabha.io import write_pvalues
from sabha.pipelines import fmri_from_dir, grouped_discoveries, ordered_discoveries, voxel_pvalues


def _signal_front(rng, n=400, k=60):
    p = rng.random(n)
    p[:k] = rng.random(k) ** 8
    return p


def test_ordered_discoveries_weights_help_front_loaded_signal():
    p = _signal_front(np.random.default_rng(3))
    counts = ordered_discoveries(p)
    assert set(counts) == {"bh", "storey-bh", "sabha-step", "sabha-mle"}
    assert counts["sabha-mle"] >= counts["bh"]
    assert counts["sabha-step"] >= counts["bh"]


def test_grouped_discoveries_and_dir_loader(tmp_path):
    rng = np.random.default_rng(5)
    p = _signal_front(rng, 300, 50)
    labels = np.repeat(np.arange(6), 50)
    direct = grouped_discoveries(p, Grouping(labels))
    assert direct["sabha"] >= direct["bh"]
    write_pvalues(tmp_path / "pvalues.csv", p)
    (tmp_path / "groups.csv").write_text(
        "index,group\n" + "".join(f"{i},{g}\n" for i, g in enumerate(labels, 1)))
    assert fmri_from_dir(tmp_path) == direct


def test_voxel_pvalues_shape_and_range():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(7, 12))
    b = a + rng.normal(size=(7, 12))
    p = voxel_pvalues(a, b)
    assert p.shape == (7,) and np.all((p >= 0) & (p <= 1))
