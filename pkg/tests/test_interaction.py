import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ltlab.geometry import build_covering, exclusion_radius
from ltlab.interaction import (InteractionError, interaction_energy, interaction_values,
                               layered_lower_bound, nn_distances, nn_distances_batch,
                               sample_inequalities, verify_exclusion)
from ltlab.states import ManyBodyState, density_of, gaussian_field, sample_configurations


def test_nn_distances_example():
    assert np.array_equal(nn_distances([0.0, 1.0, 3.0]), [1.0, 1.0, 2.0])
    with pytest.raises(InteractionError):
        nn_distances([[0.0]])
    with pytest.raises(InteractionError):
        nn_distances([0.0, 0.0, 1.0])


@given(arrays(float, (40, 2), elements=st.floats(-10, 10), unique=True))
def test_tree_and_brute_agree(pts):
    if np.min(np.linalg.norm(pts[:, None] - pts[None], axis=2) + np.eye(40) * 99) == 0:
        return
    assert np.array_equal(nn_distances(pts, "tree"), nn_distances(pts, "brute"))


def test_batch_matches_single():
    cfg = np.random.default_rng(0).normal(size=(5, 7, 3))
    batch = nn_distances_batch(cfg)
    for k in range(5):
        assert np.array_equal(batch[k], nn_distances(cfg[k]))


def test_single_particle_energy_is_zero():
    st_ = ManyBodyState.product([gaussian_field(1, 8.0, 64)])
    est = interaction_energy(st_, 0.5, samples=10)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_two_point_value_and_dilation():
    s = 0.3
    cfg = np.array([[[0.0], [2.0]]])
    assert interaction_values(cfg, s)[0] == pytest.approx(2 * 2.0 ** (-2 * s))
    cfg = np.random.default_rng(1).normal(size=(50, 4, 2))
    c = 3.7
    assert np.allclose(interaction_values(c * cfg, s), c ** (-2 * s) * interaction_values(cfg, s))


def test_interaction_estimate_of_separated_bumps():
    # narrow orbitals far apart: every delta_i is close to the separation
    fields = [gaussian_field(1, 32.0, 512, width=0.05, center=[c]) for c in (-4.0, 0.0, 4.0)]
    est = interaction_energy(ManyBodyState.product(fields), 0.5, samples=5000, seed=0)
    assert est.mean == pytest.approx(3 / 4.0, rel=0.01)
    assert est.std_error < 1e-3


def _heavy_state():
    fields = [gaussian_field(1, 8.0, 256, width=0.15, center=[c]) for c in (-0.3, 0.0, 0.2, 0.4)]
    return ManyBodyState.product(fields)


def test_layered_bound_telescopes():
    state = _heavy_state()
    cov = build_covering(density_of(state), 0.25, "1/2")
    ledger = layered_lower_bound(cov, None, 0.5)
    assert ledger.per_level
    last = ledger.per_level[-1]
    assert ledger.telescoped() == pytest.approx(last.Rn ** -1.0, rel=1e-12)
    assert last.Rn == pytest.approx(exclusion_radius(1, 0.25, "1/2", last.n))
    assert all(t.term_value >= t.simplified_value - 1e-15 for t in ledger.per_level)
    with pytest.raises(InteractionError):
        layered_lower_bound(cov, None, 0.5, delta=0.3)


def test_sample_inequalities_hold_exactly():
    state = _heavy_state()
    cov = build_covering(density_of(state), 0.25, "1/2")
    ledger = layered_lower_bound(cov, None, 0.25)
    cfg = sample_configurations(state, 2000, seed=2) / state.box_side
    res = sample_inequalities(cfg, ledger)
    assert res == {"samples": 2000, "layer_violations": 0, "count_violations": 0}


def test_verify_exclusion_passes():
    state = _heavy_state()
    cov = build_covering(density_of(state), 0.25, "1/2")
    out = verify_exclusion(state, cov, 0.25, samples=5000, seed=1)
    assert out["verdict"] == "PASS" and not out["degenerate"]
    assert out["interaction_mean"] >= out["lower_bound"] > 0
    assert math.isfinite(out["ratio"])


def test_verify_exclusion_light_state_is_degenerate():
    state = ManyBodyState.product([gaussian_field(1, 8.0, 128, width=1.0)])
    cov = build_covering(density_of(state), 0.25, "1/2")
    out = verify_exclusion(state, cov, 0.25, samples=100)
    assert out["degenerate"] and out["lower_bound"] == 0
