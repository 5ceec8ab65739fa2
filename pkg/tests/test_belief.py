import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shelfmem.belief import (
    PRIOR_VARIANCE,
    BeliefState,
    BetaParams,
    ContractError,
    DirichletParams,
    GridSpec,
    beta_mean,
    beta_variance,
    belief_from_json,
    belief_to_json,
    dirichlet_expectation,
    dirichlet_uncertainty,
    fuse_occupancy,
    fuse_semantic,
    hard_label,
    load_belief,
    project_height_map,
    save_belief,
    uncertainty_maps,
)

pos = st.floats(min_value=1e-3, max_value=1e4, allow_nan=False, allow_infinity=False)
weights = st.floats(min_value=1e-3, max_value=100.0)
lam_vec = st.lists(pos, min_size=2, max_size=12)


@pytest.mark.parametrize("a,b,mean", [(1, 1, 0.5), (2, 1, 2 / 3), (9, 1, 0.9)])
def test_beta_mean_examples(a, b, mean):
    assert beta_mean(BetaParams(a, b)) == pytest.approx(mean, abs=1e-12)


@pytest.mark.parametrize("a,b,var", [(1, 1, 1 / 12), (2, 2, 0.05), (99, 1, 99 / (100**2 * 101))])
def test_beta_variance_examples(a, b, var):
    assert beta_variance(BetaParams(a, b)) == pytest.approx(var, rel=1e-12)


@pytest.mark.parametrize(
    "lam,exp",
    [((1, 1, 1, 1), (0.25,) * 4), ((9, 1), (0.9, 0.1)), ((2, 3, 5), (0.2, 0.3, 0.5))],
)
def test_dirichlet_expectation_examples(lam, exp):
    np.testing.assert_allclose(dirichlet_expectation(DirichletParams(lam)), exp, atol=1e-12)


@pytest.mark.parametrize("lam,u", [((1, 1, 1), 1.0), ((8, 1, 1), 0.3), ((50, 50), 0.02)])
def test_dirichlet_uncertainty_examples(lam, u):
    assert dirichlet_uncertainty(DirichletParams(lam)) == pytest.approx(u, abs=1e-12)


@pytest.mark.parametrize("lam,k", [((1, 5, 2), 1), ((3, 3, 1), 0), ((0.5, 0.5, 0.5, 10), 3)])
def test_hard_label_examples(lam, k):
    assert hard_label(DirichletParams(lam)) == k


def test_invalid_params_rejected():
    with pytest.raises(ContractError):
        BetaParams(0.0, 1.0)
    with pytest.raises(ContractError):
        DirichletParams((1.0,))
    with pytest.raises(ContractError):
        DirichletParams((1.0, -2.0))


def test_fuse_occupancy_examples():
    p = fuse_occupancy(BetaParams(1, 1), "hit", 1)
    assert (p.alpha, p.beta) == (2, 1)
    assert beta_mean(p) == pytest.approx(2 / 3)
    q = fuse_occupancy(BetaParams(1, 1), "miss", 3)
    assert (q.alpha, q.beta) == (1, 4)
    assert beta_mean(q) == pytest.approx(0.2)
    with pytest.raises(ContractError):
        fuse_occupancy(BetaParams(1, 1), "maybe")
    with pytest.raises(ContractError):
        fuse_occupancy(BetaParams(1, 1), "hit", 0.0)


def test_hundred_hits_match_closed_form():
    p = BetaParams(1, 1)
    for _ in range(100):
        p = fuse_occupancy(p, "hit", 1)
    assert beta_mean(p) == pytest.approx(101 / 102, abs=1e-12)
    assert beta_variance(p) < 1e-4
    assert beta_variance(p) == pytest.approx(beta_variance(BetaParams(101, 1)), rel=1e-12)


def test_fuse_semantic_examples():
    p = fuse_semantic(DirichletParams((1, 1, 1)), 2, 1)
    assert p.lambdas == (1, 1, 2)
    assert dirichlet_uncertainty(p) == pytest.approx(0.75)
    q = fuse_semantic(DirichletParams((1, 1)), 0, 9)
    np.testing.assert_allclose(dirichlet_expectation(q), (10 / 11, 1 / 11))
    with pytest.raises(ContractError):
        fuse_semantic(DirichletParams((1, 1)), 2)


def test_alternating_semantic_evidence_converges_to_half():
    p = DirichletParams((1, 1))
    for k in range(100):
        p = fuse_semantic(p, k % 2, 1)
    assert p.lambdas == (51.0, 51.0)
    np.testing.assert_allclose(dirichlet_expectation(p), (0.5, 0.5), atol=0.01)
    assert dirichlet_uncertainty(p) == pytest.approx(2 / 102)


@given(a=pos, b=pos, seq=st.lists(st.tuples(st.sampled_from(["hit", "miss"]), weights), max_size=30))
def test_occupancy_fusion_closure_and_variance(a, b, seq):
    p = BetaParams(a, b)
    for ev, w in seq:
        q = fuse_occupancy(p, ev, w)
        assert q.alpha > 0 and q.beta > 0
        assert q.alpha + q.beta > p.alpha + p.beta
        m = beta_mean(q)
        assert 0 < m < 1
        assert 0 < beta_variance(q) <= 0.25
        p = q


@given(k=st.integers(1, 50), hit=st.booleans())
def test_consistent_unit_updates_reduce_variance(k, hit):
    p0 = BetaParams(1, 1)
    p = p0
    for _ in range(k):
        p = fuse_occupancy(p, "hit" if hit else "miss", 1)
    assert beta_variance(p) < beta_variance(p0)


@given(lam=lam_vec, data=st.data())
def test_semantic_fusion_strictly_reduces_uncertainty(lam, data):
    p = DirichletParams(tuple(lam))
    cls = data.draw(st.integers(0, len(lam) - 1))
    w = data.draw(weights)
    q = fuse_semantic(p, cls, w)
    assert all(x > 0 for x in q.lambdas)
    assert dirichlet_uncertainty(q) < dirichlet_uncertainty(p)


@given(lam=lam_vec)
def test_expectation_normalised(lam):
    assert abs(dirichlet_expectation(DirichletParams(tuple(lam))).sum() - 1.0) <= 1e-12


@given(lam=lam_vec, c=st.floats(min_value=1e-3, max_value=1e3))
def test_hard_label_scale_invariant(lam, c):
    assert hard_label(DirichletParams(tuple(lam))) == hard_label(DirichletParams(tuple(c * x for x in lam)))


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 5)), min_size=1, max_size=12), st.randoms(use_true_random=False))
def test_fusion_order_insensitive(evidence, rnd):
    def run(seq):
        p, b = DirichletParams((1, 1, 1, 1)), BetaParams(1, 1)
        for cls, w in seq:
            p = fuse_semantic(p, cls, w)
            b = fuse_occupancy(b, "hit" if cls % 2 else "miss", w)
        return p.lambdas, (b.alpha, b.beta)

    shuffled = list(evidence)
    rnd.shuffle(shuffled)
    # integer weights keep float additions exact
    assert run(evidence) == run(shuffled)


def test_uncertainty_maps_prior_and_observed_column():
    g = GridSpec(6, 7, 5, 0.01)
    b = BeliefState.prior(g, 4)
    m = uncertainty_maps(b)
    np.testing.assert_allclose(m.u_o, PRIOR_VARIANCE)
    np.testing.assert_allclose(m.u_s, 1.0)
    b.beta[2, 3, :] += 20
    b.alpha[2, 3, 0] += 20
    b.lam[2, 3, 1] += 30
    m = uncertainty_maps(b)
    others = np.ones((6, 7), bool)
    others[2, 3] = False
    assert m.u_o_2d[2, 3] < m.u_o_2d[others].min()
    assert m.u_s[2, 3] < m.u_s[others].min()


def test_uncertainty_maps_toy_by_hand():
    g = GridSpec(3, 3, 1, 0.01)
    b = BeliefState.prior(g, 2)
    counts = {(0, 0): (3, 1, (4, 2)), (1, 2): (1, 5, (1, 9)), (2, 1): (2, 2, (6, 6))}
    for (i, j), (a, be, lam) in counts.items():
        b.alpha[i, j, 0], b.beta[i, j, 0] = a, be
        b.lam[i, j] = lam
    m = uncertainty_maps(b)
    assert m.u_o[0, 0, 0] == pytest.approx(3 * 1 / (16 * 5))
    assert m.u_o[1, 2, 0] == pytest.approx(5 / (36 * 7))
    assert m.u_o[2, 1, 0] == pytest.approx(4 / (16 * 5))
    assert m.u_s[0, 0] == pytest.approx(2 / 6)
    assert m.u_s[1, 2] == pytest.approx(0.2)
    assert m.u_s[2, 1] == pytest.approx(2 / 12)
    assert m.u_s[1, 1] == 1.0


def test_project_height_map():
    g = GridSpec(4, 5, 10, 0.01)
    b = BeliefState.prior(g, 3)
    np.testing.assert_array_equal(project_height_map(b, 0.87), 0.0)
    k = 6
    b.alpha[1, 2, : k + 1] = 100
    h = project_height_map(b, 0.87)
    assert h[1, 2] == pytest.approx((k + 1) * 0.01)
    assert np.count_nonzero(h) == 1
    with pytest.raises(ContractError):
        project_height_map(b, 1.0)


def test_belief_shape_contracts():
    g = GridSpec(4, 5, 3, 0.01)
    with pytest.raises(ContractError):
        BeliefState(np.ones((4, 5, 2)), np.ones((4, 5, 3)), np.ones((4, 5, 2)), g)
    with pytest.raises(ContractError):
        BeliefState.prior(g, 1)
    assert BeliefState.prior().alpha.shape == (82, 157, 66)


def test_snapshot_roundtrip(tmp_path):
    g = GridSpec(3, 4, 2, 0.02, (0.1, 0.0, 0.0))
    rng = np.random.default_rng(0)
    b = BeliefState(rng.uniform(0.5, 9, g.shape), rng.uniform(0.5, 9, g.shape), rng.uniform(0.5, 9, (3, 4, 5)), g)
    save_belief(b, tmp_path / "b.bin")
    assert load_belief(tmp_path / "b.bin") == b
    assert belief_from_json(belief_to_json(b)) == b
    (tmp_path / "junk.bin").write_bytes(b"XXXX" + bytes(100))
    with pytest.raises(ValueError):
        load_belief(tmp_path / "junk.bin")


def test_hard_labels_tie_break_on_grid():
    b = BeliefState.prior(GridSpec(2, 2, 1, 0.01), 3)
    assert (b.hard_labels() == 0).all()
    for lam in itertools.permutations((1.0, 2.0, 2.0)):
        b.lam[0, 0] = lam
        assert b.hard_labels()[0, 0] == lam.index(2.0)
