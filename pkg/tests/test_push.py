import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shelfmem.actions import PushCandidate
from shelfmem.belief import BeliefState, GridSpec
from shelfmem.push import (
    PushConfig,
    PushSector,
    SegmentationError,
    VisibilityCorridor,
    evaluate_sectors,
    footprint_occupancy,
    forward_update,
    free_rim,
    own_region,
    propose_push,
    push_forward_belief,
    push_travel_cells,
    push_vig,
    pushing_corridor,
    rank_sectors,
    sample_push_candidates,
    score_corridor,
    segment_objects,
    sector_bounds,
    sector_ray_angles,
    select_occluder,
    select_target_locations,
    sweep_blocked,
    uncertainty_distance_map,
    unit_rc,
    visibility_corridors,
)
from shelfmem.sensor import CameraModel
from shelfmem.views import ActionBoxes, ViewPlanningConfig, greedy_nbv, planning_maps

CFG = PushConfig()


# -- helpers -------------------------------------------------------------------


def known_belief(grid: GridSpec, boxes, n_classes=12, unknown=None, evidence=200.0):
    """Confidently observed belief: free everywhere except the given boxes.

    ``boxes`` holds ``(r0, r1, c0, c1, cls, layers)``; ``unknown`` is a list of
    ``(r0, r1, c0, c1)`` blocks left at the prior.
    """
    b = BeliefState.prior(grid, n_classes)
    b.beta += evidence
    b.lam[..., 0] += evidence
    for r0, r1, c0, c1, cls, layers in boxes:
        b.beta[r0:r1, c0:c1, :layers] = 1.0
        b.alpha[r0:r1, c0:c1, :layers] = 1.0 + evidence
        b.lam[r0:r1, c0:c1] = 1.0
        b.lam[r0:r1, c0:c1, cls] += evidence
    for r0, r1, c0, c1 in unknown or ():
        b.alpha[r0:r1, c0:c1] = 1.0
        b.beta[r0:r1, c0:c1] = 1.0
        b.lam[r0:r1, c0:c1] = 1.0
    return b


def brute_distance_map(u_s, u_o, floor):
    H, W = u_s.shape
    certain = np.argwhere(u_s < floor)
    out = np.zeros((H, W))
    if len(certain) == 0:
        return out
    for i in range(H):
        for j in range(W):
            if u_s[i, j] < floor:
                continue
            d2 = min((i - a) ** 2 + (j - c) ** 2 for a, c in certain)
            out[i, j] = math.sqrt(d2) * u_o[i, j]
    return out


def segment_hits_rect(p0, p1, r0, r1, c0, c1):
    """Exact test: does the closed segment meet the closed rectangle? Returns entry parameter or None."""
    t_lo, t_hi = Fraction(0), Fraction(1)
    for a0, a1, lo, hi in ((p0[0], p1[0], r0, r1), (p0[1], p1[1], c0, c1)):
        d = a1 - a0
        if d == 0:
            if a0 < lo or a0 > hi:
                return None
            continue
        ta, tb = (lo - a0) / d, (hi - a0) / d
        if ta > tb:
            ta, tb = tb, ta
        t_lo, t_hi = max(t_lo, ta), min(t_hi, tb)
        if t_lo > t_hi:
            return None
    return t_lo


# -- scoring -------------------------------------------------------------------


def corridor(w=1, l=0.0, p=0.0, n=0, start=0):
    return VisibilityCorridor((0, start), w, l, tuple(range(n)), p, n)


def test_score_hand_substitution():
    assert score_corridor(corridor(3, 0.5, 0.4, 2)) == pytest.approx(19.1, abs=1e-12)
    assert score_corridor(corridor(1)) == 2.0
    assert score_corridor(corridor(2, 0.3, 0.1, 2)) - score_corridor(corridor(2, 0.3, 0.1, 1)) == pytest.approx(5.0, abs=1e-12)


@given(
    w=st.integers(1, 64),
    l=st.floats(0, 2),
    p=st.floats(0, 1),
    n=st.integers(0, 10),
    h=st.floats(1e-3, 1.0),
)
def test_score_affine_in_each_term(w, l, p, n, h):
    base = score_corridor(corridor(w, l, p, n))
    assert score_corridor(corridor(w + 1, l, p, n)) - base == pytest.approx(CFG.k1, abs=1e-9)
    assert (score_corridor(corridor(w, l + h, p, n)) - base) / h == pytest.approx(CFG.k2, rel=1e-6)
    assert (score_corridor(corridor(w, l, p + h, n)) - base) / h == pytest.approx(CFG.k3, rel=1e-6)
    assert score_corridor(corridor(w, l, p, n + 1)) - base == pytest.approx(CFG.k4, abs=1e-9)


# -- distance map and targets ---------------------------------------------------


def test_distance_map_trivial_cases():
    us = np.zeros((5, 5))
    np.testing.assert_array_equal(uncertainty_distance_map(us, np.ones((5, 5))), 0.0)
    us[2, 2] = 1.0
    uo = np.full((5, 5), 0.3)
    d = uncertainty_distance_map(us, uo)
    assert d[2, 2] == pytest.approx(0.3)
    assert np.count_nonzero(d) == 1
    with pytest.raises(ValueError):
        uncertainty_distance_map(us, np.ones((4, 4)))


def test_distance_map_block_matches_brute_force():
    us = np.zeros((9, 9))
    us[3:6, 3:6] = 0.8
    uo = np.linspace(0.1, 1.0, 81).reshape(9, 9)
    np.testing.assert_array_equal(uncertainty_distance_map(us, uo), brute_distance_map(us, uo, 0.1))


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_distance_map_oracle_equivalence(data):
    H = data.draw(st.integers(1, 32))
    W = data.draw(st.integers(1, 32))
    us = data.draw(arrays(np.float64, (H, W), elements=st.sampled_from([0.0, 0.05, 0.099, 0.1, 0.5, 1.0])))
    uo = data.draw(arrays(np.float64, (H, W), elements=st.floats(0, 1)))
    np.testing.assert_array_equal(uncertainty_distance_map(us, uo), brute_distance_map(us, uo, 0.1))


def test_targets_trivial_cases():
    assert select_target_locations(np.zeros((6, 6))) == []
    d = np.zeros((20, 20))
    d[5, 5], d[5, 8] = 3.0, 2.0
    assert select_target_locations(d, PushConfig(min_target_separation=5)) == [(5, 5)]


def brute_greedy(dmap, sep, k):
    H, W = dmap.shape
    chosen = []
    while len(chosen) < k:
        best = None
        for idx in range(H * W):
            i, j = divmod(idx, W)
            v = dmap[i, j]
            if v <= 0 or any((i - a) ** 2 + (j - c) ** 2 < sep * sep for a, c in chosen):
                continue
            if best is None or v > dmap[best]:
                best = (i, j)
        if best is None:
            break
        chosen.append(best)
    return chosen


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (12, 15), elements=st.one_of(st.just(0.0), st.floats(0, 10))))
def test_targets_match_greedy_oracle(dmap):
    cfg = PushConfig(min_target_separation=5)
    got = select_target_locations(dmap, cfg)
    assert got == brute_greedy(dmap, 5, 5)
    assert len(got) <= 5
    for a in range(len(got)):
        for c in range(a + 1, len(got)):
            assert math.dist(got[a], got[c]) >= 5


# -- visibility corridors --------------------------------------------------------

G20 = GridSpec(20, 30, 4, 0.01)
BOX_A = (5, 8, 8, 14, 2, 3)  # rows 5-7, cols 8-13
BOX_B = (11, 13, 12, 20, 4, 3)  # rows 11-12, cols 12-19


def test_corridor_unobstructed_target():
    b = known_belief(G20, [BOX_A])
    cors = visibility_corridors(b, (4, 25), PushConfig(n_c=64))
    assert len(cors) == 1 and cors[0].n_occ_obj == 0 and cors[0].width == 30
    assert select_occluder(cors) is None


def test_corridor_single_box_lists_it():
    b = known_belief(G20, [BOX_A])
    seg = segment_objects(b)
    sid = seg.labels[6, 10]
    cors = visibility_corridors(b, (15, 10), PushConfig(n_c=64), seg)
    assert {c.occluders for c in cors} == {(), (sid,)}
    assert any(c.occluders == (sid,) for c in cors)


def test_two_box_ray_table_matches_exact_enumeration():
    b = known_belief(G20, [BOX_A, BOX_B])
    seg = segment_objects(b)
    ids = {seg.labels[6, 10]: BOX_A, seg.labels[12, 15]: BOX_B}
    target = (17, 16)
    cfg = PushConfig(n_c=8)
    cors = visibility_corridors(b, target, cfg, seg)
    # exact ray table: which boxes each front ray crosses, front first
    table = []
    p0 = (Fraction(2 * target[0] + 1, 2), Fraction(2 * target[1] + 1, 2))
    for x in range(G20.W):
        p1 = (Fraction(0), Fraction(2 * x + 1, 2))
        hits = []
        for sid, (r0, r1, c0, c1, _, _) in ids.items():
            t = segment_hits_rect(p0, p1, r0, r1, c0, c1)
            if t is not None:
                hits.append((1 - t, sid))  # distance from the front end
        table.append(tuple(sid for _, sid in sorted(hits)))
    expected = []
    for x, occ in enumerate(table):
        if expected and expected[-1][1] == occ and expected[-1][2] < cfg.n_c:
            expected[-1][2] += 1
        else:
            expected.append([x, occ, 1])
    assert [(c.start[1], c.occluders, c.width) for c in cors] == [tuple(e) for e in expected]
    assert sum(c.width for c in cors) == G20.W
    assert all(c.width <= cfg.n_c for c in cors)
    assert any(len(c.occluders) == 2 for c in cors)
    # occluders are ordered by distance from the front: A (rows 5-7) before B (rows 11-12)
    a_id = seg.labels[6, 10]
    assert all(c.occluders[0] == a_id for c in cors if len(c.occluders) == 2)
    for c in cors:
        assert math.isfinite(c.score)
        assert c.score == pytest.approx(score_corridor(c, cfg))


def test_corridor_rejects_outside_target():
    with pytest.raises(ValueError):
        visibility_corridors(known_belief(G20, []), (20, 3))


def test_select_occluder_rules():
    assert select_occluder([]) is None
    assert select_occluder([corridor(4), corridor(2)]) is None
    c = corridor(3, 0.5, 0.2, 0)
    c.occluders, c.n_occ_obj = (7, 3), 2
    c.score = score_corridor(c)
    assert select_occluder([c]) == 7
    # equal scores: the wider corridor wins, then the lower start column
    a = VisibilityCorridor((0, 9), 3, 0.0, (1,), 0.0, 1, score=11.0)
    b = VisibilityCorridor((0, 2), 2, 0.0, (2,), 0.0, 1, score=11.0)
    assert select_occluder([b, a]) == 1
    c2 = VisibilityCorridor((0, 1), 3, 0.0, (4,), 0.0, 1, score=11.0)
    assert select_occluder([a, b, c2]) == 4


# -- pushing corridors ---------------------------------------------------------

G40 = GridSpec(40, 60, 10, 0.01)


def test_lone_object_all_sectors_valid():
    b = known_belief(G40, [(18, 23, 28, 33, 3, 6)])
    seg = segment_objects(b)
    ranked = pushing_corridor(b, 0, CFG, seg)
    assert len(ranked) == 12
    assert all(s.mean_occupancy == pytest.approx(ranked[0].mean_occupancy, abs=0.02) for s in ranked)
    assert [s.index for s in ranked] == [s.index for s in sorted(ranked, key=lambda s: (round(s.mean_occupancy, 12), -round(s.clearance, 12), s.index))]
    for s in ranked:
        assert s.span == pytest.approx(math.radians(30))
        assert np.linalg.norm(s.direction) == pytest.approx(1.0)


def test_object_near_wall_loses_wall_sectors():
    b = known_belief(G40, [(33, 38, 28, 33, 3, 6)])
    valid = {s.index for s in pushing_corridor(b, 0)}
    assert 3 not in valid  # +y runs into the back wall
    assert 9 in valid


def test_confident_neighbour_demotes_sector():
    b = known_belief(G40, [(18, 23, 28, 33, 3, 6), (16, 25, 36, 40, 5, 6)])
    seg = segment_objects(b)
    sid = seg.labels[20, 30]
    ranked = pushing_corridor(b, sid, CFG, seg)
    order = [s.index for s in ranked]
    assert 6 in order
    assert 0 not in order or order.index(0) > order.index(6)


def test_unknown_segment_raises():
    with pytest.raises(SegmentationError):
        pushing_corridor(known_belief(G40, []), 3)


def _crossed_cells(p0, p1, H, W):
    """Every cell whose closed square the segment meets (exact rational arithmetic)."""
    p0 = tuple(Fraction(v) for v in p0)
    p1 = tuple(Fraction(v) for v in p1)
    out = []
    for i in range(H):
        for j in range(W):
            if segment_hits_rect(p0, p1, i, i + 1, j, j + 1) is not None:
                out.append(i * W + j)
    return np.array(out, dtype=np.int64)


def brute_sectors(b, sid, cfg):
    seg = segment_objects(b, cfg.min_segment_cells)
    s = seg.get(sid)
    occ = footprint_occupancy(b)
    H, W = occ.shape
    own = own_region(seg.labels, sid, cfg.own_margin_cells, seg.hard, s.cls)
    blocked = (occ >= cfg.clearance_occ) & ~own
    reach = 3.0 * s.radius + cfg.sector_reach_cells
    rows = []
    for k in range(cfg.n_sectors):
        vals = []
        for phi in sector_ray_angles(k, cfg):
            u = unit_rc(phi)
            cells = _crossed_cells(s.centroid, s.centroid + reach * u, H, W)
            keep = [c for c in cells if not own.ravel()[c]]
            vals.extend(occ.ravel()[keep])
        lo, hi = sector_bounds(k, cfg)
        u = unit_rc(0.5 * (lo + hi))
        travel = push_travel_cells(s, u, cfg)
        free = wall = None
        shift = 1
        limit = int(math.ceil(travel + cfg.sector_reach_cells))
        while shift <= limit and (free is None or wall is None):
            hit_wall = s.centroid[0] + shift * u[0] < 0
            hit_obst = False
            for r, c in s.cells:
                rr = math.floor(r + 0.5 + shift * u[0])
                cc = math.floor(c + 0.5 + shift * u[1])
                if cc < 0 or cc >= W or rr >= H:
                    hit_wall = True
                elif rr >= 0 and blocked[rr, cc]:
                    hit_obst = True
            if hit_wall and wall is None:
                wall = shift - 1
            if (hit_wall or hit_obst) and free is None:
                free = shift - 1
            shift += 1
        free = limit if free is None else free
        wall = limit if wall is None else wall
        valid = wall >= travel and free >= travel
        rows.append((k, float(np.mean(vals)), free * b.grid.resolution, valid))
    ranked = [r for r in rows if r[3]]
    ranked.sort(key=lambda r: (round(r[1], 12), -round(r[2], 12), r[0]))
    return ranked


def test_three_object_ranking_matches_brute_force():
    b = known_belief(
        G40,
        [(17, 22, 26, 32, 3, 6), (14, 26, 35, 38, 5, 6), (26, 30, 20, 34, 7, 6)],
        unknown=[(30, 40, 0, 60)],
    )
    seg = segment_objects(b)
    sid = seg.labels[19, 28]
    got = pushing_corridor(b, sid, CFG, seg)
    want = brute_sectors(b, sid, CFG)
    assert [s.index for s in got] == [r[0] for r in want]
    for s, r in zip(got, want):
        assert s.mean_occupancy == pytest.approx(r[1], abs=1e-12)
        assert s.clearance == pytest.approx(r[2], abs=1e-12)


# -- candidates ------------------------------------------------------------------


def _sector(index, cfg=CFG):
    lo, hi = sector_bounds(index, cfg)
    return PushSector(index, lo, hi, 0.0, 1.0, True)


def test_push_ahead_starts_in_front_of_object():
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6)])
    seg = segment_objects(b)
    cs = sample_push_candidates(b, 0, _sector(3), CFG, np.random.default_rng(0), seg)
    assert len(cs.candidates) == CFG.n_p
    centroid_y = seg.get(0).centroid[0] * G40.resolution
    for c in cs.candidates:
        assert c.start[1] < centroid_y
        assert math.degrees(math.atan2(c.direction[1], c.direction[0])) == pytest.approx(90, abs=15 + 1e-9)
        assert c.length > 0
        i, j = G40.world_to_cell(*c.start)
        assert seg.labels[i, j] < 0


def test_candidates_deterministic_per_seed():
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6)])
    a = sample_push_candidates(b, 0, _sector(2), CFG, np.random.default_rng(5))
    c = sample_push_candidates(b, 0, _sector(2), CFG, np.random.default_rng(5))
    assert a.candidates == c.candidates


@settings(max_examples=20, deadline=None)
@given(sector=st.integers(0, 11), seed=st.integers(0, 10_000))
def test_directions_within_sector_span(sector, seed):
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6)])
    cfg = PushConfig(n_p=50, require_clearance=False)
    lo, hi = sector_bounds(sector, cfg)
    cs = sample_push_candidates(b, 0, _sector(sector, cfg), cfg, np.random.default_rng(seed))
    tol = math.radians(1.0)
    for c in cs.candidates:
        ang = math.atan2(c.direction[1], c.direction[0])
        mid = 0.5 * (lo + hi)
        off = (ang - mid + math.pi) % (2 * math.pi) - math.pi
        assert abs(off) <= 0.5 * (hi - lo) + tol
        assert math.hypot(*c.direction) == pytest.approx(1.0, abs=1e-12)


def test_boxed_in_object_gets_no_candidates():
    # the object fills the whole depth, so no start fits behind it for a push toward the back
    b = known_belief(G40, [(0, 40, 27, 33, 3, 6)])
    cs = sample_push_candidates(b, 0, _sector(3), CFG, np.random.default_rng(0))
    assert cs.candidates == [] and cs.diagnostic


# -- forward model ---------------------------------------------------------------


def _centroid(b, cls):
    return np.argwhere(b.hard_labels() == cls).mean(axis=0)


def test_zero_length_push_is_identity():
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6)])
    p = PushCandidate((0.3, 0.1), (1.0, 0.0), 0.0, 0)
    assert push_forward_belief(b, p) == b


@pytest.mark.parametrize("cells", [3, 2.5])
def test_forward_model_moves_centroid(cells):
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6)])
    p = PushCandidate((0.25, 0.19), (1.0, 0.0), cells * G40.resolution, 0)
    after = push_forward_belief(b, p)
    shift = _centroid(after, 3) - _centroid(b, 3)
    assert shift[1] == pytest.approx(cells, abs=0.5)
    assert shift[0] == pytest.approx(0.0, abs=0.5)


@settings(max_examples=30, deadline=None)
@given(ang=st.floats(0, 2 * math.pi), length=st.floats(0.005, 0.06), ret=st.floats(0, 1))
def test_forward_model_locality_and_mass(ang, length, ret):
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6), (5, 9, 5, 12, 4, 4)], unknown=[(30, 40, 40, 60)])
    seg = segment_objects(b)
    s = seg.get(seg.labels[18, 30])
    rim = free_rim(s, seg)
    p = PushCandidate((0.0, 0.0), (math.cos(ang), math.sin(ang)), length, s.id)
    upd = forward_update(b, p, s, ret, rim)
    after = upd.apply(b)
    changed = np.argwhere((after.alpha != b.alpha).any(axis=2) | (after.beta != b.beta).any(axis=2) | (after.lam != b.lam).any(axis=2))
    allowed = np.zeros((G40.H, G40.W), bool)
    allowed[upd.ii, upd.jj] = True
    assert allowed[changed[:, 0], changed[:, 1]].all()
    # the region the update may touch: the object, its rim, and their swept image
    moved = np.concatenate([s.cells, rim])
    reach = np.zeros_like(allowed)
    dr, dc = math.sin(ang) * length / G40.resolution, math.cos(ang) * length / G40.resolution
    for t in np.linspace(0, 1, 61):  # hits every k/n for n <= 6
        r = np.floor(moved[:, 0] + t * dr).astype(int)
        c = np.floor(moved[:, 1] + t * dc).astype(int)
        for rr in (r, r + 1):
            for cc in (c, c + 1):
                ok = (rr >= 0) & (rr < G40.H) & (cc >= 0) & (cc < G40.W)
                reach[rr[ok], cc[ok]] = True
    assert reach[upd.ii, upd.jj].all()
    # the other object is far away and untouched
    np.testing.assert_array_equal(after.lam[5:9, 5:12], b.lam[5:9, 5:12])
    # semantic mass: destinations hold exactly the moved evidence, vacated and swept cells keep a share
    W = G40.W
    keys = set((upd.ii * W + upd.jj).tolist())
    srcs = set((moved[:, 0] * W + moved[:, 1]).tolist())
    r, c = moved[:, 0] + dr, moved[:, 1] + dc
    dests = set()
    r0, c0 = np.floor(r), np.floor(c)
    for rr, wr in ((r0, 1 - (r - r0)), (r0 + 1, r - r0)):
        for cc, wc in ((c0, 1 - (c - c0)), (c0 + 1, c - c0)):
            hit = wr * wc > 0
            dests |= set((rr[hit] * W + cc[hit]).astype(int).tolist())
    dests &= keys
    excess = lambda bel, k: float(bel.lam.reshape(-1, bel.n_classes)[k].sum() - bel.n_classes)  # noqa: E731
    moved_mass = sum(excess(b, k) for k in srcs)
    assert sum(excess(after, k) for k in dests) == pytest.approx(moved_mass, rel=1e-9)
    for k in srcs - dests:
        assert excess(after, k) == pytest.approx(ret * excess(b, k), abs=1e-9)
    for k in keys - srcs - dests:
        assert excess(after, k) == pytest.approx(ret * excess(b, k), abs=1e-9)


# -- push VIG ----------------------------------------------------------------------

VCFG = ViewPlanningConfig(ActionBoxes.for_grid(G40, cam_size=(0.5, 0.2, 0.2)), camera=CameraModel(nx=24, ny=18), n_candidates=8)


def test_lone_push_reveals_nothing():
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6)])
    p = PushCandidate((0.25, 0.19), (1.0, 0.0), 0.03, 0)
    v_push, _ = push_vig(b, p, VCFG, seed=1)
    v_zero, _ = push_vig(b, PushCandidate((0.25, 0.19), (1.0, 0.0), 0.0, 0), VCFG, seed=1)
    assert v_push == pytest.approx(v_zero, rel=0.05, abs=1.0)
    assert push_vig(b, p, VCFG, seed=1) == push_vig(b, p, VCFG, seed=1)


def _walled():
    # a tall panel across the left half hides an unknown pocket behind it
    return known_belief(G40, [(8, 10, 0, 30, 11, 10)], unknown=[(10, 40, 0, 30)])


def test_clearing_a_wall_beats_viewing():
    b = _walled()
    seg = segment_objects(b)
    nbv = greedy_nbv(b, 8, np.random.default_rng(3), VCFG)
    p = PushCandidate((0.0, 0.09), (1.0, 0.0), 0.3, seg.labels[9, 10])
    v_push, _ = push_vig(b, p, VCFG, seed=3, seg=seg)
    assert v_push > nbv.vig


def test_informed_pipeline_targets_the_wall():
    b = _walled()
    seg = segment_objects(b)
    prop = propose_push(b, VCFG, CFG, np.random.default_rng(0), "informed", base=planning_maps(b, VCFG))
    assert prop.telemetry["occluders"] == [seg.labels[9, 10]]
    assert prop.best is not None and prop.best.target_object == seg.labels[9, 10]
    assert prop.best.predicted_vig == max(c.predicted_vig for c in prop.candidates)
    # the panel touches the left shelf wall, so no pusher fits behind it for a +x slide
    assert 0 not in prop.telemetry["sectors"][str(seg.labels[9, 10])]
    assert prop.best.predicted_vig > greedy_nbv(b, 8, np.random.default_rng(3), VCFG).vig


def test_sweep_mask_excludes_own_region():
    b = _walled()
    seg = segment_objects(b)
    s = seg.get(seg.labels[9, 10])
    blocked, own = sweep_blocked(footprint_occupancy(b), s, seg.labels, CFG, seg.hard)
    assert own[9, 10] and not blocked[own].any()


def test_rank_drops_invalid_sectors():
    secs = [PushSector(0, 0, 1, 0.2, 0.1, True), PushSector(1, 0, 1, 0.1, 0.1, False), PushSector(2, 0, 1, 0.2, 0.3, True)]
    assert [s.index for s in rank_sectors(secs)] == [2, 0]


def test_evaluate_sectors_count():
    b = known_belief(G40, [(16, 22, 27, 33, 3, 6)])
    seg = segment_objects(b)
    assert len(evaluate_sectors(footprint_occupancy(b), seg.get(0), seg.labels, CFG, 0.01, seg.hard)) == 12


def test_push_config_validation():
    with pytest.raises(ValueError):
        PushConfig(sector_angle_deg=35)
    with pytest.raises(ValueError):
        PushConfig(n_c=0)
    with pytest.raises(ValueError):
        PushConfig(swept_retention=2)
