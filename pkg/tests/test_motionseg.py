import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from oracles import flood_fill_components, simulate_segmenter
from scenewatch.motionseg import (SegmenterParams, SegmenterState, activity_score,
                                  connected_components, flush, fuse_masks, morph_clean,
                                  segment_scores, segmenter_step)

masks = arrays(np.bool_, st.tuples(st.integers(1, 24), st.integers(1, 24)))


# ---------------------------------------------------------------- fusion

def test_fuse_identities(rng):
    m = rng.random((9, 7)) < 0.4
    empty = np.zeros_like(m)
    assert (fuse_masks(m, empty, "union") == m).all()
    assert not fuse_masks(m, empty, "intersection").any()
    assert (fuse_masks(m, ~m, "bg_only") == m).all()


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_fuse_matches_bitwise_loop(data):
    a = data.draw(masks)
    b = data.draw(arrays(np.bool_, a.shape))
    u = fuse_masks(a, b, "union")
    i = fuse_masks(a, b, "intersection")
    for y in range(a.shape[0]):
        for x in range(a.shape[1]):
            assert u[y, x] == (a[y, x] or b[y, x])
            assert i[y, x] == (a[y, x] and b[y, x])


def test_fuse_errors():
    with pytest.raises(ValueError):
        fuse_masks(np.zeros((2, 2), bool), np.zeros((2, 3), bool))
    with pytest.raises(ValueError):
        fuse_masks(np.zeros((2, 2), bool), np.zeros((2, 2), bool), "xor")


# ----------------------------------------------------------- morphology

def test_single_pixel_removed():
    m = np.zeros((9, 9), bool)
    m[4, 4] = True
    assert not morph_clean(m).any()


def test_solid_block_unchanged():
    m = np.zeros((30, 30), bool)
    m[10:20, 8:18] = True
    assert (morph_clean(m) == m).all()


def test_interior_hole_filled():
    m = np.zeros((20, 20), bool)
    m[5:15, 5:15] = True
    hole = m.copy()
    hole[9, 10] = False
    assert (morph_clean(hole) == m).all()


def test_closing_hand_trace_5x5():
    # a ring of ones around one false pixel: dilation fills it, erosion
    # keeps only the pixel whose 3x3 neighbourhood is now all set
    m = np.zeros((5, 5), bool)
    m[1:4, 1:4] = True
    m[2, 2] = False
    d = ndimage.binary_dilation(m, np.ones((3, 3)))
    closed = ndimage.binary_erosion(d, np.ones((3, 3)), border_value=0)
    expect = np.zeros((5, 5), bool)
    expect[1:4, 1:4] = True
    assert (closed == expect).all()


@settings(max_examples=60, deadline=None)
@given(masks)
def test_morph_clean_matches_scipy(m):
    sq = np.ones((3, 3), bool)
    o = ndimage.binary_dilation(ndimage.binary_erosion(m, sq, border_value=0), sq)
    c = ndimage.binary_erosion(ndimage.binary_dilation(o, sq), sq, border_value=0)
    assert (morph_clean(m) == c).all()


# ----------------------------------------------------------- components

def test_components_empty():
    assert connected_components(np.zeros((5, 5), bool)) == []


def test_two_blocks():
    m = np.zeros((20, 30), bool)
    m[2:7, 3:8] = True
    m[10:15, 20:25] = True
    blobs = connected_components(m)
    assert [b.area for b in blobs] == [25, 25]
    assert [b.box for b in blobs] == [(3, 2, 5, 5), (20, 10, 5, 5)]
    assert blobs[0].centroid == (5.0, 4.0)


def test_diagonal_pixels_are_connected():
    m = np.eye(4, dtype=bool)
    blobs = connected_components(m)
    assert len(blobs) == 1 and blobs[0].area == 4


@settings(max_examples=60, deadline=None)
@given(masks, st.integers(1, 6))
def test_components_match_flood_fill(m, min_area):
    got = [(b.box, b.area, b.centroid) for b in connected_components(m, min_area)]
    ref = flood_fill_components(m.tolist(), min_area)
    assert [(b, a) for b, a, _ in got] == [(b, a) for b, a, _ in ref]
    for (_, _, c1), (_, _, c2) in zip(got, ref):
        assert c1 == pytest.approx(c2, abs=1e-9)


def test_activity_score_examples():
    assert activity_score(np.zeros((240, 320), bool)) == 0.0
    assert activity_score(np.ones((240, 320), bool)) == 1.0
    m = np.zeros((240, 320), bool)
    m.ravel()[:768] = True
    assert activity_score(m) == pytest.approx(0.01)


# ------------------------------------------------------------ segmenter

P = SegmenterParams(t_on=0.005, t_off=0.002, n_on=3, n_off=30, pre_roll=15, post_roll=15)


def test_all_zero_scores_no_events():
    s = SegmenterState(P)
    for f in range(500):
        s, ev = segmenter_step(s, 0.0, f)
        assert ev is None
    assert flush(s, 499) is None


def test_single_burst_example():
    scores = [0.0] * 50 + [0.05] * 100 + [0.0] * 100
    # start fires at frame 52: 52 - 3 + 1 - 15 = 35
    # the 30th quiet frame is 179: 179 - 30 + 15 = 164
    assert segment_scores(scores, P) == [(35, 164)]
    assert segment_scores(scores, P) == simulate_segmenter(scores, 0.005, 0.002, 3, 30, 15, 15)


def test_hysteresis_holds_clip_open():
    s = SegmenterState(P)
    events = []
    for f in range(3):
        s, ev = segmenter_step(s, 0.05, f)
        events.append(ev)
    assert events[-1].kind == "clip_start"
    for f in range(3, 400):
        s, ev = segmenter_step(s, 0.003 if f % 2 else 0.0045, f)
        assert ev is None
    assert s.mode == "recording"


def test_flush_examples():
    s = SegmenterState(P)
    assert flush(s, 599) is None
    for f in range(3):
        s, _ = segmenter_step(s, 1.0, f)
    ev = flush(s, 599)
    assert ev.kind == "clip_end" and ev.frame == 599


def test_out_of_order_frame():
    s, _ = segmenter_step(SegmenterState(P), 0.0, 5)
    with pytest.raises(ValueError):
        segmenter_step(s, 0.0, 5)


def test_params_validation():
    with pytest.raises(ValueError):
        SegmenterParams(t_on=0.002, t_off=0.005)
    with pytest.raises(ValueError):
        SegmenterParams(n_on=0)


scores_st = st.lists(st.sampled_from([0.0, 0.001, 0.003, 0.006, 0.02, 0.1]), max_size=300)
seg_params = st.builds(
    lambda n_on, n_off, pre, post: SegmenterParams(0.005, 0.002, n_on, n_off, pre, min(post, n_off)),
    st.integers(1, 5), st.integers(1, 12), st.integers(0, 10), st.integers(0, 12))


@settings(max_examples=120, deadline=None)
@given(scores_st, seg_params)
def test_segmenter_matches_simulation_and_alternates(scores, p):
    state = SegmenterState(p)
    kinds, clips, start = [], [], None
    for f, s in enumerate(scores):
        state, ev = segmenter_step(state, s, f)
        if ev is not None:
            kinds.append(ev.kind)
            if ev.kind == "clip_start":
                start = ev.frame
            else:
                clips.append((start, ev.frame))
    ev = flush(state, len(scores) - 1)
    if ev is not None:
        kinds.append(ev.kind)
        clips.append((start, ev.frame))
        assert ev.frame >= start
    assert kinds == ["clip_start", "clip_end"] * (len(kinds) // 2)
    assert all(a <= b for a, b in clips)
    assert all(b1 < a2 for (_, b1), (a2, _) in zip(clips, clips[1:]))
    assert clips == simulate_segmenter(scores, p.t_on, p.t_off, p.n_on, p.n_off,
                                       p.pre_roll, p.post_roll)


@settings(max_examples=120, deadline=None)
@given(st.lists(st.floats(0, 0.05), max_size=300), st.floats(0.003, 0.02), st.floats(0, 0.03))
def test_raising_t_on_never_adds_clips(scores, t_on, bump):
    lo = SegmenterParams(t_on, 0.002, 3, 10, 5, 5)
    hi = SegmenterParams(t_on + bump, 0.002, 3, 10, 5, 5)
    assert len(segment_scores(scores, hi)) <= len(segment_scores(scores, lo))


def test_determinism():
    rng = np.random.default_rng(1)
    scores = list(rng.random(400) * 0.01)
    assert segment_scores(scores, P) == segment_scores(scores, P)
