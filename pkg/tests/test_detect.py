import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import box_iou, context_keep, nms_oracle
from scenewatch.detect import (ContextPrior, Detection, DetectionFormatError, contextual_filter,
                               detect_multiscale, format_exchange_line, load_external_detections,
                               merge_detections, multiscale_candidates, nms, parse_exchange_line,
                               read_exchange, write_exchange)

boxes = st.tuples(st.integers(0, 60), st.integers(0, 60), st.integers(1, 40), st.integers(1, 40))


def test_empty_mask():
    assert detect_multiscale(np.zeros((64, 64), bool), 3, 50) == []


def test_single_block_one_exact_detection():
    m = np.zeros((120, 160), bool)
    m[30:70, 50:90] = True
    dets = detect_multiscale(m, levels=3, min_area=50)
    assert len(dets) == 1
    assert dets[0].box == (50, 30, 40, 40)
    assert dets[0].score == 1.0 and dets[0].class_label == "object"
    # coarse levels did produce duplicates that NMS removed
    assert len(multiscale_candidates(m, 3, 50)) == 3


def test_small_and_large_block_multiscale():
    m = np.zeros((160, 200), bool)
    m[10:18, 10:18] = True
    m[60:124, 100:164] = True
    one = detect_multiscale(m, 1, 50)
    three = detect_multiscale(m, 3, 50)
    assert sorted(d.box for d in one) == [(10, 10, 8, 8), (100, 60, 64, 64)]
    assert sorted(d.box for d in three) == sorted(d.box for d in one)
    c1 = {(d.box, d.score) for d in multiscale_candidates(m, 1, 50)}
    c3 = {(d.box, d.score) for d in multiscale_candidates(m, 3, 50)}
    assert c1 <= c3


@settings(max_examples=40, deadline=None)
@given(st.lists(boxes, max_size=5), st.integers(1, 4))
def test_multiscale_monotone_and_in_bounds(rects, levels):
    m = np.zeros((80, 90), bool)
    for x, y, w, h in rects:
        m[y:y + h, x:x + w] = True
    c1 = {(d.box, d.score) for d in multiscale_candidates(m, 1, 20)}
    cl = multiscale_candidates(m, levels, 20)
    assert c1 <= {(d.box, d.score) for d in cl}
    for d in cl:
        x, y, w, h = d.box
        assert x >= 0 and y >= 0 and x + w <= 90 and y + h <= 80 and w >= 1 and h >= 1


def test_blob_score_rule():
    m = np.zeros((50, 50), bool)
    m[5:15, 5:15] = True
    (d,) = detect_multiscale(m, 1, 50)
    assert d.score == pytest.approx(min(1.0, 100 / 200))


def test_nms_examples():
    d = Detection(0, (1, 1, 5, 5), 0.3)
    assert nms([d]) == [d]
    a = Detection(0, (0, 0, 10, 10), 0.9)
    b = Detection(0, (0, 0, 10, 10), 0.8)
    assert nms([b, a], 0.5) == [a]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.1, 0.5, 0.5, 0.9]), boxes), max_size=20),
       st.sampled_from([0.0, 0.3, 0.5, 0.7]))
def test_nms_matches_oracle(items, thr):
    dets = [Detection(0, b, s) for s, b in items]
    got = nms(dets, thr)
    ref = [dets[k] for k in nms_oracle(items, thr)]
    assert got == ref
    for i, p in enumerate(got):
        for q in got[i + 1:]:
            assert box_iou(p.box, q.box) <= thr


def test_contextual_filter_examples():
    prior = ContextPrior(50, 0.5, (0.2, 5.0), 8)
    full = Detection(0, (0, 0, 320, 240), 1.0)
    assert contextual_filter([full], prior, (320, 240)) == []
    ok = Detection(0, (100, 100, 10, 10), 1.0)
    assert contextual_filter([ok], prior, (320, 240)) == [ok]
    edge = Detection(0, (2, 100, 10, 10), 1.0)
    (kept,) = contextual_filter([edge], prior, (320, 240))
    assert kept.border and kept.box == edge.box


def test_contextual_filter_matches_predicates():
    rng = np.random.default_rng(8)
    prior = ContextPrior(60, 0.3, (0.25, 4.0), 8)
    dets = []
    for _ in range(1000):
        w, h = (int(v) for v in rng.integers(1, 200, 2))
        x, y = (int(v) for v in rng.integers(0, 200, 2))
        dets.append(Detection(0, (x, y, w, h), 0.5))
    got = contextual_filter(dets, prior, (320, 240))
    ref = [d for d in dets if context_keep(d.box, 60, 0.3, 0.25, 4.0, 320, 240)]
    assert [d.box for d in got] == [d.box for d in ref]
    assert contextual_filter(got, prior, (320, 240)) == got


def test_exchange_line_mapping():
    d = parse_exchange_line("7,-1,10,20,30,40,0.9,person")
    assert (d.frame, d.track_id, d.box, d.score, d.class_label, d.source) == \
        (7, -1, (10, 20, 30, 40), 0.9, "person", "external")
    assert format_exchange_line(d) == "7,-1,10,20,30,40,0.9,person"


@pytest.mark.parametrize("line", [
    "7,-1,10,20,30,40,0.9",
    "7,-1,10,20,-30,40,0.9,person",
    "x,-1,10,20,30,40,0.9,person",
    "7,-1,10,20,30,40,1.5,person",
    "7,-1,10,20,30,40,0.9,two words",
])
def test_exchange_line_errors(line):
    with pytest.raises(DetectionFormatError):
        parse_exchange_line(line, 3)


def test_load_external_errors_carry_line_number(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("1,-1,0,0,5,5,0.5,car\n2,-1,0,0,5\n")
    with pytest.raises(DetectionFormatError, match="line 2"):
        load_external_detections(p)


def test_empty_file(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    assert load_external_detections(p) == {}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(-1, 9), boxes,
                          st.floats(0, 1, allow_nan=False), st.sampled_from(["car", "person", "dog"])),
                max_size=30))
def test_exchange_roundtrip(tmp_path_factory, rows):
    dets = [Detection(f, b, s, c, "external", track_id=i) for f, i, b, s, c in rows]
    p = tmp_path_factory.mktemp("ex") / "x.txt"
    write_exchange(p, dets)
    back = read_exchange(p)
    assert back == sorted(dets, key=lambda d: d.frame)
    grouped = load_external_detections(p)
    assert sum(len(v) for v in grouped.values()) == len(dets)


def test_merge_examples():
    blobs = [Detection(0, (10, 10, 20, 40), 0.8), Detection(0, (100, 50, 20, 20), 0.8)]
    assert merge_detections(blobs, []) == blobs
    ext = [Detection(0, (10, 10, 20, 40), 0.95, "person", "external")]
    out = merge_detections(blobs, ext)
    assert out == ext + [blobs[1]]


@settings(max_examples=60, deadline=None)
@given(st.lists(boxes, max_size=8), st.lists(boxes, max_size=5))
def test_merge_matches_rule_oracle(bb, eb):
    blobs = [Detection(0, b, 0.5) for b in bb]
    ext = [Detection(0, b, 0.9, "person", "external") for b in eb]
    prior = ContextPrior(20, 0.5, (0.2, 5.0), 8)
    got = merge_detections(blobs, ext, prior, (100, 100))
    ref = [e.box for e in ext] + [b.box for b in blobs
                                  if all(box_iou(b.box, e.box) <= 0.5 for e in ext)]
    ref = [b for b in ref if context_keep(b, 20, 0.5, 0.2, 5.0, 100, 100)]
    assert [d.box for d in got] == ref


def test_detection_validation():
    with pytest.raises(ValueError):
        Detection(0, (0, 0, 0, 5), 0.5)
    with pytest.raises(ValueError):
        Detection(0, (0, 0, 5, 5), 1.5)
